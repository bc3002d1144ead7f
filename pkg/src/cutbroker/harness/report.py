"""Writing sweep reports: JSON, CSV and per-point SVG histograms.

``report.json`` holds everything except wall-clock times, so two runs with
the same configuration and seed produce identical bytes. Times go to
``timing.json`` and the ``runtime_ms`` CSV column.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from xml.sax.saxutils import escape

from ..errors import InvalidArgument, ReportError
from .sweeps import SweepReport

FORMATS = ("json", "csv", "svg")
CSV_COLUMNS = ("point", "label", "hellinger", "mean", "std", "runtime_ms")

_TIMING_FIELDS = {"runtime_s": True, "records": {"__all__": {"runtime_ms"}}}


def parse_formats(text) -> tuple[str, ...]:
    items = text.split(",") if isinstance(text, str) else list(text)
    out = tuple(dict.fromkeys(f.strip().lower() for f in items if f.strip()))
    bad = [f for f in out if f not in FORMATS]
    if bad or not out:
        raise InvalidArgument(f"unknown report format(s) {bad or text!r}; choose from {','.join(FORMATS)}")
    return out


def report_json(report: SweepReport) -> str:
    data = report.model_dump(mode="json", exclude=_TIMING_FIELDS)
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def timing_json(report: SweepReport) -> str:
    data = {
        "runtime_s": report.runtime_s,
        "points": {str(r.point): r.runtime_ms for r in report.records},
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def sweep_csv(report: SweepReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in report.records:
        writer.writerow([r.point, r.label, repr(r.hellinger), repr(r.summary["mean"]),
                         repr(r.summary["std"]), f"{r.runtime_ms:.3f}"])
    return buf.getvalue()


def histogram_svg(record, width=480, height=240) -> str:
    """Bar chart of one point's distribution (filled) against the reference (outlined)."""
    hist = record.histogram
    probs = hist["probs"]
    ref = hist.get("reference", [0.0] * len(probs))
    n = len(probs)
    pad = 30
    plot_w, plot_h = width - 2 * pad, height - 2 * pad
    top = max(max(probs), max(ref), 1e-12)
    bar = plot_w / n
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<title>{escape(record.label)}: hellinger {record.hellinger:.4f}</title>',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    for i, (p, r) in enumerate(zip(probs, ref)):
        x = pad + i * bar
        h = plot_h * p / top
        parts.append(f'<rect x="{x:.2f}" y="{pad + plot_h - h:.2f}" width="{bar:.2f}" '
                     f'height="{h:.2f}" fill="#4a7ab5"/>')
        hr = plot_h * r / top
        parts.append(f'<rect x="{x:.2f}" y="{pad + plot_h - hr:.2f}" width="{bar:.2f}" '
                     f'height="{hr:.2f}" fill="none" stroke="#c0392b" stroke-width="1"/>')
    parts.append(f'<line x1="{pad}" y1="{pad + plot_h}" x2="{pad + plot_w}" y2="{pad + plot_h}" '
                 f'stroke="black"/>')
    if "edges" in hist:
        lo, hi = hist["edges"][0], hist["edges"][-1]
        parts.append(f'<text x="{pad}" y="{height - 8}" font-size="11">{lo:.3f}</text>')
        parts.append(f'<text x="{pad + plot_w}" y="{height - 8}" font-size="11" '
                     f'text-anchor="end">{hi:.3f}</text>')
    else:
        for i, label in enumerate(hist["labels"]):
            parts.append(f'<text x="{pad + (i + 0.5) * bar:.2f}" y="{height - 8}" font-size="11" '
                         f'text-anchor="middle">{escape(label)}</text>')
    parts.append(f'<text x="{pad}" y="18" font-size="12">{escape(record.label)} '
                 f'(H = {record.hellinger:.4f})</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text)
    except OSError as exc:
        raise ReportError(path, exc.strerror or str(exc)) from exc


def emit_report(report: SweepReport, out_dir, formats=FORMATS) -> dict:
    """Write the requested files into ``out_dir``; returns ``{file name: path}``."""
    formats = parse_formats(formats)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ReportError(out, exc.strerror or str(exc)) from exc
    files = {}
    if "json" in formats:
        files["report.json"] = report_json(report)
        files["timing.json"] = timing_json(report)
    if "csv" in formats:
        files["sweep.csv"] = sweep_csv(report)
    if "svg" in formats:
        for r in report.records:
            files[f"hist_{r.point}.svg"] = histogram_svg(r)
    written = {}
    for name, text in files.items():
        _write(out / name, text)
        written[name] = out / name
    return written


def load_report(path) -> SweepReport:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ReportError(path, exc.strerror or str(exc)) from exc
    return SweepReport.model_validate_json(text)
