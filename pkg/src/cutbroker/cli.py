"""Command-line client.

By default every command runs in this process; with ``--server URL`` the
same requests go to a running ``cutbroker serve`` instead.

Exit codes: 0 success, 2 configuration or input error, 3 runtime or job error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import BaseModel, ValidationError

from . import __version__
from .errors import ConfigError, CutBrokerError, is_input_error
from .harness.config import parse_config
from .harness.report import emit_report, parse_formats
from .harness.sweeps import SweepReport

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

log = logging.getLogger("cutbroker")


class RemoteError(CutBrokerError):
    def __init__(self, message, kind="runtime"):
        self.kind = kind
        super().__init__(message)


class LocalClient:
    def call(self, route: str, payload: dict):
        from .service import operations, schemas

        handlers = {
            "/simulate": (schemas.SimulateRequest, operations.simulate),
            "/cut-check": (schemas.CutCheckRequest, operations.cut_check),
            "/sweeps/integrity": (schemas.IntegrityRequest, operations.integrity),
            "/sweeps/confidentiality": (schemas.ConfidentialityRequest, operations.confidentiality),
        }
        model, handler = handlers[route]
        try:
            request = model.model_validate(payload)
        except ValidationError as exc:
            where = "; ".join(f"{'.'.join(map(str, e['loc']))}: {e['msg']}" for e in exc.errors())
            raise ConfigError(where) from None
        return handler(request)


class HttpClient:
    def __init__(self, base_url: str, timeout: float | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def call(self, route: str, payload: dict):
        import httpx

        try:
            resp = httpx.post(self.base_url + route, json=payload, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise RemoteError(f"cannot reach {self.base_url}: {exc}") from exc
        try:
            body = resp.json()
        except ValueError:
            body = {"error": resp.text, "kind": "runtime"}
        if resp.status_code != 200:
            if body.get("kind") == "config":
                raise ConfigError(body.get("error", "rejected by server"))
            raise RemoteError(body.get("error", f"server answered {resp.status_code}"))
        return body


def _client(args):
    return HttpClient(args.server) if args.server else LocalClient()


def _as_dict(result) -> dict:
    return result.model_dump(mode="json") if isinstance(result, BaseModel) else result


def _read_text(path, what):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror or exc}") from None


def _load_config_data(args) -> dict:
    text = _read_text(args.config, "config")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{args.config}: configuration must be a JSON object")
    if args.seed is not None:
        data["master_seed"] = args.seed
    # validate locally so config errors never need a server round trip
    return parse_config(data).model_dump(mode="json")


def _parse_cuts(text: str) -> list[tuple[int, int]]:
    cuts = []
    for item in text.split(","):
        wire, sep, pos = item.strip().partition(":")
        try:
            if not sep:
                raise ValueError
            cuts.append((int(wire), int(pos)))
        except ValueError:
            raise ConfigError(f"--cuts: expected wire:position pairs, got {item!r}") from None
    return cuts


def _finish_sweep(args, result) -> int:
    report = result if isinstance(result, SweepReport) else SweepReport.model_validate(result)
    written = emit_report(report, args.out, args.format)
    for r in report.records:
        print(f"{r.label}\thellinger={r.hellinger:.4f}\tmean={r.summary['mean']:.4f}")
    if report.tolerated_attackers is not None:
        print(f"tolerated_attackers={report.tolerated_attackers}")
    print(f"wrote {', '.join(sorted(written))} to {args.out}")
    return EXIT_OK


def cmd_run_integrity(args) -> int:
    config = _load_config_data(args)
    return _finish_sweep(args, _client(args).call("/sweeps/integrity", {"config": config}))


def cmd_run_confidentiality(args) -> int:
    config = _load_config_data(args)
    payload = {"config": config, "comparisons": args.compare}
    return _finish_sweep(args, _client(args).call("/sweeps/confidentiality", payload))


def cmd_cut_check(args) -> int:
    payload = {"qasm": _read_text(args.qasm, "QASM file"), "cuts": _parse_cuts(args.cuts)}
    if args.observable:
        payload["observable"] = args.observable
    result = _as_dict(_client(args).call("/cut-check", payload))
    print(json.dumps(result, indent=2))
    if result["within_tolerance"] is None:
        print("error: circuit too wide for an exact reference value", file=sys.stderr)
        return EXIT_RUNTIME
    if not result["within_tolerance"]:
        print(f"error: reconstruction differs from the exact value by more than "
              f"{result['tolerance']:g}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_simulate(args) -> int:
    payload = {
        "qasm": _read_text(args.qasm, "QASM file"),
        "shots": args.shots,
        "seed": args.seed,
        "noise": args.noise,
    }
    if args.observable:
        payload["observable"] = args.observable
    print(json.dumps(_as_dict(_client(args).call("/simulate", payload)), indent=2))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("cutbroker.service.app:app", host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def cmd_worker(args) -> int:
    from .adversary import TamperModel
    from .simulator import NoiseModel
    from .transport import SimulatedQpu, serve_worker

    qpu = SimulatedQpu(
        args.id,
        NoiseModel.default() if args.noise else None,
        malicious=args.malicious,
        tamper_model=TamperModel(rng=args.seed) if args.malicious else None,
    )
    print(f"worker {args.id} listening on {args.host}:{args.port}", flush=True)
    serve_worker(qpu, args.host, args.port)
    return EXIT_OK


def _formats(text):
    try:
        return parse_formats(text)
    except CutBrokerError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cutbroker", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def remote(p):
        p.add_argument("--server", metavar="URL", help="send the request to a running service")

    p = sub.add_parser("run-integrity", help="saboteur sweep against ground truth")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", type=_formats, default=("csv", "json", "svg"))
    remote(p)
    p.set_defaults(func=cmd_run_integrity)

    p = sub.add_parser("run-confidentiality", help="compare what QPUs observe across circuits")
    p.add_argument("--config", required=True)
    p.add_argument("--compare", nargs="+", required=True, metavar="CIRCUIT",
                   help="alt_benchmark, ghz:<n>, dj:<n> or a QASM file")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", type=_formats, default=("csv", "json", "svg"))
    remote(p)
    p.set_defaults(func=cmd_run_confidentiality)

    p = sub.add_parser("cut-check", help="fragment a QASM circuit and verify reconstruction")
    p.add_argument("--qasm", required=True)
    p.add_argument("--cuts", required=True, metavar="WIRE:POS,...")
    p.add_argument("--observable")
    remote(p)
    p.set_defaults(func=cmd_cut_check)

    p = sub.add_parser("simulate", help="sampled expectation and counts of a QASM circuit")
    p.add_argument("--qasm", required=True)
    p.add_argument("--shots", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", action="store_true")
    p.add_argument("--observable")
    remote(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("worker", help="run one simulated QPU speaking NDJSON over TCP")
    p.add_argument("--id", default="qpu0")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=9000)
    p.add_argument("--noise", action="store_true")
    p.add_argument("--malicious", action="store_true")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_worker)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, which matches the config exit code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RemoteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if exc.kind == "config" else EXIT_RUNTIME
    except CutBrokerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if is_input_error(exc) else EXIT_RUNTIME
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
