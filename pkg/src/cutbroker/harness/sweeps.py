"""The integrity and confidentiality sweeps."""

from __future__ import annotations

import hashlib
import logging
import time
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from ..adversary import observe
from ..broker import DecoyBank, build_executors, run_job, score_integrity
from ..circuits import build_probe, emit_qasm
from ..errors import ConfigError
from ..metrics import bin_pair, categorical_pair, hellinger, summarize, tolerated_attackers
from ..rng import derive_seed
from ..transport import InProcessTransport, SocketTransport, serve_worker
from .config import CircuitSpec, ExperimentConfig

log = logging.getLogger(__name__)


class PointRecord(BaseModel):
    point: int
    label: str
    hellinger: float
    summary: dict[str, float]
    # distribution of this point next to the reference it was compared with
    histogram: dict
    samples: int
    integrity_scores: dict[str, float] | None = None
    probabilities: dict[str, float] | None = None
    uniform_fallback: bool = False
    out_of_range: int = 0
    tamper_calls: dict[str, int] | None = None
    runtime_ms: float = 0.0  # wall clock; kept out of report.json


class SweepReport(BaseModel):
    kind: Literal["integrity", "confidentiality"]
    config: ExperimentConfig
    reference: str
    records: list[PointRecord]
    tolerated_attackers: int | None = None
    digests: dict[str, str] = Field(default_factory=dict)
    runtime_s: float = 0.0

    def distances(self) -> dict:
        return {r.point: r.hellinger for r in self.records}

    def by_label(self) -> dict:
        return {r.label: r.hellinger for r in self.records}


def _parity_counts(values) -> dict:
    # each value <O> splits one unit of probability between the +1 and -1 outcomes
    v = np.clip(np.asarray(values, dtype=float), -1.0, 1.0)
    return {"+1": float(np.sum((1 + v) / 2)), "-1": float(np.sum((1 - v) / 2))}


def compare(reference, sample, config: ExperimentConfig):
    """Hellinger distance between two value sets plus the histograms behind it."""
    if config.distribution == "categorical":
        p, q = categorical_pair(_parity_counts(reference), _parity_counts(sample))
    else:
        p, q = bin_pair(reference, sample, bins=config.bins)
    histogram = q.to_dict()
    histogram["reference"] = list(p.probs)
    return hellinger(p, q), histogram


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def _default_transport(profiles, config):
    if config.transport == "socket":
        return socket_transport_factory(profiles, config)
    return InProcessTransport(build_executors(profiles, config.master_seed,
                                              tamper_probes=config.tamper_probes))


def _integrity_point(circuit, config, saboteurs, probes, transport_factory):
    seed = config.master_seed
    profiles = config.profiles(saboteurs)
    transport = transport_factory(profiles, config)
    try:
        # scores are measured once per point and reused for every evaluation
        profiles = [p.with_integrity(score_integrity(p.id, probes, transport, config.shots, seed))
                    for p in profiles]
        policy = config.policy.build()
        fakes = config.fakes.build()
        bank = DecoyBank(fakes, seed, "integrity") if fakes.active else None
        values, fallback, out_of_range = [], False, 0
        result = None
        for e in range(config.evaluations):
            result = run_job(circuit, profiles, policy, fakes, config.shots, seed,
                             transport=transport, job_key=("eval", e), decoys=bank)
            values.append(result.value)
            fallback |= result.uniform_fallback
            out_of_range += result.out_of_range
    finally:
        transport.close()
    return values, {
        "integrity_scores": {p.id: p.integrity_score for p in profiles},
        "probabilities": result.probabilities,
        "uniform_fallback": fallback,
        "out_of_range": out_of_range,
        "tamper_calls": dict(sorted(result.tamper_calls.items())) or None,
    }


def run_integrity_sweep(config: ExperimentConfig, *, transport_factory=None) -> SweepReport:
    """Ground truth with every QPU honest, then one point per saboteur count.

    Saboteurs are the first ``s`` QPU ids in sorted order. Every point reuses
    the same master seed, so honest work items see identical shot noise and
    the ``s = 0`` point reproduces the ground truth exactly.
    """
    transport_factory = transport_factory or _default_transport
    started = time.perf_counter()
    circuit = config.circuit.build()
    probes = [build_probe(derive_seed(config.master_seed, "probe", i)) for i in range(config.probes)]

    t0 = time.perf_counter()
    truth, truth_extra = _integrity_point(circuit, config, 0, probes, transport_factory)
    truth_ms = (time.perf_counter() - t0) * 1000
    records = []
    for s in config.saboteurs:
        t0 = time.perf_counter()
        if s == 0:
            values, extra = truth, truth_extra
        else:
            values, extra = _integrity_point(circuit, config, s, probes, transport_factory)
        elapsed = truth_ms if s == 0 else (time.perf_counter() - t0) * 1000
        h, histogram = compare(truth, values, config)
        records.append(PointRecord(
            point=s, label=f"saboteurs={s}", hellinger=h, summary=summarize(values),
            histogram=histogram, samples=len(values),
            runtime_ms=elapsed, **extra,
        ))
        log.info("integrity s=%d hellinger=%.4f", s, h)

    tolerated = None
    if config.saboteurs.start == 0:
        tolerated = tolerated_attackers({r.point: r.hellinger for r in records}, config.threshold)
    return SweepReport(
        kind="integrity",
        config=config,
        reference=config.circuit.label,
        records=records,
        tolerated_attackers=tolerated,
        digests={"config": config.digest(), "circuit": _digest(emit_qasm(circuit))},
        runtime_s=time.perf_counter() - started,
    )


def observation_pool(circuit, config: ExperimentConfig, *, transport_factory=None) -> np.ndarray:
    """Everything the (honest but curious) QPUs saw over ``evaluations`` jobs, pooled."""
    transport_factory = transport_factory or _default_transport
    seed = config.master_seed
    profiles = config.profiles(0)
    fakes = config.fakes.build()
    bank = DecoyBank(fakes, seed, "confidentiality") if fakes.active else None
    transport = transport_factory(profiles, config)
    policy = config.policy.build()
    pooled = []
    try:
        for e in range(config.evaluations):
            result = run_job(circuit, profiles, policy, fakes, config.shots, seed,
                             transport=transport, job_key=("observe", e), decoys=bank)
            for qid in sorted(result.dispatch_log):
                pooled.extend(observe(qid, result.dispatch_log[qid]).samples)
    finally:
        transport.close()
    return np.asarray(pooled)


def run_confidentiality_sweep(config: ExperimentConfig, comparisons=None, *,
                              transport_factory=None) -> SweepReport:
    """Distance between what QPUs observe for the reference circuit and for each comparison."""
    comparisons = list(config.comparisons if comparisons is None else comparisons)
    comparisons = [c if isinstance(c, CircuitSpec) else CircuitSpec.parse(c) for c in comparisons]
    if not comparisons:
        raise ConfigError("comparisons: need at least one comparison circuit")
    config = config.model_copy(update={"comparisons": comparisons})
    started = time.perf_counter()
    reference = config.circuit.build()
    ref_pool = observation_pool(reference, config, transport_factory=transport_factory)
    digests = {"config": config.digest(), "circuit": _digest(emit_qasm(reference))}
    records = []
    for i, spec in enumerate(comparisons):
        t0 = time.perf_counter()
        circuit = spec.build()
        pool = observation_pool(circuit, config, transport_factory=transport_factory)
        h, histogram = compare(ref_pool, pool, config)
        records.append(PointRecord(
            point=i, label=spec.label, hellinger=h, summary=summarize(pool),
            histogram=histogram, samples=len(pool),
            runtime_ms=(time.perf_counter() - t0) * 1000,
        ))
        digests[f"comparison:{spec.label}"] = _digest(emit_qasm(circuit))
        log.info("confidentiality %s hellinger=%.4f", spec.label, h)
    return SweepReport(
        kind="confidentiality",
        config=config,
        reference=config.circuit.label,
        records=records,
        digests=digests,
        runtime_s=time.perf_counter() - started,
    )


class _LocalWorkers:
    """A SocketTransport whose workers live in this process; closing stops them."""

    def __init__(self, executors, timeout):
        self.servers = [serve_worker(q, port=0, background=True) for q in executors]
        self.transport = SocketTransport(
            {q.qpu_id: s.server_address for q, s in zip(executors, self.servers)}, timeout)
        self.qpus = {q.qpu_id: q for q in executors}

    def run(self, qpu_id, requests):
        return self.transport.run(qpu_id, requests)

    def close(self):
        self.transport.close()
        for s in self.servers:
            s.shutdown()
            s.server_close()


def socket_transport_factory(profiles, config, timeout=30.0):
    """Run every QPU as a local NDJSON worker and talk to it over TCP."""
    executors = build_executors(profiles, config.master_seed, tamper_probes=config.tamper_probes)
    return _LocalWorkers(executors, timeout)
