"""The trusted scheduler.

It scores QPUs with probe circuits, spreads fragment variants over them
according to an allocation policy (optionally replicated), mixes in decoy
circuits, and recombines the reported values into the uncut expectation.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .adversary import TamperModel
from .circuits import Circuit, Observable, RY, emit_qasm, random_circuit
from .cutting import cut, fragment_variants, is_out_of_range, reconstruct
from .errors import (CalibrationError, DegenerateScoresError, InvalidArgument,
                     JobError)
from .rng import derive_seed, stream
from .simulator import NoiseModel, exact_expectation, state_expectation, statevector
from .transport import EvalRequest, InProcessTransport, SimulatedQpu

log = logging.getLogger(__name__)

MAX_SCORE = 10.0
POLICY_KINDS = ("uniform", "proportional", "exponential", "profile1", "profile2", "profile3")
FAKE_MODES = ("none", "random", "calibrated")
STANDARD_REPLICATION = (1, 2, 3)
STANDARD_MULTIPLIERS = (0, 2, 5, 10)
CALIBRATION_WIDENING = 0.10
# calibration targets stay this far inside [-1, 1]; exactly +-1 needs an eigenstate
CALIBRATION_EDGE = 1e-4
# candidate decoy rotation angles are drawn log-uniformly from this range
CALIBRATION_SCALES = (1e-3, math.pi)
MAX_CALIBRATION_CANDIDATES = 500
# calibrated decoys avoid H so small-angle candidates stay near a basis state
_CALIBRATION_KINDS = ("X", "RX", "RY", "RZ")


@dataclass(frozen=True)
class QpuProfile:
    id: str
    behavior: str = "honest"
    noise: NoiseModel | None = None
    integrity_score: float = MAX_SCORE
    confidentiality_score: float = MAX_SCORE

    def __post_init__(self):
        if self.behavior not in ("honest", "malicious"):
            raise InvalidArgument(f"unknown behaviour {self.behavior!r}")
        for name in ("integrity_score", "confidentiality_score"):
            v = getattr(self, name)
            if not 0 <= v <= MAX_SCORE:
                raise InvalidArgument(f"{name} of {self.id} must lie in [0, 10], got {v}")

    @property
    def malicious(self) -> bool:
        return self.behavior == "malicious"

    def with_integrity(self, score: float) -> QpuProfile:
        return QpuProfile(self.id, self.behavior, self.noise, score, self.confidentiality_score)


@dataclass(frozen=True)
class AllocationPolicy:
    kind: str = "uniform"
    replication: int = 1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise InvalidArgument(f"unknown allocation policy {self.kind!r}")
        if int(self.replication) < 1:
            raise InvalidArgument("replication must be >= 1")

    @property
    def standard(self) -> bool:
        return self.replication in STANDARD_REPLICATION


@dataclass(frozen=True)
class FakePolicy:
    mode: str = "none"
    multiplier: int = 0

    def __post_init__(self):
        if self.mode not in FAKE_MODES:
            raise InvalidArgument(f"unknown fake mode {self.mode!r}")
        if int(self.multiplier) < 0:
            raise InvalidArgument("fake multiplier must be nonnegative")

    @property
    def active(self) -> bool:
        return self.mode != "none" and self.multiplier > 0

    @property
    def standard(self) -> bool:
        return self.multiplier in STANDARD_MULTIPLIERS


# ---------------------------------------------------------------- integrity


def probe_score(expected: float, actual: float) -> float:
    """Score one probe: 10 for an exact answer, 0 at 100% relative error or worse."""
    if expected == 0:
        raise InvalidArgument("probe expectation must be nonzero")
    return max(0.0, MAX_SCORE - abs(expected - actual) / abs(expected) * MAX_SCORE)


def integrity_from_results(expected, actual) -> float:
    if len(expected) == 0:
        raise InvalidArgument("integrity scoring needs at least one probe")
    return float(np.mean([probe_score(e, a) for e, a in zip(expected, actual, strict=True)]))


def score_integrity(qpu_id: str, probes, transport, shots: int = 1000, seed: int = 0) -> float:
    """Run ``probes`` (pairs of circuit and known expectation) on one QPU."""
    probes = list(probes)
    if not probes:
        raise InvalidArgument("integrity scoring needs at least one probe")
    requests = [
        EvalRequest(f"probe-{qpu_id}-{i}", c, shots, derive_seed(seed, "probe-shots", qpu_id, i), probe=True)
        for i, (c, _) in enumerate(probes)
    ]
    actual = transport.run(qpu_id, requests)
    return integrity_from_results([e for _, e in probes], actual)


# ---------------------------------------------------------------- allocation


def _softmax(x):
    z = np.exp(x - x.max())
    return z / z.sum()


def allocation_probabilities(qpus, policy: AllocationPolicy) -> np.ndarray:
    if not qpus:
        raise InvalidArgument("need at least one QPU")
    IS = np.array([q.integrity_score for q in qpus], dtype=float)
    CS = np.array([q.confidentiality_score for q in qpus], dtype=float)
    kind = policy.kind
    if kind == "uniform":
        return np.full(len(qpus), 1.0 / len(qpus))
    if kind == "exponential":
        return _softmax(IS)
    if kind == "profile3":
        return _softmax(2 * IS + CS)
    weights = {"proportional": IS, "profile1": 2 * CS + IS, "profile2": CS + IS}[kind]
    total = weights.sum()
    if total <= 0:
        raise DegenerateScoresError(f"{kind} allocation: every QPU has weight 0")
    return weights / total


def resolve_probabilities(qpus, policy) -> tuple[np.ndarray, bool]:
    """Allocation vector, falling back to uniform when every weight is zero."""
    try:
        return allocation_probabilities(qpus, policy), False
    except DegenerateScoresError as exc:
        log.warning("%s; allocating uniformly instead", exc)
        return np.full(len(qpus), 1.0 / len(qpus)), True


def _pick(weights, rng):
    total = weights.sum()
    if total <= 0:
        # only zero-weight QPUs remain; choose among them evenly
        candidates = np.flatnonzero(weights == 0)
        return int(candidates[int(rng.integers(len(candidates)))])
    cdf = np.cumsum(weights / total)
    return min(int(np.searchsorted(cdf, rng.random(), side="right")), len(weights) - 1)


def assign(variant_keys, qpus, policy: AllocationPolicy, rng, *, probabilities=None) -> dict:
    """Choose ``policy.replication`` distinct QPUs for every variant."""
    r = int(policy.replication)
    if r > len(qpus):
        raise InvalidArgument(f"replication {r} exceeds the {len(qpus)} available QPUs")
    p = resolve_probabilities(qpus, policy)[0] if probabilities is None else np.asarray(probabilities)
    ids = [q.id for q in qpus]
    out = {}
    for key in variant_keys:
        weights = p.copy()
        taken = np.zeros(len(ids), dtype=bool)
        chosen = []
        for _ in range(r):
            masked = np.where(taken, -1.0, weights)
            if (masked > 0).any():
                idx = _pick(np.clip(masked, 0, None), rng)
            else:
                free = np.flatnonzero(~taken)
                idx = int(free[int(rng.integers(len(free)))])
            taken[idx] = True
            chosen.append(ids[idx])
        out[key] = tuple(chosen)
    return out


def aggregate_replicas(results) -> float:
    """Integrity-weighted mean of ``(value, IS)`` pairs."""
    results = list(results)
    if not results:
        raise InvalidArgument("nothing to aggregate")
    values = np.array([v for v, _ in results], dtype=float)
    weights = np.array([w for _, w in results], dtype=float)
    if len(results) == 1:
        return float(values[0])
    if weights.sum() <= 0:
        log.warning("all replicas scored 0; using the unweighted mean")
        return float(values.mean())
    return float(weights @ values / weights.sum())


# ---------------------------------------------------------------- decoys


@lru_cache(maxsize=4096)
def predicted_expectation(circuit: Circuit) -> float:
    return exact_expectation(circuit)


def calibration_range(predictions) -> tuple[float, float]:
    """Observed span of real predictions, widened by 10% and kept inside [-1, 1]."""
    lo, hi = float(min(predictions)), float(max(predictions))
    pad = CALIBRATION_WIDENING * (hi - lo) / 2
    edge = 1.0 - CALIBRATION_EDGE
    return max(-edge, min(lo - pad, edge)), min(edge, max(hi + pad, -edge))


def _measured_wire(observable: Observable) -> tuple[int, Observable]:
    support = observable.support
    if support:
        return support[0], observable
    paulis = "Z" + observable.paulis[1:]
    return 0, Observable(paulis)


def _calibrated_fake(template: Circuit, target: float, rng) -> Circuit:
    q, obs = _measured_wire(template.observable)
    x_obs = obs.paulis[:q] + "X" + obs.paulis[q + 1:]
    body = max(1, len(template.gates) - 1)
    for _ in range(MAX_CALIBRATION_CANDIDATES):
        scale = math.exp(rng.uniform(*np.log(CALIBRATION_SCALES)))
        cand = random_circuit(template.qubit_count, body, rng, angle_scale=scale,
                              one_qubit_kinds=_CALIBRATION_KINDS)
        psi = statevector(cand)
        # appending RY(phi) on q turns <Z_q ...> into a cos(phi) + b sin(phi)
        a = state_expectation(psi, obs.paulis)
        b = -state_expectation(psi, x_obs)
        reach = math.hypot(a, b)
        if reach < abs(target) or reach == 0:
            continue
        phi = math.atan2(b, a) + float(rng.choice((-1.0, 1.0))) * math.acos(
            max(-1.0, min(1.0, target / reach)))
        fake = Circuit(cand.qubit_count, cand.gates + (RY(phi, q),), observable=obs)
        if abs(exact_expectation(fake) - target) < 1e-9:
            return fake
    raise CalibrationError(
        f"no decoy reached target {target:.4f} after {MAX_CALIBRATION_CANDIDATES} candidates"
    )


def generate_fakes(real_circuits, fake_policy: FakePolicy, rng, *, value_range=None) -> list[Circuit]:
    """``m`` decoys per real circuit, each with its real circuit's width,
    gate count and observable; returned grouped in input order.

    Calibrated decoys are tuned so their noiseless expectations spread
    uniformly over ``value_range`` (default: the widened span of the real
    circuits' own predictions). Targets are stratified: each is marginally
    uniform, and together they cover the range evenly.
    """
    real_circuits = list(real_circuits)
    if not fake_policy.active or not real_circuits:
        return []
    m = fake_policy.multiplier
    count = m * len(real_circuits)
    if fake_policy.mode == "random":
        return [random_circuit(t.qubit_count, len(t.gates), rng).with_observable(t.observable)
                for t in real_circuits for _ in range(m)]
    if value_range is None:
        value_range = calibration_range([predicted_expectation(c) for c in real_circuits])
    lo, hi = value_range
    targets = lo + (rng.permutation(count) + rng.random(count)) / count * (hi - lo)
    return [_calibrated_fake(t, float(targets[i * m + j]), rng)
            for i, t in enumerate(real_circuits) for j in range(m)]


class DecoyBank:
    """Decoys generated once per set of real sub-circuits and reused across jobs.

    Real variants repeat in every evaluation of a circuit, so their decoys
    repeat with them; each dispatch still gets fresh shot seeds.
    """

    def __init__(self, fake_policy: FakePolicy, seed: int, *path):
        self.fake_policy = fake_policy
        self.seed = seed
        self.path = path
        self._sets = {}

    def prepare(self, real_circuits, value_range=None) -> dict:
        """Decoys for every circuit in ``real_circuits``, keyed by fingerprint."""
        real_circuits = list(real_circuits)
        prints = tuple(fingerprint(c) for c in real_circuits)
        key = (prints, value_range)
        if key not in self._sets:
            digest = hashlib.sha256("".join(prints).encode()).hexdigest()[:16]
            rng = stream(self.seed, *self.path, "decoys", digest)
            fakes = generate_fakes(real_circuits, self.fake_policy, rng, value_range=value_range)
            m = self.fake_policy.multiplier
            self._sets[key] = {p: fakes[i * m:(i + 1) * m] for i, p in enumerate(prints)}
        return self._sets[key]

    def __len__(self):
        return sum(len(v) for d in self._sets.values() for v in d.values())


# ---------------------------------------------------------------- jobs


@dataclass(frozen=True)
class DispatchRecord:
    fingerprint: str
    value: float
    is_fake: bool  # broker-side knowledge only


@dataclass(frozen=True)
class VariantOutcome:
    qpus: tuple[str, ...]
    raw: tuple[float, ...]
    aggregated: float


@dataclass
class JobResult:
    value: float
    out_of_range: bool
    per_variant: dict
    dispatch_log: dict
    probabilities: dict
    uniform_fallback: bool = False
    tamper_calls: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@lru_cache(maxsize=65536)
def fingerprint(circuit: Circuit) -> str:
    digest = hashlib.sha256((emit_qasm(circuit) + circuit.observable.paulis).encode())
    return digest.hexdigest()[:16]


def build_executors(qpus, seed: int, *, tamper_probes: bool = True) -> list[SimulatedQpu]:
    """Simulated QPUs for ``qpus``; each saboteur draws from its own stream."""
    return [
        SimulatedQpu(
            q.id, q.noise, malicious=q.malicious, tamper_probes=tamper_probes,
            tamper_model=TamperModel(rng=stream(seed, "tamper", q.id)) if q.malicious else None,
        )
        for q in qpus
    ]


def run_job(circuit: Circuit, qpus, policy: AllocationPolicy, fake_policy: FakePolicy | None = None,
            shots: int = 1000, seed: int = 0, *, transport=None, job_key=("job",),
            decoys: DecoyBank | None = None) -> JobResult:
    """Cut, dispatch, collect and reconstruct one evaluation of ``circuit``.

    Shot seeds depend only on ``(seed, job_key, variant, replica slot)``, so
    whichever honest QPU runs a work item reports the same number.
    """
    fake_policy = fake_policy or FakePolicy()
    qpus = list(qpus)
    if transport is None:
        transport = InProcessTransport(build_executors(qpus, seed))
    job_key = tuple(job_key)
    fset = cut(circuit)
    variants = fragment_variants(fset)
    probs, fallback = resolve_probabilities(qpus, policy)
    assignment = assign([v.key for v in variants], qpus, policy,
                        stream(seed, *job_key, "assign"), probabilities=probs)

    queues = {q.id: [] for q in qpus}
    for v in variants:
        for slot, qid in enumerate(assignment[v.key]):
            s = derive_seed(seed, *job_key, "shots", v.key, slot)
            queues[qid].append((v.circuit, s, v.key))

    if fake_policy.active:
        value_range = None
        if fake_policy.mode == "calibrated":
            value_range = calibration_range([predicted_expectation(v.circuit) for v in variants])
        prepared = decoys.prepare([v.circuit for v in variants], value_range) if decoys is not None else None
        for qid in sorted(queues):
            reals = [c for c, _, _ in queues[qid]]
            if prepared is not None:
                fakes = [f for c in reals for f in prepared[fingerprint(c)]]
            else:
                fakes = generate_fakes(reals, fake_policy, stream(seed, *job_key, "fakes", qid),
                                       value_range=value_range)
            for i, fc in enumerate(fakes):
                queues[qid].append((fc, derive_seed(seed, *job_key, "fake-shots", qid, i), None))

    tag = hashlib.sha256(repr((seed, job_key)).encode()).hexdigest()[:12]
    replicas = {v.key: [] for v in variants}
    dispatch_log = {}
    for qid in sorted(queues):
        entries = queues[qid]
        order = stream(seed, *job_key, "order", qid).permutation(len(entries))
        entries = [entries[i] for i in order]
        requests = [EvalRequest(f"{tag}-{qid}-{n}", c, shots, s) for n, (c, s, _) in enumerate(entries)]
        try:
            values = transport.run(qid, requests) if requests else []
        except JobError:
            raise
        except Exception as exc:  # any transport failure is a job failure
            raise JobError(qid, str(exc)) from exc
        if len(values) != len(requests):
            raise JobError(qid, f"returned {len(values)} results for {len(requests)} circuits")
        log_entries = []
        for (c, _, key), value in zip(entries, values):
            log_entries.append(DispatchRecord(fingerprint(c), float(value), key is None))
            if key is not None:
                replicas[key].append((qid, float(value)))
        dispatch_log[qid] = log_entries

    scores = {q.id: q.integrity_score for q in qpus}
    per_variant = {}
    aggregated = {}
    for v in variants:
        # keep replica order equal to the assignment order
        rank = {qid: i for i, qid in enumerate(assignment[v.key])}
        reps = sorted(replicas[v.key], key=lambda t: rank[t[0]])
        aggregated[v.key] = aggregate_replicas([(val, scores[qid]) for qid, val in reps])
        per_variant[v.key] = VariantOutcome(tuple(q for q, _ in reps), tuple(x for _, x in reps),
                                            aggregated[v.key])
    value = reconstruct(aggregated, fset)
    tamper_calls = {}
    for qid, qpu in getattr(transport, "qpus", {}).items():
        if hasattr(qpu, "tamper_calls"):
            tamper_calls[qid] = qpu.tamper_calls
    return JobResult(
        value=value,
        out_of_range=is_out_of_range(value),
        per_variant=per_variant,
        dispatch_log=dispatch_log,
        probabilities={q.id: float(p) for q, p in zip(qpus, probs)},
        uniform_fallback=fallback,
        tamper_calls=tamper_calls,
    )


def reconstruct_from_log(result: JobResult, circuit: Circuit) -> float:
    """Recompute the job value from its per-variant aggregates alone."""
    return reconstruct({k: v.aggregated for k, v in result.per_variant.items()}, cut(circuit))
