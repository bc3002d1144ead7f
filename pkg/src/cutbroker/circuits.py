"""Circuit data model, builders for the evaluation circuits, and QASM I/O.

Wire 0 is the most significant bit of every bitstring, so an observable
written ``"ZZI"`` means ``Z_0 (x) Z_1 (x) I_2``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Iterable

from .errors import CircuitValidationError, InvalidArgument, QasmParseError
from .rng import as_generator

SINGLE_QUBIT_KINDS = frozenset({"H", "X", "RX", "RY", "RZ"})
TWO_QUBIT_KINDS = frozenset({"CZ", "CNOT"})
ROTATION_KINDS = frozenset({"RX", "RY", "RZ"})
GATE_KINDS = SINGLE_QUBIT_KINDS | TWO_QUBIT_KINDS
PAULI_LABELS = frozenset("IXYZ")

# Fixed rotation angles of the two benchmark circuits.
BENCHMARK_INIT_STEP = math.pi / 7  # wires 0-5, first RX/RY layer: (i+1) * step
BENCHMARK_SECOND_STEP = math.pi / 11  # wires 0-3, second RX/RY layer
# RY on each re-prepared cut wire; wire 3's angle brings one fragment
# expectation close to -1
BENCHMARK_STUB_ANGLES = {1: 2 * math.pi / 5, 3: 9 * math.pi / 10}
# small block and tail angles keep the downstream fragments near a basis
# state, so tampering with any relevant variant visibly moves the result
BENCHMARK_BLOCK_STEP = math.pi / 120  # wires 6-9
BENCHMARK_TAIL_STEP = math.pi / 600  # wires 10-14, angle proportional to index
BENCHMARK_CUT_WIRES = (1, 3)

ALT_BENCHMARK_RY_STEP = math.pi / 120
ALT_BENCHMARK_RX_STEP = math.pi / 200
ALT_BENCHMARK_CUT_WIRES = (5, 10)

PROBE_ANGLE_RANGE = (0.2, 2.9)
PROBE_MIN_ABS_EXPECTATION = 0.1


@dataclass(frozen=True)
class Gate:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if self.kind not in GATE_KINDS:
            raise CircuitValidationError(f"unknown gate kind {self.kind!r}")
        arity = 1 if self.kind in SINGLE_QUBIT_KINDS else 2
        if len(self.qubits) != arity:
            raise CircuitValidationError(
                f"{self.kind} takes {arity} qubit(s), got {len(self.qubits)}"
            )
        if len(set(self.qubits)) != len(self.qubits):
            raise CircuitValidationError(f"{self.kind} qubits must be distinct")
        if any(q < 0 for q in self.qubits):
            raise CircuitValidationError("qubit indices must be non-negative")
        n_params = 1 if self.kind in ROTATION_KINDS else 0
        if len(self.params) != n_params:
            raise CircuitValidationError(
                f"{self.kind} takes {n_params} angle(s), got {len(self.params)}"
            )
        if any(not math.isfinite(p) for p in self.params):
            raise CircuitValidationError("gate angles must be finite")

    def remap(self, mapping) -> Gate:
        return Gate(self.kind, tuple(mapping[q] for q in self.qubits), self.params)


def H(q):
    return Gate("H", (q,))


def X(q):
    return Gate("X", (q,))


def RX(theta, q):
    return Gate("RX", (q,), (theta,))


def RY(theta, q):
    return Gate("RY", (q,), (theta,))


def RZ(theta, q):
    return Gate("RZ", (q,), (theta,))


def CZ(a, b):
    return Gate("CZ", (a, b))


def CNOT(control, target):
    return Gate("CNOT", (control, target))


@dataclass(frozen=True)
class Observable:
    """Tensor product of single-wire Paulis, one label per wire."""

    paulis: str

    def __post_init__(self):
        paulis = "".join(self.paulis)
        if not paulis or set(paulis) - PAULI_LABELS:
            raise CircuitValidationError(f"invalid observable {self.paulis!r}")
        object.__setattr__(self, "paulis", paulis)

    def __len__(self):
        return len(self.paulis)

    def __str__(self):
        return self.paulis

    @classmethod
    def all_z(cls, n):
        return cls("Z" * n)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, p in enumerate(self.paulis) if p != "I")


@dataclass(frozen=True)
class CutPoint:
    """A wire cut placed right after gate ``position`` along ``wire``.

    ``position`` indexes the global gate sequence. The gate at that index
    need not act on ``wire``: the cut then sits between the last gate on the
    wire at or before ``position`` and the next one after it.
    """

    wire: int
    position: int


@dataclass(frozen=True)
class Circuit:
    qubit_count: int
    gates: tuple[Gate, ...]
    cuts: tuple[CutPoint, ...] = ()
    observable: Observable = None

    def __post_init__(self):
        if int(self.qubit_count) < 1:
            raise CircuitValidationError("a circuit needs at least one qubit")
        object.__setattr__(self, "qubit_count", int(self.qubit_count))
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "cuts", tuple(
            c if isinstance(c, CutPoint) else CutPoint(*c) for c in self.cuts))
        if self.observable is None:
            object.__setattr__(self, "observable", Observable.all_z(self.qubit_count))
        elif isinstance(self.observable, str):
            object.__setattr__(self, "observable", Observable(self.observable))
        n = self.qubit_count
        for i, gate in enumerate(self.gates):
            if not isinstance(gate, Gate):
                raise CircuitValidationError(f"gate {i} is not a Gate")
            if any(q >= n for q in gate.qubits):
                raise CircuitValidationError(
                    f"gate {i} ({gate.kind}) uses qubit {max(gate.qubits)} "
                    f"on a {n}-qubit circuit"
                )
        if len(self.observable) != n:
            raise CircuitValidationError(
                f"observable has {len(self.observable)} labels for {n} qubits"
            )
        seen = set()
        for cut in self.cuts:
            if not 0 <= cut.wire < n:
                raise CircuitValidationError(f"cut wire {cut.wire} out of range")
            if not 0 <= cut.position < len(self.gates):
                raise CircuitValidationError(f"cut position {cut.position} out of range")
            if (cut.wire, cut.position) in seen:
                raise CircuitValidationError(f"duplicate cut {cut}")
            seen.add((cut.wire, cut.position))

    def with_cuts(self, cuts: Iterable[CutPoint | tuple[int, int]]) -> Circuit:
        return replace(self, cuts=tuple(cuts))

    def with_observable(self, observable) -> Circuit:
        return replace(self, observable=observable)

    def appended(self, gates: Iterable[Gate]) -> Circuit:
        return replace(self, gates=self.gates + tuple(gates))


# ---------------------------------------------------------------- builders


def build_ghz(n: int) -> Circuit:
    if n < 2:
        raise InvalidArgument(f"GHZ needs at least 2 qubits, got {n}")
    gates = [H(0)] + [CNOT(0, j) for j in range(1, n)]
    return Circuit(n, tuple(gates))


def ghz_cut_points(n: int, cuts: int = 2) -> tuple[CutPoint, ...]:
    """Cuts on wire 0 splitting the CNOT fan-out into ``cuts + 1`` groups."""
    if n < cuts + 2:
        raise InvalidArgument(f"GHZ({n}) is too small for {cuts} cuts")
    targets = n - 1
    # gate index j is CNOT(0, j); cut after CNOT(0, boundary)
    bounds = [round(targets * (c + 1) / (cuts + 1)) for c in range(cuts)]
    return tuple(CutPoint(0, b) for b in bounds)


def _dj_mask(n, oracle, mask):
    if oracle in ("constant0", "constant1"):
        return 0
    if oracle in ("balanced", "balanced_parity"):
        if mask is None:
            mask = (1 << n) - 1
        mask = int(mask)
        if mask <= 0 or mask >= (1 << n):
            raise InvalidArgument(f"parity mask must be in [1, 2^{n}), got {mask}")
        return mask
    raise InvalidArgument(f"unknown Deutsch-Jozsa oracle {oracle!r}")


def build_deutsch_jozsa(n: int, oracle: str = "constant0", mask: int | None = None) -> Circuit:
    """Deutsch-Jozsa circuit on ``n`` function bits plus one auxiliary wire.

    ``oracle`` is ``"constant0"``, ``"constant1"`` or ``"balanced_parity"``;
    the parity oracle computes ``f(x) = popcount(x & mask) mod 2``, with bit
    ``n-1-i`` of ``mask`` selecting wire ``i`` (wire 0 is the MSB). When
    ``mask`` is omitted every input wire participates.
    """
    if n < 1:
        raise InvalidArgument(f"Deutsch-Jozsa needs n >= 1, got {n}")
    parity = _dj_mask(n, oracle, mask)
    aux = n
    gates = [X(aux)] + [H(q) for q in range(n + 1)]
    if oracle == "constant1":
        gates.append(X(aux))
    for q in range(n):
        if parity >> (n - 1 - q) & 1:
            gates.append(CNOT(q, aux))
    gates += [H(q) for q in range(n)]
    return Circuit(n + 1, tuple(gates), observable=Observable("Z" * n + "I"))


def dj_cut_points(circuit: Circuit, cuts: int = 2) -> tuple[CutPoint, ...]:
    """Cuts on the auxiliary wire between groups of oracle CNOTs."""
    aux = circuit.qubit_count - 1
    cnots = [i for i, g in enumerate(circuit.gates) if g.kind == "CNOT" and g.qubits[1] == aux]
    if len(cnots) < cuts + 1:
        raise InvalidArgument(
            f"oracle has {len(cnots)} CNOTs, too few for {cuts} cuts"
        )
    picks = [cnots[round(len(cnots) * (c + 1) / (cuts + 1)) - 1] for c in range(cuts)]
    return tuple(CutPoint(aux, p) for p in picks)


def build_benchmark() -> Circuit:
    """15-qubit benchmark with cut points on wires 1 and 3.

    Wires 0-5 get an RX/RY layer, a CZ chain and a second RX/RY layer on
    wires 0-3. Past their cuts, wires 1 and 3 are RY-rotated and drive two
    independent blocks (wires 6-9 and 10-14), each RX-rotated, phase-flipped
    by the previous wire and RY-rotated.
    """
    n = 15
    gates = []
    for i in range(6):
        theta = (i + 1) * BENCHMARK_INIT_STEP
        gates += [RX(theta, i), RY(theta, i)]
    gates += [CZ(i, i + 1) for i in range(5)]
    cut_positions = {}
    for i in range(4):
        theta = (i + 1) * BENCHMARK_SECOND_STEP
        gates += [RX(theta, i), RY(theta, i)]
        cut_positions[i] = len(gates) - 1
    cuts = tuple(CutPoint(w, cut_positions[w]) for w in BENCHMARK_CUT_WIRES)
    gates += [RY(BENCHMARK_STUB_ANGLES[w], w) for w in BENCHMARK_CUT_WIRES]

    block = list(range(6, 10))
    prev = {6: 1, 7: 6, 8: 7, 9: 8}
    for j in block:
        gates.append(RX((j - 5) * BENCHMARK_BLOCK_STEP, j))
    for j in block:
        gates.append(CZ(prev[j], j))
    for j in block:
        gates.append(RY((j - 5) * BENCHMARK_BLOCK_STEP, j))

    tail = list(range(10, 15))
    for i in tail:
        gates.append(RX(i * BENCHMARK_TAIL_STEP, i))
    for i in tail:
        gates.append(CZ(3 if i == 10 else i - 1, i))
    for i in tail:
        gates.append(RY(i * BENCHMARK_TAIL_STEP, i))
    return Circuit(n, tuple(gates), cuts)


def build_alt_benchmark() -> Circuit:
    """15-qubit RY / CNOT-chain / RX circuit; every gate is a noisy kind."""
    n = 15
    gates = [RY((i + 1) * ALT_BENCHMARK_RY_STEP, i) for i in range(n)]
    cut_positions = {}
    for i in range(n - 1):
        gates.append(CNOT(i, i + 1))
        if i + 1 in ALT_BENCHMARK_CUT_WIRES:
            cut_positions[i + 1] = len(gates) - 1
    gates += [RX((i + 1) * ALT_BENCHMARK_RX_STEP, i) for i in range(n)]
    cuts = tuple(CutPoint(w, cut_positions[w]) for w in ALT_BENCHMARK_CUT_WIRES)
    return Circuit(n, tuple(gates), cuts)


def probe_from_angle(theta: float) -> tuple[Circuit, float]:
    return Circuit(1, (RX(theta, 0),)), math.cos(theta)


def build_probe(seed) -> tuple[Circuit, float]:
    """Single-qubit RX probe whose ``<Z>`` is known exactly (``cos theta``).

    Angles with ``|cos theta| < 0.1`` are redrawn so the integrity score
    never divides by a near-zero expectation.
    """
    rng = as_generator(seed)
    lo, hi = PROBE_ANGLE_RANGE
    while True:
        theta = float(rng.uniform(lo, hi))
        if abs(math.cos(theta)) >= PROBE_MIN_ABS_EXPECTATION:
            return probe_from_angle(theta)


def random_circuit(width: int, n_gates: int, rng, *, angle_scale: float = math.pi,
                   two_qubit_fraction: float = 0.3,
                   one_qubit_kinds=("H", "X", "RX", "RY", "RZ")) -> Circuit:
    """Random circuit over the supported gate set with an all-Z observable."""
    rng = as_generator(rng)
    gates = []
    one_q = tuple(one_qubit_kinds)
    for _ in range(n_gates):
        if width > 1 and rng.random() < two_qubit_fraction:
            a, b = (int(x) for x in rng.choice(width, size=2, replace=False))
            gates.append(Gate("CZ" if rng.random() < 0.5 else "CNOT", (a, b)))
        else:
            kind = one_q[int(rng.integers(len(one_q)))]
            q = int(rng.integers(width))
            params = (float(rng.uniform(-angle_scale, angle_scale)),) if kind in ROTATION_KINDS else ()
            gates.append(Gate(kind, (q,), params))
    return Circuit(width, tuple(gates))


# ---------------------------------------------------------------- QASM subset

_QASM_NAMES = {"h": "H", "x": "X", "rx": "RX", "ry": "RY", "rz": "RZ", "cz": "CZ", "cx": "CNOT"}
_EMIT_NAMES = {v: k for k, v in _QASM_NAMES.items()}

_NUMBER = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_RE_QREG = re.compile(r"^qreg\s+(\w+)\s*\[\s*(\d+)\s*\]$")
_RE_GATE = re.compile(r"^(h|x|rx|ry|rz|cz|cx)\s*(?:\(([^)]*)\))?\s+(.+)$")
_RE_QARG = re.compile(r"^(\w+)\s*\[\s*(\d+)\s*\]$")
_RE_PI_FRAC = re.compile(rf"^([-+]?)(?:({_NUMBER})\s*\*\s*)?pi(?:\s*/\s*({_NUMBER}))?$")
_RE_NUMBER = re.compile(rf"^{_NUMBER}$")


def _parse_angle(expr, line):
    expr = expr.strip()
    if _RE_NUMBER.match(expr):
        return float(expr)
    m = _RE_PI_FRAC.match(expr)
    if not m:
        raise QasmParseError(f"unsupported angle expression {expr!r}", line)
    sign, num, den = m.groups()
    value = math.pi
    if num is not None:
        value = float(num) * value
    if den is not None:
        d = float(den)
        if d == 0:
            raise QasmParseError("division by zero in angle", line)
        value = value / d
    return -value if sign == "-" else value


def parse_qasm_subset(text: str) -> Circuit:
    """Parse the small OpenQASM 2.0 subset used for circuit exchange.

    Supported statements: ``qreg``, ``h``, ``x``, ``rx``, ``ry``, ``rz``,
    ``cz`` and ``cx``. Header and ``include`` lines are skipped. Several
    statements may share a line.
    """
    n_qubits = None
    reg = None
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        code = raw.split("//", 1)[0].strip()
        if not code:
            continue
        parts = code.split(";")
        if parts[-1].strip():
            raise QasmParseError(f"missing ';' after {parts[-1].strip()!r}", lineno)
        for stmt in (p.strip() for p in parts[:-1]):
            if not stmt or stmt.startswith("OPENQASM") or stmt.startswith("include"):
                continue
            m = _RE_QREG.match(stmt)
            if m:
                if n_qubits is not None:
                    raise QasmParseError("only one qreg is supported", lineno)
                reg, n_qubits = m.group(1), int(m.group(2))
                continue
            m = _RE_GATE.match(stmt)
            if not m:
                raise QasmParseError(f"unknown statement {stmt!r}", lineno)
            if n_qubits is None:
                raise QasmParseError("gate before qreg declaration", lineno)
            name, angle, args = m.groups()
            kind = _QASM_NAMES[name]
            qubits = []
            for arg in args.split(","):
                qm = _RE_QARG.match(arg.strip())
                if not qm or qm.group(1) != reg:
                    raise QasmParseError(f"bad qubit argument {arg.strip()!r}", lineno)
                qubits.append(int(qm.group(2)))
            params = ()
            if kind in ROTATION_KINDS:
                if angle is None:
                    raise QasmParseError(f"{name} needs an angle", lineno)
                params = (_parse_angle(angle, lineno),)
            elif angle is not None:
                raise QasmParseError(f"{name} takes no angle", lineno)
            for q in qubits:
                if q >= n_qubits:
                    raise CircuitValidationError(
                        f"line {lineno}: qubit {q} out of range for qreg of size {n_qubits}"
                    )
            try:
                gates.append(Gate(kind, tuple(qubits), params))
            except CircuitValidationError as exc:
                raise QasmParseError(str(exc), lineno) from None
    if n_qubits is None:
        raise QasmParseError("no qreg declaration")
    return Circuit(n_qubits, tuple(gates))


def emit_qasm(circuit: Circuit) -> str:
    """Serialize gates to the QASM subset; angles use round-trip reprs."""
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";', f"qreg q[{circuit.qubit_count}];"]
    for g in circuit.gates:
        name = _EMIT_NAMES[g.kind]
        args = ",".join(f"q[{q}]" for q in g.qubits)
        if g.params:
            lines.append(f"{name}({g.params[0]!r}) {args};")
        else:
            lines.append(f"{name} {args};")
    return "\n".join(lines) + "\n"


def describe(circuit: Circuit) -> dict:
    counts = {}
    for g in circuit.gates:
        counts[g.kind] = counts.get(g.kind, 0) + 1
    return {
        "qubits": circuit.qubit_count,
        "gates": len(circuit.gates),
        "gate_counts": dict(sorted(counts.items())),
        "cuts": [[c.wire, c.position] for c in circuit.cuts],
        "observable": circuit.observable.paulis,
    }
