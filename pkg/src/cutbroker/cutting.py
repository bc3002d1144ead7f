"""Wire cutting: fragmentation and classical reconstruction.

A wire cut replaces the identity channel on one wire by

    rho = 1/2 * sum_{P in I,X,Y,Z} Tr(P rho) P,   P = sum_b lambda_b |b><b|

so the upstream side measures the wire in basis ``P`` and the downstream
side is re-prepared in each eigenstate ``|b>`` of ``P``. The expectation of
the uncut circuit is a sum of ``4^k`` terms, each a product over fragments
of signed combinations of fragment expectations.

Variant keys look like ``frag1:cut0=X+,cut1=Z``. Preparation stubs carry a ``+``/``-`` branch
suffix; measurement stubs carry none.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass
from functools import lru_cache

from .circuits import Circuit, Gate, Observable, H, RX, X
from .errors import CutError, IncompleteResultsError

log = logging.getLogger(__name__)

PAULIS = ("I", "X", "Y", "Z")
# eigenstate preparations and eigenvalues used for each basis
PREP_BRANCHES = {
    "I": (("Z+", 1), ("Z-", 1)),
    "Z": (("Z+", 1), ("Z-", -1)),
    "X": (("X+", 1), ("X-", -1)),
    "Y": (("Y+", 1), ("Y-", -1)),
}
PREP_STATES = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")


def _prep_gates(state, q):
    return {
        "Z+": (),
        "Z-": (X(q),),
        "X+": (H(q),),
        "X-": (X(q), H(q)),
        "Y+": (RX(-math.pi / 2, q),),
        "Y-": (RX(math.pi / 2, q),),
    }[state]


def _measure_gates(basis, q):
    return {"I": (), "Z": (), "X": (H(q),), "Y": (RX(math.pi / 2, q),)}[basis]


@dataclass(frozen=True)
class Fragment:
    index: int
    circuit: Circuit  # gates only; stub wires are filled in per variant
    segments: tuple[tuple[int, int], ...]  # (original wire, segment) per local wire
    up_stubs: tuple[tuple[int, int], ...]  # (cut index, local wire) measured
    down_stubs: tuple[tuple[int, int], ...]  # (cut index, local wire) prepared
    gate_indices: tuple[int, ...]

    @property
    def width(self):
        return self.circuit.qubit_count


@dataclass(frozen=True)
class FragmentSet:
    original: Circuit
    fragments: tuple[Fragment, ...]
    # per cut: ((upstream fragment, local wire), (downstream fragment, local wire))
    wiring: tuple[tuple[tuple[int, int], tuple[int, int]], ...]

    @property
    def cut_count(self):
        return len(self.wiring)

    @property
    def term_count(self):
        return 4 ** self.cut_count


@dataclass(frozen=True)
class FragmentVariant:
    """One executable sub-circuit: the unit a QPU receives."""

    fragment: int
    key: str
    circuit: Circuit
    assignment: tuple[tuple[int, str], ...]  # (cut, basis or prep state)
    coefficient: float  # 1/2 for every cut measured in this fragment


@dataclass(frozen=True)
class Term:
    assignment: tuple[str, ...]  # one basis per cut
    coefficient: float
    # per fragment: ((variant key, sign), ...) summed before the product
    factors: tuple[tuple[tuple[str, int], ...], ...]


class _DisjointSet:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


@lru_cache(maxsize=256)
def cut(circuit: Circuit) -> FragmentSet:
    """Split ``circuit`` at its cut points into independent fragments."""
    if not circuit.cuts:
        raise CutError("circuit has no cut points; evaluate it directly instead")
    n = circuit.qubit_count
    wire_gates = {w: [] for w in range(n)}
    for i, g in enumerate(circuit.gates):
        for q in g.qubits:
            wire_gates[q].append(i)

    # boundary = how many of the wire's gates precede the cut
    boundaries = {w: [] for w in range(n)}
    for j, c in enumerate(circuit.cuts):
        b = sum(1 for i in wire_gates[c.wire] if i <= c.position)
        boundaries[c.wire].append((b, j))
    cut_segments = [None] * len(circuit.cuts)
    for w, bs in boundaries.items():
        bs.sort()
        for s, (b, j) in enumerate(bs):
            if s and bs[s - 1][0] == b:
                raise CutError(
                    f"cuts {bs[s - 1][1]} and {j} on wire {w} have no gate between them"
                )
            cut_segments[j] = (w, s)  # upstream segment is s, downstream s + 1

    def segment_of(w, gate_index):
        pos = wire_gates[w].index(gate_index)
        return (w, sum(1 for b, _ in boundaries[w] if b <= pos))

    ds = _DisjointSet()
    for w in range(n):
        for s in range(len(boundaries[w]) + 1):
            ds.find((w, s))
    gate_segments = []
    for i, g in enumerate(circuit.gates):
        segs = [segment_of(q, i) for q in g.qubits]
        gate_segments.append(segs)
        for seg in segs[1:]:
            ds.union(segs[0], seg)

    for j, (w, s) in enumerate(cut_segments):
        if ds.find((w, s)) == ds.find((w, s + 1)):
            downstream = [i for i in wire_gates[w] if segment_of(w, i) == (w, s + 1)]
            culprit = next((i for i in downstream if len(circuit.gates[i].qubits) > 1),
                           downstream[0] if downstream else None)
            what = "" if culprit is None else \
                f" (gate {culprit}: {circuit.gates[culprit].kind} on wires " \
                f"{','.join(map(str, circuit.gates[culprit].qubits))})"
            raise CutError(
                f"cut {j} on wire {w} is not separable: both sides stay connected{what}"
            )

    components = {}
    for w in range(n):
        for s in range(len(boundaries[w]) + 1):
            components.setdefault(ds.find((w, s)), []).append((w, s))
    comp_gates = {root: [] for root in components}
    for i, segs in enumerate(gate_segments):
        comp_gates[ds.find(segs[0])].append(i)

    def order_key(root):
        gates = comp_gates[root]
        return (gates[0] if gates else math.inf, min(components[root]))

    roots = sorted(components, key=order_key)
    frag_of = {}
    fragments = []
    for f, root in enumerate(roots):
        segs = tuple(sorted(components[root]))
        local = {seg: i for i, seg in enumerate(segs)}
        for seg in segs:
            frag_of[seg] = (f, local[seg])
        gates = []
        for i in comp_gates[root]:
            g = circuit.gates[i]
            gates.append(Gate(g.kind, tuple(local[seg] for seg in gate_segments[i]), g.params))
        labels = []
        for (w, s) in segs:
            last = s == len(boundaries[w])
            labels.append(circuit.observable.paulis[w] if last else "I")
        up = tuple(sorted((j, local[cs]) for j, cs in enumerate(cut_segments) if cs in local))
        down = tuple(sorted(
            (j, local[(w, s + 1)]) for j, (w, s) in enumerate(cut_segments) if (w, s + 1) in local
        ))
        fragments.append(Fragment(
            index=f,
            circuit=Circuit(len(segs), tuple(gates), observable=Observable("".join(labels))),
            segments=segs,
            up_stubs=up,
            down_stubs=down,
            gate_indices=tuple(comp_gates[root]),
        ))
    wiring = tuple(
        (frag_of[(w, s)], frag_of[(w, s + 1)]) for (w, s) in cut_segments
    )
    return FragmentSet(circuit, tuple(fragments), wiring)


def variant_key(fragment: int, assignment) -> str:
    if not assignment:
        return f"frag{fragment}"
    return f"frag{fragment}:" + ",".join(f"cut{j}={label}" for j, label in assignment)


def parse_variant_key(key: str) -> tuple[int, tuple[tuple[int, str], ...]]:
    head, _, rest = key.partition(":")
    frag = int(head.removeprefix("frag"))
    assignment = []
    if rest:
        for part in rest.split(","):
            cut_label, _, label = part.partition("=")
            assignment.append((int(cut_label.removeprefix("cut")), label))
    return frag, tuple(assignment)


def _build_variant(fragment: Fragment, assignment) -> FragmentVariant:
    labels = dict(assignment)
    prep, tail = [], []
    paulis = list(fragment.circuit.observable.paulis)
    for j, q in fragment.down_stubs:
        prep.extend(_prep_gates(labels[j], q))
    for j, q in fragment.up_stubs:
        basis = labels[j]
        tail.extend(_measure_gates(basis, q))
        paulis[q] = "I" if basis == "I" else "Z"
    circuit = Circuit(
        fragment.width,
        tuple(prep) + fragment.circuit.gates + tuple(tail),
        observable=Observable("".join(paulis)),
    )
    return FragmentVariant(
        fragment=fragment.index,
        key=variant_key(fragment.index, assignment),
        circuit=circuit,
        assignment=tuple(assignment),
        coefficient=0.5 ** len(fragment.up_stubs),
    )


@lru_cache(maxsize=256)
def fragment_variants(fset: FragmentSet) -> tuple[FragmentVariant, ...]:
    """Every distinct executable sub-circuit the reconstruction needs."""
    out = []
    for frag in fset.fragments:
        stubs = sorted([(j, "up") for j, _ in frag.up_stubs] + [(j, "down") for j, _ in frag.down_stubs])
        choices = [PAULIS if side == "up" else PREP_STATES for _, side in stubs]
        for combo in itertools.product(*choices):
            assignment = tuple((j, label) for (j, _), label in zip(stubs, combo))
            out.append(_build_variant(frag, assignment))
    return tuple(out)


@lru_cache(maxsize=256)
def enumerate_variants(fset: FragmentSet) -> tuple[Term, ...]:
    """The ``4^k`` reconstruction terms with their coefficients."""
    k = fset.cut_count
    terms = []
    for bases in itertools.product(PAULIS, repeat=k):
        factors = []
        for frag in fset.fragments:
            up = [(j, bases[j]) for j, _ in frag.up_stubs]
            down_options = [[(j, state, sign) for state, sign in PREP_BRANCHES[bases[j]]]
                            for j, _ in frag.down_stubs]
            combos = []
            for choice in itertools.product(*down_options):
                sign = 1
                for _, _, s in choice:
                    sign *= s
                assignment = sorted(up + [(j, state) for j, state, _ in choice])
                combos.append((variant_key(frag.index, assignment), sign))
            factors.append(tuple(combos))
        terms.append(Term(bases, 0.5 ** k, tuple(factors)))
    return tuple(terms)


def required_keys(fset: FragmentSet) -> frozenset:
    return frozenset(v.key for v in fragment_variants(fset))


def reconstruct(variant_results, fset: FragmentSet) -> float:
    """Recombine fragment expectations into the uncut expectation value.

    The value is returned as computed; shot noise can push it outside
    ``[-1, 1]`` (see :func:`is_out_of_range`).
    """
    missing = required_keys(fset) - set(variant_results)
    if missing:
        raise IncompleteResultsError(missing)
    total = 0.0
    for term in enumerate_variants(fset):
        value = term.coefficient
        for factor in term.factors:
            value *= sum(sign * variant_results[key] for key, sign in factor)
            if value == 0.0:
                break
        total += value
    if is_out_of_range(total):
        log.debug("reconstructed value %.6f lies outside [-1, 1]", total)
    return total


def is_out_of_range(value: float) -> bool:
    return not -1.0 <= value <= 1.0
