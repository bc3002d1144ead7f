"""Statevector simulation with stochastic gate noise.

Noisy runs are trajectory simulations: for every shot each noisy gate
fires its channel with the configured probability, and a Kraus branch is
drawn from the current state. Shots are i.i.d., so for narrow circuits the
per-shot outcome distribution is computed once from the density matrix
(the average over trajectories) and all shots are drawn from it in one
multinomial. Wider circuits run explicit per-shot trajectories.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .circuits import Circuit, Observable
from .errors import CapacityError, CircuitValidationError, InvalidArgument
from .rng import as_generator

DEFAULT_QUBIT_LIMIT = 16
# Widest circuit simulated through the density matrix when noise is on.
DENSITY_MATRIX_LIMIT = 8
NOMINAL_GATE_TIME = 35e-9
DEBUG_CHECKS = os.environ.get("CUTBROKER_DEBUG") == "1"

_SQ2 = 1 / math.sqrt(2)
_I2 = np.eye(2, dtype=complex)
_PX = np.array([[0, 1], [1, 0]], dtype=complex)
_PY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_PZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES = {"I": _I2, "X": _PX, "Y": _PY, "Z": _PZ}
_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
# Rotations taking the X / Y eigenbasis onto the computational basis.
_BASIS_ROTATION = {
    "X": _HADAMARD,
    "Y": _HADAMARD @ np.diag([1, -1j]),
}
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


def gate_matrix(gate) -> np.ndarray:
    kind = gate.kind
    if kind == "H":
        return _HADAMARD
    if kind == "X":
        return _PX
    if kind == "CNOT":
        return _CNOT
    if kind == "CZ":
        return _CZ
    (theta,) = gate.params
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    if kind == "RX":
        return np.array([[c, -1j * s], [-1j * s, c]])
    if kind == "RY":
        return np.array([[c, -s], [s, c]], dtype=complex)
    if kind == "RZ":
        return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])
    raise CircuitValidationError(f"no matrix for {kind}")


# ---------------------------------------------------------------- noise model


@dataclass(frozen=True)
class ThermalRelaxation:
    """Relaxation toward |0> (T1) plus dephasing (T2), fired with ``prob``."""

    t1: float
    t2: float
    prob: float
    gate_time: float = NOMINAL_GATE_TIME

    def __post_init__(self):
        if not self.t1 > 0 or not self.t2 > 0:
            raise InvalidArgument("T1 and T2 must be positive")
        if self.t2 > 2 * self.t1:
            raise InvalidArgument("T2 cannot exceed 2*T1")
        if not 0 <= self.prob <= 1:
            raise InvalidArgument("thermal relaxation probability must be in [0, 1]")

    @property
    def damping(self) -> float:
        return 1 - math.exp(-self.gate_time / self.t1)

    @property
    def phase_flip(self) -> float:
        rate = 1 / self.t2 - 1 / (2 * self.t1)
        return (1 - math.exp(-self.gate_time * rate)) / 2

    def kraus(self) -> list[np.ndarray]:
        g, pz = self.damping, self.phase_flip
        k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]], dtype=complex)
        k1 = np.array([[0, math.sqrt(g)], [0, 0]], dtype=complex)
        ops = [math.sqrt(1 - pz) * k0, math.sqrt(1 - pz) * k1]
        if pz > 0:
            ops += [math.sqrt(pz) * _PZ @ k0, math.sqrt(pz) * _PZ @ k1]
        return ops


@dataclass(frozen=True)
class Depolarizing:
    """``rho -> (1-p) rho + p I/d`` on the gate's qubits."""

    p: float
    arity: int = 2

    def __post_init__(self):
        if not 0 <= self.p <= 1:
            raise InvalidArgument("depolarizing probability must be in [0, 1]")
        if self.arity not in (1, 2):
            raise InvalidArgument("depolarizing arity must be 1 or 2")


@dataclass(frozen=True)
class NoiseModel:
    channels: tuple[tuple[str, object], ...] = ()

    def channel_for(self, kind):
        for k, ch in self.channels:
            if k == kind:
                return ch
        return None

    @property
    def kinds(self):
        return frozenset(k for k, _ in self.channels)

    @classmethod
    def default(cls) -> NoiseModel:
        """Thermal relaxation on RX (2%) and RY (1.5%), depolarizing CNOT."""
        return cls((
            ("RX", ThermalRelaxation(50e-6, 30e-6, 0.02)),
            ("RY", ThermalRelaxation(50e-6, 30e-6, 0.015)),
            ("CNOT", Depolarizing(0.01, 2)),
        ))

    def to_dict(self) -> dict:
        out = {}
        for kind, ch in self.channels:
            if isinstance(ch, ThermalRelaxation):
                out[kind] = {"thermal": {"t1": ch.t1, "t2": ch.t2, "prob": ch.prob,
                                         "gate_time": ch.gate_time}}
            else:
                out[kind] = {"depolarizing": {"p": ch.p, "arity": ch.arity}}
        return out


def _channel_ops(circuit, noise):
    """Per-gate list of (channel, qubits) or None."""
    ops = []
    for gate in circuit.gates:
        ch = noise.channel_for(gate.kind) if noise is not None else None
        if ch is None:
            ops.append(None)
        elif isinstance(ch, Depolarizing):
            if ch.arity != len(gate.qubits):
                raise InvalidArgument(
                    f"{ch.arity}-qubit depolarizing attached to {gate.kind}"
                )
            ops.append((ch, gate.qubits))
        else:
            ops.append((ch, gate.qubits))
    return ops


# ---------------------------------------------------------------- kernels


def _apply(tensor, matrix, axes):
    k = len(axes)
    if k == 1:
        out = np.tensordot(matrix, tensor, axes=([1], [axes[0]]))
        return np.moveaxis(out, 0, axes[0])
    m = matrix.reshape(2, 2, 2, 2)
    out = np.tensordot(m, tensor, axes=([2, 3], list(axes)))
    return np.moveaxis(out, [0, 1], list(axes))


def _apply_gate_sv(psi, gate):
    q = gate.qubits
    if gate.kind == "CZ":
        idx = [slice(None)] * psi.ndim
        idx[q[0]] = 1
        idx[q[1]] = 1
        psi = psi.copy()
        psi[tuple(idx)] *= -1
        return psi
    if gate.kind == "CNOT":
        c, t = q
        psi = psi.copy()
        i0 = [slice(None)] * psi.ndim
        i1 = [slice(None)] * psi.ndim
        i0[c] = i1[c] = 1
        i0[t], i1[t] = 0, 1
        a = psi[tuple(i0)].copy()
        psi[tuple(i0)] = psi[tuple(i1)]
        psi[tuple(i1)] = a
        return psi
    return _apply(psi, gate_matrix(gate), q)


def _check_width(circuit, limit):
    if circuit.qubit_count > limit:
        raise CapacityError(
            f"{circuit.qubit_count} qubits exceeds the simulator limit of {limit}"
        )


def _check_norm(psi):
    norm = float(np.vdot(psi, psi).real)
    if abs(norm - 1) > 1e-10:
        raise AssertionError(f"statevector norm drifted to {norm!r}")


def statevector(circuit: Circuit, *, limit: int = DEFAULT_QUBIT_LIMIT) -> np.ndarray:
    """Final state as a flat array; index bit ``n-1-q`` belongs to wire ``q``."""
    _check_width(circuit, limit)
    n = circuit.qubit_count
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1
    for gate in circuit.gates:
        psi = _apply_gate_sv(psi, gate)
        if DEBUG_CHECKS:
            _check_norm(psi)
    return psi.reshape(-1)


def _apply_pauli_string(psi, paulis):
    n = len(paulis)
    t = psi.reshape((2,) * n)
    for q, p in enumerate(paulis):
        if p != "I":
            t = _apply(t, PAULI_MATRICES[p], (q,))
    return t.reshape(-1)


def exact_expectation(circuit: Circuit, observable: Observable | str | None = None, *,
                      limit: int = DEFAULT_QUBIT_LIMIT) -> float:
    """Noiseless ``<psi|O|psi>``; ``observable`` defaults to the circuit's."""
    observable = _resolve_observable(circuit, observable)
    if not observable.support:
        return 1.0
    return state_expectation(statevector(circuit, limit=limit), observable.paulis)


def state_expectation(psi: np.ndarray, paulis: str) -> float:
    """``<psi|P|psi>`` for a flat statevector and a Pauli string."""
    value = float(np.vdot(psi, _apply_pauli_string(psi, paulis)).real)
    return min(1.0, max(-1.0, value))


def _resolve_observable(circuit, observable):
    if observable is None:
        return circuit.observable
    if isinstance(observable, str):
        observable = Observable(observable)
    if len(observable) != circuit.qubit_count:
        raise CircuitValidationError(
            f"observable has {len(observable)} labels for {circuit.qubit_count} qubits"
        )
    return observable


def _measurement_basis(observable):
    """Normalize an observable to the rotations its sampling needs."""
    return "".join(p if p in "XY" else "Z" for p in observable.paulis)


def parity_signs(n, support) -> np.ndarray:
    idx = np.arange(2 ** n)
    parity = np.zeros(2 ** n, dtype=np.int64)
    for q in support:
        parity ^= (idx >> (n - 1 - q)) & 1
    return 1.0 - 2.0 * parity


def _rotate_sv(psi, basis):
    n = len(basis)
    t = psi.reshape((2,) * n)
    for q, b in enumerate(basis):
        if b in _BASIS_ROTATION:
            t = _apply(t, _BASIS_ROTATION[b], (q,))
    return t.reshape(-1)


# ---------------------------------------------------------------- density matrix


def _dm_apply_unitary(rho, matrix, qubits, n):
    rho = _apply(rho, matrix, qubits)
    return _apply(rho, matrix.conj(), tuple(q + n for q in qubits))


def _dm_apply_kraus(rho, kraus, q, n):
    out = None
    for k in kraus:
        term = _dm_apply_unitary(rho, k, (q,), n)
        out = term if out is None else out + term
    return out


def _dm_depolarize(rho, qubits, p, n):
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for q in qubits:
        cols[q] = rows[q]
    keep = [rows[i] for i in range(n) if i not in qubits] + \
           [cols[i] for i in range(n) if i not in qubits]
    traced = np.einsum("".join(rows + cols) + "->" + "".join(keep), rho)
    mixed = np.zeros_like(rho)
    d = 2 ** len(qubits)
    for values in np.ndindex(*(2,) * len(qubits)):
        idx = [slice(None)] * (2 * n)
        for q, v in zip(qubits, values):
            idx[q] = v
            idx[q + n] = v
        mixed[tuple(idx)] = traced / d
    return (1 - p) * rho + p * mixed


def density_matrix_kraus(circuit: Circuit, noise: NoiseModel | None) -> np.ndarray:
    """Reference route: unitary, then each Kraus operator, applied separately."""
    n = circuit.qubit_count
    rho = np.zeros((2,) * (2 * n), dtype=complex)
    rho[(0,) * (2 * n)] = 1
    for gate, op in zip(circuit.gates, _channel_ops(circuit, noise)):
        rho = _dm_apply_unitary(rho, gate_matrix(gate), gate.qubits, n)
        if op is None:
            continue
        ch, qubits = op
        if isinstance(ch, Depolarizing):
            if ch.p > 0:
                rho = _dm_depolarize(rho, qubits, ch.p, n)
        elif ch.prob > 0:
            kraus = ch.kraus()
            for q in qubits:
                relaxed = _dm_apply_kraus(rho, kraus, q, n)
                rho = (1 - ch.prob) * rho + ch.prob * relaxed
    return rho.reshape(2 ** n, 2 ** n)


def _mix_pairs(r, u):
    # r[:, 0, :] and r[:, 1, :] are the two halves of the indexed wire
    out = np.empty_like(r)
    a, b = r[:, 0, :], r[:, 1, :]
    out[:, 0, :] = u[0, 0] * a + u[0, 1] * b
    out[:, 1, :] = u[1, 0] * a + u[1, 1] * b
    return out


def _left(rho, u, q, n):
    # u acting on the row index of wire q
    return _mix_pairs(rho.reshape(2 ** q, 2, -1), u).reshape(rho.shape)


def _right_dagger(rho, u, q, n):
    # rho @ u^dagger, i.e. conj(u) acting on the column index of wire q
    return _mix_pairs(rho.reshape(-1, 2, 2 ** (n - 1 - q)), u.conj()).reshape(rho.shape)


@lru_cache(maxsize=64)
def _cz_mask(n, a, b):
    idx = np.arange(2 ** n)
    both = ((idx >> (n - 1 - a)) & 1) & ((idx >> (n - 1 - b)) & 1)
    sign = 1.0 - 2.0 * both
    return np.outer(sign, sign)


@lru_cache(maxsize=64)
def _cnot_perm(n, c, t):
    idx = np.arange(2 ** n)
    flip = ((idx >> (n - 1 - c)) & 1) << (n - 1 - t)
    return idx ^ flip


def _relax(rho, ch, q, n):
    """``(1-prob) rho + prob * T(rho)`` for thermal relaxation ``T`` on wire ``q``."""
    g, pz, p = ch.damping, ch.phase_flip, ch.prob
    coherence = (1 - p) + p * math.sqrt(1 - g) * (1 - 2 * pz)
    lead, trail = 2 ** q, 2 ** (n - 1 - q)
    r = rho.reshape(lead, 2, trail, lead, 2, trail)
    out = r.copy()
    out[:, 0, :, :, 0, :] += p * g * r[:, 1, :, :, 1, :]
    out[:, 1, :, :, 1, :] *= 1 - p * g
    out[:, 0, :, :, 1, :] *= coherence
    out[:, 1, :, :, 0, :] *= coherence
    return out.reshape(rho.shape)


def _depolarize(rho, qubits, p, n):
    """``(1-p) rho + p Tr_qubits(rho) (x) I/d``."""
    t = rho.reshape((2,) * (2 * n))
    blocks = list(itertools.product((0, 1), repeat=len(qubits)))

    def at(values_row, values_col):
        idx = [slice(None)] * (2 * n)
        for q, vr, vc in zip(qubits, values_row, values_col):
            idx[q] = vr
            idx[q + n] = vc
        return tuple(idx)

    traced = sum(t[at(x, x)] for x in blocks)
    out = (1 - p) * t
    for x in blocks:
        out[at(x, x)] += p / len(blocks) * traced
    return out.reshape(rho.shape)


def density_matrix(circuit: Circuit, noise: NoiseModel | None) -> np.ndarray:
    """Noise-averaged final state as a ``(2^n, 2^n)`` matrix.

    Equivalent to averaging pure-state trajectories in which each noisy
    gate fires its channel with the configured probability.
    """
    n = circuit.qubit_count
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1
    for gate, op in zip(circuit.gates, _channel_ops(circuit, noise)):
        q = gate.qubits
        if gate.kind == "CZ":
            rho = rho * _cz_mask(n, *q)
        elif gate.kind == "CNOT":
            perm = _cnot_perm(n, *q)
            rho = rho[perm][:, perm]
        else:
            u = gate_matrix(gate)
            rho = _right_dagger(_left(rho, u, q[0], n), u, q[0], n)
        if op is None:
            continue
        ch, qubits = op
        if isinstance(ch, Depolarizing):
            if ch.p > 0:
                rho = _depolarize(rho, qubits, ch.p, n)
        elif ch.prob > 0:
            for w in qubits:
                rho = _relax(rho, ch, w, n)
    return rho


def _normalized(probs):
    probs = np.clip(np.asarray(probs, dtype=float), 0, None)
    return probs / probs.sum()


@lru_cache(maxsize=8192)
def _outcome_distribution(circuit, noise, basis):
    """Per-shot outcome probabilities in the rotated basis, or None when
    the circuit needs explicit trajectories."""
    n = circuit.qubit_count
    noisy = noise is not None and any(g.kind in noise.kinds for g in circuit.gates)
    if not noisy:
        psi = _rotate_sv(statevector(circuit), basis)
        return _normalized(np.abs(psi) ** 2)
    if n > DENSITY_MATRIX_LIMIT:
        return None
    rho = density_matrix(circuit, noise).reshape((2,) * (2 * n))
    for q, b in enumerate(basis):
        if b in _BASIS_ROTATION:
            rho = _dm_apply_unitary(rho, _BASIS_ROTATION[b], (q,), n)
    return _normalized(np.diagonal(rho.reshape(2 ** n, 2 ** n)).real)


def outcome_probabilities(circuit: Circuit, noise: NoiseModel | None = None,
                          observable: Observable | str | None = None) -> np.ndarray:
    """Exact per-shot outcome distribution (measurement basis of ``observable``;
    computational basis when omitted)."""
    _check_width(circuit, DEFAULT_QUBIT_LIMIT)
    basis = "Z" * circuit.qubit_count if observable is None else \
        _measurement_basis(_resolve_observable(circuit, observable))
    dist = _outcome_distribution(circuit, noise, basis)
    if dist is None:
        rho = density_matrix(circuit, noise)
        if set(basis) != {"Z"}:
            raise CapacityError("rotated-basis distribution too wide for the density matrix")
        dist = _normalized(np.diagonal(rho).real)
    return dist


# ---------------------------------------------------------------- trajectories


def _trajectory_counts(circuit, noise, basis, shots, rng):
    n = circuit.qubit_count
    ops = _channel_ops(circuit, noise)
    noisy_idx = [i for i, op in enumerate(ops) if op is not None]
    fire_prob = np.array([
        ops[i][0].p if isinstance(ops[i][0], Depolarizing) else ops[i][0].prob
        for i in noisy_idx
    ])
    fired = rng.random((shots, len(noisy_idx))) < fire_prob
    clean = ~fired.any(axis=1)
    counts = np.zeros(2 ** n, dtype=np.int64)
    n_clean = int(clean.sum())
    if n_clean:
        psi = _rotate_sv(statevector(circuit), basis)
        counts += rng.multinomial(n_clean, _normalized(np.abs(psi) ** 2))
    slot = {g: k for k, g in enumerate(noisy_idx)}
    for shot in np.flatnonzero(~clean):
        psi = np.zeros((2,) * n, dtype=complex)
        psi[(0,) * n] = 1
        for gi, gate in enumerate(circuit.gates):
            psi = _apply_gate_sv(psi, gate)
            if gi in slot and fired[shot, slot[gi]]:
                psi = _fire_channel(psi, *ops[gi], rng)
        psi = _rotate_sv(psi.reshape(-1), basis)
        probs = _normalized(np.abs(psi) ** 2)
        counts[int(rng.choice(2 ** n, p=probs))] += 1
    return counts


def _fire_channel(psi, ch, qubits, rng):
    if isinstance(ch, Depolarizing):
        for q in qubits:
            label = "IXYZ"[int(rng.integers(4))]
            if label != "I":
                psi = _apply(psi, PAULI_MATRICES[label], (q,))
        return psi
    kraus = ch.kraus()
    for q in qubits:
        branches = [_apply(psi, k, (q,)) for k in kraus]
        weights = np.array([float(np.vdot(b, b).real) for b in branches])
        pick = int(rng.choice(len(branches), p=weights / weights.sum()))
        psi = branches[pick] / math.sqrt(weights[pick])
    return psi


# ---------------------------------------------------------------- sampling API


@dataclass(frozen=True)
class Counts:
    counts: dict
    shots: int

    def __post_init__(self):
        if sum(self.counts.values()) != self.shots:
            raise InvalidArgument("counts do not sum to the shot total")

    def probabilities(self) -> dict:
        return {k: v / self.shots for k, v in self.counts.items()}

    def to_dict(self) -> dict:
        return dict(sorted(self.counts.items()))


def _counts_vector(circuit, basis, shots, noise, rng):
    if shots < 1:
        raise InvalidArgument("shots must be >= 1")
    _check_width(circuit, DEFAULT_QUBIT_LIMIT)
    rng = as_generator(rng)
    dist = _outcome_distribution(circuit, noise, basis)
    if dist is not None:
        return rng.multinomial(shots, dist)
    return _trajectory_counts(circuit, noise, basis, shots, rng)


def sampled_expectation(circuit: Circuit, observable: Observable | str | None = None,
                        shots: int = 1000, noise: NoiseModel | None = None,
                        rng=None) -> float:
    """Shot-averaged eigenvalue of ``observable``; deterministic per seed."""
    observable = _resolve_observable(circuit, observable)
    if not observable.support:
        return 1.0
    counts = _counts_vector(circuit, _measurement_basis(observable), shots, noise, rng)
    signs = parity_signs(circuit.qubit_count, observable.support)
    return float(counts @ signs) / shots


def sample_counts(circuit: Circuit, shots: int = 1000, noise: NoiseModel | None = None,
                  rng=None) -> Counts:
    """Bitstring counts over all wires in the computational basis."""
    n = circuit.qubit_count
    vec = _counts_vector(circuit, "Z" * n, shots, noise, rng)
    nz = np.flatnonzero(vec)
    return Counts({format(int(i), f"0{n}b"): int(vec[i]) for i in nz}, shots)
