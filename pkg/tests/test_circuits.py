import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cutbroker.circuits import (CNOT, Circuit, CutPoint, Gate, Observable, RX,
                                build_alt_benchmark, build_benchmark,
                                build_deutsch_jozsa, build_ghz, build_probe,
                                dj_cut_points, emit_qasm, ghz_cut_points,
                                parse_qasm_subset, probe_from_angle,
                                random_circuit)
from cutbroker.errors import (CircuitValidationError, InvalidArgument,
                              QasmParseError)
from cutbroker.simulator import exact_expectation, sample_counts, statevector

from strategies import plain_circuit, seeds


def test_gate_rejects_bad_arity_and_angles():
    with pytest.raises(CircuitValidationError):
        Gate("CNOT", (0,))
    with pytest.raises(CircuitValidationError):
        Gate("CZ", (1, 1))
    with pytest.raises(CircuitValidationError):
        Gate("RX", (0,))
    with pytest.raises(CircuitValidationError):
        Gate("H", (0,), (0.1,))
    with pytest.raises(CircuitValidationError):
        Gate("RY", (0,), (math.inf,))
    with pytest.raises(CircuitValidationError):
        Gate("SWAP", (0, 1))


def test_circuit_validation():
    with pytest.raises(CircuitValidationError):
        Circuit(0, ())
    with pytest.raises(CircuitValidationError):
        Circuit(2, (CNOT(0, 2),))
    with pytest.raises(CircuitValidationError):
        Circuit(2, (CNOT(0, 1),), observable="ZZZ")
    with pytest.raises(CircuitValidationError):
        Circuit(2, (CNOT(0, 1),), cuts=(CutPoint(0, 3),))
    with pytest.raises(CircuitValidationError):
        Circuit(2, (CNOT(0, 1),), cuts=((0, 0), (0, 0)))
    with pytest.raises(CircuitValidationError):
        Observable("ZQ")


def test_tuple_cuts_are_normalized():
    c = Circuit(2, (CNOT(0, 1),), cuts=((0, 0),))
    assert c.cuts == (CutPoint(0, 0),)


def test_ghz_structure():
    c = build_ghz(5)
    assert c.qubit_count == 5
    assert [g.kind for g in c.gates] == ["H"] + ["CNOT"] * 4
    assert c.observable.paulis == "ZZZZZ"
    with pytest.raises(InvalidArgument):
        build_ghz(1)


def test_ghz_cut_points_split_the_fanout():
    cuts = ghz_cut_points(15)
    assert len(cuts) == 2 and all(c.wire == 0 for c in cuts)
    assert cuts[0].position < cuts[1].position


def test_deutsch_jozsa_constant_always_measures_zeros():
    c = build_deutsch_jozsa(3, "constant0")
    assert c.qubit_count == 4
    assert c.observable.paulis == "ZZZI"
    counts = sample_counts(c, 512, rng=1)
    assert all(key[:3] == "000" for key in counts.counts)


def test_deutsch_jozsa_balanced_never_measures_zeros():
    c = build_deutsch_jozsa(3, "balanced_parity", mask=0b111)
    psi = statevector(c)
    # wire 0 is the most significant bit; the aux wire is the last one
    p000 = sum(abs(psi[i]) ** 2 for i in range(16) if i >> 1 == 0)
    assert p000 == pytest.approx(0.0, abs=1e-12)


def test_deutsch_jozsa_constant1_matches_constant0():
    a = statevector(build_deutsch_jozsa(1, "constant0"))
    b = statevector(build_deutsch_jozsa(1, "constant1"))
    probs_a = np.abs(a) ** 2
    probs_b = np.abs(b) ** 2
    np.testing.assert_allclose(probs_a.reshape(2, 2).sum(1), probs_b.reshape(2, 2).sum(1), atol=1e-12)


def test_deutsch_jozsa_rejects_bad_oracles():
    with pytest.raises(InvalidArgument):
        build_deutsch_jozsa(3, "mystery")
    with pytest.raises(InvalidArgument):
        build_deutsch_jozsa(3, "balanced_parity", mask=0)
    with pytest.raises(InvalidArgument):
        build_deutsch_jozsa(0)


def test_dj15_parity_readout_is_minus_one():
    c = build_deutsch_jozsa(15, "balanced_parity")
    assert c.qubit_count == 16
    assert exact_expectation(c) == pytest.approx(-1.0, abs=1e-9)
    cuts = dj_cut_points(c)
    assert len(cuts) == 2 and all(cp.wire == 15 for cp in cuts)


def test_benchmark_has_two_cuts_on_wires_1_and_3():
    c = build_benchmark()
    assert c.qubit_count == 15
    assert sorted(cp.wire for cp in c.cuts) == [1, 3]
    assert c.observable.paulis == "Z" * 15


def test_benchmark_is_deterministic():
    assert build_benchmark() == build_benchmark()
    values = {exact_expectation(build_benchmark()) for _ in range(3)}
    assert len(values) == 1


def test_alt_benchmark_shape():
    c = build_alt_benchmark()
    assert c.qubit_count == 15 and len(c.cuts) == 2
    noisy = sum(g.kind in ("RX", "RY", "CNOT") for g in c.gates)
    assert noisy == len(c.gates)


def test_probe_values():
    c, expected = probe_from_angle(math.pi)
    assert expected == pytest.approx(-1.0)
    assert exact_expectation(c) == pytest.approx(-1.0)
    c, expected = probe_from_angle(math.pi / 3)
    assert expected == pytest.approx(0.5)
    assert exact_expectation(c) == pytest.approx(0.5)


@given(seeds)
def test_probe_expectation_is_guarded_and_exact(seed):
    c, expected = build_probe(seed)
    assert abs(expected) >= 0.1
    assert exact_expectation(c) == pytest.approx(expected, abs=1e-12)
    theta = c.gates[0].params[0]
    assert 0.2 <= theta <= 2.9


def test_parse_bell_pair():
    c = parse_qasm_subset("qreg q[2]; h q[0]; cx q[0],q[1];")
    assert c.qubit_count == 2
    assert [(g.kind, g.qubits) for g in c.gates] == [("H", (0,)), ("CNOT", (0, 1))]
    assert c.observable.paulis == "ZZ" and c.cuts == ()


def test_parse_symbolic_pi_is_exact():
    c = parse_qasm_subset("qreg q[1];\nrx(pi/2) q[0];\nry(3*pi/4) q[0];\nrz(-pi) q[0];\nrx(0.25) q[0];")
    assert [g.params[0] for g in c.gates] == [math.pi / 2, 3 * math.pi / 4, -math.pi, 0.25]


def test_parse_skips_headers_and_comments():
    text = 'OPENQASM 2.0;\ninclude "qelib1.inc";\nqreg q[1]; // one wire\nx q[0];\n'
    assert len(parse_qasm_subset(text).gates) == 1


def test_parse_errors_carry_line_numbers():
    with pytest.raises(QasmParseError) as err:
        parse_qasm_subset("qreg q[2];\nh q[0];\nmeasure q[0];")
    assert err.value.line == 3
    with pytest.raises(QasmParseError):
        parse_qasm_subset("qreg q[2];\nrx q[0];")
    with pytest.raises(QasmParseError):
        parse_qasm_subset("qreg q[2];\nh q[0]")
    with pytest.raises(QasmParseError):
        parse_qasm_subset("h q[0];")


def test_parse_out_of_range_is_validation_error():
    with pytest.raises(CircuitValidationError):
        parse_qasm_subset("qreg q[4]; cz q[0],q[5];")


@given(seeds, st.integers(1, 6), st.integers(0, 30))
def test_emit_parse_round_trip(seed, width, n_gates):
    c = plain_circuit(seed, width, n_gates)
    assert parse_qasm_subset(emit_qasm(c)).gates == c.gates


@given(seeds, st.integers(1, 6), st.integers(1, 30))
def test_random_circuits_are_valid_and_reproducible(seed, width, n_gates):
    a = random_circuit(width, n_gates, seed)
    b = random_circuit(width, n_gates, seed)
    assert a == b
    assert len(a.gates) == n_gates
    assert all(q < width for g in a.gates for q in g.qubits)


def test_with_observable_and_appended():
    c = Circuit(2, (RX(0.1, 0),))
    assert c.with_observable("XI").observable.paulis == "XI"
    assert len(c.appended([CNOT(0, 1)]).gates) == 2
