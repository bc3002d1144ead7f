import math

import pytest
from hypothesis import given, settings

from cutbroker.circuits import (CNOT, Circuit, CutPoint, H, RX, RY,
                                build_alt_benchmark, build_benchmark,
                                build_deutsch_jozsa, build_ghz, dj_cut_points,
                                ghz_cut_points)
from cutbroker.cutting import (PAULIS, PREP_STATES, cut, enumerate_variants,
                               fragment_variants, is_out_of_range,
                               parse_variant_key, reconstruct, required_keys,
                               variant_key)
from cutbroker.errors import CutError, IncompleteResultsError
from cutbroker.simulator import exact_expectation, sampled_expectation

from strategies import cuttable_circuit, seeds


def exact_results(fset):
    return {v.key: exact_expectation(v.circuit) for v in fragment_variants(fset)}


def bell_with_cut(observable="ZZ"):
    return Circuit(2, (H(0), CNOT(0, 1)), cuts=(CutPoint(0, 0),), observable=observable)


def test_bell_cut_gives_two_fragments():
    fset = cut(bell_with_cut())
    assert len(fset.fragments) == 2
    up, down = fset.fragments
    assert [g.kind for g in up.circuit.gates] == ["H"]
    assert up.width == 1 and up.up_stubs == ((0, 0),)
    assert [g.kind for g in down.circuit.gates] == ["CNOT"]
    assert down.width == 2 and down.down_stubs == ((0, 0),)
    assert fset.wiring == (((0, 0), (1, 0)),)


@pytest.mark.parametrize("obs", ["ZZ", "XX", "YY", "ZI", "IZ", "XY", "II"])
def test_bell_reconstruction_matches_uncut(obs):
    c = bell_with_cut(obs)
    fset = cut(c)
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(c), abs=1e-9)


def test_bell_zz_reconstructs_to_one():
    fset = cut(bell_with_cut())
    assert reconstruct(exact_results(fset), fset) == pytest.approx(1.0, abs=1e-9)


def test_ghz4_single_cut_matches_uncut():
    c = build_ghz(4).with_cuts([CutPoint(0, 1)])
    fset = cut(c)
    assert fset.cut_count == 1
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(c), abs=1e-9)


def test_term_counts():
    assert len(enumerate_variants(cut(bell_with_cut()))) == 4
    fset = cut(build_benchmark())
    assert fset.cut_count == 2 and fset.term_count == 16
    terms = enumerate_variants(fset)
    assert len(terms) == 16
    assert {t.coefficient for t in terms} == {0.25}
    assert {t.assignment for t in terms} == {(a, b) for a in PAULIS for b in PAULIS}


def test_single_cut_preparations_are_the_six_eigenstates():
    fset = cut(bell_with_cut())
    prepared = {dict(v.assignment)[0] for v in fragment_variants(fset) if v.fragment == 1}
    assert prepared == set(PREP_STATES)


def test_variant_coefficients_follow_half_per_cut():
    fset = cut(build_benchmark())
    for v in fragment_variants(fset):
        frag = fset.fragments[v.fragment]
        assert v.coefficient == 0.5 ** len(frag.up_stubs)


def test_benchmark_fragments_are_narrower():
    c = build_benchmark()
    fset = cut(c)
    assert all(f.width < c.qubit_count for f in fset.fragments)
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(c), abs=1e-9)


@pytest.mark.parametrize("build", [
    build_alt_benchmark,
    lambda: build_ghz(15).with_cuts(ghz_cut_points(15)),
    lambda: (lambda d: d.with_cuts(dj_cut_points(d)))(build_deutsch_jozsa(15, "balanced_parity")),
])
def test_large_circuits_reconstruct_exactly(build):
    c = build()
    fset = cut(c)
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(c), abs=1e-9)


def test_every_gate_lands_in_exactly_one_fragment():
    c = build_benchmark()
    seen = sorted(i for f in cut(c).fragments for i in f.gate_indices)
    assert seen == list(range(len(c.gates)))


def test_no_cuts_is_an_error():
    with pytest.raises(CutError):
        cut(build_ghz(3))


def test_unseparable_cut_names_the_gate():
    # the CNOT after the cut re-joins wire 0 with wire 1, which already met it upstream
    c = Circuit(2, (CNOT(0, 1), RX(0.2, 0), CNOT(0, 1)), cuts=(CutPoint(0, 1),))
    with pytest.raises(CutError, match="gate 2: CNOT"):
        cut(c)


def test_back_to_back_cuts_rejected():
    c = Circuit(2, (H(0), RX(0.1, 1), CNOT(0, 1)), cuts=(CutPoint(0, 0), CutPoint(0, 1)))
    with pytest.raises(CutError, match="no gate between"):
        cut(c)


def test_missing_results_are_listed():
    fset = cut(bell_with_cut())
    results = exact_results(fset)
    dropped = sorted(results)[0]
    del results[dropped]
    with pytest.raises(IncompleteResultsError) as err:
        reconstruct(results, fset)
    assert err.value.missing == [dropped]


def test_all_zero_results_give_zero():
    fset = cut(build_benchmark())
    assert reconstruct({k: 0.0 for k in required_keys(fset)}, fset) == 0.0


def test_out_of_range_value_is_returned_unclamped():
    fset = cut(bell_with_cut())
    results = {k: 1.5 for k in required_keys(fset)}
    value = reconstruct(results, fset)
    assert value > 1 and is_out_of_range(value)


def test_variant_key_round_trip():
    for v in fragment_variants(cut(build_benchmark())):
        frag, assignment = parse_variant_key(v.key)
        assert frag == v.fragment and assignment == v.assignment
        assert variant_key(frag, assignment) == v.key
    assert variant_key(2, ()) == "frag2"
    assert parse_variant_key("frag1:cut0=X+,cut1=Z") == (1, ((0, "X+"), (1, "Z")))


@settings(max_examples=80)
@given(seeds)
def test_reconstruction_equals_uncut_expectation(seed):
    c = cuttable_circuit(seed)
    fset = cut(c)
    assert fset.cut_count == len(c.cuts)
    assert all(f.width <= c.qubit_count for f in fset.fragments)
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(c), abs=1e-9)


@settings(max_examples=40)
@given(seeds)
def test_reconstruction_ignores_result_insertion_order(seed):
    fset = cut(cuttable_circuit(seed))
    results = exact_results(fset)
    reversed_results = dict(reversed(list(results.items())))
    assert reconstruct(results, fset) == reconstruct(reversed_results, fset)


@pytest.mark.parametrize("seed", range(5))
def test_shot_noise_stays_inside_loose_bound(seed):
    c = cuttable_circuit(seed)
    fset = cut(c)
    shots = 4000
    results = {v.key: sampled_expectation(v.circuit, shots=shots, rng=seed * 1000 + i)
               for i, v in enumerate(fragment_variants(fset))}
    bound = 5 * 4 ** fset.cut_count / math.sqrt(shots)
    assert abs(reconstruct(results, fset) - exact_expectation(c)) <= bound


def test_measured_stub_rotations():
    # <X> of |+> read through the X-basis stub equals 1
    c = Circuit(2, (H(0), CNOT(0, 1)), cuts=(CutPoint(0, 0),))
    fset = cut(c)
    by_key = {v.key: v for v in fragment_variants(fset)}
    assert exact_expectation(by_key["frag0:cut0=X"].circuit) == pytest.approx(1.0)
    assert exact_expectation(by_key["frag0:cut0=Z"].circuit) == pytest.approx(0.0, abs=1e-12)
    ry = Circuit(1, (RY(0.4, 0), RX(0.3, 0)), cuts=(CutPoint(0, 0),))
    fset = cut(ry)
    assert reconstruct(exact_results(fset), fset) == pytest.approx(exact_expectation(ry), abs=1e-12)
