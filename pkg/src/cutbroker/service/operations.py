"""What the service does, independent of HTTP; the CLI calls these in process."""

from __future__ import annotations

from ..circuits import parse_qasm_subset
from ..cutting import cut, fragment_variants, reconstruct
from ..harness.sweeps import SweepReport, run_confidentiality_sweep, run_integrity_sweep
from ..simulator import (DEFAULT_QUBIT_LIMIT, NoiseModel, exact_expectation,
                         sample_counts, sampled_expectation)
from .schemas import (ConfidentialityRequest, CutCheckRequest, CutCheckResponse,
                      FragmentInfo, IntegrityRequest, SimulateRequest,
                      SimulateResponse)

# exact reference values are only computed up to this width
EXACT_LIMIT = DEFAULT_QUBIT_LIMIT
CUT_CHECK_TOLERANCE = 1e-9


def _circuit(qasm, observable):
    circuit = parse_qasm_subset(qasm)
    if observable is not None:
        circuit = circuit.with_observable(observable)
    return circuit


def simulate(req: SimulateRequest) -> SimulateResponse:
    circuit = _circuit(req.qasm, req.observable)
    noise = NoiseModel.default() if req.noise else None
    value = sampled_expectation(circuit, shots=req.shots, noise=noise, rng=req.seed)
    counts = None
    if req.counts:
        counts = sample_counts(circuit, req.shots, noise, rng=req.seed).to_dict()
    exact = exact_expectation(circuit) if circuit.qubit_count <= EXACT_LIMIT else None
    return SimulateResponse(
        qubits=circuit.qubit_count, gates=len(circuit.gates),
        observable=circuit.observable.paulis, shots=req.shots,
        expectation=value, exact=exact, counts=counts,
    )


def cut_check(req: CutCheckRequest) -> CutCheckResponse:
    circuit = _circuit(req.qasm, req.observable).with_cuts(req.cuts)
    fset = cut(circuit)
    variants = fragment_variants(fset)
    fragments = [
        FragmentInfo(
            index=f.index, width=f.width, gates=len(f.circuit.gates),
            wires=list(f.segments),
            measured_cuts=[j for j, _ in f.up_stubs],
            prepared_cuts=[j for j, _ in f.down_stubs],
        )
        for f in fset.fragments
    ]
    reconstructed = exact = within = None
    if circuit.qubit_count <= EXACT_LIMIT:
        exact = exact_expectation(circuit)
        reconstructed = reconstruct({v.key: exact_expectation(v.circuit) for v in variants}, fset)
        within = abs(reconstructed - exact) < CUT_CHECK_TOLERANCE
    return CutCheckResponse(
        qubits=circuit.qubit_count, cuts=fset.cut_count, terms=fset.term_count,
        variants=len(variants), fragments=fragments,
        reconstructed=reconstructed, exact=exact,
        tolerance=CUT_CHECK_TOLERANCE, within_tolerance=within,
    )


def integrity(req: IntegrityRequest) -> SweepReport:
    return run_integrity_sweep(req.config)


def confidentiality(req: ConfidentialityRequest) -> SweepReport:
    return run_confidentiality_sweep(req.config, req.comparisons)
