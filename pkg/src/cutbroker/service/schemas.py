"""Request and response bodies of the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..harness.config import ExperimentConfig


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SimulateRequest(_Body):
    qasm: str
    shots: int = Field(default=1000, ge=1)
    seed: int = Field(default=0, ge=0)
    noise: bool = False
    observable: str | None = None  # defaults to Z on every wire
    counts: bool = True


class SimulateResponse(BaseModel):
    qubits: int
    gates: int
    observable: str
    shots: int
    expectation: float
    exact: float | None = None  # noiseless value when the width allows it
    counts: dict[str, int] | None = None


class CutCheckRequest(_Body):
    qasm: str
    cuts: list[tuple[int, int]] = Field(min_length=1)  # (wire, position)
    observable: str | None = None


class FragmentInfo(BaseModel):
    index: int
    width: int
    gates: int
    wires: list[tuple[int, int]]  # (original wire, segment)
    measured_cuts: list[int]
    prepared_cuts: list[int]


class CutCheckResponse(BaseModel):
    qubits: int
    cuts: int
    terms: int
    variants: int
    fragments: list[FragmentInfo]
    reconstructed: float | None = None
    exact: float | None = None
    tolerance: float = 1e-9
    # None when the circuit is too wide for an exact reference
    within_tolerance: bool | None = None


class IntegrityRequest(_Body):
    config: ExperimentConfig = ExperimentConfig()


class ConfidentialityRequest(_Body):
    config: ExperimentConfig = ExperimentConfig()
    comparisons: list[str] | None = None


class ErrorBody(BaseModel):
    error: str
    kind: str
