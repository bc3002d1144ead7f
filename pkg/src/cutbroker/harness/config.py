"""Experiment configuration: a validated, JSON-serializable description of one sweep."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..broker import (FAKE_MODES, POLICY_KINDS, AllocationPolicy, FakePolicy,
                      QpuProfile)
from ..circuits import (Circuit, CutPoint, build_alt_benchmark, build_benchmark,
                        build_deutsch_jozsa, build_ghz, dj_cut_points,
                        ghz_cut_points, parse_qasm_subset)
from ..errors import ConfigError, CutBrokerError
from ..metrics import DEFAULT_BINS, DEFAULT_THRESHOLD
from ..simulator import NoiseModel

DEFAULT_QPU_COUNT = 6
DEFAULT_COMPARISONS = ("alt_benchmark", "ghz:15", "dj:15")


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CircuitSpec(_Model):
    kind: Literal["benchmark", "alt_benchmark", "ghz", "dj", "qasm_file"] = "benchmark"
    n: int | None = Field(default=None, ge=1)
    # (wire, position) pairs replacing the builder's cut points
    cuts: list[tuple[int, int]] | None = None
    oracle: str = "balanced_parity"
    mask: int | None = None
    path: str | None = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind in ("ghz", "dj") and self.n is None:
            raise ValueError(f"circuit kind {self.kind!r} needs n")
        if self.kind == "ghz" and self.n < 2:
            raise ValueError("a GHZ circuit needs n >= 2")
        if self.kind == "qasm_file" and not self.path:
            raise ValueError("circuit kind 'qasm_file' needs path")
        return self

    @classmethod
    def parse(cls, text: str) -> CircuitSpec:
        """Shorthand used on the command line: ``benchmark``, ``ghz:15``, ``dj:15`` or a QASM path."""
        kind, _, arg = text.partition(":")
        if kind in ("benchmark", "alt_benchmark"):
            return cls(kind=kind)
        if kind in ("ghz", "dj"):
            try:
                return cls(kind=kind, n=int(arg))
            except ValueError:
                raise ConfigError(f"circuit {text!r}: expected {kind}:<qubits>") from None
        return cls(kind="qasm_file", path=text)

    @property
    def label(self) -> str:
        if self.kind in ("ghz", "dj"):
            return f"{self.kind}:{self.n}"
        if self.kind == "qasm_file":
            return Path(self.path).name
        return self.kind

    def build(self) -> Circuit:
        try:
            if self.kind == "benchmark":
                circuit = build_benchmark()
            elif self.kind == "alt_benchmark":
                circuit = build_alt_benchmark()
            elif self.kind == "ghz":
                circuit = build_ghz(self.n)
                circuit = circuit.with_cuts(ghz_cut_points(self.n))
            elif self.kind == "dj":
                circuit = build_deutsch_jozsa(self.n, self.oracle, self.mask)
                circuit = circuit.with_cuts(dj_cut_points(circuit))
            else:
                try:
                    text = Path(self.path).read_text()
                except OSError as exc:
                    raise ConfigError(f"circuit.path: cannot read {self.path}: {exc}") from exc
                circuit = parse_qasm_subset(text)
            if self.cuts is not None:
                circuit = circuit.with_cuts(CutPoint(w, p) for w, p in self.cuts)
        except ConfigError:
            raise
        except CutBrokerError as exc:
            raise ConfigError(f"circuit: {exc}") from exc
        return circuit


class QpuSpec(_Model):
    id: str = Field(min_length=1)
    noise: bool = True
    cs: float = Field(default=10.0, ge=0, le=10)  # operator-supplied confidentiality score

    def profile(self, malicious: bool = False) -> QpuProfile:
        return QpuProfile(
            self.id,
            "malicious" if malicious else "honest",
            NoiseModel.default() if self.noise else None,
            confidentiality_score=self.cs,
        )


class PolicySpec(_Model):
    kind: Literal[POLICY_KINDS] = "uniform"
    replication: int = Field(default=1, ge=1)

    def build(self) -> AllocationPolicy:
        return AllocationPolicy(self.kind, self.replication)


class FakeSpec(_Model):
    mode: Literal[FAKE_MODES] = "none"
    multiplier: int = Field(default=0, ge=0)

    def build(self) -> FakePolicy:
        return FakePolicy(self.mode, self.multiplier)


def _default_qpus():
    return [QpuSpec(id=f"qpu{i}") for i in range(DEFAULT_QPU_COUNT)]


class ExperimentConfig(_Model):
    circuit: CircuitSpec = CircuitSpec()
    qpus: list[QpuSpec] = Field(default_factory=_default_qpus, min_length=1)
    policy: PolicySpec = PolicySpec()
    fakes: FakeSpec = FakeSpec()
    shots: int = Field(default=1000, ge=1)
    evaluations: int = Field(default=200, ge=1)
    saboteur_range: tuple[int, int] | None = None  # default: 0 .. number of QPUs
    master_seed: int = Field(default=0, ge=0)
    threshold: float = Field(default=DEFAULT_THRESHOLD, gt=0, le=1)
    probes: int = Field(default=8, ge=1)
    tamper_probes: bool = True
    bins: int = Field(default=DEFAULT_BINS, ge=2)
    distribution: Literal["binned", "categorical"] = "binned"
    # socket: every QPU runs as a local NDJSON worker reached over TCP
    transport: Literal["inprocess", "socket"] = "inprocess"
    comparisons: list[CircuitSpec] = Field(
        default_factory=lambda: [CircuitSpec.parse(c) for c in DEFAULT_COMPARISONS]
    )

    @model_validator(mode="after")
    def _check(self):
        ids = [q.id for q in self.qpus]
        if len(set(ids)) != len(ids):
            raise ValueError("QPU ids must be unique")
        if self.saboteur_range is not None:
            lo, hi = self.saboteur_range
            if not 0 <= lo <= hi:
                raise ValueError(f"saboteur_range [{lo}, {hi}] must satisfy 0 <= lo <= hi")
            if hi > len(self.qpus):
                raise ValueError(f"saboteur_range upper bound {hi} exceeds the {len(self.qpus)} QPUs")
        return self

    @property
    def saboteurs(self) -> range:
        lo, hi = self.saboteur_range or (0, len(self.qpus))
        return range(lo, hi + 1)

    def profiles(self, saboteurs: int = 0) -> list[QpuProfile]:
        """QPU profiles with the first ``saboteurs`` ids (in sorted order) malicious."""
        bad = set(sorted(q.id for q in self.qpus)[:saboteurs])
        return [q.profile(q.id in bad) for q in self.qpus]

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "; ".join(lines)


def parse_config(data) -> ExperimentConfig:
    """Validate a mapping; errors name the offending field path."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)
