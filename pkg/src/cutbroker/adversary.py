"""Attack behaviours: result tampering (integrity) and passive observation (confidentiality)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .rng import as_generator

TAMPER_BASE = 1.5
TAMPER_SPREAD = 1.0


@dataclass
class TamperModel:
    """Multiplies each reported result by ``base + r`` with ``r ~ U[0, spread)``."""

    base: float = TAMPER_BASE
    spread: float = TAMPER_SPREAD
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.spread < 0:
            raise InvalidArgument("tamper spread must be nonnegative")
        self.rng = as_generator(self.rng)
        self.calls = 0

    @property
    def upper(self):
        return self.base + self.spread

    def multiplier(self) -> float:
        m = self.base + self.spread * float(self.rng.random())
        # base + spread * r can round up to the open upper bound
        if m >= self.upper and self.spread > 0:
            m = math.nextafter(self.upper, -math.inf)
        return m

    def multipliers(self, size: int) -> np.ndarray:
        m = self.base + self.spread * self.rng.random(size)
        if self.spread > 0:
            np.minimum(m, np.nextafter(self.upper, -np.inf), out=m)
        return m


def tamper(value: float, model: TamperModel) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise InvalidArgument(f"cannot tamper a non-finite value ({value})")
    model.calls += 1
    return model.multiplier() * value


@dataclass(frozen=True)
class ObservationSet:
    qpu_id: str
    samples: tuple[float, ...]

    def __len__(self):
        return len(self.samples)


def observe(qpu_id: str, entries) -> ObservationSet:
    """The values a QPU itself saw, in dispatch order.

    ``entries`` are dispatch-log records; only their reported value is kept,
    so nothing the broker knows about real versus decoy survives.
    """
    return ObservationSet(qpu_id, tuple(float(e.value) for e in entries))
