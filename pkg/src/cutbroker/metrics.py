"""Distributions, Hellinger distance and the derived sweep summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, SelfInconsistencyError

DEFAULT_BINS = 64
DEFAULT_THRESHOLD = 0.25


@dataclass(frozen=True)
class Distribution:
    """Probabilities over equal-width bins (``edges``) or named outcomes (``labels``)."""

    probs: tuple[float, ...]
    edges: tuple[float, ...] | None = None
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if (self.edges is None) == (self.labels is None):
            raise InvalidArgument("a distribution has either bin edges or outcome labels")
        if any(p < 0 for p in probs):
            raise InvalidArgument("probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise InvalidArgument(f"probabilities sum to {sum(probs)}, not 1")
        if self.edges is not None:
            edges = tuple(float(e) for e in self.edges)
            object.__setattr__(self, "edges", edges)
            if len(edges) != len(probs) + 1:
                raise InvalidArgument("need exactly one more edge than bins")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise InvalidArgument("bin edges must be strictly increasing")
        else:
            object.__setattr__(self, "labels", tuple(self.labels))
            if len(self.labels) != len(probs):
                raise InvalidArgument("need one label per probability")

    @property
    def support(self):
        return self.edges if self.edges is not None else self.labels

    def to_dict(self) -> dict:
        if self.edges is not None:
            return {"edges": list(self.edges), "probs": list(self.probs)}
        return {"labels": list(self.labels), "probs": list(self.probs)}


def hellinger(p: Distribution, q: Distribution) -> float:
    if p.support != q.support:
        raise InvalidArgument("distributions must share bin edges or outcome labels")
    a = np.sqrt(np.asarray(p.probs))
    b = np.sqrt(np.asarray(q.probs))
    h = math.sqrt(float(np.sum((a - b) ** 2)) / 2)
    return min(1.0, h)


def _histogram(samples, edges):
    counts, _ = np.histogram(samples, bins=edges)
    return tuple(counts / counts.sum())


def bin_pair(samples_a, samples_b, bins: int = DEFAULT_BINS) -> tuple[Distribution, Distribution]:
    """Histogram two sample sets over shared equal-width bins spanning both."""
    a = np.asarray(samples_a, dtype=float)
    b = np.asarray(samples_b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise InvalidArgument("both sample sets must be nonempty")
    if bins < 2:
        raise InvalidArgument("need at least 2 bins")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise InvalidArgument("samples must be finite")
    lo = float(min(a.min(), b.min()))
    hi = float(max(a.max(), b.max()))
    if hi <= lo:
        # every sample is the same number
        edges = (lo - 0.5, lo + 0.5)
        one = Distribution((1.0,), edges=edges)
        return one, one
    edges = np.linspace(lo, hi, bins + 1)
    edges_t = tuple(float(e) for e in edges)
    return (Distribution(_histogram(a, edges), edges=edges_t),
            Distribution(_histogram(b, edges), edges=edges_t))


def categorical_pair(counts_a: dict, counts_b: dict) -> tuple[Distribution, Distribution]:
    """Distributions over the union of observed outcome labels."""
    labels = tuple(sorted(set(counts_a) | set(counts_b)))
    if not labels:
        raise InvalidArgument("both count maps are empty")
    total_a = sum(counts_a.values())
    total_b = sum(counts_b.values())
    if total_a <= 0 or total_b <= 0:
        raise InvalidArgument("both count maps need a positive total")
    pa = tuple(counts_a.get(k, 0) / total_a for k in labels)
    pb = tuple(counts_b.get(k, 0) / total_b for k in labels)
    return Distribution(pa, labels=labels), Distribution(pb, labels=labels)


def tvd_bound(h: float) -> float:
    """Upper bound on total variation distance implied by Hellinger ``h``."""
    if not 0 <= h <= 1:
        raise InvalidArgument(f"Hellinger distance must lie in [0, 1], got {h}")
    return min(1.0, math.sqrt(2) * h)


def summarize(samples) -> dict:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InvalidArgument("cannot summarize an empty sample set")
    q1, median, q3 = np.percentile(x, [25, 50, 75])
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "q1": float(q1),
        "median": float(median),
        "q3": float(q3),
        "min": float(x.min()),
        "max": float(x.max()),
    }


def tolerated_attackers(distances, threshold: float = DEFAULT_THRESHOLD) -> int:
    """Largest saboteur count ``t`` with every distance up to ``t`` within threshold.

    ``distances`` maps saboteur counts ``0..N`` to Hellinger distances (a
    sequence is read as index -> distance).
    """
    if not isinstance(distances, dict):
        distances = dict(enumerate(distances))
    keys = sorted(distances)
    if not keys or keys != list(range(keys[-1] + 1)):
        raise InvalidArgument("distances must cover saboteur counts 0..N contiguously")
    if distances[0] > threshold:
        raise SelfInconsistencyError(
            f"ground truth differs from itself (distance {distances[0]:.4f} > {threshold})"
        )
    tolerated = 0
    for s in keys[1:]:
        if distances[s] > threshold:
            break
        tolerated = s
    return tolerated
