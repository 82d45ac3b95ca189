"""Pixel residual statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .measurement import unstack_uv


def residuals(predicted, actual) -> np.ndarray:
    """Per-feature Euclidean pixel distances between two stacked measurements.

    Missing features (NaN) give NaN distances.
    """
    p = np.asarray(predicted, dtype=float)
    a = np.asarray(actual, dtype=float)
    if p.shape != a.shape:
        raise ValidationError(f"measurement layouts differ: {p.shape} vs {a.shape}")
    return np.linalg.norm(unstack_uv(p) - unstack_uv(a), axis=-1)


@dataclass(frozen=True)
class ResidualReport:
    per_feature: np.ndarray  # (frames, n), NaN where unobserved

    @classmethod
    def from_pixels(cls, predicted, actual) -> "ResidualReport":
        """Build from ``(frames, n, 2)`` predicted and measured pixel arrays."""
        p = np.asarray(predicted, dtype=float)
        a = np.asarray(actual, dtype=float)
        if p.shape != a.shape:
            raise ValidationError(f"prediction/measurement shapes differ: {p.shape} vs {a.shape}")
        return cls(np.linalg.norm(p - a, axis=-1))

    @property
    def average(self) -> np.ndarray:
        return _nan_reduce(np.nanmean, self.per_feature)

    @property
    def worst(self) -> np.ndarray:
        return _nan_reduce(np.nanmax, self.per_feature)

    @property
    def mean(self) -> float:
        return float(_nan_reduce(np.nanmean, self.average[None, :])[0])

    @property
    def max(self) -> float:
        return float(_nan_reduce(np.nanmax, self.worst[None, :])[0])


def _nan_reduce(fn, table):
    """Row-wise NaN-aware reduction that yields NaN for all-NaN rows without warning."""
    out = np.full(len(table), np.nan)
    ok = ~np.all(np.isnan(table), axis=1)
    if np.any(ok):
        out[ok] = fn(table[ok], axis=1)
    return out
