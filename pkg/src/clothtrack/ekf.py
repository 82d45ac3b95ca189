"""Extended Kalman filter with numerically differentiated models.

The process and measurement functions are plain callables on 1-D state
vectors. When a callable also accepts a stack of states ``(k, m)`` and returns
``(k, p)``, pass ``vectorized=True`` so Jacobian columns are evaluated in one
call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, SingularInnovationError, ValidationError

COMPLEX_STEP = "complex_step"
CENTRAL_DIFFERENCE = "central_difference"
MAX_INNOVATION_CONDITION = 1e12


@dataclass(frozen=True)
class FilterState:
    x: np.ndarray
    P: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        P = np.asarray(self.P, dtype=float)
        if x.ndim != 1 or P.shape != (len(x), len(x)):
            raise ValidationError(f"covariance shape {P.shape} does not match state {x.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "P", P)


@dataclass(frozen=True)
class NoiseConfig:
    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray


@dataclass(frozen=True)
class JacobianConfig:
    """``step`` is the absolute complex-step size, or the relative factor
    multiplying ``max(1, |x_j|)`` for central differences."""

    method: str = COMPLEX_STEP
    step: float | None = None

    def __post_init__(self):
        if self.method not in (COMPLEX_STEP, CENTRAL_DIFFERENCE):
            raise ValidationError(f"unknown Jacobian method {self.method!r}")
        if self.step is not None and not self.step > 0:
            raise ValidationError("Jacobian step must be positive")


def _evaluate_columns(f, X, vectorized):
    if vectorized:
        return np.asarray(f(X))
    return np.stack([np.asarray(f(row)) for row in X])


def numerical_jacobian(f, x, cfg: JacobianConfig | None = None, vectorized: bool = False):
    """Jacobian ``(p, m)`` of ``f: R^m -> R^p`` at ``x``.

    Complex step needs ``f`` to be complex-analytic along each coordinate;
    anything piecewise (clamps, ``abs``, comparisons on the state) should use
    central differences instead.
    """
    cfg = cfg or JacobianConfig()
    x = np.asarray(x, dtype=float)
    m = x.size
    eye = np.eye(m)
    if cfg.method == COMPLEX_STEP:
        h = cfg.step or 1e-20
        cols = np.imag(_evaluate_columns(f, x + 1j * h * eye, vectorized)) / h
    else:
        h = (cfg.step or 1e-6) * np.maximum(1.0, np.abs(x))
        hi = _evaluate_columns(f, x + h[:, None] * eye, vectorized)
        lo = _evaluate_columns(f, x - h[:, None] * eye, vectorized)
        cols = (hi - lo) / (2 * h[:, None])
    cols = cols.reshape(m, -1)
    bad = ~np.all(np.isfinite(cols), axis=1)
    if np.any(bad):
        j = int(np.flatnonzero(bad)[0])
        raise DivergenceError(f"non-finite model output in Jacobian column {j}", column=j)
    return cols.T


def symmetrize(P):
    return 0.5 * (P + P.T)


def predict(fs: FilterState, step_fn, noise: NoiseConfig, jac: JacobianConfig | None = None,
            vectorized: bool = False) -> FilterState:
    """A priori state ``step_fn(x)`` and covariance ``J P J^T + Q``."""
    Q = np.asarray(noise.Q)
    if Q.shape != fs.P.shape:
        raise ValidationError(f"Q has shape {Q.shape}, state covariance {fs.P.shape}")
    x_prior = np.asarray(step_fn(fs.x), dtype=float)
    if not np.all(np.isfinite(x_prior)):
        raise DivergenceError("process model returned non-finite state")
    J = numerical_jacobian(step_fn, fs.x, jac, vectorized)
    return FilterState(x_prior, symmetrize(J @ fs.P @ J.T + Q))


def kalman_gain(P, F, R):
    """``P F^T (F P F^T + R)^-1`` by a linear solve on the innovation covariance."""
    S = symmetrize(F @ P @ F.T + R)
    cond = np.linalg.cond(S)
    if not cond <= MAX_INNOVATION_CONDITION:
        raise SingularInnovationError(
            f"innovation covariance is numerically singular (condition {cond:.3g}); "
            "increase the measurement noise R")
    # S and P are symmetric, so K^T = S^-1 F P
    return np.linalg.solve(S, F @ P).T


def update(fs: FilterState, W, h_fn, noise: NoiseConfig, jac: JacobianConfig | None = None,
           vectorized: bool = False) -> FilterState:
    """Correct an a priori state with the stacked measurement ``W``."""
    W = np.asarray(W, dtype=float)
    R = np.asarray(noise.R)
    if R.shape != (len(W), len(W)):
        raise ValidationError(f"R has shape {R.shape} for {len(W)} measurements")
    predicted = np.asarray(h_fn(fs.x), dtype=float)
    if predicted.shape != W.shape:
        raise ValidationError(f"measurement function returned {predicted.shape}, expected {W.shape}")
    F = numerical_jacobian(h_fn, fs.x, jac, vectorized)
    K = kalman_gain(fs.P, F, R)
    x = fs.x + K @ (W - predicted)
    P = (np.eye(len(fs.x)) - K @ F) @ fs.P
    return FilterState(x, symmetrize(P))
