"""Discrete flow primitives: time grid, Bernoulli-mask interpolation,
expectation vector fields and the Euler updates used at inference.

All functions work on dense numpy arrays of shape ``(batch, n_items)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepSchedule:
    n_steps: int

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError(f"need at least 2 discretization steps, got {self.n_steps}")

    @property
    def grid(self) -> np.ndarray:
        return np.arange(self.n_steps + 1, dtype=np.float64) / self.n_steps

    def t(self, i) -> np.ndarray | float:
        return np.asarray(i, dtype=np.float64) / self.n_steps

    def index(self, t) -> np.ndarray:
        """Nearest grid index for time(s) ``t``."""
        return np.rint(np.asarray(t, dtype=np.float64) * self.n_steps).astype(np.int64)


def make_schedule(n_steps: int) -> StepSchedule:
    return StepSchedule(int(n_steps))


def _check_shapes(*arrays):
    shape = np.shape(arrays[0])
    for a in arrays[1:]:
        if np.shape(a) != shape:
            raise ValueError(f"shape mismatch: {shape} vs {np.shape(a)}")


def _check_t(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    return t


def _column(t, ndim):
    # per-row t broadcasts across items
    t = np.asarray(t, dtype=np.float64)
    return t.reshape(-1, *([1] * (ndim - 1))) if t.ndim == 1 and ndim > 1 else t


def sample_mask(t, shape, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """Entries iid Bernoulli(t); ``t`` is a scalar or one value per row."""
    t = _column(_check_t(t), len(shape))
    return (rng.random(shape, dtype=np.float32) < t).astype(dtype)


def interpolate_discrete(x0, x1, mask) -> np.ndarray:
    """Take ``x1`` where the mask is 1 and ``x0`` elsewhere."""
    _check_shapes(x0, x1, mask)
    return np.where(np.asarray(mask) != 0, x1, x0)


def interpolate_continuous(x0, x1, t) -> np.ndarray:
    _check_shapes(x0, x1)
    x0 = np.asarray(x0)
    t = _column(_check_t(t), x0.ndim)
    return t * np.asarray(x1) + (1.0 - t) * x0


def true_field(x1, xt_expect, t) -> np.ndarray:
    """(x1 - E[x_t]) / (1 - t); undefined at t = 1."""
    _check_shapes(x1, xt_expect)
    x1 = np.asarray(x1)
    t = _column(_check_t(t), x1.ndim)
    if np.any(t >= 1):
        raise ValueError("vector field is singular at t = 1")
    return ((x1 - np.asarray(xt_expect)) / (1.0 - t)).astype(np.result_type(x1, xt_expect), copy=False)


def predicted_field(x_hat, xt, t) -> np.ndarray:
    return true_field(x_hat, xt, t)


def _check_finite(v):
    if not np.all(np.isfinite(v)):
        raise ValueError("vector field has non-finite entries")


def discrete_update(xt, v, n_steps: int) -> np.ndarray:
    """One Euler step followed by rounding to {0, 1} at 0.5."""
    _check_shapes(xt, v)
    if n_steps < 2:
        raise ValueError("n_steps must be >= 2")
    _check_finite(v)
    xt = np.asarray(xt)
    return (xt + np.asarray(v) / n_steps >= 0.5).astype(xt.dtype)


def continuous_update(xt, v, n_steps: int) -> np.ndarray:
    _check_shapes(xt, v)
    _check_finite(v)
    _check_finite(xt)
    return np.asarray(xt) + np.asarray(v) / n_steps


def preserve_observed(xt, x) -> np.ndarray:
    """Elementwise OR of the current state with the observed interactions."""
    _check_shapes(xt, x)
    xt = np.asarray(xt)
    return np.logical_or(xt != 0, np.asarray(x) != 0).astype(xt.dtype)
