"""Source distributions for the flow.

``behavior_guided`` draws each entry from Bernoulli(f_i), where f is the
per-item train frequency, so samples match the data's sparsity and
popularity skew. The other kinds exist for ablations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("behavior_guided", "uniform", "gaussian", "random_binary")
STATE_SPACES = ("discrete", "continuous")


@dataclass(frozen=True, eq=False)
class PriorSpec:
    kind: str = "behavior_guided"
    state_space: str = "discrete"
    frequencies: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown prior kind {self.kind!r}; expected one of {KINDS}")
        if self.state_space not in STATE_SPACES:
            raise ValueError(f"unknown state space {self.state_space!r}")
        if self.kind == "behavior_guided" and self.frequencies is None:
            raise ValueError("behavior_guided prior requires item frequencies")
        if self.kind == "random_binary" and self.state_space == "continuous":
            raise ValueError("random_binary prior is discrete-only")
        if self.frequencies is not None:
            f = np.asarray(self.frequencies)
            if f.ndim != 1 or np.any(f < 0) or np.any(f > 1):
                raise ValueError("frequencies must be a vector with entries in [0, 1]")

    @property
    def binary(self) -> bool:
        return self.state_space == "discrete"

    def with_frequencies(self, frequencies) -> "PriorSpec":
        return PriorSpec(self.kind, self.state_space, np.asarray(frequencies, dtype=np.float64))


@dataclass(frozen=True)
class PriorSample:
    values: np.ndarray
    binary: bool


def sample_prior(
    spec: PriorSpec,
    batch_users: int,
    rng: np.random.Generator,
    n_items: int | None = None,
    dtype=np.float32,
) -> PriorSample:
    """Draw a ``batch_users x n_items`` source sample.

    ``n_items`` defaults to the length of ``spec.frequencies``.
    """
    if batch_users < 1:
        raise ValueError("batch_users must be >= 1")
    if n_items is None:
        if spec.frequencies is None:
            raise ValueError("n_items is required when the prior carries no frequencies")
        n_items = len(spec.frequencies)
    shape = (batch_users, n_items)

    if spec.kind == "behavior_guided":
        f = np.asarray(spec.frequencies, dtype=dtype)
        if len(f) != n_items:
            raise ValueError(f"frequencies have length {len(f)}, expected {n_items}")
        if spec.binary:
            values = (rng.random(shape, dtype=np.float32) < f).astype(dtype)
        else:
            values = np.broadcast_to(f, shape).copy()
    elif spec.kind == "uniform":
        u = rng.random(shape, dtype=np.float32)
        values = (rng.random(shape, dtype=np.float32) < u).astype(dtype) if spec.binary else u.astype(dtype)
    elif spec.kind == "gaussian":
        g = rng.standard_normal(shape, dtype=np.float32)
        if spec.binary:
            values = (rng.random(shape, dtype=np.float32) < np.clip(g, 0.0, 1.0)).astype(dtype)
        else:
            values = g.astype(dtype)
    else:  # random_binary
        values = (rng.random(shape, dtype=np.float32) < 0.5).astype(dtype)
    return PriorSample(values, spec.binary)
