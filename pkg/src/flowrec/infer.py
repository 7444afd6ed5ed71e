"""Few-step sampling from a trained flow model and top-K ranking.

Inference starts from the observed rows at grid step ``s`` (default
``N - 2``), applies Euler updates up to step ``N - 2`` and returns the
model's prediction at ``t_{N-1}`` as real-valued scores. With the default
start this costs exactly two model evaluations per batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import flowcore
from .data import InteractionMatrix

MODES = ("discrete", "continuous")


@dataclass(frozen=True)
class InferConfig:
    n_steps: int = 9
    start_step: int | None = None
    mode: str = "discrete"

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError("n_steps must be >= 2")
        if self.mode not in MODES:
            raise ValueError(f"unknown inference mode {self.mode!r}")
        if not 0 <= self.start <= self.n_steps - 2:
            raise ValueError(
                f"start_step must lie in [0, {self.n_steps - 2}], got {self.start_step}"
            )

    @property
    def start(self) -> int:
        return self.n_steps - 2 if self.start_step is None else int(self.start_step)

    @property
    def n_evaluations(self) -> int:
        return self.n_steps - self.start


StepHook = Callable[[int, np.ndarray], None]


def _run(model, x, config: InferConfig, discrete: bool, on_step: StepHook | None):
    if discrete != (config.mode == "discrete"):
        raise ValueError(f"config mode {config.mode!r} does not match the sampler")
    x = np.asarray(x, dtype=np.float32)
    schedule = flowcore.make_schedule(config.n_steps)
    xt = x.copy()
    for i in range(config.start, config.n_steps - 1):
        t = float(schedule.t(i))
        x_hat = model.forward(xt, np.full(len(xt), t))
        v = flowcore.predicted_field(x_hat, xt, t)
        if discrete:
            xt = flowcore.discrete_update(xt, v, config.n_steps)
            xt = flowcore.preserve_observed(xt, x)
        else:
            xt = flowcore.continuous_update(xt, v, config.n_steps).astype(np.float32, copy=False)
        if on_step is not None:
            on_step(i, xt)
    t_last = float(schedule.t(config.n_steps - 1))
    return model.forward(xt, np.full(len(xt), t_last))


def infer_discrete(model, x, config: InferConfig, on_step: StepHook | None = None) -> np.ndarray:
    """Binary-state sampler; the state never drops an observed interaction."""
    return _run(model, x, config, True, on_step)


def infer_continuous(model, x, config: InferConfig, on_step: StepHook | None = None) -> np.ndarray:
    return _run(model, x, config, False, on_step)


def infer(model, x, config: InferConfig, on_step: StepHook | None = None) -> np.ndarray:
    sampler = infer_discrete if config.mode == "discrete" else infer_continuous
    return sampler(model, x, config, on_step)


def predict_scores(
    model, matrix: InteractionMatrix, config: InferConfig, users=None, batch_size: int = 4096
) -> np.ndarray:
    """Scores for ``users`` (default all) using their rows of ``matrix`` as input."""
    users = np.arange(matrix.n_users) if users is None else np.asarray(users)
    out = np.empty((len(users), matrix.n_items), dtype=np.float32)
    for lo in range(0, len(users), batch_size):
        batch = users[lo : lo + batch_size]
        out[lo : lo + len(batch)] = infer(model, matrix.dense(batch), config)
    return out


def _observed_mask(observed, shape) -> np.ndarray:
    if isinstance(observed, InteractionMatrix):
        observed = observed.csr
    if sp.issparse(observed):
        observed = observed.toarray()
    observed = np.asarray(observed) != 0
    if observed.shape != shape:
        raise ValueError(f"observed mask shape {observed.shape} != scores shape {shape}")
    return observed


def recommend_topk(scores, observed, k: int, return_scores: bool = False):
    """Top-``k`` unobserved items per row, best first, ties by lower index.

    Rows where fewer than ``k`` items are unobserved yield shorter lists.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    scores = np.asarray(scores)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    mask = _observed_mask(observed, scores.shape)
    masked = np.where(mask, np.finfo(scores.dtype).min, scores)
    order = np.argsort(-masked, axis=1, kind="stable")[:, :k]
    ranked = []
    for row, idx in enumerate(order):
        idx = idx[~mask[row, idx]]
        ranked.append((idx, scores[row, idx]) if return_scores else idx)
    return ranked
