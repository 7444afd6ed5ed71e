"""All-ranking Recall@K and NDCG@K over held-out items."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import DatasetSplit, InteractionMatrix
from .infer import InferConfig, infer, recommend_topk

DENOMINATORS = ("truncated", "full")


def recall_at_k(ranked, relevant, k: int, denominator: str = "truncated") -> float:
    """Hits in the top ``k`` over ``min(k, |relevant|)``, or ``|relevant|`` for "full"."""
    relevant = set(int(i) for i in relevant)
    if not relevant:
        raise ValueError("recall is undefined for an empty relevant set")
    hits = sum(1 for i in list(ranked)[:k] if int(i) in relevant)
    if denominator == "truncated":
        return hits / min(k, len(relevant))
    if denominator == "full":
        return hits / len(relevant)
    raise ValueError(f"unknown recall denominator {denominator!r}")


def ndcg_at_k(ranked, relevant, k: int) -> float:
    relevant = set(int(i) for i in relevant)
    if not relevant:
        raise ValueError("NDCG is undefined for an empty relevant set")
    dcg = sum(
        1.0 / math.log2(pos + 2) for pos, i in enumerate(list(ranked)[:k]) if int(i) in relevant
    )
    idcg = sum(1.0 / math.log2(pos + 2) for pos in range(min(k, len(relevant))))
    return dcg / idcg


@dataclass
class MetricReport:
    """Mean metrics per cutoff. Values are ``None`` when no user was evaluated."""

    recall: dict[int, float | None] = field(default_factory=dict)
    ndcg: dict[int, float | None] = field(default_factory=dict)
    n_users: int = 0

    def to_dict(self) -> dict:
        return {
            "recall": {str(k): v for k, v in self.recall.items()},
            "ndcg": {str(k): v for k, v in self.ndcg.items()},
            "n_users": self.n_users,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(
            {int(k): v for k, v in d["recall"].items()},
            {int(k): v for k, v in d["ndcg"].items()},
            int(d["n_users"]),
        )

    def format_table(self) -> str:
        ks = sorted(self.recall)
        head = " ".join(f"{name + '@' + str(k):>10}" for name in ("Recall", "NDCG") for k in ks)
        cells = [self.recall[k] for k in ks] + [self.ndcg[k] for k in ks]
        row = " ".join(f"{'n/a':>10}" if v is None else f"{v:>10.4f}" for v in cells)
        return f"{head} {'users':>7}\n{row} {self.n_users:>7}\n"


def evaluate_rankings(ranked_lists, heldout, ks=(10, 20), denominator: str = "truncated") -> MetricReport:
    """Average metrics over rows with a non-empty held-out set, in row order."""
    ks = [int(k) for k in ks]
    per_user = {("r", k): [] for k in ks} | {("n", k): [] for k in ks}
    n = 0
    for ranked, relevant in zip(ranked_lists, heldout):
        if len(relevant) == 0:
            continue
        n += 1
        for k in ks:
            per_user[("r", k)].append(recall_at_k(ranked, relevant, k, denominator))
            per_user[("n", k)].append(ndcg_at_k(ranked, relevant, k))
    if n == 0:
        return MetricReport({k: None for k in ks}, {k: None for k in ks}, 0)
    return MetricReport(
        {k: float(np.mean(per_user[("r", k)])) for k in ks},
        {k: float(np.mean(per_user[("n", k)])) for k in ks},
        n,
    )


def model_inputs(split: DatasetSplit, target: str, include_val: bool = False) -> InteractionMatrix:
    """Rows fed to the sampler (and masked at ranking) when scoring ``target``."""
    if target == "validation" or not include_val:
        return split.train
    return split.train.with_added(*split.validation.pairs())


def evaluate(
    model,
    split: DatasetSplit,
    config: InferConfig,
    ks=(10, 20),
    target: str = "test",
    include_val: bool = False,
    batch_size: int = 4096,
    denominator: str = "truncated",
) -> MetricReport:
    """Score held-out ``target`` items of every user that has any.

    The sampler input, and the items masked out of each ranking, are the
    user's train row (plus validation items when ``include_val`` is set and
    the target is test).
    """
    if target not in ("test", "validation"):
        raise ValueError(f"target must be 'test' or 'validation', got {target!r}")
    held = split.test if target == "test" else split.validation
    inputs = model_inputs(split, target, include_val)
    users = np.flatnonzero(np.diff(held.csr.indptr) > 0)
    kmax = max(int(k) for k in ks)
    ranked, relevant = [], []
    for lo in range(0, len(users), batch_size):
        batch = users[lo : lo + batch_size]
        x = inputs.dense(batch)
        scores = infer(model, x, config)
        ranked += recommend_topk(scores, x, kmax)
        relevant += [held.row(u) for u in batch]
    return evaluate_rankings(ranked, relevant, ks, denominator)
