"""Flow-matching training with validation-based early stopping."""

from __future__ import annotations

import copy
import csv
import io
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import flowcore
from .data import DatasetSplit, InteractionMatrix, item_frequencies
from .evaluation import evaluate
from .infer import InferConfig
from .model import Adam, FlowModel, ModelConfig, init_model
from .prior import PriorSpec, sample_prior

logger = logging.getLogger(__name__)

CSV_FIELDS = ("epoch", "loss", "recall10", "recall20", "ndcg10", "ndcg20", "seconds")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 4096
    learning_rate: float = 1e-3
    max_epochs: int = 300
    patience: int = 20
    eval_every: int = 5
    n_steps: int = 9
    prior_kind: str = "behavior_guided"
    state_space: str = "discrete"
    start_step: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be >= 0")
        flowcore.make_schedule(self.n_steps)

    def prior(self, frequencies) -> PriorSpec:
        freqs = frequencies if self.prior_kind == "behavior_guided" else None
        return PriorSpec(self.prior_kind, self.state_space, freqs)

    def infer_config(self) -> InferConfig:
        return InferConfig(self.n_steps, self.start_step, self.state_space)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    recall10: float | None = None
    recall20: float | None = None
    ndcg10: float | None = None
    ndcg20: float | None = None
    seconds: float = 0.0


@dataclass
class TrainLog:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    # optimizer state matching the returned (best) model; not exported
    optimizer: Adam | None = None

    def to_csv(self, include_seconds: bool = True) -> str:
        fields = CSV_FIELDS if include_seconds else CSV_FIELDS[:-1]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r in self.records:
            writer.writerow(["" if getattr(r, f) is None else repr(getattr(r, f)) for f in fields])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainLog":
        reader = csv.DictReader(io.StringIO(text))
        missing = set(CSV_FIELDS[:-1]) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"train log is missing columns {sorted(missing)}")
        records = []
        for row in reader:
            vals = {k: (float(v) if v not in ("", None) else None) for k, v in row.items() if k in CSV_FIELDS}
            records.append(
                EpochRecord(
                    epoch=int(vals["epoch"]),
                    loss=vals["loss"],
                    recall10=vals["recall10"],
                    recall20=vals["recall20"],
                    ndcg10=vals["ndcg10"],
                    ndcg20=vals["ndcg20"],
                    seconds=vals.get("seconds") or 0.0,
                )
            )
        return cls(records)


def train_epoch(
    model: FlowModel,
    optimizer: Adam,
    train: InteractionMatrix,
    prior: PriorSpec,
    config: TrainConfig,
    rng: np.random.Generator,
) -> float:
    """One pass over all users in shuffled batches; returns the size-weighted mean loss."""
    if model.n_items != train.n_items:
        raise ValueError(f"model expects {model.n_items} items, matrix has {train.n_items}")
    n_steps = config.n_steps
    perm = rng.permutation(train.n_users)
    total, seen = 0.0, 0
    for lo in range(0, len(perm), config.batch_size):
        users = perm[lo : lo + config.batch_size]
        x1 = train.dense(users, model.dtype)
        # t = 1 is never drawn: the field is singular there and x_t would equal x_1
        t = rng.integers(0, n_steps, size=len(users)) / n_steps
        x0 = sample_prior(prior, len(users), rng, train.n_items, model.dtype).values
        if prior.binary:
            mask = flowcore.sample_mask(t, x1.shape, rng, model.dtype)
            xt = flowcore.interpolate_discrete(x0, x1, mask)
        else:
            xt = flowcore.interpolate_continuous(x0, x1, t).astype(model.dtype)
        loss, grads = model.backward(xt, t, x1, train=True, rng=rng)
        optimizer.step(model.parameters(), grads)
        total += loss * len(users)
        seen += len(users)
    return total / seen


def fit(
    split: DatasetSplit,
    config: TrainConfig,
    model_config: ModelConfig | None = None,
    frequencies=None,
) -> tuple[FlowModel, TrainLog]:
    """Train with early stopping on validation NDCG@10.

    Validation runs every ``eval_every`` epochs and after the final epoch.
    Training stops after ``patience`` consecutive evaluations without a
    strict improvement. The returned model is the best evaluated one
    (earliest on ties); ``log.optimizer`` holds its optimizer state.
    """
    train = split.train
    if train.nnz == 0:
        raise ValueError("training matrix has no interactions")
    if frequencies is None:
        frequencies = item_frequencies(train)
    if model_config is None:
        model_config = ModelConfig(n_items=train.n_items, n_steps=config.n_steps, init_seed=config.seed)
    if model_config.n_items != train.n_items or model_config.n_steps != config.n_steps:
        raise ValueError("model config disagrees with the dataset or step count")
    model = init_model(model_config)
    optimizer = Adam(lr=config.learning_rate)
    prior = config.prior(frequencies)
    infer_config = config.infer_config()
    rng = np.random.default_rng(config.seed)
    log = TrainLog()
    best_score, best_model, best_opt = -np.inf, None, None
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        start = time.perf_counter()
        loss = train_epoch(model, optimizer, train, prior, config, rng)
        record = EpochRecord(epoch, loss)
        if epoch % config.eval_every == 0 or epoch == config.max_epochs:
            report = evaluate(model, split, infer_config, ks=(10, 20), target="validation")
            record.recall10, record.recall20 = report.recall[10], report.recall[20]
            record.ndcg10, record.ndcg20 = report.ndcg[10], report.ndcg[20]
            score = -np.inf if report.ndcg[10] is None else report.ndcg[10]
            if score > best_score:
                best_score, stale = score, 0
                best_model, best_opt = model.copy(), copy.deepcopy(optimizer)
                log.best_epoch = epoch
            else:
                stale += 1
        record.seconds = time.perf_counter() - start
        log.records.append(record)
        logger.info(
            "epoch %d loss %.5f ndcg@10 %s (%.1fs)",
            epoch,
            loss,
            "-" if record.ndcg10 is None else f"{record.ndcg10:.4f}",
            record.seconds,
        )
        if stale >= config.patience:
            break

    if best_model is None:
        best_model, best_opt = model, optimizer
    log.optimizer = best_opt
    return best_model, log
