"""Command-line entry point: prepare, train, evaluate, recommend, ablate, noise, curves.

Every command reads an optional TOML run config (``--config``). Explicit
flags override values from the file. Outputs are written atomically, and
every output directory receives a ``provenance.json`` holding the input
hash, the resolved-config hash and the seed.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, data
from ._io import atomic_write_text
from .evaluation import MetricReport, evaluate
from .infer import InferConfig, predict_scores, recommend_topk
from .model import CheckpointError, ModelConfig, load_checkpoint, save_checkpoint
from .prior import KINDS, STATE_SPACES, PriorSpec
from .train import CSV_FIELDS, TrainConfig, TrainLog, fit

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

logger = logging.getLogger("flowrec")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Bad run configuration or command-line usage (exit code 2)."""


class UsageError(ConfigError):
    pass


# -- run configuration ------------------------------------------------------


@dataclass(frozen=True)
class DataSection:
    delimiter: str = "::"
    skip_header: bool = False
    threshold: float = 4.0
    k_core: int = 5
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class PriorSection:
    kind: str = "behavior_guided"
    state_space: str = "discrete"


@dataclass(frozen=True)
class ModelSection:
    hidden_sizes: tuple[int, ...] = (300, 300)
    step_embed_dim: int = 10
    dropout: float = 0.0
    activation: str = "tanh"


@dataclass(frozen=True)
class TrainSection:
    batch_size: int = 4096
    learning_rate: float = 0.001
    max_epochs: int = 300
    patience: int = 20
    eval_every: int = 5


@dataclass(frozen=True)
class InferSection:
    # -1 means "second-to-last grid point", i.e. two model evaluations
    start_step: int = -1
    # empty means "same as prior.state_space"
    mode: str = ""


@dataclass(frozen=True)
class EvalSection:
    ks: tuple[int, ...] = (10, 20)
    denominator: str = "truncated"
    include_val: bool = False
    batch_size: int = 4096


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    n_steps: int = 9
    data: DataSection = field(default_factory=DataSection)
    prior: PriorSection = field(default_factory=PriorSection)
    model: ModelSection = field(default_factory=ModelSection)
    train: TrainSection = field(default_factory=TrainSection)
    infer: InferSection = field(default_factory=InferSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def __post_init__(self):
        try:
            self.train_config()
            self.model_config(1)
            self.infer_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.prior.kind not in KINDS:
            raise ConfigError(f"prior.kind must be one of {KINDS}, got {self.prior.kind!r}")
        if self.prior.state_space not in STATE_SPACES:
            raise ConfigError(f"prior.state_space must be one of {STATE_SPACES}")
        d = self.data
        if len(d.split) != 3 or any(r < 0 for r in d.split) or abs(sum(d.split) - 1) > 1e-9:
            raise ConfigError(f"data.split must be three non-negative ratios summing to 1, got {d.split}")
        if d.k_core < 1:
            raise ConfigError("data.k_core must be >= 1")
        if not self.eval.ks or any(k < 1 for k in self.eval.ks):
            raise ConfigError("eval.ks must be a non-empty list of positive integers")
        if self.eval.denominator not in ("truncated", "full"):
            raise ConfigError("eval.denominator must be 'truncated' or 'full'")
        if self.eval.batch_size < 1:
            raise ConfigError("eval.batch_size must be >= 1")

    def train_config(self, **overrides) -> TrainConfig:
        t = self.train
        kw = dict(
            batch_size=t.batch_size,
            learning_rate=t.learning_rate,
            max_epochs=t.max_epochs,
            patience=t.patience,
            eval_every=t.eval_every,
            n_steps=self.n_steps,
            prior_kind=self.prior.kind,
            state_space=self.prior.state_space,
            start_step=None if self.infer.start_step < 0 else self.infer.start_step,
            seed=self.seed,
        )
        kw.update(overrides)
        return TrainConfig(**kw)

    def model_config(self, n_items: int) -> ModelConfig:
        m = self.model
        return ModelConfig(
            n_items=n_items,
            hidden_sizes=tuple(m.hidden_sizes),
            step_embed_dim=m.step_embed_dim,
            n_steps=self.n_steps,
            dropout=m.dropout,
            activation=m.activation,
            init_seed=self.seed,
        )

    def infer_config(self) -> InferConfig:
        return InferConfig(
            self.n_steps,
            None if self.infer.start_step < 0 else self.infer.start_step,
            self.infer.mode or self.prior.state_space,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_SECTION_TYPES = {
    "data": DataSection,
    "prior": PriorSection,
    "model": ModelSection,
    "train": TrainSection,
    "infer": InferSection,
    "eval": EvalSection,
}


def _coerce(value, default, where: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        kind = type(default[0]) if default else float
        return tuple(_coerce(v, kind(), f"{where}[]") for v in value)
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    raise ConfigError(f"{where}: unsupported value")  # pragma: no cover


def config_from_dict(raw: dict) -> RunConfig:
    """Build a RunConfig from nested TOML-style data, rejecting unknown keys."""
    base = RunConfig()
    top = {}
    for key, value in raw.items():
        if key in _SECTION_TYPES:
            if not isinstance(value, dict):
                raise ConfigError(f"[{key}] must be a table")
            cls = _SECTION_TYPES[key]
            defaults = getattr(base, key)
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = sorted(set(value) - names)
            if unknown:
                raise ConfigError(f"unknown key(s) in [{key}]: {', '.join(unknown)}")
            kw = {k: _coerce(v, getattr(defaults, k), f"{key}.{k}") for k, v in value.items()}
            top[key] = dataclasses.replace(defaults, **kw)
        elif key in ("seed", "n_steps"):
            top[key] = _coerce(value, getattr(base, key), key)
        else:
            raise ConfigError(f"unknown config key {key!r}")
    return RunConfig(**top)


def _parse_override(text: str) -> dict:
    """``section.key=value`` with a TOML literal value -> nested dict."""
    if "=" not in text:
        raise UsageError(f"--set expects KEY=VALUE, got {text!r}")
    key, value = text.split("=", 1)
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    parts = key.strip().split(".")
    if len(parts) > 2 or not all(parts):
        raise UsageError(f"bad --set key {key!r}")
    return {parts[0]: {parts[1]: parsed}} if len(parts) == 2 else {parts[0]: parsed}


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = _merge(out.get(k, {}), v) if isinstance(v, dict) else v
    return out


def load_config(path=None, overrides=(), seed: int | None = None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise UsageError(f"config file not found: {path}")
        try:
            raw = tomllib.loads(path.read_text("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    for text in overrides:
        raw = _merge(raw, _parse_override(text))
    if seed is not None:
        raw["seed"] = seed
    return config_from_dict(raw)


# -- helpers ----------------------------------------------------------------


def _sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _bundle_digest(directory) -> str:
    h = hashlib.sha256()
    for name in sorted(os.listdir(directory)):
        if name.endswith((".txt", ".tsv")):
            h.update(name.encode())
            h.update(_sha256_file(Path(directory) / name).encode())
    return h.hexdigest()


def write_provenance(out_dir, command: str, cfg: RunConfig, inputs: dict[str, str], extra=None) -> None:
    record = {
        "command": command,
        "version": __version__,
        "seed": cfg.seed,
        "config_sha256": cfg.digest(),
        "config": cfg.to_dict(),
        "inputs": inputs,
    }
    if extra:
        record.update(extra)
    atomic_write_text(Path(out_dir) / "provenance.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{what} not found: {path}")
    return path


def _require_bundle(path) -> data.Bundle:
    path = Path(path)
    if not (path / "train.txt").is_file():
        raise UsageError(f"dataset bundle not found: {path}")
    return data.load_bundle(path)


def _report_row(label: dict, report: MetricReport, ks) -> dict:
    row = dict(label)
    for k in ks:
        row[f"recall{k}"] = report.recall[k]
    for k in ks:
        row[f"ndcg{k}"] = report.ndcg[k]
    row["n_users"] = report.n_users
    return row


def _rows_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return buf.getvalue()


def _rows_table(rows: list[dict]) -> str:
    cols = list(rows[0])
    cells = [[("n/a" if r[c] is None else f"{r[c]:.4f}" if isinstance(r[c], float) else str(r[c])) for c in cols] for r in rows]
    widths = [max(len(c), *(len(row[j]) for row in cells)) for j, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines)


def _train_and_test(split: data.DatasetSplit, cfg: RunConfig, **train_overrides) -> MetricReport:
    tcfg = cfg.train_config(**train_overrides)
    model, _ = fit(split, tcfg, cfg.model_config(split.n_items))
    icfg = InferConfig(tcfg.n_steps, tcfg.start_step, cfg.infer.mode or tcfg.state_space)
    e = cfg.eval
    return evaluate(model, split, icfg, e.ks, "test", e.include_val, e.batch_size, e.denominator)


# -- commands ---------------------------------------------------------------


def cmd_prepare(raw_path, cfg: RunConfig, out_dir) -> dict:
    raw_path = _require_file(raw_path, "ratings file")
    d = cfg.data
    records = data.read_ratings(raw_path, d.delimiter, d.skip_header)
    split_, candidates = data.prepare(records, d.threshold, d.k_core, d.split, cfg.seed)
    data.save_bundle(out_dir, split_, candidates)
    stats = {
        "n_users": split_.n_users,
        "n_items": split_.n_items,
        "n_interactions": split_.train.nnz + split_.validation.nnz + split_.test.nnz,
        "train": split_.train.nnz,
        "validation": split_.validation.nnz,
        "test": split_.test.nnz,
        "noise_candidates": int(len(candidates)),
    }
    atomic_write_text(Path(out_dir) / "stats.json", json.dumps(stats, indent=2) + "\n")
    write_provenance(out_dir, "prepare", cfg, {str(raw_path.name): _sha256_file(raw_path)})
    return stats


def cmd_train(bundle_dir, cfg: RunConfig, out_dir, log_seconds: bool = True) -> TrainLog:
    bundle = _require_bundle(bundle_dir)
    split_ = bundle.split
    model, log = fit(split_, cfg.train_config(), cfg.model_config(split_.n_items), bundle.frequencies)
    out_dir = Path(out_dir)
    save_checkpoint(out_dir / "model.fcf", model, log.optimizer)
    if not log_seconds:
        for rec in log.records:
            rec.seconds = 0.0
    atomic_write_text(out_dir / "train_log.csv", log.to_csv())
    write_provenance(
        out_dir, "train", cfg, {"bundle": _bundle_digest(bundle_dir)}, {"best_epoch": log.best_epoch}
    )
    return log


def _load_model(checkpoint, n_items: int):
    path = _require_file(checkpoint, "checkpoint")
    model, _ = load_checkpoint(path, n_items)
    return model, path


def _infer_for(model, cfg: RunConfig) -> InferConfig:
    icfg = cfg.infer_config()
    if model.config.n_steps != icfg.n_steps:
        # the step embedding is tied to the grid the model was trained on
        icfg = InferConfig(model.config.n_steps, icfg.start_step, icfg.mode)
    return icfg


def cmd_evaluate(bundle_dir, checkpoint, cfg: RunConfig, split_name: str = "test", out_dir=None,
                 include_val: bool | None = None) -> MetricReport:
    if split_name not in ("val", "test"):
        raise UsageError(f"--split must be 'val' or 'test', got {split_name!r}")
    bundle = _require_bundle(bundle_dir)
    model, path = _load_model(checkpoint, bundle.split.n_items)
    e = cfg.eval
    inc = e.include_val if include_val is None else include_val
    target = "validation" if split_name == "val" else "test"
    report = evaluate(model, bundle.split, _infer_for(model, cfg), e.ks, target, inc, e.batch_size, e.denominator)
    if out_dir is not None:
        out_dir = Path(out_dir)
        atomic_write_text(out_dir / f"metrics_{split_name}.json", report.to_json() + "\n")
        atomic_write_text(out_dir / f"metrics_{split_name}.txt", report.format_table() + "\n")
        write_provenance(
            out_dir, "evaluate", cfg,
            {"bundle": _bundle_digest(bundle_dir), "checkpoint": _sha256_file(path)},
            {"split": split_name, "include_val": inc},
        )
    return report


def format_recommendations(user_tokens, item_tokens, ranked) -> str:
    lines = []
    for user, (idx, scores) in zip(user_tokens, ranked):
        recs = ", ".join(f"{item_tokens[i]}:{s:.6g}" for i, s in zip(idx.tolist(), scores.tolist()))
        lines.append(f"{user}\t{recs}")
    return "".join(line + "\n" for line in lines)


def cmd_recommend(bundle_dir, checkpoint, cfg: RunConfig, k: int, users=None, all_users: bool = False,
                  include_val: bool | None = None) -> str:
    if k < 1:
        raise UsageError("K must be >= 1")
    if not all_users and not users:
        raise UsageError("give user tokens or --all")
    bundle = _require_bundle(bundle_dir)
    split_ = bundle.split
    model, _ = _load_model(checkpoint, split_.n_items)
    inc = cfg.eval.include_val if include_val is None else include_val
    inputs = split_.train.with_added(*split_.validation.pairs()) if inc else split_.train
    index = inputs.user_index
    if all_users:
        tokens = list(inputs.user_tokens)
    else:
        missing = [u for u in users if u not in index]
        if missing:
            raise UsageError(f"unknown user token(s): {', '.join(missing)}")
        tokens = list(users)
    rows = np.array([index[u] for u in tokens], dtype=np.int64)
    scores = predict_scores(model, inputs, _infer_for(model, cfg), rows, cfg.eval.batch_size)
    ranked = recommend_topk(scores, inputs.dense(rows), k, return_scores=True)
    return format_recommendations(tokens, inputs.item_tokens, ranked)


def cmd_ablate(bundle_dir, cfg: RunConfig, priors, modes, out_dir=None) -> list[dict]:
    for p in priors:
        if p not in KINDS:
            raise UsageError(f"unknown prior {p!r}; choose from {', '.join(KINDS)}")
    for m in modes:
        if m not in STATE_SPACES:
            raise UsageError(f"unknown mode {m!r}; choose from {', '.join(STATE_SPACES)}")
    variants = []
    for p in priors:
        for m in modes:
            try:
                PriorSpec(p, m, np.zeros(1))
                cfg.train_config(prior_kind=p, state_space=m)
            except ValueError as exc:
                logger.warning("skipping prior=%s mode=%s: %s", p, m, exc)
                continue
            variants.append((p, m))
    if not variants:
        raise UsageError("no valid prior/mode combination requested")
    bundle = _require_bundle(bundle_dir)
    rows = []
    for p, m in variants:
        logger.info("ablation: prior=%s mode=%s", p, m)
        report = _train_and_test(bundle.split, cfg, prior_kind=p, state_space=m)
        rows.append(_report_row({"prior": p, "mode": m}, report, cfg.eval.ks))
    if out_dir is not None:
        atomic_write_text(Path(out_dir) / "ablation.csv", _rows_csv(rows))
        write_provenance(out_dir, "ablate", cfg, {"bundle": _bundle_digest(bundle_dir)},
                         {"priors": list(priors), "modes": list(modes)})
    return rows


def cmd_noise(bundle_dir, cfg: RunConfig, mode: str, proportions, out_dir=None) -> list[dict]:
    if mode not in ("natural", "random"):
        raise UsageError(f"--mode must be 'natural' or 'random', got {mode!r}")
    for p in proportions:
        if not 0.0 <= p <= 0.5:
            raise UsageError(f"noise proportions must lie in [0, 0.5], got {p}")
    bundle = _require_bundle(bundle_dir)
    rows = []
    for p in proportions:
        logger.info("noise: mode=%s proportion=%s", mode, p)
        noisy = data.inject_noise(bundle.split, mode, p, bundle.noise_candidates, seed=cfg.seed)
        report = _train_and_test(noisy, cfg)
        rows.append(_report_row({"mode": mode, "proportion": float(p)}, report, cfg.eval.ks))
    if out_dir is not None:
        atomic_write_text(Path(out_dir) / f"noise_{mode}.csv", _rows_csv(rows))
        write_provenance(out_dir, "noise", cfg, {"bundle": _bundle_digest(bundle_dir)},
                         {"mode": mode, "proportions": [float(p) for p in proportions]})
    return rows


def cmd_curves(logs) -> str:
    """Tidy ``run,epoch,metric,value`` rows from TrainLog CSVs.

    ``logs`` holds ``(label, path)`` pairs. Cells left blank in a log (epochs
    without validation) produce no row.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["run", "epoch", "metric", "value"])
    for label, path in logs:
        path = _require_file(path, "training log")
        log = TrainLog.from_csv(path.read_text("utf-8"))
        for metric in CSV_FIELDS[1:]:
            for rec in log.records:
                value = getattr(rec, metric)
                if value is not None:
                    writer.writerow([label, rec.epoch, metric, repr(float(value))])
    return buf.getvalue()


# -- argument parsing -------------------------------------------------------


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML run config")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config entry, e.g. train.max_epochs=50")
    common.add_argument("--threads", type=int, help="BLAS thread cap (fallback: FLOWREC_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="flowrec", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare", parents=[common], help="binarize, filter and split a ratings file")
    p.add_argument("ratings")
    p.add_argument("--out", required=True, metavar="DIR")

    p = sub.add_parser("train", parents=[common], help="train a model on a dataset bundle")
    p.add_argument("bundle")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--no-timing", action="store_true",
                   help="write zeros in the seconds column so logs are byte-reproducible")

    p = sub.add_parser("evaluate", parents=[common], help="Recall/NDCG of a checkpoint")
    p.add_argument("bundle")
    p.add_argument("checkpoint")
    p.add_argument("--split", choices=("val", "test"), default="test")
    p.add_argument("--include-val", action="store_true", default=None,
                   help="feed validation items alongside train items at test time")
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("recommend", parents=[common], help="top-K items per user")
    p.add_argument("bundle")
    p.add_argument("checkpoint")
    p.add_argument("-k", "--top", type=int, default=10, dest="k")
    p.add_argument("users", nargs="*")
    p.add_argument("--all", action="store_true", dest="all_users")
    p.add_argument("--include-val", action="store_true", default=None)
    p.add_argument("--out", metavar="FILE")

    p = sub.add_parser("ablate", parents=[common], help="prior and flow-type ablation on the test split")
    p.add_argument("bundle")
    p.add_argument("--priors", type=_str_list, default=list(KINDS))
    p.add_argument("--modes", type=_str_list, default=list(STATE_SPACES))
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("noise", parents=[common], help="robustness to injected false positives")
    p.add_argument("bundle")
    p.add_argument("--mode", choices=("natural", "random"), default="random")
    p.add_argument("--proportions", type=_float_list, default=[0.0, 0.1, 0.2, 0.3, 0.4, 0.5])
    p.add_argument("--out", metavar="DIR")

    p = sub.add_parser("curves", parents=[common], help="tidy learning-curve CSV from training logs")
    p.add_argument("logs", nargs="+", metavar="[LABEL=]LOG")
    p.add_argument("--out", metavar="FILE")
    return parser


def _threads(args) -> int | None:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FLOWREC_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"FLOWREC_THREADS must be an integer, got {env!r}") from None
    return None


def _dispatch(args) -> int:
    if args.command == "curves":
        logs = []
        for item in args.logs:
            label, sep, path = item.partition("=")
            logs.append((label, path) if sep else (Path(item).parent.name or Path(item).stem, item))
        text = cmd_curves(logs)
        if args.out:
            atomic_write_text(args.out, text)
        else:
            sys.stdout.write(text)
        return EXIT_OK

    cfg = load_config(args.config, args.set, args.seed)
    if args.command == "prepare":
        stats = cmd_prepare(args.ratings, cfg, args.out)
        print(json.dumps(stats, indent=2))
    elif args.command == "train":
        log = cmd_train(args.bundle, cfg, args.out, log_seconds=not args.no_timing)
        print(f"best epoch: {log.best_epoch}")
    elif args.command == "evaluate":
        report = cmd_evaluate(args.bundle, args.checkpoint, cfg, args.split, args.out, args.include_val)
        print(report.format_table())
    elif args.command == "recommend":
        text = cmd_recommend(args.bundle, args.checkpoint, cfg, args.k, args.users, args.all_users,
                             args.include_val)
        if args.out:
            atomic_write_text(args.out, text)
        else:
            sys.stdout.write(text)
    elif args.command == "ablate":
        print(_rows_table(cmd_ablate(args.bundle, cfg, args.priors, args.modes, args.out)))
    elif args.command == "noise":
        print(_rows_table(cmd_noise(args.bundle, cfg, args.mode, args.proportions, args.out)))
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        n = _threads(args)
        limiter = contextlib.nullcontext()
        if n is not None:
            if n < 1:
                raise UsageError("--threads must be >= 1")
            from threadpoolctl import threadpool_limits

            limiter = threadpool_limits(limits=n)
        with limiter:
            return _dispatch(args)
    except ConfigError as exc:
        print(f"flowrec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (data.ParseError, CheckpointError, OSError, ValueError) as exc:
        print(f"flowrec: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
