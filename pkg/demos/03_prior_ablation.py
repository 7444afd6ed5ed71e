"""Compare source priors and flow types on a ratings file.

Run: python demos/03_prior_ablation.py path/to/ratings.dat [delimiter]

Uses the default training settings with a reduced epoch budget; a full
MovieLens-1M sweep is better run through ``flowrec ablate``.
"""
import sys

from flowrec import data
from flowrec.evaluation import evaluate
from flowrec.train import TrainConfig, fit

path = sys.argv[1]
delimiter = sys.argv[2] if len(sys.argv) > 2 else "::"
records = data.read_ratings(path, delimiter, skip_header=delimiter != "::")
split, _ = data.prepare(records, seed=0)
print(f"{split.n_users} users, {split.n_items} items")

variants = [(p, "discrete") for p in ("behavior_guided", "uniform", "gaussian", "random_binary")]
variants.append(("behavior_guided", "continuous"))
print(f"{'prior':<16} {'flow':<11} {'R@10':>7} {'R@20':>7} {'N@10':>7} {'N@20':>7}")
for prior, mode in variants:
    cfg = TrainConfig(prior_kind=prior, state_space=mode, max_epochs=100, patience=5)
    model, _ = fit(split, cfg)
    r = evaluate(model, split, cfg.infer_config())
    print(f"{prior:<16} {mode:<11} {r.recall[10]:7.4f} {r.recall[20]:7.4f} {r.ndcg[10]:7.4f} {r.ndcg[20]:7.4f}")
