"""Train a small flow model on synthetic two-cluster data and recommend.

Run: python demos/02_train_and_recommend.py
"""
import numpy as np

from flowrec import data
from flowrec.evaluation import evaluate
from flowrec.infer import predict_scores, recommend_topk
from flowrec.model import ModelConfig
from flowrec.train import TrainConfig, fit

rng = np.random.default_rng(1)

# 300 users, 120 items; even users like the first half of the catalogue
records = []
for u in range(300):
    for i in range(120):
        liked = (i < 60) == (u % 2 == 0)
        if rng.random() < (0.25 if liked else 0.03):
            rating = 5 if liked else int(rng.integers(1, 4))
            records.append(data.RatingRecord(str(u), str(i), float(rating)))

split, _ = data.prepare(records, seed=0)
print(f"{split.n_users} users, {split.n_items} items, {split.train.nnz} training interactions")

cfg = TrainConfig(batch_size=64, max_epochs=200, eval_every=10, patience=5, seed=0)
model, log = fit(split, cfg, ModelConfig(n_items=split.n_items, hidden_sizes=(64, 64)))
print("best epoch:", log.best_epoch)
print(evaluate(model, split, cfg.infer_config()).format_table())

# the top items for a few users should come from their own half of the catalogue
users = np.arange(4)
scores = predict_scores(model, split.train, cfg.infer_config(), users)
for u, top in zip(users, recommend_topk(scores, split.train.dense(users), 5)):
    tokens = [split.train.item_tokens[i] for i in top]
    print(f"user {split.train.user_tokens[u]}:", ", ".join(tokens))
