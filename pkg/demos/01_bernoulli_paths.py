"""Walk through the discrete interpolation path on a toy interaction matrix.

Run: python demos/01_bernoulli_paths.py
"""
import numpy as np

from flowrec import data, flowcore
from flowrec.prior import PriorSpec, sample_prior

rng = np.random.default_rng(0)

# six users, eight items, two taste groups
x1 = np.array(
    [
        [1, 1, 1, 0, 0, 0, 0, 1],
        [1, 1, 0, 1, 0, 0, 0, 0],
        [1, 0, 1, 1, 0, 0, 0, 0],
        [0, 0, 0, 0, 1, 1, 1, 0],
        [0, 0, 0, 1, 1, 0, 1, 1],
        [0, 0, 0, 0, 0, 1, 1, 1],
    ],
    dtype=np.float32,
)
users, items = np.nonzero(x1)
train = data.InteractionMatrix.from_indices(users, items, [f"u{i}" for i in range(6)], [f"i{j}" for j in range(8)])

freqs = data.item_frequencies(train)
print("item frequencies:", np.round(freqs, 3))

# the source sample has the same per-item popularity as the data
prior = PriorSpec("behavior_guided", "discrete", freqs)
x0 = sample_prior(prior, 6, rng).values
print("\nprior sample X0:\n", x0.astype(int))

# each entry is copied from X1 with probability t, from X0 otherwise
schedule = flowcore.make_schedule(4)
for t in schedule.grid[:-1]:
    mask = flowcore.sample_mask(t, x1.shape, rng)
    xt = flowcore.interpolate_discrete(x0, x1, mask)
    print(f"\nt = {t:.2f}, entries already equal to X1: {(xt == x1).mean():.2f}")
    print(xt.astype(int))

# averaged over many masks the path is the straight line between X0 and X1
t = 0.3
masks = flowcore.sample_mask(t, (20000,) + x1.shape, rng)
mean = flowcore.interpolate_discrete(
    np.broadcast_to(x0, masks.shape), np.broadcast_to(x1, masks.shape), masks
).mean(axis=0)
gap = np.abs(mean - flowcore.interpolate_continuous(x0, x1, t)).max()
print(f"\nmax gap between the Monte-Carlo mean and t*X1 + (1-t)*X0 at t={t}: {gap:.4f}")

# one thresholded Euler step with the exact field moves X_t toward X1
xt = flowcore.interpolate_discrete(x0, x1, flowcore.sample_mask(7 / 9, x1.shape, rng))
v = flowcore.true_field(x1, xt, 7 / 9)
step = flowcore.preserve_observed(flowcore.discrete_update(xt, v, 9), xt)
print("mismatches before/after one step:", int((xt != x1).sum()), int((step != x1).sum()))
