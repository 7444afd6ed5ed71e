import numpy as np
import pytest

from flowrec import data
from flowrec.prior import PriorSpec, sample_prior


def test_behavior_guided_all_zero():
    spec = PriorSpec("behavior_guided", "discrete", np.zeros(7))
    s = sample_prior(spec, 5, np.random.default_rng(0))
    assert s.binary and not s.values.any()


def test_behavior_guided_all_one():
    spec = PriorSpec("behavior_guided", "discrete", np.ones(7))
    assert np.all(sample_prior(spec, 5, np.random.default_rng(0)).values == 1)


def test_behavior_guided_rate_concentrates():
    f = np.array([0.3, 0.05, 0.9])
    spec = PriorSpec("behavior_guided", "discrete", f)
    values = sample_prior(spec, 10_000, np.random.default_rng(1)).values
    tol = 4 * np.sqrt(f * (1 - f) / 10_000)
    assert np.all(np.abs(values.mean(axis=0) - f) <= tol)


def test_sparsity_matches_train_density():
    rng = np.random.default_rng(2)
    mask = rng.random((200, 50)) < rng.uniform(0.01, 0.3, size=50)
    u, i = np.nonzero(mask)
    m = data.InteractionMatrix.from_indices(u, i, [str(k) for k in range(200)], [str(k) for k in range(50)])
    f = data.item_frequencies(m)
    assert np.isclose(f.mean(), m.nnz / (m.n_users * m.n_items))
    n = 4000
    sample = sample_prior(PriorSpec("behavior_guided", "discrete", f), n, rng).values
    sd = np.sqrt(np.sum(f * (1 - f)) / (n * len(f) ** 2))
    assert abs(sample.mean() - f.mean()) <= 4 * sd


def test_continuous_behavior_guided_copies_frequencies():
    f = np.array([0.1, 0.4, 0.0])
    s = sample_prior(PriorSpec("behavior_guided", "continuous", f), 3, np.random.default_rng(0))
    assert not s.binary
    np.testing.assert_array_equal(s.values, np.tile(f.astype(np.float32), (3, 1)))


@pytest.mark.parametrize("kind", ["uniform", "gaussian", "random_binary"])
def test_discrete_priors_are_binary(kind):
    s = sample_prior(PriorSpec(kind, "discrete"), 50, np.random.default_rng(3), n_items=40)
    assert s.binary
    assert set(np.unique(s.values)) <= {0.0, 1.0}


def test_discrete_prior_densities():
    rng = np.random.default_rng(4)
    n = 400_000
    u = sample_prior(PriorSpec("uniform", "discrete"), 1, rng, n_items=n).values
    g = sample_prior(PriorSpec("gaussian", "discrete"), 1, rng, n_items=n).values
    r = sample_prior(PriorSpec("random_binary", "discrete"), 1, rng, n_items=n).values
    # E[Bernoulli(U)] = 1/2; E[clip(N(0,1), 0, 1)] computed by quadrature
    from scipy import integrate, stats

    clip_mean = integrate.quad(lambda x: x * stats.norm.pdf(x), 0, 1)[0] + stats.norm.sf(1)
    for values, p in ((u, 0.5), (g, clip_mean), (r, 0.5)):
        assert abs(values.mean() - p) <= 4 * np.sqrt(p * (1 - p) / n)


def test_continuous_uniform_and_gaussian():
    rng = np.random.default_rng(5)
    u = sample_prior(PriorSpec("uniform", "continuous"), 200, rng, n_items=500).values
    assert u.min() >= 0 and u.max() < 1 and abs(u.mean() - 0.5) < 0.01
    g = sample_prior(PriorSpec("gaussian", "continuous"), 200, rng, n_items=500).values
    assert abs(g.mean()) < 0.01 and abs(g.std() - 1) < 0.01
    assert (g < 0).any()


def test_prior_deterministic():
    spec = PriorSpec("behavior_guided", "discrete", np.linspace(0, 1, 9))
    a = sample_prior(spec, 20, np.random.default_rng(9)).values
    b = sample_prior(spec, 20, np.random.default_rng(9)).values
    np.testing.assert_array_equal(a, b)


def test_prior_errors():
    with pytest.raises(ValueError):
        PriorSpec("behavior_guided", "discrete")
    with pytest.raises(ValueError):
        PriorSpec("random_binary", "continuous")
    with pytest.raises(ValueError):
        PriorSpec("beta", "discrete")
    with pytest.raises(ValueError):
        sample_prior(PriorSpec("uniform", "discrete"), 0, np.random.default_rng(0), n_items=3)
