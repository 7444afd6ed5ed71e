import io
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowrec import data
from flowrec.data import RatingRecord


def rec(u, i, r):
    return RatingRecord(str(u), str(i), float(r))


# -- parse_ratings ----------------------------------------------------------


def test_parse_movielens_line():
    out = data.parse_ratings(io.StringIO("1::1193::5::978300760\n"), "::")
    assert out == [RatingRecord("1", "1193", 5.0, 978300760)]


def test_parse_empty_stream():
    assert data.parse_ratings(io.StringIO(""), ",") == []


def test_parse_bad_rating_reports_line():
    with pytest.raises(data.ParseError) as exc:
        data.parse_ratings(io.StringIO("a,b,notanumber\n"), ",")
    assert exc.value.lineno == 1


def test_parse_too_few_fields():
    with pytest.raises(data.ParseError) as exc:
        data.parse_ratings(io.StringIO("u,i,4\nu,i\n"), ",")
    assert exc.value.lineno == 2


def test_parse_header_and_tabs_preserve_order():
    text = "user\titem\trating\n2\t9\t3.5\n1\t7\t4\n"
    out = data.parse_ratings(io.StringIO(text), "\t", skip_header=True)
    assert [(r.user, r.item, r.rating, r.timestamp) for r in out] == [
        ("2", "9", 3.5, None),
        ("1", "7", 4.0, None),
    ]


def test_parse_rejects_nan_rating():
    with pytest.raises(data.ParseError):
        data.parse_ratings(io.StringIO("u,i,nan\n"), ",")


# -- binarize ---------------------------------------------------------------


def test_binarize_threshold():
    assert data.binarize([rec("u", "i", 5), rec("u", "j", 3)], 4.0) == [("u", "i")]


def test_binarize_boundary_inclusive():
    assert data.binarize([rec("u", "i", 4)]) == [("u", "i")]


def test_binarize_duplicates_collapse():
    assert data.binarize([rec("u", "i", 5), rec("u", "i", 4)]) == [("u", "i")]


def test_duplicate_keeps_max_rating():
    records = [rec("u", "i", 2), rec("u", "i", 4), rec("u", "j", 1)]
    assert data.binarize(records) == [("u", "i")]
    assert data.low_rating_pairs(records) == [("u", "j")]


# -- kcore_filter -----------------------------------------------------------


def brute_kcore(pairs, k):
    """Repeatedly delete one violating pair at a time until nothing changes."""
    current = set(pairs)
    changed = True
    while changed:
        changed = False
        deg_u, deg_i = {}, {}
        for u, i in current:
            deg_u[u] = deg_u.get(u, 0) + 1
            deg_i[i] = deg_i.get(i, 0) + 1
        for u, i in sorted(current):
            if deg_u[u] < k or deg_i[i] < k:
                current.discard((u, i))
                changed = True
                break
    return current


def test_kcore_complete_block_unchanged():
    pairs = [(f"u{a}", f"i{b}") for a in range(5) for b in range(5)]
    assert data.kcore_filter(pairs, 5) == pairs


def test_kcore_single_pair_empties():
    assert data.kcore_filter([("u", "i")], 5) == []


def test_kcore_cascade():
    # u5's fifth item i4 is rare; dropping it leaves u5 below k=5, which
    # then pushes the block items below k as well
    block = [(f"u{a}", f"i{b}") for a in range(4) for b in range(4)]
    pairs = block + [("u5", f"i{b}") for b in range(5)]
    assert data.kcore_filter(pairs, 5) == []
    # at k=4 only the rare i4 goes; u5 keeps its four block items
    assert sorted(data.kcore_filter(pairs, 4)) == sorted(block + [("u5", f"i{b}") for b in range(4)])


@pytest.mark.parametrize("seed", range(25))
def test_kcore_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    density = rng.uniform(0.15, 0.45)
    mask = rng.random((20, 20)) < density
    pairs = [(f"u{a}", f"i{b}") for a, b in zip(*np.nonzero(mask))]
    k = int(rng.integers(2, 6))
    got = data.kcore_filter(pairs, k)
    assert set(got) == brute_kcore(pairs, k)
    for side in (0, 1):
        counts = {}
        for p in got:
            counts[p[side]] = counts.get(p[side], 0) + 1
        assert all(c >= k for c in counts.values())


def test_kcore_idempotent():
    rng = np.random.default_rng(3)
    mask = rng.random((30, 30)) < 0.3
    pairs = [(str(a), str(b)) for a, b in zip(*np.nonzero(mask))]
    once = data.kcore_filter(pairs, 4)
    assert data.kcore_filter(once, 4) == once


# -- split ------------------------------------------------------------------


def ring_pairs(n_users, n_items, per_user):
    return [(f"u{u}", f"i{(u + j) % n_items}") for u in range(n_users) for j in range(per_user)]


def test_split_ten_items():
    s = data.split(ring_pairs(1, 10, 10), seed=1)
    assert (s.train.nnz, s.validation.nnz, s.test.nnz) == (8, 1, 1)


def test_split_deterministic():
    pairs = ring_pairs(30, 40, 12)
    a, b = data.split(pairs, seed=7), data.split(pairs, seed=7)
    assert a.train == b.train and a.validation == b.validation and a.test == b.test
    c = data.split(pairs, seed=8)
    assert not (a.test == c.test)


def test_split_counts_enumeration():
    # independent restatement of the rounding rule
    for n in range(3, 13):
        held = max(1, int(np.floor(0.1 * n + 0.5)))
        assert data.split_counts(n) == (n - 2 * held, held, held)
        assert sum(data.split_counts(n)) == n
    assert data.split_counts(5) == (3, 1, 1)
    assert data.split_counts(2) == (2, 0, 0)


def test_split_rejects_user_without_train_item():
    with pytest.raises(ValueError, match="no assignable train item"):
        data.split(ring_pairs(1, 4, 4), ratios=(0.1, 0.45, 0.45))


def test_split_disjoint_and_covering():
    rng = np.random.default_rng(0)
    mask = rng.random((40, 60)) < 0.3
    pairs = [(f"u{a}", f"i{b}") for a, b in zip(*np.nonzero(mask))]
    s = data.split(pairs, seed=2)
    full = {}
    for u, i in pairs:
        full.setdefault(s.train.user_index[u], set()).add(s.train.item_index[i])
    for u in range(s.n_users):
        tr, va, te = (set(m.row(u).tolist()) for m in (s.train, s.validation, s.test))
        assert not (tr & va or tr & te or va & te)
        assert tr | va | te == full[u]
        assert len(tr) >= 1


def test_index_maps_are_bijections():
    s = data.split(ring_pairs(12, 15, 6), seed=0)
    m = s.train
    assert len(set(m.user_tokens)) == m.n_users
    assert all(m.user_tokens[i] == t for t, i in m.user_index.items())
    for row in m.rows:
        assert row == sorted(set(row)) and all(0 <= i < m.n_items for i in row)


# -- item_frequencies -------------------------------------------------------


def test_frequencies_examples():
    m = data.InteractionMatrix.from_indices(
        [0, 1, 0, 1, 2, 3], [0, 0, 2, 2, 2, 2], ["a", "b", "c", "d"], ["x", "y", "z"]
    )
    f = data.item_frequencies(m)
    assert f[0] == 0.5
    assert f[1] == 0.0
    assert f[2] == 1.0


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_frequencies_sum_matches_nnz(seed):
    rng = np.random.default_rng(seed)
    mask = rng.random((15, 11)) < rng.uniform(0, 1)
    u, i = np.nonzero(mask)
    m = data.InteractionMatrix.from_indices(u, i, [str(k) for k in range(15)], [str(k) for k in range(11)])
    f = data.item_frequencies(m)
    assert np.all((f >= 0) & (f <= 1))
    assert round(float(f.sum() * m.n_users)) == m.nnz


# -- inject_noise -----------------------------------------------------------


@pytest.fixture(scope="module")
def noisy_setup():
    rng = np.random.default_rng(11)
    records = []
    for u in range(60):
        for i in range(80):
            if rng.random() < 0.35:
                records.append(rec(u, i, rng.integers(1, 6)))
    split_, cand = data.prepare(records, k=3, seed=5)
    return records, split_, cand


def test_noise_zero_is_identity(noisy_setup):
    _, s, cand = noisy_setup
    assert data.inject_noise(s, "random", 0.0, seed=1) is s
    assert data.inject_noise(s, "natural", 0.0, cand, seed=1) is s


@pytest.mark.parametrize("mode", ["natural", "random"])
def test_noise_adds_exact_count(noisy_setup, mode):
    records, s, cand = noisy_setup
    noisy = data.inject_noise(s, mode, 0.1, data.low_rating_pairs(records), seed=3)
    expected = int(np.floor(0.1 * s.train.nnz + 0.5))
    added = (noisy.train.nnz - s.train.nnz) + (noisy.validation.nnz - s.validation.nnz)
    assert added == expected
    assert noisy.test == s.test
    assert noisy.test.csr is s.test.csr
    # nothing removed, nothing duplicated across splits
    for before, after in ((s.train, noisy.train), (s.validation, noisy.validation)):
        assert (before.csr.multiply(after.csr)).nnz == before.nnz
    tr, va, te = (set(zip(*m.pairs())) for m in (noisy.train, noisy.validation, noisy.test))
    assert not (tr & va or tr & te or va & te)


def test_noise_exactly_100_of_1000():
    pairs = ring_pairs(100, 200, 12)
    s = data.split(pairs, seed=0)
    assert s.train.nnz == 1000
    noisy = data.inject_noise(s, "random", 0.1, seed=4)
    added = noisy.train.nnz + noisy.validation.nnz - s.train.nnz - s.validation.nnz
    assert added == 100


def test_natural_noise_draws_from_low_ratings(noisy_setup):
    records, s, cand = noisy_setup
    noisy = data.inject_noise(s, "natural", 0.2, cand, seed=9)
    pool = {(int(u), int(i)) for u, i in cand}
    new = (set(zip(*noisy.train.pairs())) - set(zip(*s.train.pairs()))) | (
        set(zip(*noisy.validation.pairs())) - set(zip(*s.validation.pairs()))
    )
    assert new and {(int(u), int(i)) for u, i in new} <= pool


def test_random_noise_deterministic(noisy_setup):
    _, s, _ = noisy_setup
    a = data.inject_noise(s, "random", 0.3, seed=21)
    b = data.inject_noise(s, "random", 0.3, seed=21)
    assert a.train == b.train and a.validation == b.validation


def test_natural_noise_pool_exhaustion(noisy_setup):
    _, s, cand = noisy_setup
    with pytest.raises(ValueError, match="candidates"):
        data.inject_noise(s, "natural", 0.5, cand[:3], seed=0)


def test_natural_noise_requires_candidates(noisy_setup):
    _, s, _ = noisy_setup
    with pytest.raises(ValueError):
        data.inject_noise(s, "natural", 0.1, None)


# -- bundle -----------------------------------------------------------------


def test_bundle_round_trip(tmp_path, noisy_setup):
    _, s, cand = noisy_setup
    data.save_bundle(tmp_path / "b", s, cand)
    b = data.load_bundle(tmp_path / "b")
    assert b.split.train == s.train and b.split.validation == s.validation and b.split.test == s.test
    assert np.array_equal(b.frequencies, data.item_frequencies(s.train))
    assert np.array_equal(b.noise_candidates, cand)
    header = (tmp_path / "b" / "train.txt").read_text().splitlines()[0]
    assert header == f"{s.n_users} {s.n_items} {s.train.nnz}"


def test_matrix_parse_rejects_unsorted_row():
    with pytest.raises(data.ParseError):
        data.parse_matrix("1 3 2\n2 1\n", ["u"], ["a", "b", "c"])


def test_all_pairs_helper_consistency():
    m = data.InteractionMatrix.from_indices([0, 0, 1], [2, 0, 1], ["a", "b"], ["x", "y", "z"])
    assert m.rows == [[0, 2], [1]]
    assert np.array_equal(m.dense(), np.array([[1, 0, 1], [0, 1, 0]], dtype=np.float32))
    assert list(itertools.chain(*m.rows)) == m.pairs()[1].tolist()
