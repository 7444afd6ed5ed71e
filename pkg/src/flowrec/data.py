"""Rating-log ingestion and interaction-matrix preparation.

The pipeline is ``parse_ratings -> binarize -> kcore_filter -> split``;
``item_frequencies`` and ``inject_noise`` operate on the resulting split.
Matrices are stored as CSR with sorted column indices and implicit ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ._io import atomic_write_text

Pair = tuple[str, str]


class ParseError(ValueError):
    """Malformed rating line; ``lineno`` is 1-based."""

    def __init__(self, message: str, lineno: int, source: str | None = None):
        where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}")
        self.lineno = lineno
        self.source = source


@dataclass(frozen=True)
class RatingRecord:
    user: str
    item: str
    rating: float
    timestamp: int | None = None


def parse_ratings(
    stream: Iterable[str],
    delimiter: str = "::",
    skip_header: bool = False,
    source: str | None = None,
) -> list[RatingRecord]:
    """Parse delimited ``user<d>item<d>rating[<d>timestamp]`` lines.

    Blank lines are ignored. Any other line with fewer than three fields,
    an empty token, or a rating that is not a finite number raises
    :class:`ParseError` carrying the line number.
    """
    records = []
    for lineno, line in enumerate(stream, start=1):
        if skip_header and lineno == 1:
            continue
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split(delimiter)
        if len(fields) < 3:
            raise ParseError(
                f"expected at least 3 fields separated by {delimiter!r}, got {len(fields)}",
                lineno,
                source,
            )
        user, item = fields[0].strip(), fields[1].strip()
        if not user or not item:
            raise ParseError("empty user or item token", lineno, source)
        try:
            rating = float(fields[2])
        except ValueError:
            raise ParseError(f"unparseable rating {fields[2]!r}", lineno, source) from None
        if not math.isfinite(rating):
            raise ParseError(f"non-finite rating {fields[2]!r}", lineno, source)
        timestamp = None
        if len(fields) > 3 and fields[3].strip():
            try:
                timestamp = int(float(fields[3]))
            except ValueError:
                raise ParseError(f"unparseable timestamp {fields[3]!r}", lineno, source) from None
        records.append(RatingRecord(user, item, rating, timestamp))
    return records


def read_ratings(path, delimiter: str = "::", skip_header: bool = False) -> list[RatingRecord]:
    with open(path, encoding="utf-8") as fh:
        return parse_ratings(fh, delimiter, skip_header, source=str(path))


def _max_ratings(records: Iterable[RatingRecord]) -> dict[Pair, float]:
    # duplicate (user, item) ratings collapse to their maximum; dict keeps first-seen order
    best: dict[Pair, float] = {}
    for r in records:
        key = (r.user, r.item)
        prev = best.get(key)
        if prev is None or r.rating > prev:
            best[key] = r.rating
    return best


def binarize(records: Iterable[RatingRecord], threshold: float = 4.0) -> list[Pair]:
    """Pairs whose (maximum) rating is at least ``threshold``, first-seen order."""
    return [pair for pair, rating in _max_ratings(records).items() if rating >= threshold]


def low_rating_pairs(records: Iterable[RatingRecord], threshold: float = 4.0) -> list[Pair]:
    """The complement of :func:`binarize`: pairs discarded as sub-threshold."""
    return [pair for pair, rating in _max_ratings(records).items() if rating < threshold]


def kcore_filter(pairs: Sequence[Pair], k: int = 5) -> list[Pair]:
    """Iteratively drop users and items with fewer than ``k`` interactions.

    Repeats until a fixed point, so every survivor has degree >= k on both
    sides. Input order is preserved among surviving pairs.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not pairs:
        return []
    users, u_codes = np.unique([p[0] for p in pairs], return_inverse=True)
    items, i_codes = np.unique([p[1] for p in pairs], return_inverse=True)
    alive = np.ones(len(pairs), dtype=bool)
    while True:
        u_deg = np.bincount(u_codes[alive], minlength=len(users))
        i_deg = np.bincount(i_codes[alive], minlength=len(items))
        keep = alive & (u_deg[u_codes] >= k) & (i_deg[i_codes] >= k)
        if keep.sum() == alive.sum():
            break
        alive = keep
    return [pairs[j] for j in np.flatnonzero(alive)]


def _token_order(tokens: Iterable[str]) -> list[str]:
    uniq = set(tokens)
    if all(t.isdigit() for t in uniq):
        return sorted(uniq, key=lambda t: (int(t), t))
    return sorted(uniq)


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Binary user x item matrix with token <-> index maps.

    ``csr`` holds ones at the observed entries with strictly increasing
    column indices per row.
    """

    csr: sp.csr_matrix
    user_tokens: tuple[str, ...]
    item_tokens: tuple[str, ...]

    def __post_init__(self):
        if self.csr.shape != (len(self.user_tokens), len(self.item_tokens)):
            raise ValueError(
                f"matrix shape {self.csr.shape} does not match index maps "
                f"({len(self.user_tokens)}, {len(self.item_tokens)})"
            )

    @classmethod
    def from_indices(cls, users, items, user_tokens, item_tokens) -> "InteractionMatrix":
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        shape = (len(user_tokens), len(item_tokens))
        csr = sp.csr_matrix(
            (np.ones(len(users), dtype=np.int8), (users, items)), shape=shape
        )
        csr.sum_duplicates()
        csr.data[:] = 1
        csr.sort_indices()
        return cls(csr, tuple(user_tokens), tuple(item_tokens))

    @property
    def n_users(self) -> int:
        return self.csr.shape[0]

    @property
    def n_items(self) -> int:
        return self.csr.shape[1]

    @property
    def nnz(self) -> int:
        return int(self.csr.nnz)

    @property
    def user_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.user_tokens)}

    @property
    def item_index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.item_tokens)}

    def row(self, user: int) -> np.ndarray:
        start, end = self.csr.indptr[user], self.csr.indptr[user + 1]
        return self.csr.indices[start:end]

    @property
    def rows(self) -> list[list[int]]:
        return [self.row(u).tolist() for u in range(self.n_users)]

    def dense(self, users=None, dtype=np.float32) -> np.ndarray:
        """Materialize the rows of ``users`` (all users by default)."""
        sub = self.csr if users is None else self.csr[np.asarray(users)]
        return sub.toarray().astype(dtype, copy=False)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        coo = self.csr.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64)

    def with_added(self, users, items) -> "InteractionMatrix":
        u0, i0 = self.pairs()
        return InteractionMatrix.from_indices(
            np.concatenate([u0, users]),
            np.concatenate([i0, items]),
            self.user_tokens,
            self.item_tokens,
        )

    def __eq__(self, other):
        if not isinstance(other, InteractionMatrix):
            return NotImplemented
        return (
            self.user_tokens == other.user_tokens
            and self.item_tokens == other.item_tokens
            and self.csr.shape == other.csr.shape
            and np.array_equal(self.csr.indptr, other.csr.indptr)
            and np.array_equal(self.csr.indices, other.csr.indices)
        )

    __hash__ = None


@dataclass(frozen=True)
class DatasetSplit:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    seed: int

    def __post_init__(self):
        for m in (self.validation, self.test):
            if m.user_tokens != self.train.user_tokens or m.item_tokens != self.train.item_tokens:
                raise ValueError("train/validation/test must share index maps")

    @property
    def n_users(self) -> int:
        return self.train.n_users

    @property
    def n_items(self) -> int:
        return self.train.n_items


def split_counts(n: int, ratios: Sequence[float] = (0.8, 0.1, 0.1)) -> tuple[int, int, int]:
    """(train, validation, test) sizes for a user with ``n`` items.

    Held-out parts get ``max(1, round_half_up(ratio * n))`` when n >= 3 and
    nothing otherwise; train takes the remainder.
    """
    if n < 3:
        return n, 0, 0
    n_val = max(1, math.floor(ratios[1] * n + 0.5))
    n_test = max(1, math.floor(ratios[2] * n + 0.5))
    return n - n_val - n_test, n_val, n_test


def split(
    pairs: Sequence[Pair], ratios: Sequence[float] = (0.8, 0.1, 0.1), seed: int = 0
) -> DatasetSplit:
    """Per-user random holdout of items into train/validation/test."""
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must be three positive numbers summing to 1, got {ratios}")
    user_tokens = _token_order(p[0] for p in pairs)
    item_tokens = _token_order(p[1] for p in pairs)
    u_idx = {t: i for i, t in enumerate(user_tokens)}
    i_idx = {t: i for i, t in enumerate(item_tokens)}
    full = InteractionMatrix.from_indices(
        [u_idx[u] for u, _ in pairs], [i_idx[i] for _, i in pairs], user_tokens, item_tokens
    )

    rng = np.random.default_rng(seed)
    parts: list[tuple[list, list]] = [([], []), ([], []), ([], [])]
    for u in range(full.n_users):
        items = full.row(u)
        n_train, n_val, n_test = split_counts(len(items), ratios)
        if n_train < 1:
            raise ValueError(
                f"user {user_tokens[u]!r} with {len(items)} items has no assignable train item"
            )
        shuffled = rng.permutation(items)
        bounds = (0, n_train, n_train + n_val, len(items))
        for part, (lo, hi) in zip(parts, zip(bounds[:-1], bounds[1:])):
            part[0].extend([u] * (hi - lo))
            part[1].extend(shuffled[lo:hi].tolist())

    train, validation, test = (
        InteractionMatrix.from_indices(us, its, user_tokens, item_tokens) for us, its in parts
    )
    return DatasetSplit(train, validation, test, seed)


def item_frequencies(train: InteractionMatrix) -> np.ndarray:
    """Fraction of users who interacted with each item (train split only)."""
    if train.n_users == 0:
        raise ValueError("frequencies need at least one user")
    counts = np.bincount(train.csr.indices, minlength=train.n_items)
    return counts / float(train.n_users)


def _pairs_to_indices(split_: DatasetSplit, pairs: Iterable[Pair]) -> np.ndarray:
    u_idx, i_idx = split_.train.user_index, split_.train.item_index
    out = {
        (u_idx[u], i_idx[i]) for u, i in pairs if u in u_idx and i in i_idx
    }
    return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)


def _observed_flat(split_: DatasetSplit) -> np.ndarray:
    flat = []
    for m in (split_.train, split_.validation, split_.test):
        u, i = m.pairs()
        flat.append(u * split_.n_items + i)
    return np.unique(np.concatenate(flat))


def inject_noise(
    split_: DatasetSplit,
    mode: str,
    proportion: float,
    discarded_pairs: Iterable[Pair] | np.ndarray | None = None,
    seed: int = 0,
) -> DatasetSplit:
    """Add false-positive interactions to the train and validation matrices.

    ``proportion * train.nnz`` new pairs are drawn: sub-threshold ratings for
    ``mode="natural"`` (``discarded_pairs`` as token pairs, or an (n, 2)
    index array), unobserved cells for ``mode="random"``. The sample is
    divided between train and validation in proportion to their sizes so the
    two stay disjoint. The test matrix is returned untouched.
    """
    if not 0.0 <= proportion <= 0.5:
        raise ValueError(f"proportion must lie in [0, 0.5], got {proportion}")
    if mode not in ("natural", "random"):
        raise ValueError(f"unknown noise mode {mode!r}")
    n_noise = math.floor(proportion * split_.train.nnz + 0.5)
    if n_noise == 0:
        return split_
    rng = np.random.default_rng(seed)
    n_items = split_.n_items
    observed = _observed_flat(split_)

    if mode == "natural":
        if discarded_pairs is None:
            raise ValueError("natural noise needs the sub-threshold pairs dropped by binarize")
        if isinstance(discarded_pairs, np.ndarray):
            cand = discarded_pairs.astype(np.int64).reshape(-1, 2)
        else:
            cand = _pairs_to_indices(split_, discarded_pairs)
        flat = np.unique(cand[:, 0] * n_items + cand[:, 1])
        pool = np.setdiff1d(flat, observed, assume_unique=True)
        if n_noise > len(pool):
            raise ValueError(
                f"requested {n_noise} noisy pairs but only {len(pool)} sub-threshold candidates exist"
            )
        chosen = pool[rng.choice(len(pool), size=n_noise, replace=False)]
    else:
        total = split_.n_users * n_items
        available = total - len(observed)
        if n_noise > available:
            raise ValueError(
                f"requested {n_noise} noisy pairs but only {available} unobserved cells exist"
            )
        chosen = np.empty(0, dtype=np.int64)
        seen = observed
        while len(chosen) < n_noise:
            draw = rng.integers(0, total, size=2 * (n_noise - len(chosen)) + 16)
            # keep first occurrences in draw order
            _, first = np.unique(draw, return_index=True)
            draw = draw[np.sort(first)]
            draw = draw[~np.isin(draw, seen)]
            draw = draw[: n_noise - len(chosen)]
            chosen = np.concatenate([chosen, draw])
            seen = np.union1d(seen, draw)

    train_nnz, val_nnz = split_.train.nnz, split_.validation.nnz
    n_val = math.floor(n_noise * val_nnz / (train_nnz + val_nnz) + 0.5) if val_nnz else 0
    to_val, to_train = chosen[:n_val], chosen[n_val:]
    train = split_.train.with_added(to_train // n_items, to_train % n_items)
    validation = split_.validation.with_added(to_val // n_items, to_val % n_items)
    return DatasetSplit(train, validation, split_.test, split_.seed)


# -- bundle on disk ---------------------------------------------------------

MATRIX_FILES = {"train": "train.txt", "validation": "validation.txt", "test": "test.txt"}


def format_matrix(m: InteractionMatrix) -> str:
    lines = [f"{m.n_users} {m.n_items} {m.nnz}"]
    for u in range(m.n_users):
        lines.append(" ".join(map(str, m.row(u).tolist())))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, user_tokens, item_tokens, source: str = "<matrix>") -> InteractionMatrix:
    lines = text.split("\n")
    try:
        n_users, n_items, nnz = (int(x) for x in lines[0].split())
    except ValueError:
        raise ParseError("bad header, expected 'n_users n_items nnz'", 1, source) from None
    if (n_users, n_items) != (len(user_tokens), len(item_tokens)):
        raise ParseError("header dimensions disagree with index maps", 1, source)
    users, items = [], []
    for u in range(n_users):
        line = lines[u + 1] if u + 1 < len(lines) else ""
        row = [int(x) for x in line.split()]
        if any(b <= a for a, b in zip(row, row[1:])) or any(i < 0 or i >= n_items for i in row):
            raise ParseError("item indices must be strictly increasing and in range", u + 2, source)
        users.extend([u] * len(row))
        items.extend(row)
    if len(items) != nnz:
        raise ParseError(f"header says nnz={nnz} but found {len(items)} entries", 1, source)
    return InteractionMatrix.from_indices(users, items, user_tokens, item_tokens)


def _format_index(tokens) -> str:
    return "".join(f"{t}\t{i}\n" for i, t in enumerate(tokens))


def _parse_index(text: str, source: str) -> list[str]:
    tokens = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token, _, idx = line.rpartition("\t")
        if not token or int(idx) != len(tokens):
            raise ParseError("index file must list token<TAB>index in order", lineno, source)
        tokens.append(token)
    return tokens


@dataclass(frozen=True)
class Bundle:
    split: DatasetSplit
    frequencies: np.ndarray
    noise_candidates: np.ndarray  # (n, 2) user/item indices of sub-threshold pairs


def save_bundle(directory, split_: DatasetSplit, noise_candidates=None) -> Path:
    """Write matrices, index maps, frequencies and noise candidates."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, fname in MATRIX_FILES.items():
        atomic_write_text(directory / fname, format_matrix(getattr(split_, name)))
    atomic_write_text(directory / "users.tsv", _format_index(split_.train.user_tokens))
    atomic_write_text(directory / "items.tsv", _format_index(split_.train.item_tokens))
    freqs = item_frequencies(split_.train)
    atomic_write_text(directory / "frequencies.txt", "".join(f"{x!r}\n" for x in freqs.tolist()))
    cand = np.zeros((0, 2), dtype=np.int64) if noise_candidates is None else noise_candidates
    atomic_write_text(directory / "noise_candidates.txt", "".join(f"{u} {i}\n" for u, i in cand.tolist()))
    atomic_write_text(directory / "seed.txt", f"{split_.seed}\n")
    return directory


def load_bundle(directory) -> Bundle:
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"bundle directory not found: {directory}")
    users = _parse_index((directory / "users.tsv").read_text("utf-8"), str(directory / "users.tsv"))
    items = _parse_index((directory / "items.tsv").read_text("utf-8"), str(directory / "items.tsv"))
    mats = {
        name: parse_matrix((directory / fname).read_text("utf-8"), users, items, str(directory / fname))
        for name, fname in MATRIX_FILES.items()
    }
    seed_file = directory / "seed.txt"
    seed = int(seed_file.read_text().strip()) if seed_file.exists() else 0
    freqs = np.array(
        [float(x) for x in (directory / "frequencies.txt").read_text().split()], dtype=np.float64
    )
    cand_file = directory / "noise_candidates.txt"
    cand = np.zeros((0, 2), dtype=np.int64)
    if cand_file.exists():
        vals = np.array(cand_file.read_text().split(), dtype=np.int64)
        cand = vals.reshape(-1, 2)
    split_ = DatasetSplit(mats["train"], mats["validation"], mats["test"], seed)
    return Bundle(split_, freqs, cand)


def prepare(
    records: Sequence[RatingRecord],
    threshold: float = 4.0,
    k: int = 5,
    ratios: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[DatasetSplit, np.ndarray]:
    """Binarize, k-core filter and split; also returns noise candidates as indices."""
    pairs = kcore_filter(binarize(records, threshold), k)
    if not pairs:
        raise ValueError("no interactions survive binarization and k-core filtering")
    split_ = split(pairs, ratios, seed)
    return split_, _pairs_to_indices(split_, low_rating_pairs(records, threshold))
