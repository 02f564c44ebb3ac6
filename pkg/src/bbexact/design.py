"""Box-Behnken designs built from the block-size-2 BIBD over all factor pairs.

Runs are stored in a fixed canonical order: factor pairs ``(i, j)`` with
``i < j`` in lexicographic order, each contributing the 2x2 factorial rows
``(-1,-1), (-1,+1), (+1,-1), (+1,+1)``, followed by a single origin run.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

SIGNS = (-1, 1)


@dataclass(frozen=True)
class Design:
    """Coded three-level run table of an m-factor Box-Behnken design."""

    m: int
    levels: np.ndarray = field(repr=False)
    run_labels: tuple[str, ...] = field(repr=False)

    def __post_init__(self):
        self.levels.setflags(write=False)

    @property
    def k(self) -> int:
        return self.levels.shape[0]

    @property
    def origin_index(self) -> int:
        return self.k - 1

    def pair_run(self, i: int, j: int, p: int, q: int) -> int:
        """Index of the run with level ``p`` at factor ``i`` and ``q`` at ``j`` (1-based factors)."""
        if i == j:
            raise ValueError("factors must differ")
        if i > j:
            i, j, p, q = j, i, q, p
        block = _pair_rank(i, j, self.m)
        return 4 * block + 2 * (p > 0) + (q > 0)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "k": self.k,
            "levels": self.levels.tolist(),
            "run_labels": list(self.run_labels),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Design":
        return cls(int(d["m"]), np.asarray(d["levels"], dtype=np.int64), tuple(d["run_labels"]))


def _pair_rank(i: int, j: int, m: int) -> int:
    # rank of (i, j), 1 <= i < j <= m, among pairs in lexicographic order
    before = sum(m - a for a in range(1, i))
    return before + (j - i - 1)


def _sign_char(v: int) -> str:
    return "+" if v > 0 else "-"


def build_design(m: int) -> Design:
    """Construct the Box-Behnken design for ``m >= 3`` factors with one origin run."""
    if isinstance(m, bool) or int(m) != m or m < 3:
        raise ValueError(f"need at least 3 factors for a pair-based BIBD, got {m!r}")
    m = int(m)
    rows = []
    labels = []
    for i, j in combinations(range(1, m + 1), 2):
        for p in SIGNS:
            for q in SIGNS:
                row = [0] * m
                row[i - 1] = p
                row[j - 1] = q
                rows.append(row)
                labels.append(f"x{i},{j}{_sign_char(p)}{_sign_char(q)}")
    rows.append([0] * m)
    labels.append("origin")
    return Design(m, np.array(rows, dtype=np.int64), tuple(labels))


def run_count(m: int) -> int:
    return 2 * m * (m - 1) + 1


def validate_design(design: Design) -> list[str]:
    """Return the list of violated design invariants (empty when valid)."""
    problems = []
    lv = design.levels
    m = design.m
    if lv.shape != (run_count(m), m):
        problems.append(f"shape {lv.shape} != ({run_count(m)}, {m})")
        return problems
    nz = np.count_nonzero(lv, axis=1)
    if int(np.sum(nz == 0)) != 1:
        problems.append("expected exactly one origin run")
    for r, row in enumerate(lv):
        if nz[r] not in (0, 2):
            problems.append(f"run {r} has {nz[r]} nonzero levels")
        if not set(row.tolist()) <= {-1, 0, 1}:
            problems.append(f"run {r} has levels outside {{-1,0,1}}")
    rowset = {tuple(r) for r in lv.tolist()}
    if len(rowset) != len(lv):
        problems.append("duplicate runs")
    if any(tuple(-x for x in r) not in rowset for r in rowset):
        problems.append("design is not centrally symmetric")
    for i, j in combinations(range(m), 2):
        block = lv[(lv[:, i] != 0) & (lv[:, j] != 0)]
        if len(block) != 4:
            problems.append(f"pair ({i + 1},{j + 1}) has {len(block)} runs")
    return problems


@dataclass(frozen=True)
class ModelMatrix:
    """First-order model matrix ``M = [1 | D]`` (k x (m+1))."""

    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.entries.setflags(write=False)

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def m(self) -> int:
        return self.entries.shape[1] - 1

    @property
    def transpose_view(self) -> np.ndarray:
        """The configuration ``M'``; row 0 is the all-ones row."""
        return self.entries.T

    @property
    def configuration(self) -> np.ndarray:
        """``M'`` with the all-ones row moved last, the usual centrally symmetric layout."""
        mt = self.entries.T
        return np.vstack([mt[1:], mt[:1]])

    def sufficient_statistic(self, y) -> np.ndarray:
        return self.entries.T @ np.asarray(y, dtype=np.int64)


def model_matrix(design: Design) -> ModelMatrix:
    ones = np.ones((design.k, 1), dtype=np.int64)
    return ModelMatrix(np.hstack([ones, design.levels]))


def recover_base_configuration(config) -> np.ndarray | None:
    """Split a centrally symmetric configuration into its base matrix ``A``.

    ``config`` is (n+1) x (2s+1) with the all-ones row last (a matrix with the
    ones row first is also accepted). Columns of ``A`` are the members of each
    ``+-`` pair whose first nonzero entry is negative, in order of appearance.
    Returns ``None`` when the matrix is not centrally symmetric.
    """
    try:
        c = np.asarray(config)
    except Exception:
        return None
    if c.ndim != 2 or c.shape[0] < 2 or c.shape[1] < 1:
        return None
    if not np.issubdtype(c.dtype, np.number) or not np.all(c == np.round(c)):
        return None
    c = c.astype(np.int64)
    if not np.all(c[-1] == 1):
        if np.all(c[0] == 1):
            c = np.vstack([c[1:], c[:1]])
        else:
            return None
    top = c[:-1]
    ncols = top.shape[1]
    if ncols % 2 != 1:
        return None
    zero_cols = [col for col in range(ncols) if not top[:, col].any()]
    if len(zero_cols) != 1:
        return None
    unpaired: dict[tuple[int, ...], list[int]] = {}
    base = []
    for col in range(ncols):
        if col == zero_cols[0]:
            continue
        v = tuple(top[:, col].tolist())
        neg = tuple(-x for x in v)
        if unpaired.get(neg):
            partner = unpaired[neg].pop()
            first = next(x for x in v if x != 0)
            base.append((partner, neg if first > 0 else v))
        else:
            unpaired.setdefault(v, []).append(col)
    if any(unpaired.values()):
        return None
    base.sort(key=lambda t: t[0])
    return np.array([b for _, b in base], dtype=np.int64).T.reshape(top.shape[0], len(base))


def check_centrally_symmetric(config) -> bool:
    return recover_base_configuration(config) is not None


def integer_rank(mat) -> int:
    """Exact rank by Gaussian elimination over the rationals."""
    a = [[Fraction(int(x)) for x in row] for row in np.asarray(mat).tolist()]
    rank = 0
    for c in range(len(a[0]) if a else 0):
        pivot = next((r for r in range(rank, len(a)) if a[r][c] != 0), None)
        if pivot is None:
            continue
        a[rank], a[pivot] = a[pivot], a[rank]
        for r in range(rank + 1, len(a)):
            f = a[r][c] / a[rank][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[rank])]
        rank += 1
    return rank
