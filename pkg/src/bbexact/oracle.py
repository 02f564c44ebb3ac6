"""Exhaustive fiber enumeration: exact conditional p-values and connectivity checks.

These are desk-scale tools. They provide the ground truth that the Markov
chain and the move set are checked against.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from itertools import combinations_with_replacement

import numpy as np

from bbexact.design import ModelMatrix
from bbexact.glm import FitResult, StatisticTable, as_counts, exceeds
from bbexact.moves import MoveSet

DEFAULT_CAP = 5_000_000


class FiberTooLargeError(RuntimeError):
    def __init__(self, cap: int):
        super().__init__(f"fiber has more than {cap} states; use the Markov chain test instead")
        self.cap = cap


def log_weight(y) -> float:
    """``log prod 1/y_i!``."""
    return -math.fsum(math.lgamma(c + 1) for c in y)


@dataclass(frozen=True)
class Fiber:
    sufficient_stat: tuple[int, ...]
    states: tuple[tuple[int, ...], ...] = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    log_normalizer: float

    def __len__(self) -> int:
        return len(self.states)

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_normalizer)

    def index(self) -> dict[tuple[int, ...], int]:
        return {s: n for n, s in enumerate(self.states)}


def make_fiber(t, states) -> Fiber:
    states = tuple(sorted(tuple(int(v) for v in s) for s in states))
    lw = np.array([log_weight(s) for s in states])
    if len(lw):
        top = lw.max()
        lognorm = float(top + math.log(math.fsum(np.exp(lw - top).tolist())))
    else:
        lognorm = float("-inf")
    return Fiber(tuple(int(v) for v in t), states, lw, lognorm)


def enumerate_fiber(mm: ModelMatrix, t, cap: int = DEFAULT_CAP) -> Fiber:
    """All nonnegative ``y`` with ``M'y = t`` by depth-first search with pruning.

    ``t`` is in ``M'`` row order: total count first, then the factor sums.
    """
    t = [int(v) for v in t]
    cfg = mm.transpose_view
    if len(t) != cfg.shape[0]:
        raise ValueError(f"sufficient statistic must have {cfg.shape[0]} entries")
    total, sums = t[0], t[1:]
    if total < 0:
        raise ValueError("total count must be nonnegative")
    levels = mm.entries[:, 1:].tolist()
    k, m = len(levels), len(sums)
    # can_up[r][f] / can_down[r][f]: some run r.. has level +1 / -1 at factor f
    can_up = [[False] * m for _ in range(k + 1)]
    can_down = [[False] * m for _ in range(k + 1)]
    for r in range(k - 1, -1, -1):
        for f in range(m):
            can_up[r][f] = can_up[r + 1][f] or levels[r][f] > 0
            can_down[r][f] = can_down[r + 1][f] or levels[r][f] < 0
    max_nonzero = max((sum(1 for v in row if v) for row in levels), default=0)

    out: list[tuple[int, ...]] = []
    y = [0] * k

    def feasible(r: int, remaining: int, resid: list[int]) -> bool:
        l1 = 0
        for f in range(m):
            v = resid[f]
            if v > 0 and (not can_up[r][f] or v > remaining):
                return False
            if v < 0 and (not can_down[r][f] or -v > remaining):
                return False
            l1 += abs(v)
        return l1 <= max_nonzero * remaining

    def dfs(r: int, remaining: int, resid: list[int]) -> None:
        if r == k - 1:
            row = levels[r]
            if all(resid[f] == remaining * row[f] for f in range(m)):
                y[r] = remaining
                out.append(tuple(y))
                if len(out) > cap:
                    raise FiberTooLargeError(cap)
            y[r] = 0
            return
        row = levels[r]
        # every pruning constraint is convex in c, so the feasible counts form
        # an interval; start below its analytic upper end and stop on leaving it
        hi, lo = remaining, 0
        for f in range(m):
            if row[f]:
                hi = min(hi, (remaining + row[f] * resid[f]) // 2)
                if not (can_up[r + 1][f] or can_down[r + 1][f]):
                    # last run touching factor f: its count is forced
                    lo = max(lo, row[f] * resid[f])
                    hi = min(hi, row[f] * resid[f])
            else:
                hi = min(hi, remaining - abs(resid[f]))
        inside = False
        for c in range(hi, lo - 1, -1):
            nxt = [resid[f] - c * row[f] for f in range(m)]
            if feasible(r + 1, remaining - c, nxt):
                inside = True
                y[r] = c
                dfs(r + 1, remaining - c, nxt)
            elif inside:
                break
        y[r] = 0

    if k and feasible(0, total, sums):
        dfs(0, total, list(sums))
    return make_fiber(t, out)


def enumerate_fiber_bruteforce(mm: ModelMatrix, t) -> Fiber:
    """Every composition of the total into ``k`` parts, filtered by ``M'y = t``."""
    t = [int(v) for v in t]
    cfg = mm.transpose_view
    states = []
    for cells in combinations_with_replacement(range(mm.k), t[0]):
        y = np.bincount(np.array(cells, dtype=np.int64), minlength=mm.k)
        if np.array_equal(cfg @ y, t):
            states.append(tuple(y.tolist()))
    return make_fiber(t, states)


def fibers_by_total(mm: ModelMatrix, total: int) -> dict[tuple[int, ...], Fiber]:
    """Every fiber whose total count equals ``total``, keyed by sufficient statistic."""
    cfg = mm.transpose_view
    groups: dict[tuple[int, ...], list] = defaultdict(list)
    for cells in combinations_with_replacement(range(mm.k), total):
        y = np.bincount(np.array(cells, dtype=np.int64), minlength=mm.k)
        groups[tuple((cfg @ y).tolist())].append(tuple(y.tolist()))
    return {t: make_fiber(t, states) for t, states in sorted(groups.items())}


def exact_p(fiber: Fiber, fit_result: FitResult, y_obs, kind: str = "lr") -> float:
    """Exact conditional p-value: fiber mass with statistic at least the observed one."""
    y_obs = tuple(as_counts(y_obs).tolist())
    if y_obs not in set(fiber.states):
        raise ValueError("observed counts are not in the fiber")
    table = StatisticTable(fit_result.fitted, kind)
    observed = table(y_obs)
    probs = fiber.probabilities
    mass = [p for s, p in zip(fiber.states, probs.tolist()) if exceeds(table(s), observed)]
    return min(1.0, math.fsum(mass))


def check_connectivity(fiber: Fiber, ms: MoveSet) -> tuple[bool, int]:
    """Connected components of the fiber graph with edges ``y -- y + b``."""
    if not fiber.states:
        return True, 0
    index = fiber.index()
    supports = [mv.support() for mv in ms.moves]
    seen = [False] * len(fiber.states)
    components = 0
    for start in range(len(fiber.states)):
        if seen[start]:
            continue
        components += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            y = fiber.states[queue.popleft()]
            for b in supports:
                for eps in (1, -1):
                    nxt = list(y)
                    ok = True
                    for i, d in b:
                        nxt[i] += eps * d
                        if nxt[i] < 0:
                            ok = False
                            break
                    if not ok:
                        continue
                    j = index.get(tuple(nxt))
                    if j is not None and not seen[j]:
                        seen[j] = True
                        queue.append(j)
    return components == 1, components
