"""Metropolis-Hastings walk on a fiber and Monte Carlo conditional p-values.

The chain proposes ``y + eps * b`` with ``b`` drawn uniformly from a Markov
basis and ``eps = +-1`` uniformly, and accepts with probability
``min(1, prod y_i! / y'_i!)``, so its stationary law is the conditional
distribution ``prod(1/y_i!)`` normalized over the fiber.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence(seed)``; independent chains use ``SeedSequence(seed).spawn``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from bbexact.design import ModelMatrix
from bbexact.glm import STATISTICS, FitResult, StatisticTable, as_counts, chisq_sf, exceeds, fit
from bbexact.moves import MoveSet

logger = logging.getLogger(__name__)

_CHUNK = 1 << 15
SPOT_CHECK_EVERY = 1000


class FiberInvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class ChainConfig:
    samples: int = 100_000
    burn_in: int = 50_000
    seed: int = 0
    statistic: str = "lr"
    include_viii: bool = False
    thin: int = 1
    chains: int = 1
    bins: int = 30

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.chains < 1:
            raise ValueError("chains must be >= 1")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")
        if self.statistic not in STATISTICS:
            raise ValueError(f"unknown statistic {self.statistic!r}")


@dataclass(frozen=True)
class TestReport:
    __test__ = False  # not a pytest class

    p_hat: float
    exceedances: int
    samples: int
    mc_stderr: float
    observed_statistic: float
    asymptotic_p: float
    df: int
    histogram: list = field(repr=False)
    seed: int
    statistic: str = "lr"
    statistic_mean: float = float("nan")
    acceptance_rate: float = float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["histogram"] = [list(b) for b in self.histogram]
        d["mc_stderr_kind"] = "iid binomial sqrt(p(1-p)/T)"
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TestReport":
        names = set(cls.__dataclass_fields__)
        kw = {k: v for k, v in d.items() if k in names}
        kw["histogram"] = [tuple(b) for b in kw["histogram"]]
        return cls(**kw)


class FiberChain:
    """One Metropolis-Hastings chain; holds the current state and its RNG."""

    def __init__(self, y0, ms: MoveSet, rng: np.random.Generator, mm: ModelMatrix | None = None,
                 debug: bool = False):
        if len(ms.moves) == 0:
            raise ValueError("the move set is empty")
        self.state = [int(v) for v in as_counts(y0)]
        if len(self.state) != ms.k:
            raise ValueError(f"state has {len(self.state)} runs, moves expect {ms.k}")
        self.supports = [mv.support() for mv in ms.moves]
        self.rng = rng
        self.mm = mm
        self.debug = debug
        self.target = None if mm is None else mm.sufficient_statistic(self.state)
        self.steps = 0
        self.accepted = 0
        self._logfact = [math.lgamma(c + 1) for c in range(max(self.state) + 64)]

    def _extend_logfact(self, upto: int) -> None:
        lf = self._logfact
        lf.extend(math.lgamma(c + 1) for c in range(len(lf), 2 * upto + 1))

    def _check(self) -> None:
        if self.mm is None:
            return
        if not np.array_equal(self.mm.sufficient_statistic(self.state), self.target):
            raise FiberInvariantError(f"chain left the fiber after {self.steps} steps")

    def advance(self, steps: int, thin: int = 0, callback=None) -> None:
        """Run ``steps`` transitions; call ``callback(state)`` after every ``thin``-th one."""
        y = self.state
        supports = self.supports
        lf = self._logfact
        nmoves = len(supports)
        every = SPOT_CHECK_EVERY if not self.debug else 1
        since = 0
        done = 0
        while done < steps:
            n = min(_CHUNK, steps - done)
            picks = self.rng.integers(0, nmoves, size=n).tolist()
            signs = self.rng.integers(0, 2, size=n).tolist()
            us = self.rng.random(size=n).tolist()
            for t in range(n):
                b = supports[picks[t]]
                eps = 1 if signs[t] else -1
                ok = True
                logratio = 0.0
                for i, d in b:
                    c = y[i]
                    v = c + eps * d
                    if v < 0:
                        ok = False
                        break
                    if v >= len(lf):
                        self._extend_logfact(v)
                    logratio += lf[c] - lf[v]
                if ok and (logratio >= 0.0 or us[t] < math.exp(logratio)):
                    for i, d in b:
                        y[i] += eps * d
                    self.accepted += 1
                self.steps += 1
                if self.steps % every == 0:
                    self._check()
                if callback is not None:
                    since += 1
                    if since == thin:
                        since = 0
                        callback(y)
            done += n

    def step(self) -> np.ndarray:
        self.advance(1)
        return np.array(self.state, dtype=np.int64)


def step(y, ms: MoveSet, rng: np.random.Generator) -> np.ndarray:
    """One Metropolis-Hastings transition from ``y``."""
    return FiberChain(y, ms, rng).step()


def histogram(values, bins: int) -> list[tuple[float, float, int]]:
    """Equal-width bins over ``[0, max(values)]``; the last bin is closed."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    vals = np.asarray(values, dtype=float)
    top = float(vals.max()) if vals.size else 0.0
    if top <= 0.0:
        edges = np.zeros(bins + 1)
        counts = np.zeros(bins, dtype=np.int64)
        counts[0] = vals.size
    else:
        edges = np.linspace(0.0, top, bins + 1)
        idx = np.minimum((vals / top * bins).astype(np.int64), bins - 1)
        counts = np.bincount(np.clip(idx, 0, bins - 1), minlength=bins)
    return [(float(edges[b]), float(edges[b + 1]), int(counts[b])) for b in range(bins)]


def _chain_seeds(seed: int, chains: int) -> list[np.random.SeedSequence]:
    root = np.random.SeedSequence(seed)
    return [root] if chains == 1 else root.spawn(chains)


def _run_chain(args):
    y_obs, ms, mm, fitted, kind, burn_in, samples, thin, seed_seq, observed = args
    chain = FiberChain(y_obs, ms, np.random.Generator(np.random.PCG64(seed_seq)), mm)
    chain.advance(burn_in)
    table = StatisticTable(fitted, kind)
    values = np.empty(samples)
    pos = 0

    def record(y):
        nonlocal pos
        values[pos] = table(y)
        pos += 1

    chain.advance(samples * thin, thin, record)
    exceed = sum(1 for v in values.tolist() if exceeds(v, observed))
    return values, exceed, chain.accepted, chain.steps


def run_test(mm: ModelMatrix, y_obs, ms: MoveSet, cfg: ChainConfig, fit_result: FitResult | None = None,
             workers: int = 1, return_values: bool = False):
    """Estimate the conditional p-value of ``y_obs`` by Markov chain Monte Carlo.

    With ``chains > 1`` the sample budget is split across independent chains
    (each with its own burn-in) and the exceedance counts are pooled.
    """
    y_obs = as_counts(y_obs, mm.k)
    if len(ms.moves) == 0:
        raise ValueError("the move set is empty")
    if ms.k != mm.k:
        raise ValueError(f"moves are for {ms.k} runs, model matrix has {mm.k}")
    if np.any(ms.as_array() @ mm.entries != 0):
        raise ValueError("move set is not in the kernel of M'")
    if fit_result is None:
        fit_result = fit(mm, y_obs)
    kind = cfg.statistic
    observed = StatisticTable(fit_result.fitted, kind)(y_obs.tolist())

    per_chain = [cfg.samples // cfg.chains + (c < cfg.samples % cfg.chains) for c in range(cfg.chains)]
    jobs = [
        (y_obs, ms, mm, fit_result.fitted, kind, cfg.burn_in, n, cfg.thin, ss, observed)
        for n, ss in zip(per_chain, _chain_seeds(cfg.seed, cfg.chains))
        if n > 0
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_chain, jobs))
    else:
        results = [_run_chain(job) for job in jobs]

    values = np.concatenate([r[0] for r in results])
    exceed = sum(r[1] for r in results)
    accepted = sum(r[2] for r in results)
    steps = sum(r[3] for r in results)
    total = len(values)
    p_hat = exceed / total
    logger.debug("acceptance rate %.3f over %d steps", accepted / max(steps, 1), steps)
    report = TestReport(
        p_hat=p_hat,
        exceedances=exceed,
        samples=total,
        mc_stderr=math.sqrt(p_hat * (1.0 - p_hat) / total),
        observed_statistic=observed,
        asymptotic_p=chisq_sf(observed, fit_result.df),
        df=fit_result.df,
        histogram=histogram(values, cfg.bins),
        seed=cfg.seed,
        statistic=kind,
        statistic_mean=float(values.mean()),
        acceptance_rate=accepted / max(steps, 1),
    )
    if return_values:
        return report, values
    return report
