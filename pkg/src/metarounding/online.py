"""Online combinatorial linear optimization on set cover.

A projected online-gradient learner plays in the relaxation; each fractional
iterate is metarounded and a cover sampled from the resulting distribution.
A follow-the-perturbed-leader player over the greedy oracle serves as the
baseline.
"""

import csv
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from . import setcover
from ._validation import check_nonnegative, check_vector
from .engine import MetaroundingConfig, metaround, sample
from .exceptions import IterationLimitExceeded
from .simplexlp import LinearProgram, solve

LEDGER_HEADER = [
    "round",
    "incurred",
    "cumulative",
    "benchmark_lp",
    "benchmark_column",
    "alpha_emp",
    "meta_iters",
    "meta_ms",
]
CACHE_DECIMALS = 6
SNAP_ZERO = 1e-3


@dataclass
class OnlineConfig:
    T: int = 1000
    eps: float = 0.1
    step0: float = None
    losses: np.ndarray = None
    seed: int = 0
    projection: str = "polytope"
    cache: bool = True

    def __post_init__(self):
        if int(self.T) < 1:
            raise ValueError("T must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.step0 is not None and not self.step0 > 0:
            raise ValueError("step0 must be positive")
        if self.projection not in ("polytope", "box"):
            raise ValueError(f"unknown projection mode {self.projection!r}")
        self.T = int(self.T)

    def streams(self):
        """Independent generators for losses, cover sampling and FPL noise."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(3)]


def uniform_losses(n, T, rng):
    return rng.random((T, n))


def lp_benchmark(instance, total_loss):
    """``min_{p in P(C)} p . total_loss``."""
    _, value = setcover.relaxed_lp(instance, total_loss)
    return value


@dataclass
class RegretLedger:
    chosen: np.ndarray
    losses: np.ndarray
    incurred: np.ndarray
    cumulative: np.ndarray
    benchmark_lp: np.ndarray
    benchmark_column: np.ndarray
    alpha_emp: np.ndarray
    meta_iters: np.ndarray
    meta_ms: np.ndarray
    columns: np.ndarray = field(default=None)
    expected: np.ndarray = field(default=None)  # E_lam[c] . l_t, the loss averaged over the player's sampling

    @property
    def T(self):
        return self.incurred.shape[0]

    def check_arithmetic(self):
        return bool(np.array_equal(np.cumsum(self.incurred), self.cumulative))

    def to_csv(self, timing=True):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LEDGER_HEADER)
        for t in range(self.T):
            w.writerow(
                [
                    t + 1,
                    _fmt(self.incurred[t]),
                    _fmt(self.cumulative[t]),
                    _fmt(self.benchmark_lp[t]),
                    _fmt(self.benchmark_column[t]),
                    _fmt(self.alpha_emp[t]),
                    int(self.meta_iters[t]),
                    _fmt(self.meta_ms[t]) if timing else "",
                ]
            )
        return buf.getvalue()


def _fmt(v):
    return format(float(v), ".9g")


def alpha_regret(ledger, alpha, t=None, expected=False):
    """``(LP-benchmark regret, best-column regret)`` after ``t`` rounds (default: all).

    The LP benchmark lower-bounds the best cover in hindsight, so its regret
    upper-bounds the true alpha-regret. With ``expected=True`` the incurred
    loss is averaged over the player's own sampling (pseudo-regret).
    """
    t = ledger.T if t is None else int(t)
    if expected:
        if ledger.expected is None:
            raise ValueError("this ledger carries no expected losses")
        incurred = float(np.sum(ledger.expected[:t]))
    else:
        incurred = float(ledger.cumulative[t - 1])
    return (
        incurred - alpha * float(ledger.benchmark_lp[t - 1]),
        incurred - alpha * float(ledger.benchmark_column[t - 1]),
    )


def ogd_step(x, loss, step, projector):
    return projector(np.asarray(x, dtype=np.float64) - step * np.asarray(loss, dtype=np.float64))


def box_projector(y):
    return np.clip(y, 0.0, 1.0)


class OnlineMetaroundingPlayer(BaseEstimator):
    """Online gradient descent in the relaxation plus metarounding.

    ``predict`` returns the cover to play this round; ``partial_fit`` feeds the
    revealed loss and advances the learner.
    """

    def __init__(
        self,
        instance,
        eps=0.1,
        step0=None,
        projection="polytope",
        cache=True,
        warm_start=True,
        random_state=None,
    ):
        self.instance = instance
        self.eps = eps
        self.step0 = step0
        self.projection = projection
        self.cache = cache
        self.warm_start = warm_start
        self.random_state = random_state

    def _projector(self, y):
        if self.projection == "box":
            return box_projector(y)
        x = setcover.project(self.instance, y)
        # projection round-off would otherwise blow up the loss cap 1 / min x_i
        x[x < SNAP_ZERO] = 0.0
        return setcover.repair(self.instance, x)

    def _init_state(self):
        n = self.instance.n
        self.oracle_ = setcover.GreedySetCoverOracle(self.instance)
        self.x_ = np.ones(n)
        self.t_ = 1
        self.step0_ = 1.0 / math.sqrt(n) if self.step0 is None else float(self.step0)
        self.rng_ = (
            self.random_state
            if isinstance(self.random_state, np.random.Generator)
            else np.random.default_rng(self.random_state)
        )
        self.cache_ = {}
        self.last_result_ = None
        self.last_ms_ = 0.0

    def _meta(self, x):
        key = np.round(x, CACHE_DECIMALS).tobytes()
        if self.cache and key in self.cache_:
            self.last_ms_ = 0.0
            return self.cache_[key]
        seed = None
        if self.warm_start and self.last_result_ is not None:
            prev = self.last_result_
            seed = prev.columns[prev.weights > 0]
        t0 = time.perf_counter()
        res = metaround(x, self.oracle_, MetaroundingConfig(eps=self.eps), initial_columns=seed)
        self.last_ms_ = 1000.0 * (time.perf_counter() - t0)
        if self.cache:
            self.cache_[key] = res
        return res

    def predict(self):
        if not hasattr(self, "x_"):
            self._init_state()
        self.last_result_ = self._meta(self.x_)
        return sample(self.last_result_, self.rng_)

    def partial_fit(self, loss):
        if not hasattr(self, "x_"):
            self._init_state()
        loss = check_vector(loss, "loss", self.instance.n)
        step = self.step0_ / math.sqrt(self.t_)
        self.x_ = ogd_step(self.x_, loss, step, self._projector)
        self.t_ += 1
        return self


class _LedgerBuilder:
    def __init__(self, instance, T):
        n = instance.n
        self.instance = instance
        self.chosen = np.zeros((T, n), dtype=np.int8)
        self.losses = np.zeros((T, n))
        self.incurred = np.zeros(T)
        self.bench_lp = np.zeros(T)
        self.bench_col = np.zeros(T)
        self.alpha = np.full(T, np.nan)
        self.iters = np.zeros(T, dtype=np.int64)
        self.ms = np.zeros(T)
        self.expected = np.full(T, np.nan)
        self.total = np.zeros(n)
        self._col_index = {}
        self._cols = []
        self._col_loss = []
        self.t = 0

    def add_columns(self, cols):
        for c in cols:
            key = np.asarray(c, dtype=np.int8).tobytes()
            if key not in self._col_index:
                self._col_index[key] = len(self._cols)
                self._cols.append(np.asarray(c, dtype=np.int8))
                self._col_loss.append(float(np.asarray(c, dtype=np.float64) @ self.total))

    def record(self, c, loss, alpha=np.nan, iters=0, ms=0.0, expected=np.nan):
        t = self.t
        self.add_columns([c])
        self.chosen[t] = c
        self.losses[t] = loss
        self.incurred[t] = float(np.asarray(c, dtype=np.float64) @ loss)
        self.total = self.total + loss
        cols = np.array(self._cols, dtype=np.float64)
        col_loss = np.array(self._col_loss) + cols @ loss
        self._col_loss = col_loss.tolist()
        self.bench_col[t] = col_loss.min()
        self.bench_lp[t] = lp_benchmark(self.instance, self.total)
        self.alpha[t] = alpha
        self.iters[t] = iters
        self.ms[t] = ms
        self.expected[t] = expected
        self.t += 1

    def build(self):
        t = self.t
        return RegretLedger(
            chosen=self.chosen[:t],
            losses=self.losses[:t],
            incurred=self.incurred[:t],
            cumulative=np.cumsum(self.incurred[:t]),
            benchmark_lp=self.bench_lp[:t],
            benchmark_column=self.bench_col[:t],
            alpha_emp=self.alpha[:t],
            meta_iters=self.iters[:t],
            meta_ms=self.ms[:t],
            columns=np.array(self._cols, dtype=np.int8).reshape(-1, self.instance.n),
            expected=self.expected[:t],
        )


def _loss_source(instance, cfg, rng):
    if cfg.losses is None:
        return uniform_losses(instance.n, cfg.T, rng)
    losses = np.asarray(cfg.losses, dtype=np.float64)
    if losses.ndim != 2 or losses.shape[1] != instance.n or losses.shape[0] < cfg.T:
        raise ValueError(f"loss file must provide at least {cfg.T} rows of length {instance.n}")
    for row in losses[: cfg.T]:
        check_nonnegative(row, "loss")
    return losses[: cfg.T]


def run_online(instance, cfg):
    """Play ``cfg.T`` rounds with the metarounding player and return the ledger."""
    loss_rng, sample_rng, _ = cfg.streams()
    losses = _loss_source(instance, cfg, loss_rng)
    player = OnlineMetaroundingPlayer(
        instance,
        eps=cfg.eps,
        step0=cfg.step0,
        projection=cfg.projection,
        cache=cfg.cache,
        random_state=sample_rng,
    )
    book = _LedgerBuilder(instance, cfg.T)
    for t in range(cfg.T):
        try:
            c = player.predict()
        except IterationLimitExceeded as exc:
            exc.ledger = book.build()
            raise
        res = player.last_result_
        book.add_columns(res.columns)
        book.record(c, losses[t], res.alpha_emp, res.iterations, player.last_ms_, float(res.mean_vector @ losses[t]))
        player.partial_fit(losses[t])
    return book.build()


def run_fpl_baseline(instance, cfg):
    """Follow the perturbed leader: greedy on past losses plus ``U[0, sqrt(t)]^n`` noise."""
    loss_rng, _, noise_rng = cfg.streams()
    losses = _loss_source(instance, cfg, loss_rng)
    n = instance.n
    book = _LedgerBuilder(instance, cfg.T)
    leader = np.zeros(n)
    for t in range(1, cfg.T + 1):
        t0 = time.perf_counter()
        z = noise_rng.uniform(0.0, math.sqrt(t), size=n)
        c = setcover.greedy_cover(instance, leader + z)
        ms = 1000.0 * (time.perf_counter() - t0)
        book.record(c, losses[t - 1], ms=ms)
        leader += losses[t - 1]
    return book.build()
