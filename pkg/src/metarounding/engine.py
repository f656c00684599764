"""Metarounding by entropy-regularized column generation.

Given a relaxed point ``x`` and a relax-based approximation oracle, build a
distribution ``lam`` over oracle outputs such that, for every loss ``l`` in
the capped dual polytope L,

    E_{c ~ lam}[c] . l  <=  (alpha_emp + eps) * x . l,

where ``alpha_emp = max_j l_j . c_{j+1}`` is observed during the run, so the
oracle's true ratio never has to be known.
"""

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import geometry
from ._validation import check_combinatorial, check_positive, check_random_state
from .exceptions import CertificateError, DimensionMismatch, IterationLimitExceeded
from .simplexlp import LinearProgram, solve

logger = logging.getLogger(__name__)

CERT_TOL = 1e-6
INNER_MAX_ITER = 200
ARMIJO_C = 1e-4
INNER_SOLVERS = ("sqp", "pg")


@dataclass
class MetaroundingConfig:
    """Run parameters.

    ``eta`` defaults to ``2 ln(n) / eps``; ``max_iterations`` defaults to
    ``ceil(16 eta D^2 / eps)`` with ``D`` the larger of ``d_inf_bound`` and the
    largest entry seen in any oracle output. ``inner_tol`` defaults to
    ``eps / 20``.
    """

    eps: float = 0.1
    eta: float = None
    max_iterations: int = None
    d_inf_bound: float = 1.0
    inner_tol: float = None
    refine: bool = True
    inner_solver: str = "sqp"
    check_rate: bool = False

    def __post_init__(self):
        if self.inner_solver not in INNER_SOLVERS:
            raise ValueError(f"inner_solver must be one of {INNER_SOLVERS}, got {self.inner_solver!r}")

    def resolve_eta(self, n):
        check_positive(self.eps, "eps")
        if self.eta is not None:
            return check_positive(self.eta, "eta")
        # ln(1) = 0 would make the regularizer vanish; any positive eta is valid there
        return 2.0 * math.log(n) / self.eps if n > 1 else 1.0 / self.eps

    def resolve_inner_tol(self):
        return self.eps / 20.0 if self.inner_tol is None else float(self.inner_tol)

    def iteration_cap(self, eta, d_inf):
        if self.max_iterations is not None:
            return int(self.max_iterations)
        d = max(float(self.d_inf_bound), float(d_inf))
        return math.ceil(16.0 * eta * d * d / self.eps)


class ColumnSet:
    """Deduplicated oracle outputs (the columns of C) with simplex weights."""

    def __init__(self, n):
        self.n = n
        self._cols = []
        self._index = {}
        self.weights = np.zeros(0)
        self.d_inf = 0

    def __len__(self):
        return len(self._cols)

    @property
    def matrix(self):
        """``n x k`` float matrix whose columns are the stored vectors."""
        if not self._cols:
            return np.zeros((self.n, 0))
        return np.array(self._cols, dtype=np.float64).T

    @property
    def columns(self):
        return np.array(self._cols, dtype=np.int64).reshape(-1, self.n)

    def add(self, c):
        """Insert ``c`` (or find its duplicate). Returns ``(index, is_new)``."""
        key = c.tobytes()
        if key in self._index:
            return self._index[key], False
        idx = len(self._cols)
        self._cols.append(c)
        self._index[key] = idx
        self.weights = np.append(self.weights, 0.0)
        self.d_inf = max(self.d_inf, geometry.combinatorial_inf_norm(c))
        return idx, True

    def mixture(self, weights=None):
        w = self.weights if weights is None else weights
        return self.matrix @ w


@dataclass
class TraceRecord:
    k: int
    eps_k: float
    hstar: float
    best_oracle: float
    alpha_emp: float
    ms: float


@dataclass
class MetaroundingResult:
    columns: np.ndarray
    weights: np.ndarray
    gap_trace: list
    alpha_emp: float
    iterations: int
    certified_value: float
    unrefined_value: float
    eps: float
    eta: float
    wall_time: float
    n_oracle_calls: int
    trace: list = field(default_factory=list)
    refined: bool = False

    def __post_init__(self):
        bound = self.alpha_emp + self.eps + CERT_TOL
        if self.certified_value > bound:
            raise CertificateError(
                f"certificate failed: max over L of E[c].l = {self.certified_value:.9g} "
                f"> alpha_emp + eps = {bound:.9g}"
            )

    @property
    def mean_vector(self):
        return self.weights @ self.columns

    def rate_violations(self, d_inf=None, tol=1e-9):
        """Iterations ``k >= 1`` whose gap exceeds ``8 eta D^2 / (k + 2)``."""
        d = float(self.columns.max()) if d_inf is None else float(d_inf)
        out = []
        for k, g in enumerate(self.gap_trace):
            if k >= 1 and g > 8.0 * self.eta * d * d / (k + 2) + tol:
                out.append((k, g))
        return out


def initial_loss(L):
    """First query point: the uniform vector rescaled onto ``l . x = 1``.

    ``1 / sum(x) <= 1 / min_{x_i > 0} x_i = M``, so the rescaled vector always
    respects the cap and no clamping is needed.
    """
    return np.full(L.n, 1.0 / float(L.x.sum()))


def gap(columns, L, eta, best_oracle_value):
    """``H*(C lam) - best_oracle_value`` for the current weights."""
    return geometry.hstar_value(columns.mixture(), L, eta) - best_oracle_value


def _project_simplex(v):
    """Euclidean projection onto the probability simplex (sort-based)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.shape[0] + 1)
    rho = np.count_nonzero(u - css / ind > 0)
    tau = css[rho - 1] / rho
    return np.maximum(v - tau, 0.0)


def _objective(lam, C, L, eta):
    value, loss = geometry.hstar_value_and_grad(C @ lam, L, eta)
    return value, C.T @ loss


def _projected_gradient(C, lam, L, eta, inner_tol, max_iter=INNER_MAX_ITER):
    """Minimize ``H*(C lam)`` over the simplex by projected gradient.

    Armijo backtracking by halving; the trial step starts at 1.0 and is
    afterwards warm-started at twice the last accepted step (capped at 1.0).
    """
    f, g = _objective(lam, C, L, eta)
    step = 1.0
    for _ in range(max_iter):
        fw_gap = float(g @ lam - g.min())
        if fw_gap <= inner_tol:
            break
        while True:
            cand = _project_simplex(lam - step * g)
            d = cand - lam
            f_new, g_new = _objective(cand, C, L, eta)
            if f_new <= f + ARMIJO_C * float(g @ d):
                break
            step *= 0.5
            if step < 1e-15:
                return lam, f
        lam, f, g = cand, f_new, g_new
        step = min(1.0, 2.0 * step)
    return lam, f


def _sqp(C, lam, L, eta, max_iter=INNER_MAX_ITER):
    """SLSQP on the simplex, started at ``lam``; returns the better of start and result."""
    k = C.shape[1]
    f0, _ = _objective(lam, C, L, eta)
    ones = np.ones(k)
    res = minimize(
        _objective,
        lam,
        args=(C, L, eta),
        jac=True,
        method="SLSQP",
        bounds=[(0.0, 1.0)] * k,
        constraints=[{"type": "eq", "fun": lambda v: v.sum() - 1.0, "jac": lambda v: ones}],
        options={"ftol": 1e-12, "maxiter": max_iter},
    )
    cand = np.maximum(res.x, 0.0)
    total = cand.sum()
    if not np.isfinite(total) or total <= 0:
        return lam, f0
    cand /= total
    f, _ = _objective(cand, C, L, eta)
    return (cand, f) if f <= f0 else (lam, f0)


def corrective_step(columns, new_index, k, L, eta, inner_tol, inner_solver="sqp"):
    """Return updated weights after column ``new_index`` joined at iteration ``k``.

    Keeps the better of the Frank-Wolfe point with step ``2 / (k + 2)`` and an
    inner solve started from the better of that point and the previous
    weights, so the per-step decrease used in the convergence proof always
    holds. The inner solve is SLSQP followed by
    projected-gradient polishing (``"sqp"``) or projected gradient alone
    (``"pg"``); either stops once its Frank-Wolfe gap is below ``inner_tol``.
    """
    ncol = len(columns)
    if ncol == 1:
        return np.ones(1)
    mu = 2.0 / (k + 2)
    safe = (1.0 - mu) * columns.weights
    safe[new_index] += mu
    C = columns.matrix
    f_safe, _ = _objective(safe, C, L, eta)
    start = safe
    f_prev, _ = _objective(columns.weights, C, L, eta)
    if f_prev < f_safe:
        start = columns.weights
    if inner_solver == "sqp":
        start, _ = _sqp(C, start, L, eta)
    lam, f_inner = _projected_gradient(C, start, L, eta, inner_tol)
    if f_inner <= f_safe:
        lam = np.maximum(lam, 0.0)
        return lam / lam.sum()
    return safe


def refine(columns, L, weights=None):
    """Solve ``min_lam max_{l in L} l . C lam`` as an LP and keep the better of the two.

    LP variables are ``(lam, mu, s)`` with objective ``mu + M sum s`` and
    rows ``mu x_i + s_i >= (C lam)_i`` on the support of ``x``. Coordinates
    with ``x_i = 0`` force ``s_i = (C lam)_i`` and are folded into the cost.
    Returns ``(weights, value, used_lp)``.
    """
    lam0 = columns.weights if weights is None else weights
    C = columns.matrix
    base_value, _ = geometry.linear_max(C @ lam0, L)
    k = C.shape[1]
    if k == 1:
        return np.ones(1), base_value, False
    S = L.support
    ns = S.size
    cost_lam = L.M * C[L.zeros].sum(axis=0)
    c = np.concatenate([cost_lam, [1.0], np.full(ns, L.M)])
    A = np.zeros((ns + 1, k + 1 + ns))
    A[:ns, :k] = -C[S]
    A[:ns, k] = L.x[S]
    A[:ns, k + 1 :] = np.eye(ns)
    A[ns, :k] = 1.0
    senses = [">="] * ns + ["="]
    b = np.concatenate([np.zeros(ns), [1.0]])
    lo = np.concatenate([np.zeros(k), [-np.inf], np.zeros(ns)])
    try:
        sol = solve(LinearProgram(c, A, senses, b, lo=lo))
    except Exception as exc:  # noqa: BLE001 - any solver failure falls back
        logger.warning("refinement LP failed (%s); keeping unrefined weights", exc)
        return lam0, base_value, False
    if not sol.optimal:
        logger.warning("refinement LP returned %s; keeping unrefined weights", sol.status.value)
        return lam0, base_value, False
    lam = np.maximum(sol.x[:k], 0.0)
    lam /= lam.sum()
    value, _ = geometry.linear_max(C @ lam, L)
    if value < base_value:
        return lam, value, True
    return lam0, base_value, False


def metaround(x, oracle, config=None, trace=None, initial_columns=None):
    """Run metarounding of ``x`` against ``oracle``.

    ``oracle`` is any callable mapping a nonnegative loss vector to a
    nonnegative integer vector of the same length. ``trace`` may be a
    callable receiving one ``TraceRecord`` per iteration.

    ``initial_columns`` optionally seeds the column set (e.g. the support of
    a previous result for a nearby ``x``). The first query is then the link
    function at the optimized seed mixture instead of the uniform loss, and
    the gap test already applies at ``k = 0``.
    """
    cfg = config or MetaroundingConfig()
    t0 = time.perf_counter()
    L = geometry.build_polytope(x)
    n = L.n
    oracle_n = getattr(oracle, "n", n)
    if oracle_n != n:
        raise DimensionMismatch(f"oracle dimension {oracle_n} does not match x ({n})")
    eta = cfg.resolve_eta(n)
    inner_tol = cfg.resolve_inner_tol()
    half_eps = cfg.eps / 2.0

    cols = ColumnSet(n)
    h_start = np.inf
    loss = initial_loss(L)
    if initial_columns is not None and len(initial_columns):
        for c in initial_columns:
            cols.add(check_combinatorial(c, n))
        C = cols.matrix
        start = np.full(len(cols), 1.0 / len(cols))
        if cfg.inner_solver == "sqp":
            start, _ = _sqp(C, start, L, eta)
        cols.weights, _ = _projected_gradient(C, start, L, eta, inner_tol)
        h_start, loss = geometry.hstar_value_and_grad(C @ cols.weights, L, eta)
    best = -np.inf
    gaps = []
    records = []
    k = 0
    calls = 0
    while True:
        c = check_combinatorial(oracle(loss), n)
        calls += 1
        best = max(best, float(c @ loss))
        if k == 0:
            hval = h_start
            g = hval - best
        else:
            hval = geometry.hstar_value(cols.mixture(), L, eta)
            g = hval - best
        gaps.append(g)
        rec = TraceRecord(k, g, hval, best, best, 1000.0 * (time.perf_counter() - t0))
        records.append(rec)
        if trace is not None:
            trace(rec)
        idx, _ = cols.add(c)
        if g <= half_eps:
            break
        cap = cfg.iteration_cap(eta, cols.d_inf)
        if k >= cap:
            raise IterationLimitExceeded(
                f"gap {g:.6g} still above eps/2 = {half_eps:.6g} after {k} iterations"
            )
        cols.weights = corrective_step(cols, idx, k, L, eta, inner_tol, cfg.inner_solver)
        loss = geometry.grad_hstar(cols.mixture(), L, eta)
        k += 1

    C = cols.matrix
    unrefined, _ = geometry.linear_max(C @ cols.weights, L)
    weights, value, used = cols.weights, unrefined, False
    if cfg.refine:
        weights, value, used = refine(cols, L)
    result = MetaroundingResult(
        columns=cols.columns,
        weights=weights,
        gap_trace=gaps,
        alpha_emp=best,
        iterations=k,
        certified_value=value,
        unrefined_value=unrefined,
        eps=cfg.eps,
        eta=eta,
        wall_time=time.perf_counter() - t0,
        n_oracle_calls=calls,
        trace=records,
        refined=used,
    )
    if cfg.check_rate:
        bad = result.rate_violations(d_inf=max(cfg.d_inf_bound, cols.d_inf))
        if bad:
            raise CertificateError(f"gap exceeded 8 eta D^2/(k+2) at iterations {bad[:5]}")
    return result


def sample(result, random_state=None, size=None):
    """Draw column(s) with probability given by the result's weights."""
    rng = check_random_state(random_state)
    p = np.maximum(result.weights, 0.0)
    p = p / p.sum()
    idx = rng.choice(p.shape[0], size=size, p=p)
    return result.columns[idx]
