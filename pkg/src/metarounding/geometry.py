"""Capped dual polytope, weighted entropy regularizer and its smoothed conjugate.

For a relaxed point ``x`` the loss polytope is

    L = {l in [0, M]^n : l . x = 1},   M = max{1 / x_i : x_i > 0}.

On the support of ``x`` the substitution ``q_i = l_i x_i`` turns L into a
capped probability simplex, which is where all the work happens. Coordinates
with ``x_i = 0`` are free in ``[0, M]`` and never touch the budget.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_relaxed_point, check_vector
from .exceptions import NotInPolytope

MEMBERSHIP_TOL = 1e-9
CAP_TOL = 1e-12


@dataclass(frozen=True)
class LossPolytope:
    x: np.ndarray
    M: float
    support: np.ndarray
    zeros: np.ndarray
    _xs: np.ndarray = field(repr=False, compare=False)

    @property
    def n(self):
        return self.x.shape[0]

    def contains(self, loss, tol=MEMBERSHIP_TOL):
        loss = np.asarray(loss, dtype=np.float64)
        if loss.shape != self.x.shape:
            return False
        if np.any(loss < -tol) or np.any(loss > self.M + tol):
            return False
        return abs(float(loss @ self.x) - 1.0) <= tol

    def check(self, loss, tol=MEMBERSHIP_TOL):
        loss = check_vector(loss, "loss", self.n)
        if not self.contains(loss, tol):
            budget = float(loss @ self.x)
            raise NotInPolytope(
                f"loss not in L (min={loss.min():.3g}, max={loss.max():.3g}, "
                f"M={self.M:.6g}, l.x={budget:.12g})"
            )
        return loss


def build_polytope(x):
    """Build L for the relaxed point ``x``; raises ``EmptyPolytope`` if x == 0."""
    x = check_relaxed_point(x).copy()
    x.setflags(write=False)
    positive = x > 0
    support = np.flatnonzero(positive)
    zeros = np.flatnonzero(~positive)
    with np.errstate(over="ignore"):
        M = float(np.max(1.0 / x[support]))
    if not np.isfinite(M):
        raise ValueError("smallest positive coordinate of x is too small: the loss cap 1/x_i overflows")
    return LossPolytope(x=x, M=M, support=support, zeros=zeros, _xs=x[support])


def entropy(loss, L):
    """Weighted relative entropy ``sum_i q_i ln(n q_i)`` with ``q = loss * x``."""
    loss = L.check(loss)
    return _entropy_of(loss * L.x, L.n)


def _entropy_of(q, n):
    pos = q > 0
    return float(np.sum(q[pos] * np.log(n * q[pos])))


def linear_max(theta, L):
    """Exact ``max_{l in L} l . theta`` by a fractional knapsack.

    Returns ``(value, argmax)``. Ties in the ratio ``theta_i / x_i`` go to the
    lower index.
    """
    theta = check_vector(theta, "theta", L.n)
    loss = np.zeros(L.n)
    z = L.zeros
    loss[z] = np.where(theta[z] > 0, L.M, 0.0)

    s = L.support
    xs = L._xs
    order = np.argsort(-(theta[s] / xs), kind="stable")
    budget = 1.0
    for j in order:
        if budget <= 0:
            break
        i = s[j]
        take = min(L.M, budget / xs[j])
        loss[i] = take
        budget -= take * xs[j]
    return float(loss @ theta), loss


def _capped_gibbs(scores, caps):
    """Maximize ``q . scores - sum q ln q`` over ``{sum q = 1, 0 <= q <= caps}``.

    Water-filling: the uncapped solution is a softmax; any coordinate that
    meets its cap is clamped and the remaining budget is shared by a softmax
    over the rest. Each pass clamps at least one coordinate.
    """
    w = np.exp(scores - scores.max())
    q = w / w.sum()
    binding = q >= caps - CAP_TOL
    if not binding.any():
        return q
    k = scores.shape[0]
    free = np.ones(k, dtype=bool)
    residual = 1.0
    for _ in range(k):
        q[binding] = caps[binding]
        free &= ~binding
        residual = 1.0 - float(caps[~free].sum())
        if residual <= 0 or not free.any():
            # every cap binds: the only feasible point is q = caps
            q[free] = 0.0
            return q
        a = scores[free]
        w = np.exp(a - a.max())
        q[free] = residual * w / w.sum()
        binding = free & (q >= caps - CAP_TOL)
        if not binding.any():
            return q
    return q


def _link(theta, L, eta):
    loss = np.empty(L.n)
    loss[L.zeros] = L.M
    xs = L._xs
    q = _capped_gibbs(eta * theta[L.support] / xs, L.M * xs)
    loss[L.support] = q / xs
    return loss, q


def grad_hstar(theta, L, eta):
    """Gradient of the smoothed conjugate, i.e. the link function.

    Returns the unique maximizer of ``l . theta - entropy(l) / eta`` over L.
    """
    theta = check_vector(theta, "theta", L.n)
    return _link(theta, L, eta)[0]


def hstar_value(theta, L, eta):
    theta = check_vector(theta, "theta", L.n)
    return hstar_value_and_grad(theta, L, eta)[0]


def hstar_value_and_grad(theta, L, eta):
    """Both ``H*(theta)`` and its gradient from a single water-filling pass.

    No input validation; this sits in the inner loop of the weight update.
    """
    loss, q = _link(theta, L, eta)
    return float(loss @ theta) - _entropy_of(q, L.n) / eta, loss


def combinatorial_inf_norm(c):
    """The cached max entry of a combinatorial vector."""
    c = np.asarray(c)
    return int(c.max()) if c.size else 0
