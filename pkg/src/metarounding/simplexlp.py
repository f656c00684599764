"""Small dense linear-programming solver.

Two-phase primal simplex on a full tableau with Bland's rule for both the
entering and the leaving variable. Intended for problems with up to a couple
of thousand rows and columns.
"""

import itertools
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import DimensionMismatch, IterationLimit, TooLarge

FEAS_TOL = 1e-7
PIVOT_TOL = 1e-10
MAX_PIVOTS = 10**6
MAX_ENUM_VARS = 8


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


@dataclass
class LinearProgram:
    """``min c.x  s.t.  A x (<=|>=|=) b,  lo <= x <= hi``.

    ``senses`` holds one of ``"<="``, ``">="``, ``"="`` per row. ``lo`` may be
    ``-inf`` and ``hi`` may be ``+inf``.
    """

    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=np.float64).ravel()
        nv = self.c.shape[0]
        A = np.asarray(self.A, dtype=np.float64)
        if A.size == 0:
            A = A.reshape(0, nv)
        if A.ndim != 2 or A.shape[1] != nv:
            raise DimensionMismatch(f"A has shape {A.shape}, expected (*, {nv})")
        self.A = A
        self.b = np.asarray(self.b, dtype=np.float64).ravel()
        self.senses = list(self.senses)
        if self.b.shape[0] != A.shape[0] or len(self.senses) != A.shape[0]:
            raise DimensionMismatch("rows of A, b and senses disagree")
        bad = [s for s in self.senses if s not in ("<=", ">=", "=")]
        if bad:
            raise DimensionMismatch(f"unknown constraint senses {bad}")
        self.lo = np.zeros(nv) if self.lo is None else np.asarray(self.lo, dtype=np.float64).ravel()
        self.hi = np.full(nv, np.inf) if self.hi is None else np.asarray(self.hi, dtype=np.float64).ravel()
        if self.lo.shape[0] != nv or self.hi.shape[0] != nv:
            raise DimensionMismatch("bounds do not match the number of variables")
        if np.any(self.lo > self.hi):
            raise DimensionMismatch("lower bound exceeds upper bound")
        if np.any(self.lo == np.inf) or np.any(self.hi == -np.inf):
            raise DimensionMismatch("invalid infinite bound")

    @property
    def n_vars(self):
        return self.c.shape[0]

    def max_violation(self, x):
        x = np.asarray(x, dtype=np.float64)
        viol = [0.0]
        viol.append(float(np.max(self.lo - x, initial=0.0)))
        viol.append(float(np.max(x - self.hi, initial=0.0)))
        if self.A.shape[0]:
            r = self.A @ x - self.b
            for s, ri in zip(self.senses, r):
                if s == "<=":
                    viol.append(ri)
                elif s == ">=":
                    viol.append(-ri)
                else:
                    viol.append(abs(ri))
        return max(viol)


@dataclass
class LpSolution:
    status: Status
    x: np.ndarray = None
    objective: float = None
    iterations: int = 0
    max_violation: float = field(default=None)

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


class _Tableau:
    """Rows ``T[:m]`` are constraints ``[B^-1 A | B^-1 b]``; ``T[m]`` the cost row."""

    def __init__(self, T, basis, max_pivots):
        self.T = T
        self.basis = basis
        self.pivots = 0
        self.max_pivots = max_pivots

    def pivot(self, r, col):
        T = self.T
        T[r] /= T[r, col]
        colvals = T[:, col].copy()
        colvals[r] = 0.0
        nz = np.flatnonzero(colvals)
        if nz.size:
            T[nz] -= np.outer(colvals[nz], T[r])
        T[:, col] = 0.0
        T[r, col] = 1.0
        self.basis[r] = col
        self.pivots += 1
        if self.pivots > self.max_pivots:
            raise IterationLimit(f"simplex exceeded {self.max_pivots} pivots")

    def run(self, allowed):
        """Iterate Bland's rule on columns flagged in ``allowed``.

        Returns ``True`` at optimality, ``False`` if unbounded.
        """
        T = self.T
        m = T.shape[0] - 1
        while True:
            red = T[m, :-1]
            cand = np.flatnonzero((red < -PIVOT_TOL) & allowed)
            if cand.size == 0:
                return True
            col = cand[0]
            a = T[:m, col]
            pos = np.flatnonzero(a > PIVOT_TOL)
            if pos.size == 0:
                return False
            ratios = T[pos, -1] / a[pos]
            best = ratios.min()
            tied = pos[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
            # Bland: among tied rows leave the basic variable with lowest index
            r = tied[np.argmin(self.basis[tied])]
            self.pivot(r, col)


def _standard_form(lp):
    """Rewrite as ``min c'.y  s.t.  A' y (senses) b',  y >= 0``.

    Returns the pieces plus a map ``x = offset + P y``.
    """
    nv = lp.n_vars
    cols = []  # (source var, sign)
    offset = np.zeros(nv)
    extra_rows, extra_b = [], []
    for j in range(nv):
        lo, hi = lp.lo[j], lp.hi[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            if np.isfinite(hi):
                extra_rows.append((len(cols) - 1, hi - lo))
        elif np.isfinite(hi):
            # x = hi - y, y >= 0
            offset[j] = hi
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ny = len(cols)
    P = np.zeros((nv, ny))
    for k, (j, sgn) in enumerate(cols):
        P[j, k] = sgn
    A = lp.A @ P
    b = lp.b - lp.A @ offset
    senses = list(lp.senses)
    if extra_rows:
        E = np.zeros((len(extra_rows), ny))
        for r, (k, ub) in enumerate(extra_rows):
            E[r, k] = 1.0
            extra_b.append(ub)
        A = np.vstack([A, E])
        b = np.concatenate([b, extra_b])
        senses += ["<="] * len(extra_rows)
    c = P.T @ lp.c
    return c, A, senses, b, P, offset


def solve(lp, max_pivots=MAX_PIVOTS):
    """Solve ``lp``; returns an ``LpSolution`` with status Optimal/Infeasible/Unbounded."""
    c, A, senses, b, P, offset = _standard_form(lp)
    m, ny = A.shape

    flip = b < 0
    A = np.where(flip[:, None], -A, A)
    b = np.abs(b)
    senses = [
        ({"<=": ">=", ">=": "<="}.get(s, s) if f else s) for s, f in zip(senses, flip)
    ]

    n_slack = sum(s != "=" for s in senses)
    n_art = sum(s != "<=" for s in senses)
    ncols = ny + n_slack + n_art
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :ny] = A
    T[:m, -1] = b
    basis = np.empty(m, dtype=np.int64)
    k_slack, k_art = ny, ny + n_slack
    art_cols = []
    for i, s in enumerate(senses):
        if s == "<=":
            T[i, k_slack] = 1.0
            basis[i] = k_slack
            k_slack += 1
        elif s == ">=":
            T[i, k_slack] = -1.0
            k_slack += 1
            T[i, k_art] = 1.0
            basis[i] = k_art
            art_cols.append(k_art)
            k_art += 1
        else:
            T[i, k_art] = 1.0
            basis[i] = k_art
            art_cols.append(k_art)
            k_art += 1

    tab = _Tableau(T, basis, max_pivots)
    is_art = np.zeros(ncols, dtype=bool)
    is_art[art_cols] = True

    if art_cols:
        # phase 1: minimize the sum of artificials
        T[m, :] = 0.0
        T[m, art_cols] = 1.0
        art_rows = np.flatnonzero(is_art[basis])
        T[m] -= T[art_rows].sum(axis=0)
        tab.run(np.ones(ncols, dtype=bool))
        if -T[m, -1] > FEAS_TOL * max(1.0, float(b.max(initial=0.0))):
            return LpSolution(Status.INFEASIBLE, iterations=tab.pivots)
        # drive remaining artificials out of the basis, dropping redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if not is_art[tab.basis[r]]:
                continue
            row = T[r, :ncols]
            cand = np.flatnonzero((np.abs(row) > PIVOT_TOL) & ~is_art)
            if cand.size:
                tab.pivot(r, cand[0])
            else:
                keep[r] = False
        if not keep.all():
            T = np.vstack([T[:m][keep], T[m:]])
            tab.T = T
            tab.basis = tab.basis[keep]
            m = int(keep.sum())

    # phase 2
    cost = np.zeros(ncols)
    cost[:ny] = c
    T[m, :] = 0.0
    T[m, :ncols] = cost
    cb = cost[tab.basis]
    T[m] -= cb @ T[:m]
    allowed = ~is_art
    if not tab.run(allowed):
        return LpSolution(Status.UNBOUNDED, iterations=tab.pivots)

    y = np.zeros(ncols)
    y[tab.basis] = T[:m, -1]
    y = y[:ny]
    # degenerate basics carry round-off of either sign
    y[y < PIVOT_TOL * max(1.0, float(np.abs(b).max(initial=0.0)))] = 0.0
    x = offset + P @ y
    # snap to bounds the values that drifted by rounding
    x = np.clip(x, lp.lo, lp.hi)
    obj = float(lp.c @ x)
    viol = lp.max_violation(x)
    if viol > FEAS_TOL * max(1.0, float(np.abs(lp.b).max(initial=0.0))):
        raise IterationLimit(f"simplex returned a point violating constraints by {viol:.3g}")
    return LpSolution(Status.OPTIMAL, x=x, objective=obj, iterations=tab.pivots, max_violation=viol)


def _all_constraints(lp):
    """Every constraint as ``(a, b, kind)`` with kind in {'le', 'ge', 'eq'}."""
    nv = lp.n_vars
    rows, rhs, kinds = [], [], []
    for a, bi, s in zip(lp.A, lp.b, lp.senses):
        rows.append(a)
        rhs.append(bi)
        kinds.append({"<=": "le", ">=": "ge", "=": "eq"}[s])
    eye = np.eye(nv)
    for j in range(nv):
        if np.isfinite(lp.lo[j]):
            rows.append(eye[j])
            rhs.append(lp.lo[j])
            kinds.append("ge")
        if np.isfinite(lp.hi[j]):
            rows.append(eye[j])
            rhs.append(lp.hi[j])
            kinds.append("le")
    return np.array(rows).reshape(-1, nv), np.array(rhs), kinds


def enumerate_vertices(lp, tol=1e-9):
    """All vertices of the feasible region by exhaustive active-set enumeration.

    Test oracle only; refuses problems with more than eight variables.
    """
    nv = lp.n_vars
    if nv > MAX_ENUM_VARS:
        raise TooLarge(f"vertex enumeration supports at most {MAX_ENUM_VARS} variables, got {nv}")
    G, h, kinds = _all_constraints(lp)
    # a vertex has nv linearly independent active constraints; equalities are
    # not forced into the basis since redundant ones would make it singular
    combos = list(itertools.combinations(range(len(kinds)), nv))
    if not combos or nv == 0:
        return []
    idx = np.array(combos, dtype=np.int64)
    mats = G[idx]
    rhs = h[idx]
    dets = np.linalg.det(mats)
    ok = np.abs(dets) > 1e-12
    if not ok.any():
        return []
    pts = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]

    scale = 1.0 + np.abs(h)
    slack = pts @ G.T - h
    feas = np.ones(len(pts), dtype=bool)
    for i, k in enumerate(kinds):
        if k == "le":
            feas &= slack[:, i] <= tol * scale[i]
        elif k == "ge":
            feas &= slack[:, i] >= -tol * scale[i]
        else:
            feas &= np.abs(slack[:, i]) <= tol * scale[i]
    pts = pts[feas]
    out = []
    for p in pts:
        if not any(np.allclose(p, q, atol=1e-9) for q in out):
            out.append(p)
    return out
