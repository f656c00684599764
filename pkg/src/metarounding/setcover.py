"""Weighted set cover: instances, the greedy oracle, the LP relaxation and projection."""

import json
from dataclasses import dataclass

import numpy as np

from ._validation import check_nonnegative, check_random_state, check_vector
from .exceptions import GenerationFailed
from .simplexlp import LinearProgram, solve

MAX_ATTEMPTS = 1000
PROJ_TOL = 1e-8
PROJ_MAX_SWEEPS = 10**4


@dataclass(frozen=True)
class SetCoverInstance:
    """``coverage[i, j] == 1`` iff set ``j`` contains item ``i``."""

    coverage: np.ndarray
    cost: np.ndarray
    seed: int = None

    def __post_init__(self):
        A = np.asarray(self.coverage, dtype=np.int8)
        if A.ndim != 2:
            raise ValueError("coverage must be a 2-d 0/1 matrix")
        if not np.isin(A, (0, 1)).all():
            raise ValueError("coverage must be 0/1")
        if not A.any(axis=1).all():
            raise ValueError("some item is not covered by any set")
        if not A.any(axis=0).all():
            raise ValueError("some set is empty")
        w = check_vector(self.cost, "cost", A.shape[1])
        A.setflags(write=False)
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "coverage", A)
        object.__setattr__(self, "cost", w)

    @property
    def m(self):
        return self.coverage.shape[0]

    @property
    def n(self):
        return self.coverage.shape[1]

    def is_cover(self, c):
        return bool(np.all(self.coverage @ np.asarray(c) >= 1))

    def in_relaxation(self, x, tol=1e-7):
        x = np.asarray(x, dtype=np.float64)
        return bool(
            np.all(x >= -tol) and np.all(x <= 1 + tol) and np.all(self.coverage @ x >= 1 - tol)
        )

    def to_dict(self):
        return {
            "m": self.m,
            "n": self.n,
            "coverage": self.coverage.ravel().tolist(),
            "cost": [float(v) for v in self.cost],
            "seed": self.seed,
        }

    def to_json(self):
        # repr of a Python float round-trips exactly
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        m, n = int(d["m"]), int(d["n"])
        A = np.asarray(d["coverage"], dtype=np.int8)
        if A.size != m * n:
            raise ValueError(f"coverage has {A.size} entries, expected m*n = {m * n}")
        return cls(A.reshape(m, n), np.asarray(d["cost"], dtype=np.float64), d.get("seed"))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def generate(m, n, density=0.3, random_state=None, seed=None):
    """Random instance: i.i.d. Bernoulli(density) coverage, uniform [0, 1] costs.

    Empty columns are redrawn; if some item is left uncovered the whole matrix
    is redrawn. Raises ``GenerationFailed`` after 1000 attempts.
    """
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    rng = check_random_state(random_state if random_state is not None else seed)
    for _ in range(MAX_ATTEMPTS):
        A = rng.random((m, n)) < density
        for _ in range(MAX_ATTEMPTS):
            empty = ~A.any(axis=0)
            if not empty.any():
                break
            A[:, empty] = rng.random((m, int(empty.sum()))) < density
        else:
            continue
        if A.any(axis=1).all():
            cost = rng.random(n)
            return SetCoverInstance(A.astype(np.int8), cost, seed)
    raise GenerationFailed(f"no valid {m}x{n} instance after {MAX_ATTEMPTS} attempts at density {density}")


def harmonic(m):
    return float(np.sum(1.0 / np.arange(1, m + 1)))


def greedy_cover(instance, loss):
    """Greedy cover: repeatedly take the set with the smallest loss per newly covered item."""
    A = instance.coverage.astype(bool)
    loss = check_nonnegative(loss, "loss", instance.n)
    uncovered = np.ones(instance.m, dtype=bool)
    chosen = np.zeros(instance.n, dtype=np.int64)
    while uncovered.any():
        gain = A[uncovered].sum(axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(gain > 0, loss / np.maximum(gain, 1), np.inf)
        j = int(np.argmin(ratio))
        chosen[j] = 1
        uncovered &= ~A[:, j]
    return chosen


class GreedySetCoverOracle:
    """Relax-based ``H_m``-approximation oracle for a fixed instance."""

    def __init__(self, instance):
        self.instance = instance
        self.n = instance.n
        self.alpha = harmonic(instance.m)

    def __call__(self, loss):
        return greedy_cover(self.instance, loss)


def relaxed_lp(instance, cost=None):
    """Solve ``min cost.x  s.t.  A x >= 1,  0 <= x <= 1``; returns ``(x, value)``."""
    cost = instance.cost if cost is None else check_vector(cost, "cost", instance.n)
    lp = LinearProgram(
        cost,
        instance.coverage,
        [">="] * instance.m,
        np.ones(instance.m),
        lo=np.zeros(instance.n),
        hi=np.ones(instance.n),
    )
    sol = solve(lp)
    if not sol.optimal:
        raise RuntimeError(f"relaxed set cover LP returned {sol.status.value}")
    return sol.x, sol.objective


def repair(instance, x):
    """Raise coordinates of any violated row until it is covered."""
    A = instance.coverage
    x = x.copy()
    for i in np.flatnonzero(A @ x < 1.0):
        deficit = 1.0 - float(A[i] @ x)
        members = np.flatnonzero(A[i])
        # fill the largest fractional entries first
        for j in members[np.argsort(-x[members], kind="stable")]:
            if deficit <= 0:
                break
            room = 1.0 - x[j]
            if room <= 0:
                continue
            add = min(room, deficit)
            x[j] += add
            deficit -= add
    return x


def project(instance, y, tol=PROJ_TOL, max_sweeps=PROJ_MAX_SWEEPS):
    """Euclidean projection of ``y`` onto ``{x in [0, 1]^n : A x >= 1}`` by Dykstra's method."""
    A = instance.coverage.astype(np.float64)
    y = check_vector(y, "y", instance.n)
    if instance.in_relaxation(y, tol=0.0):
        return y.copy()
    norms = (A * A).sum(axis=1)
    m = A.shape[0]
    x = y.copy()
    inc = np.zeros((m + 1, y.shape[0]))
    for _ in range(max_sweeps):
        prev = x
        # box
        z = x + inc[m]
        x = np.clip(z, 0.0, 1.0)
        inc[m] = z - x
        for i in range(m):
            z = x + inc[i]
            short = 1.0 - float(A[i] @ z)
            x = z + (short / norms[i]) * A[i] if short > 0 else z
            inc[i] = z - x
        if np.max(np.abs(x - prev)) < tol:
            break
    x = np.clip(x, 0.0, 1.0)
    return repair(instance, x)
