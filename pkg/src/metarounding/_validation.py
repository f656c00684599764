"""Input validation helpers shared by the public entry points."""

import numbers

import numpy as np

from .exceptions import DimensionMismatch, EmptyPolytope


def check_vector(v, name="vector", n=None, dtype=np.float64):
    arr = np.asarray(v, dtype=dtype)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {arr.shape[0]}, expected {n}")
    if arr.dtype.kind == "f" and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_relaxed_point(x, n=None):
    """Validate a point of the relaxation: entries in [0, 1], at least one positive."""
    x = check_vector(x, "x", n)
    if x.size == 0:
        raise DimensionMismatch("x is empty")
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]^n")
    if not np.any(x > 0):
        raise EmptyPolytope("x has no positive coordinate; the loss polytope is empty")
    return x


def check_nonnegative(v, name="loss", n=None):
    v = check_vector(v, name, n)
    if np.any(v < 0):
        raise ValueError(f"{name} must be nonnegative")
    return v


def check_combinatorial(c, n=None):
    arr = np.asarray(c)
    if arr.ndim != 1:
        raise DimensionMismatch(f"combinatorial vector must be 1-dimensional, got {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise DimensionMismatch(f"oracle returned length {arr.shape[0]}, expected {n}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
            raise ValueError("combinatorial vector must be integral")
    elif arr.dtype.kind not in "iub":
        raise ValueError(f"combinatorial vector has unsupported dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("combinatorial vector must be nonnegative")
    return arr


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not value > 0:
        raise ValueError(f"{name} must be a positive real, got {value!r}")
    return float(value)


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise ValueError(f"cannot build a Generator from {seed!r}")
