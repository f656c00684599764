import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from metarounding.exceptions import EmptyPolytope, NotInPolytope
from metarounding.geometry import (
    build_polytope,
    combinatorial_inf_norm,
    entropy,
    grad_hstar,
    hstar_value,
    linear_max,
)
from oracles import brute_linear_max, delta, fd_grad, pg_link, project_box_simplex

HALF3 = np.array([0.5, 0.5, 0.5])


def random_member(L, rng):
    """A random point of L: random capped simplex point in q = l * x, zeros anywhere in [0, M]."""
    S = L.support
    q = project_box_simplex(rng.normal(size=S.size), np.zeros(S.size), L.M * L.x[S])
    loss = rng.uniform(0, L.M, L.n)
    loss[S] = q / L.x[S]
    return loss


coord = st.one_of(st.just(0.0), st.floats(1e-3, 1.0))
relaxed = arrays(np.float64, st.integers(1, 6), elements=coord).filter(lambda v: v.max() > 0)


def test_build_polytope_examples():
    L = build_polytope(HALF3)
    assert L.M == 2.0 and list(L.support) == [0, 1, 2] and L.zeros.size == 0
    assert build_polytope([1, 1]).M == 1.0
    L = build_polytope([0.25, 0, 1])
    assert L.M == 4.0 and list(L.zeros) == [1]


def test_build_polytope_rejects_zero_and_bad_entries():
    with pytest.raises(ValueError):
        build_polytope([5e-324, 1.0])
    with pytest.raises(EmptyPolytope):
        build_polytope([0.0, 0.0])
    with pytest.raises(ValueError):
        build_polytope([0.5, 1.5])
    with pytest.raises(ValueError):
        build_polytope([np.nan, 1.0])


def test_polytope_is_immutable():
    x = np.array([0.5, 1.0])
    L = build_polytope(x)
    x[0] = 0.1
    assert L.x[0] == 0.5
    with pytest.raises(ValueError):
        L.x[0] = 0.2


def test_entropy_examples():
    L2 = build_polytope([1, 1])
    assert entropy([0.5, 0.5], L2) == pytest.approx(0.0, abs=1e-15)
    assert entropy([1.0, 0.0], L2) == pytest.approx(math.log(2))
    assert entropy([2.0, 0.0, 0.0], build_polytope(HALF3)) == pytest.approx(math.log(3))


def test_entropy_rejects_non_members():
    L = build_polytope(HALF3)
    with pytest.raises(NotInPolytope):
        entropy([1.0, 1.0, 1.0], L)  # budget 1.5
    with pytest.raises(NotInPolytope):
        entropy([2.5, -0.5, 0.0], L)


@settings(max_examples=60, deadline=None)
@given(relaxed, st.integers(0, 2**32 - 1))
def test_entropy_between_zero_and_log_n(x, seed):
    L = build_polytope(x)
    rng = np.random.default_rng(seed)
    for _ in range(5):
        d = entropy(random_member(L, rng), L)
        assert -1e-12 <= d <= math.log(L.n) + 1e-12


def test_linear_max_examples():
    L = build_polytope(HALF3)
    v, arg = linear_max([1, 1, 0], L)
    assert v == 2.0 and np.array_equal(arg, [2, 0, 0])
    v, arg = linear_max([0, 0], build_polytope([1, 1]))
    assert v == 0.0 and np.array_equal(arg, [1, 0])
    v, arg = linear_max([5, 1], build_polytope([0, 1]))
    assert v == 6.0 and np.array_equal(arg, [1, 1])


@settings(max_examples=150, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 4), elements=coord).filter(lambda v: v.max() > 0),
    st.integers(0, 2**32 - 1),
)
def test_linear_max_matches_vertex_enumeration(x, seed):
    L = build_polytope(x)
    theta = np.random.default_rng(seed).normal(size=L.n)
    v, arg = linear_max(theta, L)
    assert L.contains(arg)
    assert v == pytest.approx(float(arg @ theta), abs=1e-12)
    assert v == pytest.approx(brute_linear_max(theta, L.x), rel=1e-9, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(relaxed, st.integers(0, 2**32 - 1))
def test_linear_max_dominates_members(x, seed):
    L = build_polytope(x)
    rng = np.random.default_rng(seed)
    theta = rng.random(L.n)
    v, _ = linear_max(theta, L)
    for _ in range(20):
        assert random_member(L, rng) @ theta <= v + 1e-9


def test_grad_hstar_zero_theta_is_uniform_q():
    assert np.allclose(grad_hstar([0, 0], build_polytope([1, 1]), 3.0), [0.5, 0.5])
    x = np.array([0.2, 0.5, 1.0])
    assert np.allclose(grad_hstar(np.zeros(3), build_polytope(x), 7.0), 1 / (3 * x))


def test_grad_hstar_uncapped_example():
    loss = grad_hstar([1, 1, 0], build_polytope(HALF3), 1.0)
    w = np.exp([2.0, 2.0, 0.0])
    assert np.allclose(loss, 2 * w / w.sum(), atol=1e-12)
    assert np.allclose(loss, [0.9366, 0.9366, 0.1268], atol=1e-4)
    ref, _ = pg_link(np.array([1.0, 1.0, 0.0]), HALF3, 1.0)
    assert np.max(np.abs(loss - ref)) < 1e-6


def test_grad_hstar_large_eta_approaches_linear_max():
    L = build_polytope(HALF3)
    # (1, 1, 0) ties the first two coordinates; the smoothed argmax splits them
    # evenly, so compare values there and use an untied theta for the argmax
    assert hstar_value([1, 1, 0], L, 1e4) == pytest.approx(linear_max([1, 1, 0], L)[0], abs=1e-3)
    loss = grad_hstar([1, 0.9, 0], L, 1e4)
    assert np.max(np.abs(loss - linear_max([1, 0.9, 0], L)[1])) < 1e-3


def test_grad_hstar_all_caps_bind():
    # one positive coordinate: q is forced to 1 on it
    L = build_polytope([0, 0.4, 0])
    loss = grad_hstar([3, 1, 0], L, 5.0)
    assert np.allclose(loss, [L.M, 2.5, L.M])


def test_grad_hstar_overflow_safe():
    L = build_polytope([1e-3, 1.0, 0.5])
    loss = grad_hstar([1.0, 1.0, 1.0], L, 1e6)
    assert np.all(np.isfinite(loss)) and L.contains(loss)


@settings(max_examples=100, deadline=None)
@given(relaxed, st.integers(0, 2**32 - 1), st.floats(0.05, 500))
def test_grad_hstar_is_feasible(x, seed, eta):
    L = build_polytope(x)
    theta = np.random.default_rng(seed).random(L.n) * 5
    loss = grad_hstar(theta, L, eta)
    assert np.all(loss >= -1e-12) and np.all(loss <= L.M * (1 + 1e-12))
    assert abs(loss @ L.x - 1.0) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, st.integers(1, 4), elements=st.floats(0.01, 1.0)),
    st.integers(0, 2**32 - 1),
    st.floats(0.1, 50),
)
def test_grad_hstar_matches_projected_gradient(x, seed, eta):
    theta = np.random.default_rng(seed).random(x.shape[0])
    L = build_polytope(x)
    ref, ref_val = pg_link(theta, x, eta)
    assert np.max(np.abs(grad_hstar(theta, L, eta) - ref)) < 1e-4
    assert hstar_value(theta, L, eta) == pytest.approx(ref_val, abs=1e-6)


@settings(max_examples=40, deadline=None)
@given(relaxed, st.integers(0, 2**32 - 1), st.floats(0.1, 30))
def test_hstar_value_dominates_members(x, seed, eta):
    L = build_polytope(x)
    rng = np.random.default_rng(seed)
    theta = rng.random(L.n)
    h = hstar_value(theta, L, eta)
    for _ in range(100):
        loss = random_member(L, rng)
        assert h >= loss @ theta - delta(loss, L.x) / eta - 1e-9


@settings(max_examples=40, deadline=None)
@given(relaxed, st.integers(0, 2**32 - 1), st.floats(0.1, 30), st.floats(0.1, 30))
def test_hstar_sandwich(x, seed, eta1, eta2):
    L = build_polytope(x)
    theta = np.random.default_rng(seed).random(L.n)
    lm, _ = linear_max(theta, L)
    h1, h2 = hstar_value(theta, L, eta1), hstar_value(theta, L, eta2)
    assert lm - math.log(L.n) / eta1 - 1e-9 <= h1 <= lm + 1e-9
    # the smoothing loss is paid at the smaller eta: h1 >= h2 - ln(n) / eta1
    assert h1 >= h2 - math.log(L.n) / eta1 - 1e-9


def test_hstar_zero_theta():
    assert hstar_value([0, 0], build_polytope([1, 1]), 2 / math.log(2)) == pytest.approx(0.0, abs=1e-15)


def test_hstar_gradient_by_finite_differences():
    rng = np.random.default_rng(11)
    checked = 0
    while checked < 50:
        n = rng.integers(2, 6)
        x = rng.uniform(0.3, 1.0, n)
        L = build_polytope(x)
        theta, eta = rng.random(n), rng.uniform(0.5, 5.0)
        loss = grad_hstar(theta, L, eta)
        q = loss * x
        if np.any(np.abs(q - L.M * x) < 1e-3):
            continue  # a cap is (nearly) tight: not a smooth point
        fd = fd_grad(lambda t: hstar_value(t, L, eta), theta, h=1e-5)
        assert np.max(np.abs(fd - loss)) < 1e-5
        checked += 1


def test_combinatorial_inf_norm():
    assert combinatorial_inf_norm(np.array([0, 3, 1])) == 3
    assert combinatorial_inf_norm(np.array([], dtype=int)) == 0
