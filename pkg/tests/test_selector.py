import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_body
from nestchase.geom import ConvexBody, GeometryError, random_directions
from nestchase.selector import (
    SupportCache,
    antipodal_directions,
    hausdorff_nested,
    mean_steiner_budget,
    minkowski_sum_2d,
    steiner_def2,
    steiner_exact_2d,
    steiner_in_body,
    steiner_mc,
    width_budget,
)

# exterior angles 3pi/4, 3pi/4, pi/2 at (1,0), (0,1), (0,0) over 2 pi
TRIANGLE_STEINER = np.array([0.375, 0.375])
# (w(B1) - w(segment)) / 2 with w(segment [-e1, e1]) = 4 / pi in the plane
BALL_VS_SEGMENT = 1.0 - 2.0 / math.pi


def triangle_body():
    A = np.array([[-1.0, 0.0], [0.0, -1.0], [1.0, 1.0]])
    return ConvexBody(A, np.array([0.0, 0.0, 1.0]), np.zeros(2), 5.0, np.array([0.25, 0.25]))


def regular_polygon(n, c=(0.0, 0.0), rho=1.0, phase=0.0):
    a = phase + 2 * math.pi * np.arange(n) / n
    return np.asarray(c) + rho * np.stack([np.cos(a), np.sin(a)], axis=1)


def rotation(t):
    return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])


@st.composite
def polygons(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    n = draw(st.integers(3, 9))
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * math.pi, n))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * math.pi]]))
    if np.min(gaps) < 1e-2 or np.max(gaps) >= math.pi - 1e-2:
        ang = 2 * math.pi * np.arange(n) / n + rng.uniform(0, 0.1)
    rho = rng.uniform(0.5, 2.0)
    return rng.normal(0, 1, 2) + rho * np.stack([np.cos(ang), np.sin(ang)], axis=1)


# ---------------------------------------------------------------------------
# exact planar Steiner point


def test_exact_regular_polygon_center():
    c = np.array([0.7, -1.3])
    assert np.allclose(steiner_exact_2d(regular_polygon(7, c, 2.0, 0.3)), c, atol=1e-10)


def test_exact_unit_square():
    sq = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert np.allclose(steiner_exact_2d(sq), [0.5, 0.5], atol=1e-12)


def test_exact_triangle_value():
    tri = np.array([[0, 0], [1, 0], [0, 1]], dtype=float)
    assert np.allclose(steiner_exact_2d(tri), TRIANGLE_STEINER, atol=1e-12)


def test_exact_rejects_clockwise_and_degenerate():
    with pytest.raises(GeometryError):
        steiner_exact_2d(np.array([[0, 0], [0, 1], [1, 0]], dtype=float))
    with pytest.raises(GeometryError):
        steiner_exact_2d(np.array([[0, 0], [1, 0], [2, 0]], dtype=float))


@given(polygons(), st.floats(0, 2 * math.pi))
def test_exact_rotation_equivariant(P, t):
    R = rotation(t)
    assert np.allclose(steiner_exact_2d(P @ R.T), R @ steiner_exact_2d(P), atol=1e-9)


@given(polygons(), polygons())
def test_exact_minkowski_additive(P, Q):
    S = minkowski_sum_2d(P, Q)
    assert np.allclose(steiner_exact_2d(S), steiner_exact_2d(P) + steiner_exact_2d(Q), atol=1e-9)


# ---------------------------------------------------------------------------
# Monte-Carlo Steiner point


def test_mc_ball_center(rng):
    c = np.array([0.4, -0.2, 1.0])
    est = steiner_mc(ConvexBody.ball(c, 0.7), 4000, rng)
    assert np.all(np.abs(est.point - c) <= 3 * est.stderr + 1e-12)


def test_mc_box_origin(rng):
    K = ConvexBody.box(-np.ones(3), np.ones(3))
    est = steiner_mc(K, 4000, rng)
    assert np.all(np.abs(est.point) <= 3 * est.stderr + 1e-12)


def test_mc_triangle_matches_exact():
    est = steiner_mc(triangle_body(), 1_000_000, np.random.default_rng(3))
    assert np.all(np.abs(est.point - TRIANGLE_STEINER) <= 3 * est.stderr)
    assert est.max_stderr < 1e-3


def test_def2_agrees_with_mc():
    K = triangle_body()
    est = steiner_def2(K, 200_000, np.random.default_rng(4))
    assert np.all(np.abs(est.point - TRIANGLE_STEINER) <= 3 * est.stderr)


@given(st.integers(0, 2 ** 32 - 1))
def test_mc_translation_equivariant(seed):
    K = random_body(np.random.default_rng(seed), 3, 4)
    y = np.random.default_rng(seed + 1).normal(0, 1, 3)
    a = steiner_mc(K, 256, np.random.default_rng(0)).point
    b = steiner_mc(K.translate(y), 256, np.random.default_rng(0)).point
    assert np.allclose(b, a + y, atol=1e-9)


@given(st.integers(0, 2 ** 32 - 1))
def test_mc_estimate_is_inside(seed):
    rng = np.random.default_rng(seed)
    K = random_body(rng, 3, 5)
    est = steiner_mc(K, 512, rng)
    assert np.all(est.stderr >= 0) and np.all(np.isfinite(est.point))
    assert steiner_in_body(est, K)


def test_support_cache_incremental_matches_fresh(rng):
    K = random_body(rng, 3, 3)
    dirs = antipodal_directions(rng, 600, 3)
    cache = SupportCache(dirs, K)
    u = random_directions(rng, 1, 3)[0]
    K2 = K.with_constraints(u[None], [float(u @ K.witness) + 0.05], K.witness)
    cache.update(K2)
    assert 0 < cache.resolved < len(dirs)
    fresh = SupportCache(dirs, K2)
    assert np.allclose(cache.values, fresh.values, atol=1e-9)
    cache.update(K2)
    assert cache.resolved == 0


# ---------------------------------------------------------------------------
# budgets and Hausdorff distance


def test_budget_identical_zero(rng):
    K = random_body(rng, 3, 4)
    b = mean_steiner_budget(K, K, 2000, rng)
    assert b.value == pytest.approx(0.0, abs=1e-12)
    assert b.flag is None


def test_budget_half_ball(rng):
    b = mean_steiner_budget(ConvexBody.ball(np.zeros(3), 1.0), ConvexBody.ball(np.zeros(3), 0.5),
                            2000, rng)
    assert abs(b.value - 0.5) <= 3 * b.stderr + 1e-12


def test_budget_ball_vs_segment(rng):
    seg = ConvexBody(np.array([[0.0, 1.0], [0.0, -1.0]]), np.array([1e-12, 1e-12]),
                     np.zeros(2), 1.0, np.zeros(2))
    b = mean_steiner_budget(ConvexBody.ball(np.zeros(2), 1.0), seg, 20000, rng)
    assert abs(b.value - BALL_VS_SEGMENT) <= 3 * b.stderr


def test_budget_flags_reversed_nesting(rng):
    b = mean_steiner_budget(ConvexBody.ball(np.zeros(2), 0.5), ConvexBody.ball(np.zeros(2), 1.0),
                            200, rng)
    assert b.flag == "nesting violated"


def test_width_budget_needs_shared_directions(rng):
    K = ConvexBody.ball(np.zeros(2), 1.0)
    a = SupportCache(antipodal_directions(rng, 10, 2), K)
    b = SupportCache(antipodal_directions(rng, 10, 2), K)
    with pytest.raises(ValueError):
        width_budget(a, b)


def test_hausdorff_identical(rng):
    K = random_body(rng, 2, 3)
    assert hausdorff_nested(K, K, 512, rng).value == pytest.approx(0.0, abs=1e-9)


def test_hausdorff_half_ball(rng):
    h = hausdorff_nested(ConvexBody.ball(np.zeros(3), 1.0), ConvexBody.ball(np.zeros(3), 0.5), 512, rng)
    assert h.value == pytest.approx(0.5, abs=1e-9)


def test_hausdorff_half_disc(rng):
    outer = ConvexBody.ball(np.zeros(2), 1.0)
    inner = outer.with_constraints([[1.0, 0.0]], [0.0], np.array([-0.5, 0.0]))
    h = hausdorff_nested(outer, inner, 4096, rng)
    assert h.value == pytest.approx(1.0, abs=1e-4)
    assert abs(h.direction[0]) > 0.99


@given(st.integers(0, 2 ** 32 - 1))
def test_lipschitz_ratio_bounded(seed):
    # small cuts move the Steiner point by at most a constant times the budget term
    rng = np.random.default_rng(seed)
    K = random_body(rng, 3, 3)
    u = random_directions(rng, 1, 3)[0]
    dirs = antipodal_directions(rng, 4000, 3)
    c1 = SupportCache(dirs, K)
    v = float(np.max(c1.values[np.argmax(dirs @ u)]))
    K2 = K.with_constraints(u[None], [max(v - 0.05, float(u @ K.witness))], K.witness)
    c2 = SupportCache(dirs, K2)
    lam = width_budget(c1, c2).value
    move = np.linalg.norm(c1.steiner().point - c2.steiner().point)
    if lam > 1e-6:
        assert move <= 20.0 * lam * math.sqrt(3 * max(1.0, math.log(1 / lam)))
