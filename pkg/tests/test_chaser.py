import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nestchase.adversary import HypercubeFaces, RandomNested
from nestchase.chaser import (
    GreedyProjectionChaser,
    LazySteinerChaser,
    NormedSpaceChaser,
    SamplerConfig,
    SteinerChaser,
    TighteningChaser,
    TowardSteinerChaser,
    default_parameters,
    l2_to_norm_factor,
    make_chaser,
    unit_norm_ball,
)
from nestchase.geom import ConvexBody, NormSpec, contains, max_violation

SMALL_SAMPLER = SamplerConfig(n=512, chains=64, burn_in=40, warm_burn_in=10, thinning=4)


def ball(c, rho):
    return ConvexBody.ball(np.asarray(c, dtype=float), rho)


def steiner(d, n=4000, seed=0, cls=SteinerChaser):
    return cls(d, None, n, np.random.default_rng(seed))


def play(chaser, stream, x0):
    chaser.start(stream.initial, x0)
    pts = []
    while True:
        K = stream.next(chaser.state.played)
        if K is None:
            return pts
        p = chaser.step(K)
        assert max_violation(K, p) <= 1e-7 * max(1.0, K.radius)
        pts.append(p)


# ---------------------------------------------------------------------------
# Steiner family


def test_steiner_repeat_request_does_not_move():
    K = ball([0.1, 0.2], 0.8).with_constraints([[1.0, 0.0]], [0.3], np.array([0.1, 0.2]))
    c = steiner(2).start(K, K.witness)
    a = c.step(K)
    b = c.step(K)
    assert np.array_equal(a, b)


def test_steiner_hypercube_d2_movement_at_most_two():
    c = steiner(2, 20000)
    s = HypercubeFaces(2)
    pts = play(c, s, np.zeros(2))
    moves = np.linalg.norm(np.diff(np.vstack([pts]), axis=0), axis=1)
    # the first step is measured from s(K0) = 0
    total = np.linalg.norm(pts[0]) + moves.sum()
    assert total <= 2.0 + 0.05


def test_steiner_shrinking_balls_stays():
    c = steiner(3).start(ball(np.zeros(3), 1.0), np.zeros(3))
    for rho in (0.5, 0.25):
        p = c.step(ball(np.zeros(3), rho))
    assert np.linalg.norm(p) <= 1e-12
    assert c.state.cost_accum["l2"] <= 1e-12


def test_lazy_stays_when_feasible():
    c = steiner(2, cls=LazySteinerChaser).start(ball(np.zeros(2), 1.0), np.array([0.2, 0.0]))
    K = ball(np.zeros(2), 1.0).with_constraints([[1.0, 0.0]], [0.5], np.zeros(2))
    assert np.array_equal(c.step(K), [0.2, 0.0])
    assert c.state.cost_accum["episode"] == 0.0


def test_lazy_matches_steiner_when_outside():
    K = ball(np.zeros(2), 1.0).with_constraints([[1.0, 0.0]], [-0.2], np.array([-0.5, 0.0]))
    x0 = np.array([0.5, 0.0])
    a = steiner(2, seed=3, cls=LazySteinerChaser).start(K, x0).step(K)
    b = steiner(2, seed=3).start(K, x0).step(K)
    assert np.array_equal(a, b)


def test_toward_stays_when_feasible():
    c = steiner(2, cls=TowardSteinerChaser).start(ball(np.zeros(2), 1.0), np.array([0.3, 0.3]))
    assert np.array_equal(c.step(ball(np.zeros(2), 1.0)), [0.3, 0.3])


def test_toward_stops_on_boundary():
    c = steiner(2, cls=TowardSteinerChaser).start(ball(np.zeros(2), 1.0), np.array([0.9, 0.0]))
    p = c.step(ball(np.zeros(2), 0.5))
    assert np.allclose(p, [0.5, 0.0], atol=1e-9)


def test_greedy_identity_and_projection():
    c = GreedyProjectionChaser(2).start(ball(np.zeros(2), 2.0), np.array([0.3, 0.4]))
    assert np.array_equal(c.step(ball(np.zeros(2), 1.0)), [0.3, 0.4])
    p = c.step(ball(np.zeros(2), 0.25))
    assert np.allclose(p, [0.15, 0.2], atol=1e-9)


def test_greedy_vs_steiner_on_hypercube():
    g = play(GreedyProjectionChaser(2), HypercubeFaces(2), np.zeros(2))
    s = play(steiner(2), HypercubeFaces(2), np.zeros(2))
    assert np.allclose(np.abs(g[-1]), 1.0) and np.allclose(np.abs(s[-1]), 1.0, atol=1e-6)


@settings(max_examples=8)
@given(st.integers(0, 2 ** 16), st.sampled_from(["steiner", "lazy_steiner", "toward_steiner",
                                                 "greedy_projection"]))
def test_chasers_stay_feasible(seed, kind):
    stream = RandomNested(3, 6, 0.4, np.random.default_rng(seed), cloud_size=64)
    c = make_chaser(kind, 3, rng=np.random.default_rng(seed), n_dirs=2000)
    pts = play(c, stream, np.zeros(3))
    acc = c.state.cost_accum
    assert acc["l2"] >= 0 and len(pts) == 6


# ---------------------------------------------------------------------------
# weighted-centroid chaser


@pytest.mark.parametrize("p,d", [(2, 2), (2, 8), ("inf", 4), (1, 4), (3, 5)])
def test_default_parameters(p, d):
    alpha, r, D = default_parameters(d, NormSpec(p))
    assert r <= 1 / math.sqrt(d) + 1e-15
    assert alpha > 0 and D > 0
    # r is the fixed-point update applied to the previous alpha, so it can
    # only be smaller than what alpha alone would give
    assert r <= 1.0 / (d * d * alpha ** 1.5 * D) * (1 + 1e-9) or r == 1 / math.sqrt(d)


def test_rejects_large_pad():
    with pytest.raises(ValueError):
        NormedSpaceChaser(4, 2, r=0.6)


def test_unit_norm_balls():
    K, exact = unit_norm_ball(NormSpec("inf"), 3)
    assert exact and contains(K, np.ones(3), 1e-12)
    K, exact = unit_norm_ball(NormSpec(1), 3)
    assert exact and contains(K, np.eye(3)[0], 1e-12) and not contains(K, np.ones(3) / 2, 1e-9)
    assert l2_to_norm_factor(NormSpec(1), 4) == pytest.approx(2.0)


def test_normed_first_request_is_free():
    c = NormedSpaceChaser(2, 2, rng=np.random.default_rng(0), sampler=SMALL_SAMPLER)
    K0 = ball(np.zeros(2), 1.0)
    c.start(K0, np.zeros(2))
    x = c.state.x.copy()
    # the weighted centroid of the symmetric padded ball sits near 0
    assert contains(K0, x, 0.0)
    p = c.step(K0)
    assert np.array_equal(p, x)
    assert c.last_info["cuts"] == 0


def test_normed_cuts_toward_request():
    c = NormedSpaceChaser(2, 2, rng=np.random.default_rng(1), sampler=SMALL_SAMPLER)
    c.start(ball(np.zeros(2), 1.0), np.zeros(2))
    K = ball(np.zeros(2), 1.0).with_constraints([[1.0, 0.0]], [-0.5], np.array([-0.75, 0.0]))
    p = c.step(K)
    assert max_violation(K, p) <= 1e-7
    assert c.last_info["cuts"] >= 1
    for rec in c.cuts:
        assert 0.0 <= rec.kept_fraction <= 1.0


def test_tightening_single_phase_for_large_requests():
    t = TighteningChaser(2, 2, lambda: make_chaser("steiner", 2, n_dirs=2000))
    K = ball(np.zeros(2), 1.0)
    t.start(K, np.zeros(2))
    K1 = K.with_constraints([[1.0, 0.0]], [0.2], np.zeros(2))
    t.step(K1)
    assert t.phase == 0


def test_tightening_rescales_on_small_ball():
    t = TighteningChaser(2, 2, lambda: make_chaser("steiner", 2, n_dirs=2000),
                         rng=np.random.default_rng(0), n_dirs=2000)
    K0 = ball(np.zeros(2), 1.0)
    t.start(K0, np.zeros(2))
    t.step(K0)
    c = np.array([0.3, 0.1])
    K1 = ConvexBody.ball(c, 0.25)
    p = t.step(K1)
    assert t.phase == 1 and t.last_info["rescaled"]
    assert max_violation(K1, p) <= 1e-9
    assert len(t.phase_cuts) == 2


def test_make_chaser_unknown():
    with pytest.raises(ValueError):
        make_chaser("teleport", 2)
