import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nestchase.adversary import (
    CapCutting,
    Hadamard,
    HypercubeFaces,
    ProductSlab,
    RandomNested,
    ReplayStream,
    ShrinkingBalls,
    StreamError,
    sphere_net,
    sylvester_hadamard,
)
from nestchase.geom import ConvexBody, contains, extends, random_directions, support_batch

# ceil(2 pi / (2 asin(1/40)))
NET_SIZE_D2 = 126


def drain(stream, played=None):
    d = stream.dim
    out = []
    while True:
        x = np.zeros(d) if played is None else played(stream)
        K = stream.next(x)
        if K is None:
            return out
        out.append(K)


def test_hypercube_d1_sign_rule():
    s = HypercubeFaces(1)
    K = s.next(np.array([0.3]))
    assert contains(K, np.array([-1.0]), 1e-12)
    assert not contains(K, np.array([-0.9]), 1e-6)
    assert s.next(np.array([-1.0])) is None


def test_hypercube_d2_vertex():
    s = HypercubeFaces(2)
    bodies = drain(s, lambda st_: st_.last.witness)
    assert len(bodies) == 2
    w = bodies[-1].witness
    assert np.allclose(np.abs(w), 1.0)
    probe = w + 0.01 * random_directions(np.random.default_rng(0), 20, 2)
    assert not any(contains(bodies[-1], p, 1e-6) for p in probe)


def test_hypercube_tie_goes_negative():
    s = HypercubeFaces(2)
    K = s.next(np.zeros(2))
    assert K.witness[0] == -1.0


def test_sylvester_rows_orthogonal():
    H = sylvester_hadamard(8)
    assert np.array_equal(H @ H.T, 8 * np.eye(8))
    with pytest.raises(ValueError):
        sylvester_hadamard(6)


def test_hadamard_first_slice_d2():
    s = Hadamard(2, tol=1e-9)
    K = s.next(np.zeros(2))
    # h1 = (1, 1), sign rule at 0 gives -1: the slice y1 + y2 = -1
    assert contains(K, np.array([-0.5, -0.5]), 1e-8)
    assert contains(K, np.array([-1.0, 0.0]), 1e-8)
    assert not contains(K, np.array([0.0, 0.0]), 1e-6)


@pytest.mark.parametrize("d", [4, 8, 16])
def test_hadamard_solution_norm_and_diameter(d):
    s = Hadamard(d, tol=1e-6)
    rng = np.random.default_rng(d)
    drain(s, lambda st_: rng.normal(0, 1, d))
    x = s.solution()
    assert np.linalg.norm(x) <= 1.0 + 1e-12
    K = s.last
    assert contains(K, x, 1e-9)
    th = random_directions(rng, 64, d)
    hp, _ = support_batch(K, th)
    hm, _ = support_batch(K, -th)
    assert np.max(hp + hm) <= 10 * 1e-6


def test_net_size_d2():
    net = sphere_net(2, 0.05)
    assert len(net) == NET_SIZE_D2
    gaps = np.linalg.norm(net - np.roll(net, -1, axis=0), axis=1)
    assert np.max(gaps) <= 0.05


def test_net_d3_covers_candidates():
    rng = np.random.default_rng(1)
    net = sphere_net(3, 0.3, rng, n_candidates=5000)
    C = random_directions(np.random.default_rng(1), 5000, 3)
    dist = np.min(np.linalg.norm(C[:, None, :] - net[None], axis=2), axis=1)
    assert np.max(dist) <= 0.3


def test_net_rejects_spacing():
    with pytest.raises(ValueError):
        sphere_net(2, 1.5)


def test_cap_cutting_sandwich():
    s = CapCutting(2, 0.05)
    bodies = drain(s)
    assert len(bodies) == NET_SIZE_D2
    K = bodies[-1]
    th = random_directions(np.random.default_rng(2), 1000, 2)
    h, _ = support_batch(K, th)
    assert np.all(h >= 0.9 - 1e-9) and np.all(h <= 0.95)
    # the Steiner point of B1 is never cut
    assert all(contains(B, np.zeros(2), 0.0) for B in bodies)


def test_cap_cutting_pads_with_repeats():
    s = CapCutting(2, 0.5, T=20)
    bodies = drain(s)
    assert len(bodies) == 20
    assert bodies[-1] is bodies[-2]


def test_product_slab_heights():
    eps = 0.1
    s = ProductSlab(CapCutting(2, 0.5, T=4), eps)
    bodies = drain(s)
    assert len(bodies) == 4
    ez = np.array([0.0, 0.0, 1.0])
    for t, K in enumerate(bodies, start=1):
        hp, _ = support_batch(K, ez[None])
        hm, _ = support_batch(K, -ez[None])
        assert hp[0] + hm[0] == pytest.approx(eps ** t, rel=1e-9)


def test_product_slab_rejects_eps():
    with pytest.raises(ValueError):
        ProductSlab(CapCutting(2, 0.5), 0.5)


@given(st.integers(0, 2 ** 16), st.sampled_from([2, 3]), st.floats(0.1, 0.8))
def test_random_nested_is_nested(seed, d, f):
    s = RandomNested(d, 4, f, np.random.default_rng(seed), cloud_size=64)
    prev = s.initial
    for K in drain(s):
        assert extends(K, prev)
        assert contains(K, K.witness, 0.0)
        prev = K


def test_random_nested_deterministic():
    a = drain(RandomNested(3, 5, 0.3, np.random.default_rng(4), cloud_size=64))
    b = drain(RandomNested(3, 5, 0.3, np.random.default_rng(4), cloud_size=64))
    assert all(np.array_equal(x.A, y.A) and np.array_equal(x.b, y.b) for x, y in zip(a, b))


def test_shrinking_balls():
    bodies = drain(ShrinkingBalls(2, 3, 0.5))
    assert [K.radius for K in bodies] == [0.5, 0.25, 0.125]


def test_stream_rejects_non_nested():
    class Bad(ShrinkingBalls):
        def _next(self, played):
            return ConvexBody.ball(np.array([0.9, 0.0]), 0.5)

    with pytest.raises(StreamError):
        Bad(2, 1, 0.5).next(np.zeros(2))


def test_replay_round_trip(tmp_path):
    s = RandomNested(2, 3, 0.3, np.random.default_rng(0), cloud_size=32)
    orig = drain(s)
    path = tmp_path / "bodies.json"
    s.dump(path)
    r = ReplayStream.load(path)
    again = drain(r)
    assert len(again) == len(orig)
    assert all(np.array_equal(x.b, y.b) for x, y in zip(orig, again))
    assert json.loads(path.read_text())["kind"] == "random_nested"
