"""Request streams: nested sequences of convex bodies.

Every stream starts from an initial body ``K_0`` (the player's starting
region, not charged) and emits ``K_1, K_2, ...`` through ``next(played)``.
Each emitted body extends its predecessor's constraint list, so nesting is
checked syntactically.  Adaptive streams only look at the played point.
"""
from __future__ import annotations

import json
import math

import numpy as np

from .geom import (
    ConvexBody,
    GeometryError,
    PaddedBody,
    extends,
    max_violation,
    random_directions,
    support_batch,
)
from .sampler import Potential, sample_cloud, weighted_centroid


class StreamError(Exception):
    pass


class RequestStream:
    """Base class; subclasses implement :meth:`_next`."""

    oblivious = True
    kind = "stream"

    def __init__(self, initial):
        self.initial = initial
        self.emitted = []
        self.finished = False

    @property
    def dim(self):
        return self.initial.dim

    @property
    def last(self):
        return self.emitted[-1] if self.emitted else self.initial

    def next(self, played):
        if self.finished:
            return None
        played = np.asarray(played, dtype=float)
        body = self._next(played)
        if body is None:
            self.finished = True
            return None
        if not extends(body, self.last):
            raise StreamError(f"{self.kind}: emitted body does not extend its predecessor")
        self.emitted.append(body)
        return body

    def _next(self, played):
        raise NotImplementedError

    def materialize(self):
        return {
            "kind": self.kind,
            "initial": self.initial.to_dict(),
            "requests": [b.to_dict() for b in self.emitted],
        }

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.materialize(), fh)


class ReplayStream(RequestStream):
    """Replays a materialized body sequence, ignoring the played points."""

    kind = "replay"

    def __init__(self, initial, bodies):
        super().__init__(initial)
        self._bodies = list(bodies)

    @classmethod
    def from_dict(cls, data):
        return cls(ConvexBody.from_dict(data["initial"]),
                   [ConvexBody.from_dict(b) for b in data["requests"]])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def _next(self, played):
        k = len(self.emitted)
        return self._bodies[k] if k < len(self._bodies) else None


def _sign_rule(v):
    """``-1`` when ``v >= 0`` else ``+1``; ties go to ``-1``."""
    return -1.0 if v >= 0 else 1.0


class HypercubeFaces(RequestStream):
    """Fixes one coordinate per step to the face farther from the player."""

    oblivious = False
    kind = "hypercube_faces"

    def __init__(self, d):
        if d < 1:
            raise ValueError("d must be >= 1")
        init = ConvexBody.box(-np.ones(d), np.ones(d), radius=4 * math.sqrt(d),
                              witness=np.zeros(d))
        super().__init__(init)
        self.T = d

    def _next(self, played):
        t = len(self.emitted)
        if t >= self.T:
            return None
        s = _sign_rule(played[t])
        e = np.zeros(self.dim)
        e[t] = 1.0
        w = self.last.witness.copy()
        w[t] = s
        return self.last.with_constraints(np.array([e, -e]), [s, -s], w)


def sylvester_hadamard(d):
    if d < 1 or d & (d - 1):
        raise ValueError("Hadamard order must be a power of two")
    H = np.ones((1, 1))
    while H.shape[0] < d:
        H = np.block([[H, H], [H, -H]])
    return H


class Hadamard(RequestStream):
    """Slices ``{h_t . y = -+1}`` against the sign of ``h_t . played``."""

    oblivious = False
    kind = "hadamard"

    def __init__(self, d, tol=1e-6):
        self.H = sylvester_hadamard(d)
        super().__init__(ConvexBody.ball(np.zeros(d), 4 * math.sqrt(d)))
        self.tol = float(tol)
        self.T = d
        self.signs = []

    def _next(self, played):
        t = len(self.emitted)
        if t >= self.T:
            return None
        h = self.H[t]
        s = _sign_rule(float(h @ played))
        self.signs.append(s)
        d = self.dim
        a = h / math.sqrt(d)
        off = s / math.sqrt(d)
        # minimum-norm solution of the first t+1 equations (rows are orthogonal)
        w = self.H[: t + 1].T @ np.array(self.signs) / d
        return self.last.with_constraints(np.array([a, -a]), [off + self.tol, -off + self.tol], w)

    def solution(self):
        """``H^{-1} s`` for the signs chosen so far (all d rows needed)."""
        return self.H.T @ np.array(self.signs) / self.dim


def sphere_net(d, spacing, rng=None, n_candidates=100000):
    """Points on the unit sphere with covering radius at most ``spacing``.

    Equally spaced angles for d = 2; for d >= 3 greedy farthest-point
    selection among random candidates (covering certified only on the
    candidates).
    """
    if not 0 < spacing < 1:
        raise ValueError("spacing must lie in (0, 1)")
    if d == 2:
        N = math.ceil(math.pi / math.asin(spacing / 2.0))
        ang = 2 * math.pi * np.arange(N) / N
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if rng is None:
        rng = np.random.default_rng(0)
    C = random_directions(rng, n_candidates, d)
    net = [C[0]]
    dist = np.linalg.norm(C - C[0], axis=1)
    while True:
        k = int(np.argmax(dist))
        if dist[k] <= spacing:
            break
        net.append(C[k])
        dist = np.minimum(dist, np.linalg.norm(C - C[k], axis=1))
    return np.array(net)


class CapCutting(RequestStream):
    """Cuts ``{x . v_t <= 0.9}`` from the unit ball along a sphere net."""

    kind = "cap_cutting"

    def __init__(self, d, spacing=0.05, T=None, rng=None, level=0.9):
        super().__init__(ConvexBody.ball(np.zeros(d), 1.0))
        self.net = sphere_net(d, spacing, rng)
        self.level = level
        self.T = len(self.net) if T is None else int(T)

    def _next(self, played):
        t = len(self.emitted)
        if t >= self.T:
            return None
        if t >= len(self.net):
            return self.last  # padding with repeats
        v = self.net[t]
        return self.last.with_constraints(v[None], [self.level], self.last.witness)


class ProductSlab(RequestStream):
    """Lifts a base stream to ``K_t x [0, eps^t]``.

    The base ball ``B(c, R)`` becomes ``B((c, 0), R)``; at height ``z`` its
    slice has radius ``sqrt(R^2 - z^2)``, a distortion of order ``eps^(2t)``.
    Each lifted body appends the base's new halfspaces and ``z <= eps^t``.
    """

    kind = "product_slab"

    def __init__(self, base, eps):
        if not 0 < eps < 0.5:
            raise ValueError("eps must lie in (0, 1/2)")
        self.base = base
        self.eps = float(eps)
        self.oblivious = base.oblivious
        b0 = base.initial
        d = b0.dim
        A = np.hstack([b0.A, np.zeros((b0.m, 1))])
        ez = np.zeros(d + 1)
        ez[d] = 1.0
        A = np.vstack([A, -ez, ez])
        bb = np.concatenate([b0.b, [0.0, 1.0]])
        c = np.append(b0.center, 0.0)
        w = np.append(b0.witness, 0.0)
        init = ConvexBody(A, bb, c, b0.radius, w)
        super().__init__(init)
        self._ez = ez

    def _next(self, played):
        d = self.base.dim
        prev_base = self.base.last
        nb = self.base.next(played[:d])
        if nb is None:
            return None
        t = len(self.emitted) + 1
        hi = self.eps ** t
        k_new = nb.m - prev_base.m
        new_A = np.vstack([np.hstack([nb.A[prev_base.m:], np.zeros((k_new, 1))]), self._ez[None]])
        new_b = np.concatenate([nb.b[prev_base.m:], [hi]])
        last = self.last
        A = np.vstack([last.A, new_A])
        b = np.concatenate([last.b, new_b])
        c = np.append(nb.center, 0.0)
        w = np.append(nb.witness, 0.5 * hi)
        if np.linalg.norm(w - c) > nb.radius:
            w = np.append(nb.witness, 0.0)
        return ConvexBody(A, b, c, nb.radius, w)


class RandomNested(RequestStream):
    """Random cuts through points between an interior centroid and the boundary.

    Each step draws a direction ``u`` and cuts
    ``{x . u <= h(u) - f (h(u) - x_c . u)}`` where ``x_c`` is the centroid of
    a short uniform hit-and-run cloud, which also serves as the new witness.
    """

    kind = "random_nested"

    def __init__(self, d, T, cut_fraction, rng, cloud_size=256, min_width=1e-6):
        if not 0 < cut_fraction < 1:
            raise ValueError("cut_fraction must lie in (0, 1)")
        super().__init__(ConvexBody.ball(np.zeros(d), 1.0))
        self.T = int(T)
        self.f = float(cut_fraction)
        self.rng = rng
        self.cloud_size = cloud_size
        self.min_width = min_width

    def _next(self, played):
        if len(self.emitted) >= self.T:
            return None
        K = self.last
        d = self.dim
        u = random_directions(self.rng, 1, d)[0]
        (hp, hm), _ = support_batch(K, np.array([u, -u]))
        if hp + hm < self.min_width:
            return None
        cloud = sample_cloud(PaddedBody(K, 0.0), Potential(), self.cloud_size,
                             burn_in=10 * d, thinning=2, start=K.witness,
                             rng=self.rng, chains=64)
        xc = weighted_centroid(cloud)
        off = hp - self.f * (hp - float(xc @ u))
        if max_violation(K, xc) > 0:
            raise StreamError("sampled centroid left the body")
        return K.with_constraints(u[None], [off], xc)


class ShrinkingBalls(RequestStream):
    """Concentric balls ``B_{ratio^t}`` around the origin."""

    kind = "shrinking_balls"

    def __init__(self, d, T, ratio):
        if not 0 < ratio < 1:
            raise ValueError("ratio must lie in (0, 1)")
        super().__init__(ConvexBody.ball(np.zeros(d), 1.0))
        self.T = int(T)
        self.ratio = float(ratio)

    def _next(self, played):
        t = len(self.emitted) + 1
        if t > self.T:
            return None
        rho = self.ratio ** t
        return ConvexBody.ball(self.initial.center, rho)
