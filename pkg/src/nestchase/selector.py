"""Point selectors and width statistics on convex bodies.

The Monte-Carlo Steiner point averages extreme points over random unit
directions.  :class:`SupportCache` keeps a fixed direction set across a
nested sequence and only re-solves directions whose cached maximizer was
cut away, which is exact because a maximizer over ``K`` that survives in
``K' subset K`` is still a maximizer over ``K'``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geom import (
    ConvexBody,
    GeometryError,
    extends,
    max_violation,
    random_directions,
    support_batch,
)


class NestingViolated(GeometryError):
    pass


@dataclass(frozen=True)
class SteinerEstimate:
    point: np.ndarray
    n_samples: int
    stderr: np.ndarray  # per coordinate

    @property
    def max_stderr(self):
        return float(np.max(self.stderr)) if self.stderr.size else 0.0


def _estimate(X):
    n = X.shape[0]
    se = X.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(X.shape[1])
    return SteinerEstimate(X.mean(axis=0), n, se)


class SupportCache:
    """Support values and maximizers of a body on a fixed direction set."""

    def __init__(self, directions, body=None):
        self.directions = np.asarray(directions, dtype=float)
        self.body = None
        self.values = None
        self.argmax = None
        self.resolved = 0  # directions re-solved by the last update
        if body is not None:
            self.update(body)

    @classmethod
    def random(cls, n, dim, rng, body=None):
        return cls(random_directions(rng, n, dim), body)

    def update(self, body):
        if body.dim != self.directions.shape[1]:
            raise GeometryError("cache dimension mismatch")
        if self.body is body:
            self.resolved = 0
            return self
        if self.body is not None and extends(body, self.body):
            A_new = body.A[self.body.m:]
            b_new = body.b[self.body.m:]
            if A_new.shape[0]:
                bad = np.any(self.argmax @ A_new.T - b_new > 0.0, axis=1)
            else:
                bad = np.zeros(len(self.directions), dtype=bool)
            if body.radius != self.body.radius or not np.array_equal(body.center, self.body.center):
                bad |= np.linalg.norm(self.argmax - body.center, axis=1) > body.radius
            if np.any(bad):
                v, X = support_batch(body, self.directions[bad])
                self.values[bad] = v
                self.argmax[bad] = X
            self.resolved = int(bad.sum())
        else:
            self.values, self.argmax = support_batch(body, self.directions)
            self.resolved = len(self.directions)
        self.body = body
        return self

    def steiner(self):
        return _estimate(self.argmax)


def steiner_mc(body, n, rng):
    """Average extreme point over ``n`` uniform random directions."""
    if n < 1:
        raise ValueError("n must be >= 1")
    th = random_directions(rng, n, body.dim)
    _, X = support_batch(body, th)
    return _estimate(X)


def steiner_def2(body, n, rng):
    """Steiner point via ``d * E[h_K(theta) theta]``; an independent route."""
    th = random_directions(rng, n, body.dim)
    h, _ = support_batch(body, th)
    Y = body.dim * h[:, None] * th
    return _estimate(Y)


def _signed_area(V):
    x, y = V[:, 0], V[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def steiner_exact_2d(vertices):
    """Exact Steiner point of a convex polygon given counterclockwise.

    Each vertex is weighted by the angle of its outer normal cone over 2 pi.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or V.shape[1] != 2 or V.shape[0] < 3:
        raise GeometryError("need at least three planar vertices")
    E = np.roll(V, -1, axis=0) - V
    if np.any(np.linalg.norm(E, axis=1) == 0):
        raise GeometryError("repeated vertex")
    cross = E[:, 0] * np.roll(E, -1, axis=0)[:, 1] - E[:, 1] * np.roll(E, -1, axis=0)[:, 0]
    scale = float(np.max(np.abs(V))) ** 2 or 1.0
    if np.any(cross <= 1e-14 * scale):
        raise GeometryError("polygon is not strictly convex and counterclockwise")
    # outward normal of edge i (from v_i to v_{i+1}) for a ccw polygon
    nrm_ang = np.arctan2(-E[:, 0], E[:, 1])
    # vertex i sits between edges i-1 and i
    turn = np.mod(nrm_ang - np.roll(nrm_ang, 1), 2 * math.pi)
    if abs(float(turn.sum()) - 2 * math.pi) > 1e-10:
        raise GeometryError("normal-cone angles do not sum to 2 pi")
    return (turn[:, None] * V).sum(axis=0) / (2 * math.pi)


def minkowski_sum_2d(P, Q):
    """Minkowski sum of two ccw convex polygons by merging edge sequences."""
    def start_low(V):
        i = np.lexsort((V[:, 0], V[:, 1]))[0]
        return np.roll(V, -i, axis=0)

    P, Q = start_low(np.asarray(P, float)), start_low(np.asarray(Q, float))
    EP = np.roll(P, -1, axis=0) - P
    EQ = np.roll(Q, -1, axis=0) - Q

    def ang(E):
        return np.mod(np.arctan2(E[:, 1], E[:, 0]), 2 * math.pi)

    aP, aQ = ang(EP), ang(EQ)
    out = [P[0] + Q[0]]
    i = j = 0
    while i < len(P) or j < len(Q):
        if j >= len(Q) or (i < len(P) and aP[i] < aQ[j] - 1e-15):
            e = EP[i]
            i += 1
        elif i >= len(P) or aQ[j] < aP[i] - 1e-15:
            e = EQ[j]
            j += 1
        else:
            e = EP[i] + EQ[j]
            i += 1
            j += 1
        out.append(out[-1] + e)
    return np.array(out[:-1])


@dataclass(frozen=True)
class BudgetEstimate:
    value: float  # half the drop in mean width
    stderr: float
    width_prev: float
    width_next: float
    flag: str | None = None


def width_budget(prev_cache, next_cache):
    """Half the mean-width drop between two caches on the same directions."""
    if prev_cache.directions is not next_cache.directions and not np.array_equal(
            prev_cache.directions, next_cache.directions):
        raise ValueError("caches must share directions")
    return _budget_from_values(prev_cache.values, next_cache.values,
                               _antipodal_index(prev_cache.directions))


def _antipodal_index(directions):
    n = directions.shape[0]
    if n % 2 == 0 and np.allclose(directions[n // 2:], -directions[: n // 2]):
        return n // 2
    return None


def _budget_from_values(h_prev, h_next, half):
    if half is None:
        raise ValueError("width needs an antipodal direction set")
    wp = h_prev[:half] + h_prev[half:]
    wn = h_next[:half] + h_next[half:]
    diff = 0.5 * (wp - wn)
    lam = float(diff.mean())
    se = float(diff.std(ddof=1) / math.sqrt(half)) if half > 1 else 0.0
    flag = "nesting violated" if lam < -3 * se - 1e-12 else None
    return BudgetEstimate(lam, se, float(wp.mean()), float(wn.mean()), flag)


def antipodal_directions(rng, n, dim):
    """``n`` directions made of ``n // 2`` random ones and their negatives."""
    half = max(1, n // 2)
    th = random_directions(rng, half, dim)
    return np.vstack([th, -th])


def mean_steiner_budget(K_prev, K_next, n, rng):
    """Estimate ``(w(K_prev) - w(K_next)) / 2`` with common directions."""
    th = antipodal_directions(rng, n, K_prev.dim)
    hp, _ = support_batch(K_prev, th)
    hn, _ = support_batch(K_next, th)
    return _budget_from_values(hp, hn, th.shape[0] // 2)


@dataclass(frozen=True)
class HausdorffEstimate:
    value: float
    direction: np.ndarray
    flag: str | None = None


def hausdorff_nested(K_outer, K_inner, n, rng, rounds=16, tol=1e-9):
    """Lower estimate of the Hausdorff distance between nested bodies.

    Maximizes the support gap ``h_outer - h_inner`` over ``n`` random
    directions, then refines around the best direction with Gaussian
    perturbations of shrinking size.
    """
    d = K_outer.dim
    th = random_directions(rng, n, d)
    go, _ = support_batch(K_outer, th)
    gi, _ = support_batch(K_inner, th)
    gap = go - gi
    flag = "nesting violated" if np.min(gap) < -tol * max(1.0, K_outer.radius) else None
    k = int(np.argmax(gap))
    best, best_dir = float(gap[k]), th[k]
    sigma = 0.5
    for _ in range(rounds):
        cand = best_dir + sigma * rng.standard_normal((32, d))
        cand /= np.linalg.norm(cand, axis=1, keepdims=True)
        go, _ = support_batch(K_outer, cand)
        gi, _ = support_batch(K_inner, cand)
        g = go - gi
        j = int(np.argmax(g))
        if g[j] > best:
            best, best_dir = float(g[j]), cand[j]
        else:
            sigma *= 0.5
    return HausdorffEstimate(max(best, 0.0), best_dir, flag)


def steiner_in_body(estimate, body, tol=1e-7):
    """Whether the estimate lies within its Monte-Carlo error of ``body``."""
    slack = 3.0 * float(np.linalg.norm(estimate.stderr)) + tol
    return max_violation(body, estimate.point) <= slack
