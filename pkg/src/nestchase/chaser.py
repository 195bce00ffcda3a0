"""Online chasers for nested convex bodies.

Every chaser exposes ``start(K0, x0)`` and ``step(K) -> played``.  The
played point always lies in the request (up to numerical tolerance); the
episode runner measures movement from the sequence of played points and
adds any extra charge reported in ``last_info["extra_l2"]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .geom import (
    ConvexBody,
    GeometryError,
    NormSpec,
    NotSeparated,
    PaddedBody,
    SubspaceBasis,
    closest_pair,
    contains,
    lp_norm,
    max_violation,
    polytope_chord,
    project,
    restrict,
    separate_subspace,
)
from .sampler import (
    Potential,
    covariance,
    kept_fraction,
    narrow_subspace,
    potential_for_norm,
    sample_cloud,
    weighted_centroid,
)
from .selector import SupportCache, antipodal_directions

CHASER_KINDS = ("steiner", "lazy_steiner", "toward_steiner", "greedy_projection", "normed_space")


class ChaserError(Exception):
    pass


@dataclass
class ChaserState:
    x: np.ndarray
    played: np.ndarray
    omega: ConvexBody | None = None
    sub_chaser: "Chaser | None" = None
    cost_accum: dict = field(default_factory=lambda: {"episode": 0.0, "l2": 0.0})


class Chaser:
    kind = "chaser"

    def __init__(self, dim, norm=None, tol=1e-7):
        self.dim = dim
        self.norm = norm if isinstance(norm, NormSpec) else NormSpec(2.0 if norm is None else norm)
        self.tol = tol
        self.state = None
        self.last_info = {}

    def start(self, K0, x0):
        x0 = np.asarray(x0, dtype=float).copy()
        self.state = ChaserState(x=x0.copy(), played=x0.copy())
        return self

    def _move_to(self, p):
        st = self.state
        step = p - st.played
        st.cost_accum["episode"] += lp_norm(self.norm, step)
        st.cost_accum["l2"] += float(np.linalg.norm(step))
        st.played = p.copy()
        return p

    def step(self, K):
        raise NotImplementedError


class _SteinerBase(Chaser):
    """Shared Monte-Carlo Steiner machinery with a fixed direction set."""

    def __init__(self, dim, norm=None, n_dirs=20000, rng=None, tol=1e-7):
        super().__init__(dim, norm, tol)
        if rng is None:
            rng = np.random.default_rng(0)
        self.cache = SupportCache(antipodal_directions(rng, n_dirs, dim))
        self.last_estimate = None

    def steiner_point(self, K):
        est = self.cache.update(K).steiner()
        self.last_estimate = est
        p = est.point
        if max_violation(K, p) > 0:
            # an average of points of K can only leave K through rounding
            p = project(K, p, self.tol)
        return p


class SteinerChaser(_SteinerBase):
    kind = "steiner"

    def step(self, K):
        p = self.steiner_point(K)
        self.state.x = p
        self.last_info = {"moved": True, "resolved": self.cache.resolved}
        return self._move_to(p)


class LazySteinerChaser(_SteinerBase):
    """Stays put while the current point is feasible."""

    kind = "lazy_steiner"

    def __init__(self, dim, norm=None, n_dirs=20000, rng=None, tol=1e-7, member_tol=0.0):
        super().__init__(dim, norm, n_dirs, rng, tol)
        self.member_tol = member_tol

    def step(self, K):
        x = self.state.played
        if contains(K, x, self.member_tol):
            self.last_info = {"moved": False}
            return self._move_to(x)
        p = self.steiner_point(K)
        self.state.x = p
        self.last_info = {"moved": True}
        return self._move_to(p)


class TowardSteinerChaser(_SteinerBase):
    """Moves along the segment toward the Steiner point until it enters K."""

    kind = "toward_steiner"

    def __init__(self, dim, norm=None, n_dirs=20000, rng=None, tol=1e-7, member_tol=0.0):
        super().__init__(dim, norm, n_dirs, rng, tol)
        self.member_tol = member_tol

    def step(self, K):
        x = self.state.played
        if contains(K, x, self.member_tol):
            self.last_info = {"moved": False}
            return self._move_to(x)
        s = self.steiner_point(K)
        self.last_info = {"moved": True, "steiner": s}
        gap = x - s
        dist = float(np.linalg.norm(gap))
        if max_violation(K, s) > 0 or dist == 0:
            p = project(K, s, self.tol)
        else:
            u = gap / dist
            # the segment from s toward x leaves K at the chord end
            _, hi = polytope_chord(K.A, K.b, K.center, K.radius, s[None], u[None])
            t = min(float(hi[0]), dist)
            p = s + t * u
            if max_violation(K, p) > 0:
                p = s + t * (1 - 1e-12) * u
        self.state.x = p
        return self._move_to(p)


class GreedyProjectionChaser(Chaser):
    kind = "greedy_projection"

    def step(self, K):
        p = project(K, self.state.played, self.tol)
        self.state.x = p
        self.last_info = {"moved": bool(np.any(p != self.state.played))}
        return self._move_to(p)


# ---------------------------------------------------------------------------
# weighted-centroid chaser


def unit_norm_ball(norm, d):
    """The localized starting set ``{|x| <= 1}`` as a body (or an outer ball)."""
    p = norm.p
    if p == 2.0:
        return ConvexBody.ball(np.zeros(d), 1.0), True
    if norm.is_inf:
        return ConvexBody.box(-np.ones(d), np.ones(d), radius=math.sqrt(d),
                              witness=np.zeros(d)), True
    if p == 1.0 and d <= 10:
        signs = np.array(np.meshgrid(*[[-1.0, 1.0]] * d)).reshape(d, -1).T
        return ConvexBody(signs, np.ones(len(signs)), np.zeros(d), 1.0, np.zeros(d)), True
    # outer Euclidean ball of the unit l_p ball
    return ConvexBody.ball(np.zeros(d), max(1.0, d ** (0.5 - 1.0 / p))), False


def l2_to_norm_factor(norm, d):
    """``max |u|_p`` over Euclidean unit vectors ``u``."""
    if norm.is_inf:
        return 1.0
    return max(1.0, d ** (1.0 / norm.p - 0.5))


def default_parameters(d, norm, passes=2):
    """Potential scale ``alpha`` and pad radius ``r`` from the default rule.

    ``alpha = (d / D) (1 + log(1/r))`` and ``r = min(1/sqrt d, 1/(d^2 alpha^1.5 D))``
    solved by fixed-point passes starting from ``r = 1/sqrt d``.
    Returns ``(alpha, r, D)`` where ``D`` is the unscaled potential range.
    """
    D = potential_for_norm(norm, d, 1.0).D_bound
    r = 1.0 / math.sqrt(d)
    alpha = None
    for _ in range(passes):
        alpha = (d / D) * (1.0 + math.log(1.0 / r))
        r = min(1.0 / math.sqrt(d), 1.0 / (d * d * alpha ** 1.5 * D))
    return alpha, r, D


@dataclass
class SamplerConfig:
    n: int = 4096
    chains: int = 512
    burn_in: int | None = None  # default 50 d
    warm_burn_in: int | None = None  # default 10 d
    thinning: int | None = None  # default 5 d

    def resolved(self, d):
        return replace(self,
                       burn_in=50 * d if self.burn_in is None else self.burn_in,
                       warm_burn_in=10 * d if self.warm_burn_in is None else self.warm_burn_in,
                       thinning=5 * d if self.thinning is None else self.thinning)


@dataclass
class CutRecord:
    request: int
    normal: np.ndarray
    normal_variance: float
    kept_fraction: float
    displacement: float
    delegated_dims: int


class NormedSpaceChaser(Chaser):
    """Weighted centroid of the padded localized set, with cuts.

    State: the localized set ``Omega`` (starts as the unit norm ball), the
    reference point ``x = cg_phi(Omega + B_r)`` and a sample cloud on
    ``Omega + B_r``.  For each request the loop either accepts ``x``,
    delegates the narrow directions to a Steiner sub-chaser on
    ``x + V``, or cuts ``Omega`` by a halfspace through ``x + V`` that
    contains the request, then recomputes ``x``.
    """

    kind = "normed_space"

    def __init__(self, dim, norm=None, rng=None, alpha=None, r=None, potential=None,
                 sampler=None, sub_n_dirs=4000, max_cuts_per_request=64, tol=1e-7):
        super().__init__(dim, norm, tol)
        d = dim
        a0, r0, D = default_parameters(d, self.norm)
        self.alpha = a0 if alpha is None else float(alpha)
        self.r = r0 if r is None else float(r)
        if self.r > 1.0 / math.sqrt(d) + 1e-15:
            raise ValueError("pad radius must satisfy r <= 1/sqrt(d)")
        self.D = D
        self.potential = potential or potential_for_norm(self.norm, d, self.alpha)
        self.sampler_cfg = (sampler or SamplerConfig()).resolved(d)
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.sub_n_dirs = sub_n_dirs
        self.max_cuts = int(max_cuts_per_request)
        self.omega0, self.omega_exact = unit_norm_ball(self.norm, d)
        self.cuts = []
        self.request_index = 0
        self.cloud = None
        self.cov = None
        self.V = None
        self._sub_key = None

    # -- sampling --------------------------------------------------------

    def _fresh_cloud(self, start_points=None):
        cfg = self.sampler_cfg
        pb = PaddedBody(self.state.omega, self.r)
        if start_points is None or len(start_points) == 0:
            start = self.state.omega.witness
            burn = cfg.burn_in
        else:
            idx = np.arange(cfg.chains) % len(start_points)
            start = start_points[idx]
            burn = cfg.warm_burn_in
        cloud = sample_cloud(pb, self.potential, cfg.n, burn, cfg.thinning, start,
                             self.rng, chains=cfg.chains)
        self.cloud = cloud
        self.cov = covariance(cloud)
        return cloud

    def start(self, K0, x0):
        super().start(K0, x0)
        self.state.omega = self.omega0
        self._fresh_cloud()
        self.state.x = weighted_centroid(self.cloud)
        self.V = narrow_subspace(self.cov, self.r, self.state.x)
        return self

    # -- the request loop ------------------------------------------------

    def _x_in_omega(self):
        return max_violation(self.state.omega, self.state.x) <= 0

    def _cut(self, K, sub):
        st = self.state
        H = separate_subspace(K, sub, self.tol)
        old_points = self.cloud.points
        old_x = st.x.copy()
        normal_var = float(H.normal @ self.cov @ H.normal)
        st.omega = st.omega.with_constraints(H.normal[None], [H.offset], K.witness)
        kept = kept_fraction(old_points, st.omega, self.r)
        inside = old_points[old_points @ H.normal <= H.offset]
        self._fresh_cloud(inside)
        st.x = weighted_centroid(self.cloud)
        self.V = narrow_subspace(self.cov, self.r, st.x)
        st.sub_chaser = None
        rec = CutRecord(self.request_index, H.normal, normal_var, kept,
                        float(np.linalg.norm(st.x - old_x)), sub.k)
        self.cuts.append(rec)
        return rec

    def _delegate(self, K, sub, witness):
        """Play the sub-chaser's point on ``K`` restricted to ``x + V``."""
        st = self.state
        key = (tuple(sub.origin), sub.basis.tobytes())
        try:
            Kr = restrict(K, sub, witness=witness)
        except GeometryError:
            return None
        if st.sub_chaser is None or self._sub_key != key:
            om = restrict(st.omega, sub, witness=witness)
            rng = np.random.default_rng(self.rng.integers(2 ** 63))
            st.sub_chaser = SteinerChaser(sub.k, None, self.sub_n_dirs, rng, self.tol)
            st.sub_chaser.start(om, sub.coords(st.x))
            self._sub_key = key
        t = st.sub_chaser.step(Kr)
        p = sub.lift(t)
        if max_violation(K, p) > 0:
            p = project(K, p, self.tol)
        return p

    def step(self, K):
        st = self.state
        self.request_index += 1
        cuts = extra = 0
        delegated = False
        played = None
        while cuts < self.max_cuts:
            sub = self.V
            if sub.k == 0:
                if contains(K, st.x, 0.0):
                    played = st.x.copy()
                    break
            else:
                p, y = closest_pair(K, sub, self.tol)
                w = _snap_to_subspace(K, sub, y)
                if float(np.linalg.norm(y - p)) <= 10 * self.tol and w is not None:
                    played = self._delegate(K, sub, w)
                    if played is not None:
                        delegated = True
                        break
            try:
                self._cut(K, sub)
            except NotSeparated:
                break
            cuts += 1
            if not self._x_in_omega():
                extra += 1
        if played is None:
            played = project(K, st.x, self.tol) if not contains(K, st.x, 0.0) else st.x.copy()
        self.last_info = {
            "cuts": cuts,
            "delegated": delegated,
            "extra_l2": 2.0 * self.r * extra,
            "narrow_dims": int(self.V.k),
            "sampler_kept": float(self.cloud.kept_fraction),
        }
        return self._move_to(played)


def _snap_to_subspace(K, sub, y):
    """A point of ``K`` on the affine subspace near ``y``, or None."""
    p = sub.project(y)
    if max_violation(K, p) <= 0:
        return p
    return None


# ---------------------------------------------------------------------------
# tightening wrapper


class TighteningChaser(Chaser):
    """Runs an inner chaser in normalized coordinates, rescaling on shrinkage.

    Coordinates are ``z = s (y - o)``.  The first request's bounding ball is
    mapped inside the unit norm ball.  Whenever the current request fits in
    a Euclidean ball of radius ``1/(2 nu)`` around its Steiner estimate
    (``nu`` converts Euclidean to episode-norm length), the frame is
    recentred there and doubled, and the inner chaser restarts.
    """

    kind = "tightening"

    def __init__(self, dim, norm, inner_factory, rng=None, n_dirs=4000, tol=1e-7):
        super().__init__(dim, norm, tol)
        self.inner_factory = inner_factory
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.n_dirs = n_dirs
        self.nu = l2_to_norm_factor(self.norm, dim)
        self.inner = None
        self.origin = None
        self.scale = None
        self.phase = 0
        self.phase_cuts = [0]
        self.cache = None

    def _to_inner(self, K):
        return K.affine(self.origin, self.scale)

    def _from_inner(self, z):
        return self.origin + z / self.scale

    def _restart(self, K, z_start):
        self.inner = self.inner_factory()
        self.inner.start(self._to_inner(K), z_start)
        self.cache = SupportCache(antipodal_directions(self.rng, self.n_dirs, self.dim))

    def start(self, K0, x0):
        super().start(K0, x0)
        self.K0 = K0
        return self

    def step(self, K):
        info = {"phase": self.phase, "rescaled": False}
        if self.inner is None:
            self.origin = K.center.copy()
            self.scale = 1.0 / (K.radius * self.nu)
            self._restart(K, self.scale * (self.state.played - self.origin))
        z = self.inner.step(self._to_inner(K))
        info.update(self.inner.last_info)
        self.phase_cuts[-1] += info.get("cuts", 0)
        extra = info.get("extra_l2", 0.0) / self.scale
        played = self._from_inner(z)
        if max_violation(K, played) > 0:
            played = project(K, played, self.tol)
        # trigger check in inner coordinates
        Kz = self._to_inner(K)
        self.cache.update(Kz)
        est = self.cache.steiner()
        c = est.point
        # sampled directions underestimate the radius; keep a 10% cushion
        rad = 1.1 * float(np.max(self.cache.values - self.cache.directions @ c))
        margin = 3.0 * float(np.linalg.norm(est.stderr))
        if rad + margin <= 0.5 / self.nu:
            self.origin = self._from_inner(c)
            self.scale *= 2.0
            self.phase += 1
            self.phase_cuts.append(0)
            self._restart(K, self.scale * (played - self.origin))
            info["rescaled"] = True
        info["extra_l2"] = extra
        self.last_info = info
        return self._move_to(played)


# ---------------------------------------------------------------------------
# construction from config


def make_chaser(kind, dim, norm=None, rng=None, **params):
    """Build a chaser from its kind name and keyword parameters."""
    if rng is None:
        rng = np.random.default_rng(0)
    if kind == "steiner":
        return SteinerChaser(dim, norm, params.get("n_dirs", 20000), rng, params.get("tol", 1e-7))
    if kind == "lazy_steiner":
        return LazySteinerChaser(dim, norm, params.get("n_dirs", 20000), rng,
                                 params.get("tol", 1e-7), params.get("member_tol", 0.0))
    if kind == "toward_steiner":
        return TowardSteinerChaser(dim, norm, params.get("n_dirs", 20000), rng,
                                   params.get("tol", 1e-7), params.get("member_tol", 0.0))
    if kind == "greedy_projection":
        return GreedyProjectionChaser(dim, norm, params.get("tol", 1e-7))
    if kind == "normed_space":
        samp = params.get("sampler") or {}
        sampler = SamplerConfig(**samp) if isinstance(samp, dict) else samp
        norm_spec = norm if isinstance(norm, NormSpec) else NormSpec(2.0 if norm is None else norm)

        def inner():
            return NormedSpaceChaser(dim, norm_spec, np.random.default_rng(rng.integers(2 ** 63)),
                                     params.get("alpha"), params.get("r"), None, sampler,
                                     params.get("sub_n_dirs", 4000),
                                     params.get("max_cuts_per_request", 64),
                                     params.get("tol", 1e-7))
        if params.get("tightening", True):
            return TighteningChaser(dim, norm_spec, inner, rng, params.get("trigger_dirs", 4000))
        return inner()
    raise ValueError(f"unknown chaser kind {kind!r}")
