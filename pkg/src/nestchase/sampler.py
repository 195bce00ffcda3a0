"""Hit-and-run sampling of log-concave densities on padded bodies.

The target is proportional to ``exp(-phi(x))`` restricted to ``K + B_r``.
Along a chord the potential is convex, so the 1D density is log-concave
and is drawn exactly by rejection under a tangent (piecewise log-linear)
envelope.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .geom import (
    ConvexBody,
    NormSpec,
    PaddedBody,
    SubspaceBasis,
    chord,
    padded_contains_many,
    polytope_chord,
    random_directions,
)

KINDS = ("uniform", "quadratic-l2", "lp-squared")


class SamplerError(Exception):
    pass


@dataclass(frozen=True)
class Potential:
    """Convex weight ``phi``; the sampled density is ``exp(-phi)``.

    ``quadratic-l2``: ``scale * |x|_2^2 / 2``.
    ``lp-squared``: ``scale * |x|_p^2 / (2 (p - 1))``.
    ``uniform``: ``phi = 0``.
    ``alpha`` is the strong-convexity modulus in the episode norm and
    ``D_bound`` an upper bound of ``phi`` over the localized domain.
    """

    kind: str = "uniform"
    p: float = 2.0
    scale: float = 1.0
    alpha: float = 1.0
    D_bound: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind != "uniform" and not self.scale > 0:
            raise ValueError("scale must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.kind == "lp-squared" and not self.p > 1:
            raise ValueError("lp-squared needs p > 1")

    def value(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "uniform":
            return np.zeros(X.shape[:-1])
        if self.kind == "quadratic-l2":
            return 0.5 * self.scale * np.sum(X * X, axis=-1)
        nrm = np.sum(np.abs(X) ** self.p, axis=-1) ** (1.0 / self.p)
        return self.scale * nrm ** 2 / (2.0 * (self.p - 1.0))

    def grad(self, X):
        X = np.asarray(X, dtype=float)
        if self.kind == "uniform":
            return np.zeros_like(X)
        if self.kind == "quadratic-l2":
            return self.scale * X
        p = self.p
        nrm = np.sum(np.abs(X) ** p, axis=-1, keepdims=True) ** (1.0 / p)
        safe = np.where(nrm > 0, nrm, 1.0)
        g = (safe ** (2.0 - p)) * np.sign(X) * np.abs(X) ** (p - 1.0) / (p - 1.0)
        return self.scale * np.where(nrm > 0, g, 0.0)

    def check_range(self, X, tol=1e-9):
        """True when ``0 <= phi <= D_bound`` on the probe points ``X``."""
        v = self.value(X)
        return bool(np.all(v >= -tol) and np.all(v <= self.D_bound + tol))


def potential_for_norm(norm, d, alpha_scale=1.0):
    """Default potential for an episode norm, scaled by ``alpha_scale``.

    p >= 2: ``|x|_2^2 / 2`` with range ``d^(1 - 2/p) / 2`` on the unit ball.
    1 <= p < 2: ``|x|_q^2 / (2(q - 1))`` with ``q = max(p, 1 + 1/log d)``.
    Both are 1-strongly convex in the episode norm before scaling.
    """
    if not isinstance(norm, NormSpec):
        norm = NormSpec(norm)
    p = norm.p
    if p >= 2:
        D = 0.5 * (d ** (1.0 - 2.0 / p) if not math.isinf(p) else float(d))
        return Potential("quadratic-l2", 2.0, alpha_scale, alpha_scale, alpha_scale * D)
    q = max(p, 1.0 + 1.0 / math.log(d)) if d > 1 else max(p, 2.0)
    q = max(q, 1.0 + 1e-6)
    # |x|_q <= |x|_p keeps the range bound; the clamp costs at most a
    # factor e^2 in strong convexity with respect to |.|_p
    D = 1.0 / (2.0 * (q - 1.0))
    return Potential("lp-squared", q, alpha_scale, alpha_scale, alpha_scale * D)


# ---------------------------------------------------------------------------
# 1D log-concave draws


def _line_fn(phi, X, U):
    """Closures for ``g(t) = phi(X + t U)`` and its derivative, per row."""
    def g(T):
        return phi.value(X[:, None, :] + T[..., None] * U[:, None, :])

    def dg(T):
        G = phi.grad(X[:, None, :] + T[..., None] * U[:, None, :])
        return np.einsum("nkd,nd->nk", G, U)

    return g, dg


def _line_argmin(phi, X, U, lo, hi, iters=60):
    """Minimizer of the convex ``phi(X + t U)`` over ``[lo, hi]`` per row."""
    if phi.kind == "quadratic-l2":
        t = -np.einsum("nd,nd->n", X, U)
        return np.clip(t, lo, hi)
    _, dg = _line_fn(phi, X, U)
    a, b = lo.copy(), hi.copy()
    for _ in range(iters):
        mid = 0.5 * (a + b)
        up = dg(mid[:, None])[:, 0] > 0
        b = np.where(up, mid, b)
        a = np.where(up, a, mid)
    return 0.5 * (a + b)


def _envelope(tk, gk, sk, lo, hi):
    """Piecewise log-linear envelope from tangents sorted by abscissa.

    Returns breakpoints ``z`` (n, K+1) and log piece masses (n, K) of
    ``exp(-l(t))`` where ``l`` is the max of the tangents.
    """
    n, K = tk.shape
    icept = gk - sk * tk
    ds = sk[:, 1:] - sk[:, :-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        zmid = (icept[:, :-1] - icept[:, 1:]) / ds
    zmid = np.where(ds > 1e-300, zmid, 0.5 * (tk[:, :-1] + tk[:, 1:]))
    z = np.concatenate([lo[:, None], zmid, hi[:, None]], axis=1)
    z = np.clip(z, lo[:, None], hi[:, None])
    z = np.maximum.accumulate(z, axis=1)
    a, b = z[:, :-1], z[:, 1:]
    L = b - a
    la = icept + sk * a  # tangent value at the left end
    lb = icept + sk * b
    s = sk
    sL = s * L
    small = np.abs(sL) < 1e-12
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        pos = -la + np.log(-np.expm1(-sL)) - np.log(s)
        neg = -lb + np.log(-np.expm1(sL)) - np.log(-s)
        flat = -0.5 * (la + lb) + np.log(L)
    logm = np.where(small, flat, np.where(s > 0, pos, neg))
    logm = np.where(L > 0, logm, -np.inf)
    return z, logm


def _draw_piece(rng, a, b, s, u):
    L = b - a
    sL = s * L
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tpos = a - np.log1p(-u * (-np.expm1(-sL))) / s
        tneg = b + np.log1p(-u * (-np.expm1(sL))) / (-s)
    t = np.where(np.abs(sL) < 1e-12, a + u * L, np.where(s > 0, tpos, tneg))
    return np.clip(t, a, b)


def sample_line(phi, X, U, lo, hi, rng, max_tangents=64):
    """Draw ``t`` in ``[lo, hi]`` with density ``exp(-phi(X + t U))`` per row."""
    n = X.shape[0]
    if phi.kind == "uniform":
        return lo + rng.random(n) * (hi - lo)
    g, dg = _line_fn(phi, X, U)
    tm = _line_argmin(phi, X, U, lo, hi)
    # curvature-scaled offsets around the minimizer
    h = 1e-4 * np.maximum(hi - lo, 1e-12)
    curv = (dg(np.clip(tm + h, lo, hi)[:, None]) - dg(np.clip(tm - h, lo, hi)[:, None]))[:, 0]
    width = np.clip(np.clip(tm + h, lo, hi) - np.clip(tm - h, lo, hi), 1e-300, None)
    curv = np.maximum(curv / width, 1e-300)
    sig = 1.0 / np.sqrt(curv)
    T = np.stack([lo, hi, tm, np.clip(tm - 1.5 * sig, lo, hi), np.clip(tm + 1.5 * sig, lo, hi)], axis=1)
    out = np.empty(n)
    todo = np.arange(n)
    Tk = T
    for _ in range(max_tangents):
        Tk = np.sort(Tk, axis=1)
        gk = g(Tk)
        sk = dg(Tk)
        # enforce monotone slopes against rounding
        sk = np.maximum.accumulate(sk, axis=1)
        z, logm = _envelope(Tk, gk, sk, lo[todo], hi[todo])
        mx = np.max(logm, axis=1, keepdims=True)
        w = np.exp(logm - mx)
        w /= w.sum(axis=1, keepdims=True)
        cdf = np.cumsum(w, axis=1)
        u1 = rng.random(todo.size)
        piece = np.minimum(np.sum(cdf < u1[:, None], axis=1), w.shape[1] - 1)
        rows = np.arange(todo.size)
        a, b = z[rows, piece], z[rows, piece + 1]
        s = sk[rows, piece]
        t = _draw_piece(rng, a, b, s, rng.random(todo.size))
        env = gk[rows, piece] + s * (t - Tk[rows, piece])
        gt = g(t[:, None])[:, 0]
        acc = rng.random(todo.size) <= np.exp(np.minimum(env - gt, 0.0))
        out[todo[acc]] = t[acc]
        if np.all(acc):
            return out
        keep = ~acc
        todo = todo[keep]
        Tk = np.concatenate([Tk[keep], t[keep, None]], axis=1)
        X, U = X[keep], U[keep]
        g, dg = _line_fn(phi, X, U)
    raise SamplerError("adaptive rejection exceeded its tangent budget")


# ---------------------------------------------------------------------------
# hit-and-run


@dataclass
class SampleCloud:
    points: np.ndarray
    burn_in: int
    thinning: int
    seed: dict = field(default_factory=dict, repr=False)
    chains: int = 1
    steps: int = 0
    kept_fraction: float = 1.0  # share of recorded states inside K + B_r

    def __len__(self):
        return self.points.shape[0]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(self.points.shape[1])])
            for row in self.points:
                w.writerow([repr(float(v)) for v in row])


def hit_and_run_step(x, pb, phi, rng, tol=1e-9):
    """One hit-and-run move inside ``pb`` with the chord found by bisection."""
    u = random_directions(rng, 1, pb.dim)[0]
    lo, hi = chord(pb, x, u, tol)
    t = sample_line(phi, x[None], u[None], np.array([lo]), np.array([hi]), rng)[0]
    return x + t * u


def default_schedule(d):
    return {"burn_in": 50 * d, "thinning": 5 * d, "n": max(4096, 20 * d)}


def sample_cloud(pb, phi, n, burn_in, thinning, start, rng, chains=1):
    """Run hit-and-run and record ``n`` states of ``K + B_r``.

    With ``chains == 1`` a single chain moves along exact chords of the
    padded body.  With more chains the chains move on the polyhedral outer
    relaxation ``{A x <= b + r, |x - c| <= R + r}`` whose chords are closed
    form; recorded states outside ``K + B_r`` are discarded, which leaves
    the restriction of the target density to ``K + B_r``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if thinning < 1 or burn_in < 0:
        raise ValueError("bad burn_in/thinning")
    start = np.asarray(start, dtype=float)
    starts = np.atleast_2d(start)
    if starts.shape[0] not in (1, chains):
        raise ValueError("need one start point or one per chain")
    if not np.all(padded_contains_many(pb, starts, 1e-9)):
        raise SamplerError("start point is outside the padded body")
    seed = {"state": rng.bit_generator.state}
    if chains == 1 and pb.r > 0:
        x = starts[0].copy()
        pts = []
        steps = 0
        for _ in range(burn_in):
            x = hit_and_run_step(x, pb, phi, rng)
            steps += 1
        while len(pts) < n:
            for _ in range(thinning):
                x = hit_and_run_step(x, pb, phi, rng)
                steps += 1
            pts.append(x.copy())
        return SampleCloud(np.array(pts), burn_in, thinning, seed, 1, steps, 1.0)
    base = pb.base
    A, b = base.A, base.b + pb.r
    c, R = base.center, base.radius + pb.r
    X = np.tile(starts, (chains // starts.shape[0], 1))
    steps = 0

    def move(X):
        U = random_directions(rng, X.shape[0], X.shape[1])
        lo, hi = polytope_chord(A, b, c, R, X, U)
        t = sample_line(phi, X, U, lo, hi, rng)
        return X + t[:, None] * U

    for _ in range(burn_in):
        X = move(X)
        steps += 1
    kept, seen = [], 0
    total = 0
    while total < n:
        for _ in range(thinning):
            X = move(X)
            steps += 1
        seen += X.shape[0]
        if pb.r > 0:
            ok = padded_contains_many(pb, X, 0.0)
            Xk = X[ok]
        else:
            Xk = X
        kept.append(Xk.copy())
        total += Xk.shape[0]
        if seen > 200 * max(n, chains) and total == 0:
            raise SamplerError("outer relaxation almost never lands in the padded body")
    pts = np.concatenate(kept, axis=0)[:n]
    return SampleCloud(pts, burn_in, thinning, seed, chains, steps, total / max(seen, 1))


# ---------------------------------------------------------------------------
# statistics


def weighted_centroid(cloud):
    P = cloud.points if isinstance(cloud, SampleCloud) else np.asarray(cloud)
    if P.shape[0] == 0:
        raise SamplerError("empty cloud")
    return P.mean(axis=0)


def centroid_stderr(cloud):
    P = cloud.points if isinstance(cloud, SampleCloud) else np.asarray(cloud)
    return P.std(axis=0, ddof=1) / math.sqrt(P.shape[0])


def covariance(cloud):
    P = cloud.points if isinstance(cloud, SampleCloud) else np.asarray(cloud)
    n = P.shape[0]
    if n < 2:
        raise SamplerError("covariance needs at least two points")
    D = P - P.mean(axis=0)
    C = D.T @ D / (n - 1)
    return 0.5 * (C + C.T)


def eig_sym(A, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ascending eigenvalues and the matching orthonormal eigenvectors
    as columns.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix required")
    n = A.shape[0]
    scale = max(float(np.max(np.abs(A))), 1e-300)
    if np.max(np.abs(A - A.T)) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    for _ in range(max_sweeps):
        off = float(np.linalg.norm(A - np.diag(np.diag(A))))
        if off <= tol * scale:
            w = np.diag(A).copy()
            order = np.argsort(w, kind="stable")
            return w[order], V[:, order]
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                cs = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * cs
                # A <- J^T A J with J the (p, q) rotation
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = cs * ap - sn * aq
                A[:, q] = sn * ap + cs * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = cs * ap - sn * aq
                A[q, :] = sn * ap + cs * aq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = cs * vp - sn * vq
                V[:, q] = sn * vp + cs * vq
    raise SamplerError("Jacobi iteration did not converge")


def narrow_subspace(A, r, x):
    """Eigenvectors of ``A`` with eigenvalue below ``(2 e r)^2``, through ``x``."""
    w, V = eig_sym(A)
    thr = (2.0 * math.e * r) ** 2
    sel = w < thr
    return SubspaceBasis(np.asarray(x, dtype=float), V[:, sel].T)


def kept_fraction(points, body_after, r):
    """Share of ``points`` lying in ``body_after + B_r``."""
    pb = PaddedBody(body_after, r)
    return float(np.mean(padded_contains_many(pb, points, 0.0)))
