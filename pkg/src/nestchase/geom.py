"""Convex bodies and the oracle layer.

A body is an intersection of halfspaces ``{x : a.x <= b}`` with one
Euclidean ball, plus a certified feasible point (the witness).  All other
modules talk to bodies only through the functions here: membership,
Euclidean projection, support function, separation from an affine
subspace, restriction to a subspace, and chord computation on padded
bodies.
"""
from __future__ import annotations

import math
from itertools import combinations
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 20000

# slabs thinner than this (relative to the bounding radius) are treated as
# exact hyperplanes by the batched support solver
THIN_SLAB_REL = 1e-4


class GeometryError(Exception):
    pass


class DimensionError(GeometryError):
    pass


class InfeasibleWitness(GeometryError):
    pass


class ProjectionError(GeometryError):
    """Dykstra iteration did not converge; carries the best iterate."""

    def __init__(self, msg, best=None, residual=None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


class SupportError(GeometryError):
    def __init__(self, msg, best=None):
        super().__init__(msg)
        self.best = best


class NotSeparated(GeometryError):
    pass


class ChordError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# basic types


def as_vector(x, d=None):
    v = np.asarray(x, dtype=float).reshape(-1)
    if d is not None and v.shape[0] != d:
        raise DimensionError(f"expected dimension {d}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise GeometryError("non-finite coordinates")
    return v


def unit(v):
    v = as_vector(v)
    n = np.linalg.norm(v)
    if n == 0:
        raise GeometryError("zero vector has no direction")
    return v / n


def random_directions(rng, n, d):
    """Uniform points on the unit sphere via normalized Gaussians."""
    g = rng.standard_normal((n, d))
    nrm = np.linalg.norm(g, axis=1, keepdims=True)
    # a zero Gaussian draw has probability zero; redraw defensively anyway
    bad = nrm[:, 0] == 0
    while np.any(bad):
        g[bad] = rng.standard_normal((int(bad.sum()), d))
        nrm = np.linalg.norm(g, axis=1, keepdims=True)
        bad = nrm[:, 0] == 0
    return g / nrm


@dataclass(frozen=True)
class HalfSpace:
    """The set ``{x : normal . x <= offset}`` with a unit normal."""

    normal: np.ndarray
    offset: float

    def __post_init__(self):
        a = as_vector(self.normal)
        n = np.linalg.norm(a)
        if n == 0:
            raise GeometryError("halfspace normal must be nonzero")
        object.__setattr__(self, "normal", a / n)
        object.__setattr__(self, "offset", float(self.offset) / n)

    def slack(self, x):
        return self.offset - float(self.normal @ x)


@dataclass(frozen=True)
class NormSpec:
    p: float = 2.0

    def __post_init__(self):
        p = self.p
        if isinstance(p, str):
            p = math.inf if p.lower() in ("inf", "infinity") else float(p)
        p = float(p)
        if not p >= 1:
            raise ValueError(f"norm exponent must be >= 1, got {p}")
        object.__setattr__(self, "p", p)

    @property
    def is_inf(self):
        return math.isinf(self.p)

    def to_json(self):
        return "inf" if self.is_inf else self.p


def lp_norm(spec, v):
    v = np.asarray(v, dtype=float)
    if isinstance(spec, (int, float, str)):
        spec = NormSpec(spec)
    if spec.is_inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    if spec.p == 2.0:
        return float(np.linalg.norm(v))
    if spec.p == 1.0:
        return float(np.sum(np.abs(v)))
    return float(np.sum(np.abs(v) ** spec.p) ** (1.0 / spec.p))


@dataclass(frozen=True, eq=False)
class ConvexBody:
    """Halfspaces ``A x <= b`` intersected with ``ball(center, radius)``.

    Rows of ``A`` are unit normals.  ``witness`` is a point certified to lie
    in the body.  Instances are treated as immutable.
    """

    A: np.ndarray
    b: np.ndarray
    center: np.ndarray
    radius: float
    witness: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        c = as_vector(self.center)
        d = c.shape[0]
        A = np.asarray(self.A, dtype=float).reshape(-1, d)
        b = np.asarray(self.b, dtype=float).reshape(-1)
        if A.shape[0] != b.shape[0]:
            raise DimensionError("A and b disagree on the number of halfspaces")
        nrm = np.linalg.norm(A, axis=1)
        if np.any(nrm == 0):
            raise GeometryError("zero halfspace normal")
        # rows that are already unit up to rounding stay bit-identical, so
        # appending constraints never perturbs an existing prefix
        nrm = np.where(np.abs(nrm - 1.0) > 1e-14, nrm, 1.0)
        A = A / nrm[:, None]
        b = b / nrm
        radius = float(self.radius)
        if not radius > 0:
            raise GeometryError("bounding radius must be positive")
        w = as_vector(self.witness, d)
        for name, val in (("A", A), ("b", b), ("center", c), ("witness", w)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        object.__setattr__(self, "radius", radius)
        viol = max_violation(self, w)
        if viol > 1e-12 * max(1.0, radius):
            raise InfeasibleWitness(f"witness violates the body by {viol:.3g}")

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def m(self):
        return self.A.shape[0]

    @property
    def halfspaces(self):
        return [HalfSpace(a, bb) for a, bb in zip(self.A, self.b)]

    @classmethod
    def ball(cls, center, radius, witness=None):
        c = as_vector(center)
        return cls(np.zeros((0, c.shape[0])), np.zeros(0), c, radius,
                   c if witness is None else witness)

    @classmethod
    def from_halfspaces(cls, halfspaces, center, radius, witness):
        c = as_vector(center)
        if halfspaces:
            A = np.array([h.normal for h in halfspaces])
            b = np.array([h.offset for h in halfspaces])
        else:
            A, b = np.zeros((0, c.shape[0])), np.zeros(0)
        return cls(A, b, c, radius, witness)

    @classmethod
    def box(cls, lo, hi, radius=None, witness=None):
        lo, hi = as_vector(lo), as_vector(hi)
        d = lo.shape[0]
        eye = np.eye(d)
        A = np.vstack([eye, -eye])
        b = np.concatenate([hi, -lo])
        c = 0.5 * (lo + hi)
        if radius is None:
            radius = 2.0 * np.linalg.norm(hi - lo) / 2.0 + 1e-12
        return cls(A, b, c, radius, c if witness is None else witness)

    def with_constraints(self, A_new, b_new, witness):
        A_new = np.asarray(A_new, dtype=float).reshape(-1, self.dim)
        b_new = np.asarray(b_new, dtype=float).reshape(-1)
        return ConvexBody(np.vstack([self.A, A_new]), np.concatenate([self.b, b_new]),
                          self.center, self.radius, witness)

    def translate(self, y):
        y = as_vector(y, self.dim)
        return ConvexBody(self.A, self.b + self.A @ y, self.center + y, self.radius,
                          self.witness + y)

    def affine(self, origin, scale):
        """Body in coordinates ``z = scale * (x - origin)``."""
        o = as_vector(origin, self.dim)
        s = float(scale)
        return ConvexBody(self.A, s * (self.b - self.A @ o), s * (self.center - o),
                          s * self.radius, s * (self.witness - o))

    def to_dict(self):
        return {
            "dim": self.dim,
            "halfspaces": [{"normal": a.tolist(), "offset": float(bb)}
                           for a, bb in zip(self.A, self.b)],
            "ball": {"center": self.center.tolist(), "radius": self.radius},
            "witness": self.witness.tolist(),
        }

    @classmethod
    def from_dict(cls, data):
        d = int(data["dim"])
        hs = data.get("halfspaces", [])
        A = np.array([h["normal"] for h in hs], dtype=float).reshape(-1, d)
        b = np.array([h["offset"] for h in hs], dtype=float)
        ball = data["ball"]
        return cls(A, b, as_vector(ball["center"], d), ball["radius"],
                   as_vector(data["witness"], d))


def extends(new, old, tol=1e-12):
    """True when ``new`` is ``old`` with extra halfspaces appended.

    The bounding ball may also shrink, provided the new ball lies inside the
    old one.
    """
    if new.dim != old.dim or new.m < old.m:
        return False
    if not (np.array_equal(new.A[: old.m], old.A) and np.array_equal(new.b[: old.m], old.b)):
        return False
    same = new.radius == old.radius and np.array_equal(new.center, old.center)
    return same or float(np.linalg.norm(new.center - old.center)) + new.radius <= old.radius + tol


# ---------------------------------------------------------------------------
# membership and projection


def max_violation(body, x):
    x = np.asarray(x, dtype=float)
    v = float(np.linalg.norm(x - body.center)) - body.radius
    if body.m:
        v = max(v, float(np.max(body.A @ x - body.b)))
    return v


def contains(body, x, tol=DEFAULT_TOL):
    x = as_vector(x)
    if x.shape[0] != body.dim:
        raise DimensionError(f"point has dimension {x.shape[0]}, body {body.dim}")
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    return max_violation(body, x) <= tol


def contains_many(body, X, tol=DEFAULT_TOL):
    X = np.atleast_2d(X)
    ok = np.linalg.norm(X - body.center, axis=1) <= body.radius + tol
    if body.m:
        ok &= np.all(X @ body.A.T - body.b <= tol, axis=1)
    return ok


def project(body, x, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Euclidean projection onto ``body`` by Dykstra's algorithm.

    Halfspace corrections are kept as scalar multipliers (Hildreth form);
    the ball keeps a full correction vector.  A halfspace whose multiplier
    is zero and which is currently satisfied is skipped within a sweep.
    """
    x0 = as_vector(x, body.dim)
    if max_violation(body, x0) <= 0:
        return x0.copy()
    A, b, c, R = body.A, body.b, body.center, body.radius
    m = A.shape[0]
    if m == 0:
        r = np.linalg.norm(x0 - c)
        return c + (x0 - c) * (R / r)
    x = x0.copy()
    mu = np.zeros(m)
    yb = np.zeros_like(x)
    Al = [row for row in A]
    bl = b.tolist()
    best, best_res = x.copy(), math.inf
    for it in range(max_iter):
        x_prev = x.copy()
        s = A @ x - b
        active = np.flatnonzero((s > 0) | (mu > 0))
        for i in active:
            a = Al[i]
            v = float(a @ x) - bl[i] + mu[i]
            new = v if v > 0.0 else 0.0
            if new != mu[i]:
                x += (mu[i] - new) * a
                mu[i] = new
        z = x + yb
        r = np.linalg.norm(z - c)
        xn = z if r <= R else c + (z - c) * (R / r)
        yb = z - xn
        x = xn
        res = max_violation(body, x)
        change = np.linalg.norm(x - x_prev)
        if res < best_res:
            best, best_res = x.copy(), res
        if res <= tol and change <= 0.1 * tol:
            return x
    raise ProjectionError(f"Dykstra did not converge in {max_iter} sweeps",
                          best=best, residual=best_res)


def distance(body, x, tol=DEFAULT_TOL):
    x = as_vector(x, body.dim)
    return float(np.linalg.norm(x - project(body, x, tol)))


def intersect_halfspace(body, h, new_witness, tol=1e-12):
    w = as_vector(new_witness, body.dim)
    scale = max(1.0, body.radius)
    if max_violation(body, w) > tol * scale or float(h.normal @ w) - h.offset > tol * scale:
        raise InfeasibleWitness("new witness is not feasible for the intersection")
    return body.with_constraints(h.normal[None, :], [h.offset], w)


# ---------------------------------------------------------------------------
# support function


def support(body, theta, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, patience=50):
    """Support value and maximizer by projected gradient ascent.

    Steps of length ``R / sqrt(k)`` along ``theta`` followed by projection,
    starting from the witness; stops after ``patience`` consecutive steps
    that improve the objective by less than ``tol``.  Slow; the batched
    solver :func:`support_batch` is the production path.
    """
    th = unit(as_vector(theta, body.dim))
    if body.m == 0:
        return body.radius + float(th @ body.center), body.center + body.radius * th
    x = project(body, body.witness, tol)
    best_x, best_val = x.copy(), float(th @ x)
    quiet = 0
    R = body.radius
    for k in range(1, max_iter + 1):
        x = project(body, x + (R / math.sqrt(k)) * th, tol * 1e-2)
        val = float(th @ x)
        if val > best_val + tol:
            quiet = 0
        else:
            quiet += 1
        if val > best_val:
            best_val, best_x = val, x.copy()
        if quiet >= patience:
            return best_val, best_x
    raise SupportError("projected gradient ascent did not settle", best=best_x)


def _canonical(A, b):
    """Merge parallel halfspaces, keeping the tightest offset."""
    if A.shape[0] <= 1:
        return A, b
    G = A @ A.T
    keep = np.ones(A.shape[0], dtype=bool)
    bb = b.copy()
    for i in range(A.shape[0]):
        if not keep[i]:
            continue
        dup = np.flatnonzero((G[i] > 1 - 1e-13) & keep)
        dup = dup[dup != i]
        if dup.size:
            bb[i] = min(bb[i], bb[dup].min())
            keep[dup] = False
    return A[keep], bb[keep]


def _thin_slabs(A, b, radius):
    """Split off thin slabs whose normals are orthogonal to everything else.

    Returns ``(Q, lo, hi, rest)``: slab normals (k, d), their bounds, and the
    indices of the remaining halfspaces.
    """
    m = A.shape[0]
    if m < 2:
        return np.zeros((0, A.shape[1])), np.zeros(0), np.zeros(0), np.arange(m)
    G = A @ A.T
    thin = radius * THIN_SLAB_REL
    used = np.zeros(m, dtype=bool)
    pairs = []
    for i in range(m):
        if used[i]:
            continue
        opp = np.flatnonzero((G[i] < -1 + 1e-13) & ~used)
        for j in opp:
            if b[i] + b[j] <= thin:
                pairs.append((i, j))
                used[i] = used[j] = True
                break
    if not pairs:
        return np.zeros((0, A.shape[1])), np.zeros(0), np.zeros(0), np.arange(m)
    slab_rows = np.array([i for i, _ in pairs])
    slab_all = np.array([k for p in pairs for k in p])
    rest = np.setdiff1d(np.arange(m), slab_all)
    # orthogonality against the other slabs and the remaining halfspaces
    ok = np.ones(len(pairs), dtype=bool)
    for k, (i, _) in enumerate(pairs):
        others = np.concatenate([rest, slab_rows[np.arange(len(pairs)) != k]])
        if others.size and np.max(np.abs(G[i, others])) > 1e-10:
            ok[k] = False
    if not np.all(ok):
        # fall back: only keep slabs that are orthogonal to all
        keep_pairs = [p for p, flag in zip(pairs, ok) if flag]
        demoted = [k for p, flag in zip(pairs, ok) if not flag for k in p]
        rest = np.sort(np.concatenate([rest, np.array(demoted, dtype=int)]))
        pairs = keep_pairs
        if not pairs:
            return np.zeros((0, A.shape[1])), np.zeros(0), np.zeros(0), rest
    Q = np.array([A[i] for i, _ in pairs])
    hi = np.array([b[i] for i, _ in pairs])
    lo = np.array([-b[j] for _, j in pairs])
    return Q, lo, hi, rest


def _complement_basis(Q, d):
    if Q.shape[0] == 0:
        return np.eye(d)
    if Q.shape[0] >= d:
        return np.zeros((d, 0))
    # rows of Q are orthonormal; complete to an orthonormal basis
    _, _, vt = np.linalg.svd(Q, full_matrices=True)
    return vt[Q.shape[0]:].T


class _RawBody:
    """Unvalidated body used for internal phase-I projections."""

    def __init__(self, A, b, center, radius):
        self.A, self.b, self.center, self.radius = A, b, center, radius
        self.witness = center

    @property
    def dim(self):
        return self.center.shape[0]

    @property
    def m(self):
        return self.A.shape[0]


def _strict_interior(A, b, c, R, w):
    """A point with positive slack in every constraint, near ``w``."""
    def margin(x):
        q = R - np.linalg.norm(x - c)
        return min(q, float(np.min(b - A @ x))) if A.shape[0] else q
    for x in (w, c):
        if margin(x) > 1e-9 * R:
            return x
    best, best_m = w, margin(w)
    for delta in (1e-3, 1e-5, 1e-7):
        dlt = delta * R
        try:
            x = project(_RawBody(A, b - dlt, c, R - dlt), w, tol=1e-3 * dlt, max_iter=5000)
        except ProjectionError as e:
            x = e.best
        mx = margin(x)
        if mx > 0:
            return x
        if mx > best_m:
            best, best_m = x, mx
    raise GeometryError("could not find a strictly interior point")


def _barrier_argmax(A, b, c, R, y0, T, gap, mu=10.0, max_newton=60):
    """Log-barrier Newton maximizing ``theta . y`` for each row of ``T``.

    All directions are solved in lockstep; damped Newton steps keep every
    iterate strictly feasible.
    """
    n, k = T.shape
    m = A.shape[0]
    R = np.broadcast_to(np.asarray(R, dtype=float), (n,))
    R2 = R * R
    Y = np.tile(y0, (n, 1))
    AA = np.einsum("mi,mj->mij", A, A).reshape(m, k * k)
    eye = np.eye(k)
    t = 1.0 / max(float(R.max()), 1e-300)
    t_final = (m + 1) / gap
    while True:
        for _ in range(max_newton):
            S = b - Y @ A.T
            D = Y - c
            q = R2 - np.einsum("ij,ij->i", D, D)
            iS = 1.0 / S
            g = -t * T + iS @ A + (2.0 / q)[:, None] * D
            H = ((iS * iS) @ AA).reshape(n, k, k)
            H += (2.0 / q)[:, None, None] * eye
            H += (4.0 / (q * q))[:, None, None] * np.einsum("ni,nj->nij", D, D)
            try:
                dx = -np.linalg.solve(H, g[..., None])[..., 0]
            except np.linalg.LinAlgError:
                dx = -(np.linalg.pinv(H) @ g[..., None])[..., 0]
            lam2 = -np.einsum("ij,ij->i", g, dx)
            lam2 = np.maximum(lam2, 0.0)
            if np.max(lam2) < 1e-14:
                break
            lam = np.sqrt(lam2)
            step = np.where(lam < 0.25, 1.0, 1.0 / (1.0 + lam))
            Yn = Y + step[:, None] * dx
            # numerical safety: halve any step that left the domain
            for _ in range(40):
                bad = (np.min(b - Yn @ A.T, axis=1) <= 0) | (
                    np.einsum("ij,ij->i", Yn - c, Yn - c) >= R2)
                if not np.any(bad):
                    break
                step[bad] *= 0.5
                Yn[bad] = Y[bad] + step[bad, None] * dx[bad]
            else:
                Yn[bad] = Y[bad]
            Y = Yn
            if np.max(lam2) < 1e-10:
                break
        if (m + 1) / t <= gap:
            break
        t = min(t * mu, t_final)
    return Y


def _polish(A, b, c, R, T, Y, scale):
    """Snap barrier solutions onto their active face and certify them."""
    n, k = Y.shape
    R = np.broadcast_to(np.asarray(R, dtype=float), (n,))
    S = b - Y @ A.T
    q = R - np.linalg.norm(Y - c, axis=1)
    act_tol = 1e-6 * scale
    act = S <= act_tol
    ball = q <= act_tol
    key = np.concatenate([act, ball[:, None]], axis=1)
    out = Y.copy()
    uniq, inv = np.unique(key, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    feas_tol = 1e-11 * scale
    for g in range(uniq.shape[0]):
        idx = np.flatnonzero(inv == g)
        E = np.flatnonzero(uniq[g, :-1])
        on_ball = bool(uniq[g, -1])
        AE, bE = A[E], b[E]
        if E.size:
            pinv = np.linalg.pinv(AE)
            P = pinv @ AE  # projector onto row space
            rank = int(np.round(np.trace(P)))
        else:
            pinv = np.zeros((k, 0))
            P = np.zeros((k, k))
            rank = 0
        Th = T[idx]
        if on_ball:
            cL = c - pinv @ (AE @ c - bE) if E.size else c
            rad = np.sqrt(np.maximum(R[idx] ** 2 - float(np.sum((c - cL) ** 2)), 0.0))
            TL = Th - Th @ P.T
            nl = np.linalg.norm(TL, axis=1)
            good = nl > 1e-12
            cand = np.where(good[:, None], cL + (rad / np.where(good, nl, 1.0))[:, None] * TL, Y[idx])
        else:
            if rank < k:
                cand = Y[idx] - (Y[idx] @ AE.T - bE) @ pinv.T if E.size else Y[idx]
            else:
                v = pinv @ bE
                cand = np.tile(v, (idx.size, 1))
        viol = np.maximum(np.max(cand @ A.T - b, axis=1, initial=-np.inf),
                          np.linalg.norm(cand - c, axis=1) - R[idx])
        # improvement must not lose objective beyond tolerance
        better = np.einsum("ij,ij->i", cand - Y[idx], Th) >= -1e-9 * scale
        ok = (viol <= feas_tol) & better
        out[idx[ok]] = cand[ok]
    return out


def _face_ball_argmax(A, b, c, R, T, E):
    """Maximize ``theta . x`` over the ball intersected with ``{A_E x = b_E}``.

    ``E`` is an (n, s) index array, one active set per direction.  Returns
    the maximizers and a mask of directions where the face meets the ball.
    """
    AS = A[E]  # (n, s, d)
    bS = b[E]
    res = AS @ c - bS
    At = np.einsum("nsd,nd->ns", AS, T)
    if AS.shape[1] == 1:
        # unit normals: the Gram matrix is 1
        u, v = res, At
    else:
        G = AS @ AS.transpose(0, 2, 1)
        rhs = np.stack([res, At], axis=2)
        try:
            sol = np.linalg.solve(G, rhs)
        except np.linalg.LinAlgError:
            sol = np.linalg.pinv(G, hermitian=True) @ rhs
        u, v = sol[..., 0], sol[..., 1]
    cL = c - np.einsum("nsd,ns->nd", AS, u)
    Tp = T - np.einsum("nsd,ns->nd", AS, v)
    rho2 = R * R - np.einsum("nd,nd->n", cL - c, cL - c)
    ok = rho2 >= 0
    tn = np.linalg.norm(Tp, axis=1)
    big = tn > 1e-14
    scale = np.where(big, np.sqrt(np.maximum(rho2, 0.0)) / np.where(big, tn, 1.0), 0.0)
    return cL + scale[:, None] * Tp, ok


def _relaxation_pass(A, b, c, R, T, X0, max_active=4, max_rounds=None):
    """Exact maximizers certified through small relaxations.

    Each direction keeps a working set ``E`` of halfspaces.  The relaxation
    ``{a_i . x <= b_i, i in E} & ball`` is solved exactly by enumerating
    active subsets; if its optimum is feasible for the whole body it is the
    exact maximizer.  Otherwise ``E`` becomes the optimum's active subset
    plus the most violated halfspace, which strictly lowers the relaxation
    value, so the loop cannot cycle.  Returns ``(X, done)``; directions that
    outgrow ``max_active`` are left for the caller.
    """
    n, d = T.shape
    m = A.shape[0]
    kmax = min(min(max_active, d) + 1, m)
    if max_rounds is None:
        max_rounds = 4 * d + 8
    X = X0.copy()
    done = np.zeros(n, dtype=bool)
    dead = np.zeros(n, dtype=bool)
    R = np.broadcast_to(np.asarray(R, dtype=float), (n,))
    feas_tol = 1e-12 * max(float(R.max()), 1.0)
    Emat = np.zeros((n, kmax), dtype=int)
    Emat[:, 0] = np.argmax(X0 @ A.T - b, axis=1)
    ks = np.ones(n, dtype=int)
    subsets = {k: [list(sub) for s in range(1, min(k, d) + 1)
                   for sub in combinations(range(k), s)]
               for k in range(1, kmax + 1)}
    masks = {}
    for k, subs in subsets.items():
        mk = np.zeros((len(subs), k), dtype=bool)
        for j, sub in enumerate(subs):
            mk[j, sub] = True
        masks[k] = mk
    for _ in range(max_rounds):
        live = ~done & ~dead
        if not np.any(live):
            break
        for k in np.unique(ks[live]):
            idx = np.flatnonzero(live & (ks == k))
            E = Emat[idx, :k]
            Tl = T[idx]
            best = np.full(idx.size, -np.inf)
            bestX = X[idx].copy()
            bestsub = np.zeros(idx.size, dtype=int)
            for j, sub in enumerate(subsets[k]):
                Y, ok = _face_ball_argmax(A, b, c, R[idx], Tl, E[:, sub])
                rel = np.take_along_axis(Y @ A.T - b, E, axis=1).max(axis=1)
                ok &= rel <= feas_tol
                val = np.einsum("nd,nd->n", Y, Tl)
                upd = ok & (val > best)
                best[upd] = val[upd]
                bestX[upd] = Y[upd]
                bestsub[upd] = j
            found = np.isfinite(best)
            viol = bestX @ A.T - b
            good = found & (np.max(viol, axis=1) <= feas_tol)
            X[idx[good]] = bestX[good]
            done[idx[good]] = True
            nxt = np.argmax(viol, axis=1)
            rows = np.flatnonzero(found & ~good)
            mask = masks[k][bestsub[rows]]
            size = mask.sum(axis=1)
            Er = E[rows]
            stuck = np.any((Er == nxt[rows, None]) & mask, axis=1) | (size + 1 > kmax)
            dead[idx[rows[stuck]]] = True
            rows, mask, size, Er = rows[~stuck], mask[~stuck], size[~stuck], Er[~stuck]
            order = np.argsort(~mask, axis=1, kind="stable")
            Enew = np.zeros((rows.size, kmax), dtype=int)
            Enew[:, :k] = np.take_along_axis(Er, order, axis=1)
            Enew[np.arange(rows.size), size] = nxt[rows]
            Emat[idx[rows]] = Enew
            ks[idx[rows]] = size + 1
            dead[idx[~found]] = True
    return X, done


def support_batch(body, thetas, gap=1e-10):
    """Support values and maximizers for many directions at once.

    Thin slabs orthogonal to the other constraints are split off exactly;
    directions whose unconstrained ball maximizer is feasible are answered
    in closed form; the rest go through a batched log-barrier Newton solve
    followed by an active-face polish.
    """
    T = np.atleast_2d(np.asarray(thetas, dtype=float))
    n, d = T.shape
    if d != body.dim:
        raise DimensionError("direction dimension mismatch")
    A, b = _canonical(body.A, body.b)
    c, R = body.center, body.radius
    Q, lo, hi, rest = _thin_slabs(A, b, R)
    k_slab = Q.shape[0]
    N = _complement_basis(Q, d)
    k = N.shape[1]
    X = np.zeros((n, d))
    if k_slab:
        QT = T @ Q.T
        Z = np.where(QT > 0, hi, np.where(QT < 0, lo, 0.5 * (lo + hi)))
        X += Z @ Q
        # each direction sees the ball sliced at its own slab coordinates
        Rr2 = R * R - np.sum((Z - Q @ c) ** 2, axis=1)
        if np.any(Rr2 < 0):
            raise GeometryError("slab system misses the bounding ball")
        Rr = np.sqrt(Rr2)
    else:
        Rr = np.full(n, R)
    if k == 0:
        vals = np.einsum("ij,ij->i", X, T)
        return vals, X
    Ar = A[rest] @ N
    br = b[rest]
    nr = np.linalg.norm(Ar, axis=1)
    keep = nr > 1e-14
    if np.any(~keep) and np.any(br[~keep] < -1e-12 * R):
        raise GeometryError("restricted system infeasible")
    Ar, br = Ar[keep] / nr[keep, None], br[keep] / nr[keep]
    cr = N.T @ c
    Tr = T @ N
    tn = np.linalg.norm(Tr, axis=1)
    Yr = np.zeros((n, k))
    w = N.T @ body.witness
    zero = tn <= 1e-15
    Yr[zero] = w
    dirs = np.where(zero[:, None], 0.0, Tr / np.where(zero, 1.0, tn)[:, None])
    todo = ~zero
    # closed form when the ball maximizer is feasible
    cand = cr + Rr[:, None] * dirs
    if Ar.shape[0]:
        feas = np.all(cand @ Ar.T <= br + 1e-13 * R, axis=1)
    else:
        feas = np.ones(n, dtype=bool)
    hit = todo & feas
    Yr[hit] = cand[hit]
    todo &= ~feas
    if np.any(todo) and k >= 2:
        idx = np.flatnonzero(todo)
        Xr, ok = _relaxation_pass(Ar, br, cr, Rr[idx], dirs[idx], cand[idx])
        Yr[idx[ok]] = Xr[ok]
        todo[idx[ok]] = False
    if np.any(todo):
        Rt = Rr[todo]
        y0 = _strict_interior(Ar, br, cr, float(Rt.min()), w)
        scale = max(float(Rt.max()), 1e-12)
        Ysol = _barrier_argmax(Ar, br, cr, Rt, y0, dirs[todo], gap=gap * scale)
        Ysol = _polish(Ar, br, cr, Rt, dirs[todo], Ysol, scale)
        Yr[todo] = Ysol
    X += Yr @ N.T
    vals = np.einsum("ij,ij->i", X, T)
    return vals, X


def width_estimate(body, n_dirs, rng):
    """Monte-Carlo mean width and largest observed width.

    Returns ``(mean_width, max_width, stderr)``.
    """
    if n_dirs < 1:
        raise ValueError("n_dirs must be >= 1")
    th = random_directions(rng, n_dirs, body.dim)
    hp, _ = support_batch(body, th)
    hm, _ = support_batch(body, -th)
    w = hp + hm
    se = float(np.std(w, ddof=1) / math.sqrt(n_dirs)) if n_dirs > 1 else 0.0
    return float(np.mean(w)), float(np.max(w)), se


# ---------------------------------------------------------------------------
# padded bodies


@dataclass(frozen=True, eq=False)
class PaddedBody:
    """Minkowski sum of ``base`` with the Euclidean ball of radius ``r``."""

    base: ConvexBody
    r: float = 0.0

    def __post_init__(self):
        if not self.r >= 0:
            raise ValueError("pad radius must be nonnegative")
        object.__setattr__(self, "r", float(self.r))

    @property
    def dim(self):
        return self.base.dim

    @property
    def bounding_radius(self):
        return self.base.radius + self.r


def padded_distance(base, x, tol=DEFAULT_TOL):
    """Euclidean distance from ``x`` to ``base`` with cheap exact shortcuts."""
    x = np.asarray(x, dtype=float)
    s = base.A @ x - base.b if base.m else np.zeros(0)
    vb = float(np.linalg.norm(x - base.center)) - base.radius
    viol = np.concatenate([s, [vb]])
    pos = viol > 0
    if not np.any(pos):
        return 0.0
    if pos.sum() == 1:
        i = int(np.flatnonzero(pos)[0])
        if i < base.m:
            p = x - viol[i] * base.A[i]
        else:
            p = base.center + (x - base.center) * (base.radius / (vb + base.radius))
        if max_violation(base, p) <= 1e-12 * max(1.0, base.radius):
            return float(viol[i])
    # Dykstra cannot certify a zero tolerance in floating point
    tol = max(tol, 1e-12 * max(1.0, base.radius))
    try:
        p = project(base, x, tol)
    except ProjectionError as exc:
        p = exc.best
    return float(np.linalg.norm(x - p))


def padded_contains(pb, x, tol=DEFAULT_TOL):
    x = as_vector(x, pb.dim)
    if max_violation(pb.base, x) > pb.r + tol:
        return False
    return padded_distance(pb.base, x, tol * 1e-2) <= pb.r + tol


def padded_contains_many(pb, X, tol=DEFAULT_TOL):
    X = np.atleast_2d(X)
    base = pb.base
    inside = contains_many(base, X, 0.0)
    out = np.zeros(X.shape[0], dtype=bool)
    out[inside] = True
    rest = np.flatnonzero(~inside)
    if rest.size == 0:
        return out
    if pb.r == 0:
        out[rest] = contains_many(base, X[rest], tol)
        return out
    far = ~contains_many(base, X[rest], pb.r + tol)
    for i in rest[~far]:
        out[i] = padded_distance(base, X[i], tol * 1e-2) <= pb.r + tol
    return out


def polytope_chord(A, b, c, R, X, U):
    """Exact chords of ``{A x <= b, |x - c| <= R}`` through rows of X along U."""
    beta = np.einsum("ij,ij->i", U, X - c)
    gam = np.einsum("ij,ij->i", X - c, X - c) - R * R
    disc = np.sqrt(np.maximum(beta * beta - gam, 0.0))
    lo, hi = -beta - disc, -beta + disc
    if A.shape[0]:
        AU = U @ A.T
        S = b - X @ A.T
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = S / AU
        up = np.where(AU > 1e-300, ratio, np.inf)
        dn = np.where(AU < -1e-300, ratio, -np.inf)
        hi = np.minimum(hi, up.min(axis=1))
        lo = np.maximum(lo, dn.max(axis=1))
    lo = np.minimum(lo, 0.0)
    hi = np.maximum(hi, 0.0)
    return lo, hi


def chord(pb, x, u, tol=DEFAULT_TOL):
    """Chord of the padded body through ``x`` along the unit direction ``u``.

    Closed form when the pad is zero; otherwise exponential bracketing then
    bisection against :func:`padded_contains`.
    """
    x = as_vector(x, pb.dim)
    u = unit(as_vector(u, pb.dim))
    base = pb.base
    if pb.r == 0:
        lo, hi = polytope_chord(base.A, base.b, base.center, base.radius, x[None], u[None])
        return float(lo[0]), float(hi[0])
    limit = 10.0 * (pb.bounding_radius + float(np.linalg.norm(x - base.center)))

    def inside(t):
        return padded_contains(pb, x + t * u, 0.0)

    # the outer relaxation gives a valid bracket end and a fast inner bound
    olo, ohi = polytope_chord(base.A, base.b + pb.r, base.center, base.radius + pb.r,
                              x[None], u[None])
    out = []
    for sgn, t_out in ((-1.0, -float(olo[0])), (1.0, float(ohi[0]))):
        t_in = 0.0
        step = max(tol, 1e-3 * pb.bounding_radius)
        if t_out <= limit and not inside(sgn * t_out):
            t_hi_ = t_out
        else:
            t_hi_ = None
            t = step
            while t <= limit:
                if inside(sgn * t):
                    t_in = t
                    t *= 2.0
                else:
                    t_hi_ = t
                    break
            if t_hi_ is None:
                raise ChordError("chord bracketing exceeded 10x the bounding radius")
        a, z = t_in, t_hi_
        while z - a > tol:
            mid = 0.5 * (a + z)
            if inside(sgn * mid):
                a = mid
            else:
                z = mid
        out.append(sgn * a)
    return out[0], out[1]


# ---------------------------------------------------------------------------
# subspaces


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Affine subspace ``origin + span(basis)`` with orthonormal basis rows."""

    origin: np.ndarray
    basis: np.ndarray

    def __post_init__(self):
        o = as_vector(self.origin)
        B = np.asarray(self.basis, dtype=float).reshape(-1, o.shape[0])
        if B.shape[0]:
            G = B @ B.T
            if np.max(np.abs(G - np.eye(B.shape[0]))) > 1e-10:
                raise GeometryError("basis is not orthonormal")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "basis", B)

    @property
    def k(self):
        return self.basis.shape[0]

    def project(self, y):
        y = np.asarray(y, dtype=float)
        if self.k == 0:
            return self.origin.copy()
        return self.origin + (y - self.origin) @ self.basis.T @ self.basis

    def lift(self, t):
        t = np.asarray(t, dtype=float)
        return self.origin + t @ self.basis

    def coords(self, y):
        return (np.asarray(y, dtype=float) - self.origin) @ self.basis.T


def closest_pair(body, sub, tol=DEFAULT_TOL, max_iter=5000):
    """Closest points ``(p in sub, y in body)`` by alternating projections."""
    p = sub.project(body.witness)
    y = project(body, p, tol * 1e-2)
    for _ in range(max_iter):
        p_new = sub.project(y)
        y_new = project(body, p_new, tol * 1e-2)
        moved = np.linalg.norm(y_new - y) + np.linalg.norm(p_new - p)
        p, y = p_new, y_new
        if moved <= 0.1 * tol:
            break
    return p, y


def separate_subspace(body, sub, tol=DEFAULT_TOL):
    """Halfspace containing ``body`` whose boundary contains ``sub``.

    The normal comes from the closest pair between the affine subspace and
    the body, orthogonalized against the subspace directions.
    """
    p, y = closest_pair(body, sub, tol)
    gap = y - p
    if sub.k:
        gap = gap - gap @ sub.basis.T @ sub.basis
    dist = float(np.linalg.norm(gap))
    if dist <= tol:
        raise NotSeparated(f"subspace and body are {dist:.3g} apart")
    v = gap / dist
    # {z : v.z >= v.origin} written as {(-v).z <= -v.origin}
    return HalfSpace(-v, -float(v @ sub.origin))


def restrict(body, sub, witness=None):
    """The body intersected with ``sub``, in the subspace's coordinates."""
    if sub.k == 0:
        raise GeometryError("cannot restrict to a zero-dimensional subspace")
    B = sub.basis.T  # (d, k)
    o = sub.origin
    if witness is None:
        if not contains(body, o, 1e-9):
            raise GeometryError("subspace origin is not in the body")
        w = np.zeros(sub.k)
    else:
        w = sub.coords(witness)
    A_list, b_list = [], []
    if body.m:
        Ar = body.A @ B
        br = body.b - body.A @ o
        nr = np.linalg.norm(Ar, axis=1)
        for a, bb, nn in zip(Ar, br, nr):
            if nn <= 1e-14:
                if bb < -1e-12:
                    raise GeometryError("restriction is empty")
                continue
            A_list.append(a / nn)
            b_list.append(bb / nn)
    rel = body.center - o
    cr = rel @ B
    perp = rel - B @ cr
    r2 = body.radius ** 2 - float(perp @ perp)
    if r2 <= 0:
        raise GeometryError("subspace misses the bounding ball")
    A_r = np.array(A_list).reshape(-1, sub.k)
    return ConvexBody(A_r, np.array(b_list), cr, math.sqrt(r2), w)
