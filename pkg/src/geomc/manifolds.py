"""Geometry of embedded manifolds.

Points and tangent vectors are stored in ambient coordinates. Sphere-like
kinds (sphere, SO(3) as unit quaternions, and the sphere lifts used for the
simplex and the ball) store a point as a vector of length ``D + 1``. Stiefel
frames are stored as ``(p, k)`` arrays with orthonormal columns; their flat
ambient form is column-major.

All manifolds carry the metric induced by the ambient Euclidean inner
product, so geodesics have constant Euclidean speed and the tangent
projection is orthogonal in the ambient space.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .exceptions import DegenerateGeodesicError, DomainError, InvalidPointError

POINT_TOL = 1e-8
ANTIPODAL_TOL = 1e-9

SPHERE_KINDS = ("sphere", "so3", "simplex", "ball")
KINDS = SPHERE_KINDS + ("stiefel",)


@dataclass(frozen=True)
class ManifoldSpec:
    """Which embedded manifold a state lives on.

    Use the constructors :meth:`sphere`, :meth:`stiefel`, :meth:`so3`,
    :meth:`simplex` and :meth:`ball` rather than filling fields by hand.
    ``dim`` is the intrinsic sphere dimension ``D`` for sphere-like kinds;
    ``k`` and ``p`` are the frame size and ambient dimension for Stiefel.
    """

    kind: str
    dim: int = None
    k: int = None
    p: int = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown manifold kind {self.kind!r}")
        if self.kind == "stiefel":
            if self.k is None or self.p is None or self.k < 1 or self.p < 1:
                raise ValueError("stiefel requires k >= 1 and p >= 1")
            if self.k > self.p:
                raise ValueError(f"stiefel requires k <= p, got k={self.k}, p={self.p}")
        elif self.kind == "so3":
            if self.dim not in (None, 3):
                raise ValueError("so3 is represented on S^3; dim must be 3")
            object.__setattr__(self, "dim", 3)
        elif self.dim is None or self.dim < 1:
            raise ValueError(f"{self.kind} requires dim >= 1")

    @classmethod
    def sphere(cls, D):
        return cls("sphere", dim=int(D))

    @classmethod
    def stiefel(cls, k, p):
        return cls("stiefel", k=int(k), p=int(p))

    @classmethod
    def so3(cls):
        return cls("so3", dim=3)

    @classmethod
    def simplex(cls, D):
        return cls("simplex", dim=int(D))

    @classmethod
    def ball(cls, D):
        return cls("ball", dim=int(D))

    @property
    def is_sphere_like(self):
        return self.kind in SPHERE_KINDS

    @property
    def shape(self):
        """Array shape of a point in ambient coordinates."""
        if self.kind == "stiefel":
            return (self.p, self.k)
        return (self.dim + 1,)

    @property
    def ambient_dim(self):
        if self.kind == "stiefel":
            return self.k * self.p
        return self.dim + 1

    @property
    def intrinsic_dim(self):
        if self.kind == "stiefel":
            return self.k * self.p - self.k * (self.k + 1) // 2
        return self.dim

    def to_dict(self):
        if self.kind == "stiefel":
            return {"kind": "stiefel", "k": self.k, "p": self.p}
        if self.kind == "so3":
            return {"kind": "so3"}
        return {"kind": self.kind, "dim": self.dim}

    @classmethod
    def from_dict(cls, d):
        kind = d["kind"]
        if kind == "stiefel":
            return cls.stiefel(d["k"], d["p"])
        if kind == "so3":
            return cls.so3()
        return cls(kind, dim=int(d["dim"]))


@dataclass(frozen=True)
class PhaseState:
    """Position ``q`` on the manifold and velocity ``v`` tangent at ``q``."""

    q: np.ndarray
    v: np.ndarray

    def negate(self):
        return PhaseState(self.q, -self.v)


# -- constraint checks -------------------------------------------------------


def _sym(a):
    return 0.5 * (a + a.T)


def _as_point(m, q):
    q = np.asarray(q, dtype=float)
    if q.shape != m.shape:
        if q.size == m.ambient_dim and m.kind == "stiefel":
            return q.reshape(m.shape, order="F")
        raise InvalidPointError(f"expected point of shape {m.shape}, got {q.shape}")
    return q


def constraint_error(m, q):
    """Max-abs violation of the manifold constraint at ``q``."""
    q = _as_point(m, q)
    if m.kind == "stiefel":
        return float(np.max(np.abs(q.T @ q - np.eye(m.k))))
    return abs(float(np.linalg.norm(q)) - 1.0)


def tangency_error(m, q, v):
    """Max-abs violation of the tangency condition for ``v`` at ``q``."""
    q = _as_point(m, q)
    v = np.asarray(v, dtype=float).reshape(q.shape)
    if m.kind == "stiefel":
        return float(np.max(np.abs(_sym(q.T @ v))))
    return abs(float(q @ v))


def check_point(m, q, tol=POINT_TOL):
    """Return ``q`` as an array, raising if it is off the manifold."""
    q = _as_point(m, q)
    if not np.all(np.isfinite(q)):
        raise InvalidPointError("point has non-finite coordinates")
    err = constraint_error(m, q)
    if err > tol:
        raise InvalidPointError(
            f"point violates the {m.kind} constraint by {err:.3e} (tolerance {tol:g})"
        )
    return q


def project_to_manifold(m, q):
    """Nearest point on the manifold (normalize, or polar factor for frames)."""
    q = _as_point(m, q)
    if m.kind == "stiefel":
        u, _, vt = np.linalg.svd(q, full_matrices=False)
        return u @ vt
    return q / np.linalg.norm(q)


def _project(m, q, w):
    if m.kind == "stiefel":
        return w - q @ _sym(q.T @ w)
    return w - q * (q @ w)


def project_to_tangent(m, q, w):
    """Orthogonally project an ambient vector ``w`` onto the tangent space at ``q``.

    Raises
    ------
    InvalidPointError
        If ``q`` violates the manifold constraint by more than 1e-8.
    """
    q = check_point(m, q)
    w = np.asarray(w, dtype=float).reshape(q.shape)
    return _project(m, q, w)


def sample_tangent_gaussian(m, q, rng):
    """Standard ambient Gaussian projected onto the tangent space at ``q``."""
    q = check_point(m, q)
    return _project(m, q, rng.standard_normal(q.shape))


# -- geodesics ---------------------------------------------------------------


def _sphere_flow(q, v, t):
    speed = np.linalg.norm(v)
    if speed == 0.0:
        return q.copy(), v.copy()
    theta = speed * t
    c, s = np.cos(theta), np.sin(theta)
    return q * c + v * (s / speed), v * c - q * (speed * s)


def _stiefel_flow(q, v, t):
    # Closed form for the embedded metric: Q'' + Q (Q'^T Q') = 0.
    k = q.shape[1]
    a = q.T @ v
    s = v.T @ v
    block = np.block([[a, -s], [np.eye(k), a]])
    e = expm(t * block)
    rot = expm(-t * a)
    qv = np.hstack([q, v])
    return qv @ e[:, :k] @ rot, qv @ e[:, k:] @ rot


def geodesic_flow(m, s, t, reproject=True):
    """Flow ``s`` along the geodesic it defines for time ``t``.

    Parameters
    ----------
    m : ManifoldSpec
    s : PhaseState
    t : float
        Flow time; negative values run the geodesic backwards.
    reproject : bool, default True
        Snap the end position back onto the constraint set and the velocity
        back onto its tangent space. Stops roundoff drift over long chains.

    Returns
    -------
    PhaseState
    """
    if m.kind not in KINDS:
        raise NotImplementedError(f"no geodesic flow for manifold kind {m.kind!r}")
    if not np.isfinite(t):
        raise DomainError("flow time must be finite")
    q = _as_point(m, s.q)
    v = np.asarray(s.v, dtype=float).reshape(q.shape)
    if t == 0:
        return PhaseState(q, v)
    if m.kind == "stiefel":
        q1, v1 = _stiefel_flow(q, v, t)
    else:
        q1, v1 = _sphere_flow(q, v, t)
    if reproject:
        q1 = project_to_manifold(m, q1)
        v1 = _project(m, q1, v1)
    return PhaseState(q1, v1)


def _geodesic_rhs(m, q, v):
    if m.kind == "stiefel":
        return v, -q @ (v.T @ v)
    return v, -q * (v @ v)


def integrate_geodesic_ode(m, s, t, n_steps):
    """Fixed-step RK4 solution of the geodesic equation; a test oracle.

    The acceleration is the constraint-derived quadratic form
    ``-q |v|^2`` on spheres and ``-Q V^T V`` on Stiefel manifolds. No
    re-projection is applied, so the result carries the integrator's own
    truncation error.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if m.kind not in KINDS:
        raise NotImplementedError(f"no geodesic equation for manifold kind {m.kind!r}")
    q = _as_point(m, s.q).copy()
    v = np.asarray(s.v, dtype=float).reshape(q.shape).copy()
    h = t / n_steps
    for _ in range(n_steps):
        k1q, k1v = _geodesic_rhs(m, q, v)
        k2q, k2v = _geodesic_rhs(m, q + 0.5 * h * k1q, v + 0.5 * h * k1v)
        k3q, k3v = _geodesic_rhs(m, q + 0.5 * h * k2q, v + 0.5 * h * k2v)
        k4q, k4v = _geodesic_rhs(m, q + h * k3q, v + h * k3v)
        q = q + (h / 6.0) * (k1q + 2 * k2q + 2 * k3q + k4q)
        v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
    return PhaseState(q, v)


@dataclass(frozen=True)
class GeodesicPath:
    """A geodesic given by its starting phase state, evaluated on ``[0, duration]``."""

    manifold: ManifoldSpec
    start: PhaseState
    duration: float = 1.0

    def at(self, t):
        if t == 0:
            return self.start
        return geodesic_flow(self.manifold, self.start, t)

    def points(self, n):
        ts = np.linspace(0.0, self.duration, n)
        return np.stack([self.at(t).q for t in ts])


def _sphere_log(a, b):
    cos = float(np.clip(a @ b, -1.0, 1.0))
    if cos < -1.0 + ANTIPODAL_TOL:
        raise DegenerateGeodesicError(
            "endpoints are antipodal; the minimizing geodesic is not unique"
        )
    w = b - cos * a
    nw = np.linalg.norm(w)
    if nw == 0.0:
        return np.zeros_like(a)
    return np.arctan2(nw, cos) * (w / nw)


def _stiefel_log(m, a, b):
    k, p = m.k, m.p
    sv = np.linalg.svd(a.T @ b, compute_uv=False)
    if sv.min() < ANTIPODAL_TOL:
        raise DegenerateGeodesicError(
            "frames are rank-degenerate relative to each other (a^T b is singular)"
        )
    full, _ = np.linalg.qr(a, mode="complete")
    perp = full[:, k:]
    iu = np.triu_indices(k, 1)

    def unpack(theta):
        omega = np.zeros((k, k))
        omega[iu] = theta[: len(iu[0])]
        omega = omega - omega.T
        bmat = theta[len(iu[0]):].reshape(p - k, k)
        return a @ omega + perp @ bmat

    # Shooting: find the tangent V with exp_a(V) = b, starting from the
    # projected chord.
    v0 = _project(m, a, b - a)
    omega0 = 0.5 * ((a.T @ v0) - (a.T @ v0).T)
    theta0 = np.concatenate([omega0[iu], (perp.T @ v0).ravel()])

    def residual(theta):
        q1, _ = _stiefel_flow(a, unpack(theta), 1.0)
        return (q1 - b).ravel()

    sol = least_squares(residual, theta0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    if np.max(np.abs(sol.fun)) > 1e-10:
        raise DegenerateGeodesicError(
            f"could not find a geodesic between frames (residual {np.max(np.abs(sol.fun)):.2e})"
        )
    return unpack(sol.x)


def log_map(m, a, b):
    """Initial velocity of the geodesic from ``a`` reaching ``b`` at time 1."""
    a = check_point(m, a)
    b = check_point(m, b)
    if m.kind == "stiefel" and m.k > 1:
        return _stiefel_log(m, a, b)
    if m.kind == "stiefel":
        return _sphere_log(a[:, 0], b[:, 0]).reshape(a.shape)
    return _sphere_log(a, b)


def geodesic_distance(m, a, b):
    return float(np.linalg.norm(log_map(m, a, b)))


def geodesic_interpolate(m, a, b, n_frames):
    """Points along the minimizing geodesic from ``a`` to ``b``.

    Returns an array of shape ``(n_frames, *m.shape)``; the first and last
    entries are ``a`` and ``b`` themselves.

    Raises
    ------
    DegenerateGeodesicError
        For antipodal sphere points or rank-degenerate Stiefel frames.
    """
    if n_frames < 2:
        raise ValueError("n_frames must be >= 2 to include both endpoints")
    a = check_point(m, a)
    b = check_point(m, b)
    v = log_map(m, a, b)
    path = GeodesicPath(m, PhaseState(a, v), 1.0)
    frames = path.points(n_frames)
    frames[0] = a
    frames[-1] = b
    return frames


# -- constraint lifts ---------------------------------------------------------


def ball_to_sphere(theta, hemisphere_sign=1):
    """Lift a point of the closed unit ball onto the sphere one dimension up."""
    theta = np.asarray(theta, dtype=float)
    sq = float(theta @ theta)
    if sq > (1.0 + 1e-12) ** 2:
        raise DomainError(f"point has norm {np.sqrt(sq):.6g} > 1; outside the unit ball")
    if hemisphere_sign not in (1, -1):
        raise ValueError("hemisphere_sign must be +1 or -1")
    last = hemisphere_sign * np.sqrt(max(0.0, 1.0 - sq))
    return np.append(theta, last)


def sphere_to_ball(q):
    """Drop the auxiliary last coordinate of a sphere point."""
    return np.asarray(q, dtype=float)[..., :-1].copy()


def sphere_to_simplex(q):
    """Map a sphere point to the simplex by squaring coordinates.

    Returns
    -------
    x : ndarray
        Simplex point with ``x_i = q_i ** 2``.
    log_correction : float or ndarray
        ``sum(log|2 q_i|)``; ``-inf`` when some ``q_i`` is zero. One value
        per row for batched input.
    """
    q = np.asarray(q, dtype=float)
    x = q * q
    with np.errstate(divide="ignore"):
        log_corr = np.sum(np.log(np.abs(2.0 * q)), axis=-1)
    return x, (float(log_corr) if np.ndim(log_corr) == 0 else log_corr)
