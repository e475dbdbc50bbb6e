"""Unnormalized target densities and their ambient gradients.

Every density here is unnormalized; samplers never need the integrating
constant. Gradients are ambient (Euclidean) gradients of the log-density;
callers project them onto the tangent space.

Quaternions are ordered ``(w, x, y, z)`` with the scalar part first, and
map to rotations by the usual right-handed formula (see
:func:`quaternion_to_rotation`). The matrix Fisher to Bingham identification
depends on this convention only up to conjugation.
"""
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .exceptions import DomainError, InvalidPointError, NumericError, ParameterError
from .manifolds import ManifoldSpec

UNIT_TOL = 1e-8


def _check_unit(x):
    x = np.asarray(x, dtype=float)
    if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
        raise InvalidPointError(f"expected a unit vector, got norm {np.linalg.norm(x):.12g}")
    return x


def _symmetric(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ParameterError(f"{name} must be a square matrix, got shape {A.shape}")
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-12 * scale:
        raise ParameterError(f"{name} must be symmetric")
    return 0.5 * (A + A.T)


# -- parameter types ---------------------------------------------------------


@dataclass(frozen=True)
class FisherBinghamParams:
    """Fisher-Bingham parameters: density proportional to ``exp(c.x + x^T A x)``."""

    c: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        A = _symmetric(self.A)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if c.shape[0] != A.shape[0]:
            raise ParameterError(f"c has length {c.shape[0]} but A is {A.shape[0]}x{A.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "c", c)

    @property
    def p(self):
        return self.c.shape[0]

    def to_dict(self):
        return {"c": self.c.tolist(), "A": self.A.tolist()}

    @classmethod
    def from_dict(cls, d):
        A = np.asarray(d["A"], dtype=float)
        c = d.get("c")
        return cls(np.zeros(A.shape[0]) if c is None else c, A)


@dataclass(frozen=True)
class MatrixFisherBinghamParams:
    """Density ``exp(tr(C^T Q) + tr(Q^T A Q))`` on the Stiefel manifold of ``(p, k)`` frames."""

    C: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        A = _symmetric(self.A)
        C = np.asarray(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != A.shape[0]:
            raise ParameterError(f"C must be {A.shape[0]} x k, got shape {C.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "C", C)

    def to_dict(self):
        return {"C": self.C.tolist(), "A": self.A.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["C"], d["A"])


@dataclass(frozen=True)
class GaussianEquivalent:
    """Gaussian whose restriction to the unit sphere is a given Fisher-Bingham."""

    mu: np.ndarray
    sigma: np.ndarray
    a: float


@dataclass(frozen=True)
class BarbellParams:
    """Barbell surface: bar radius ``r``, bar half-length ``l``, domain half-width ``L``."""

    r: float = 1.0
    l: float = 2.0
    L: float = 4.0

    def __post_init__(self):
        if not self.r > 0:
            raise ParameterError(f"barbell radius r must be > 0, got {self.r}")
        if not 0 < self.l < self.L:
            raise ParameterError(f"barbell needs 0 < l < L, got l={self.l}, L={self.L}")

    def to_dict(self):
        return {"r": self.r, "l": self.l, "L": self.L}

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["r"]), float(d["l"]), float(d["L"]))


@dataclass(frozen=True)
class DirichletParams:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).reshape(-1)
        if alpha.size < 2 or not np.all(alpha > 0):
            raise ParameterError("Dirichlet alpha needs >= 2 entries, all > 0")
        object.__setattr__(self, "alpha", alpha)

    def to_dict(self):
        return {"alpha": self.alpha.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["alpha"])


@dataclass(frozen=True)
class MatrixFisherParams:
    """Matrix Fisher on SO(3): density proportional to ``exp(tr(F^T R))``."""

    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.shape != (3, 3) or not np.all(np.isfinite(F)):
            raise ParameterError("F must be a finite 3x3 matrix")
        object.__setattr__(self, "F", F)

    def to_dict(self):
        return {"F": self.F.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["F"])


# -- Fisher-Bingham ----------------------------------------------------------


def _check_dims(params, x):
    if x.shape != (params.p,):
        raise ParameterError(f"point has shape {x.shape}, parameters expect ({params.p},)")


def log_density_fb(params, x):
    """``c.x + x^T A x`` at a unit vector ``x``."""
    x = np.asarray(x, dtype=float)
    _check_dims(params, x)
    x = _check_unit(x)
    return float(params.c @ x + x @ params.A @ x)


def grad_fb(params, x):
    x = np.asarray(x, dtype=float)
    _check_dims(params, x)
    x = _check_unit(x)
    return params.c + 2.0 * (params.A @ x)


def log_density_matrix_fb(params, Q):
    Q = np.asarray(Q, dtype=float)
    return float(np.sum(params.C * Q) + np.sum(Q * (params.A @ Q)))


def grad_matrix_fb(params, Q):
    Q = np.asarray(Q, dtype=float)
    return params.C + 2.0 * (params.A @ Q)


def gaussian_equivalent(params, max_iter=200):
    """Gaussian ``N(mu, sigma)`` that conditions to ``params`` on the sphere.

    The shift ``a`` is chosen so that ``A + aI`` is negative definite and
    ``trace(sigma) = 1``; then ``sigma = -(A + aI)^{-1} / 2`` and
    ``mu = sigma c``.
    """
    A, c = params.A, params.c
    p = params.p
    lam = np.linalg.eigvalsh(A)
    lam_max = lam[-1]
    scale = max(1.0, float(np.max(np.abs(lam))))

    def excess(a):
        return np.sum(-0.5 / (lam + a)) - 1.0

    # excess rises from -1 at a = -inf to +inf as a -> -lam_max, so
    # bisect on (-inf, -lam_max). At a = -lam_max - p every term is <= 1/(2p).
    hi = -lam_max - 1e-12 * scale
    lo = -lam_max - p
    if not excess(hi) > 0:
        raise NumericError("could not bracket the trace equation")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    else:
        raise NumericError(f"bisection for the Gaussian shift did not converge in {max_iter} steps")
    a = 0.5 * (lo + hi)
    if abs(excess(a)) > 1e-10 * max(1.0, abs(a)):
        raise NumericError(f"bisection for the Gaussian shift did not converge (residual {excess(a):.2e})")
    shifted = A + a * np.eye(p)
    sigma = -0.5 * np.linalg.inv(shifted)
    sigma = 0.5 * (sigma + sigma.T)
    mu = sigma @ c
    return GaussianEquivalent(mu=mu, sigma=sigma, a=float(a))


def random_fisher_bingham(p, rng, c_scale=1.0, a_scale=2.0):
    """Random Fisher-Bingham parameters with ``|c| = c_scale`` and spread-out ``A``."""
    c = rng.standard_normal(p)
    c *= c_scale / np.linalg.norm(c)
    basis, _ = np.linalg.qr(rng.standard_normal((p, p)))
    lam = rng.uniform(-a_scale, a_scale, size=p)
    A = basis @ np.diag(lam) @ basis.T
    return FisherBinghamParams(c, 0.5 * (A + A.T))


# -- barbell -----------------------------------------------------------------


def _barbell_x(params, x):
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > params.L):
        raise DomainError(f"|x| must be <= L = {params.L}")
    return x


def barbell_radius(params, x):
    """Profile radius ``f(x)``: ``r`` on the bar, ``r cosh((|x|-l)/r)`` on the bells."""
    x = _barbell_x(params, x)
    u = np.maximum(np.abs(x) - params.l, 0.0) / params.r
    return params.r * np.cosh(u)


def surface_density_barbell(params, x):
    """Unnormalized surface measure ``sqrt(det(DB^T DB))`` as a function of ``x``."""
    x = _barbell_x(params, x)
    u = np.maximum(np.abs(x) - params.l, 0.0) / params.r
    return params.r * np.cosh(u) ** 2


def log_surface_density_barbell(params, x):
    x = _barbell_x(params, x)
    u = np.maximum(np.abs(x) - params.l, 0.0) / params.r
    out = np.log(params.r) + 2.0 * np.log(np.cosh(u))
    return float(out) if np.ndim(out) == 0 else out


def barbell_embed(params, x, theta):
    """Point ``(x, f(x) cos(theta), f(x) sin(theta))`` on the barbell surface."""
    f = barbell_radius(params, x)
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.asarray(x, dtype=float) * np.ones_like(f), f * np.cos(theta), f * np.sin(theta)], axis=-1)


# -- SO(3) and quaternions ---------------------------------------------------

# Symmetric 4x4 forms B_ij with x^T B_ij x = R(x)_ij for unit quaternions.
_ROTATION_FORMS = np.zeros((3, 3, 4, 4))


def _init_forms():
    W, X, Y, Z = range(4)
    B = _ROTATION_FORMS
    B[0, 0] = np.diag([1.0, 1.0, -1.0, -1.0])
    B[1, 1] = np.diag([1.0, -1.0, 1.0, -1.0])
    B[2, 2] = np.diag([1.0, -1.0, -1.0, 1.0])
    offdiag = {
        (0, 1): [((X, Y), 1.0), ((W, Z), -1.0)],
        (0, 2): [((X, Z), 1.0), ((W, Y), 1.0)],
        (1, 0): [((X, Y), 1.0), ((W, Z), 1.0)],
        (1, 2): [((Y, Z), 1.0), ((W, X), -1.0)],
        (2, 0): [((X, Z), 1.0), ((W, Y), -1.0)],
        (2, 1): [((Y, Z), 1.0), ((W, X), 1.0)],
    }
    for (i, j), terms in offdiag.items():
        for (a, b), coef in terms:
            B[i, j, a, b] = coef
            B[i, j, b, a] = coef


_init_forms()


def quaternion_to_rotation(x):
    """Rotation matrix of a unit quaternion ``(w, x, y, z)``; vectorized over leading axes."""
    x = np.asarray(x, dtype=float)
    return np.einsum("...a,ijab,...b->...ij", x, _ROTATION_FORMS, x)


def rotation_to_quaternion(R):
    """One of the two unit quaternions of a rotation matrix (``w >= 0``)."""
    R = np.asarray(R, dtype=float)
    # The quaternion is the top eigenvector of the Bingham form of F = R.
    K = matrix_fisher_to_bingham(MatrixFisherParams(R))
    _, vecs = np.linalg.eigh(K)
    q = vecs[:, -1]
    return q if q[0] >= 0 else -q


def matrix_fisher_to_bingham(params):
    """Bingham matrix ``A`` on ``S^3`` with ``x^T A x = tr(F^T R(x))``."""
    return np.einsum("ij,ijab->ab", params.F, _ROTATION_FORMS)


# -- Dirichlet on the sphere --------------------------------------------------


def log_density_dirichlet_on_sphere(params, q):
    """``sum((2 alpha_i - 1) log|q_i|)``: Dirichlet pulled back through ``x_i = q_i^2``.

    A coordinate with ``q_i = 0`` gives ``-inf`` when ``alpha_i > 1/2`` (the
    density vanishes there) and ``+inf`` when ``alpha_i < 1/2``.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != params.alpha.shape:
        raise ParameterError(f"point has shape {q.shape}, alpha has {params.alpha.shape}")
    q = _check_unit(q)
    expo = 2.0 * params.alpha - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expo == 0.0, 0.0, expo * np.log(np.abs(q)))
    return float(np.sum(terms))


def grad_dirichlet_on_sphere(params, q):
    q = np.asarray(q, dtype=float)
    q = _check_unit(q)
    expo = 2.0 * params.alpha - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(expo == 0.0, 0.0, expo / q)


# -- targets -----------------------------------------------------------------


@dataclass(frozen=True)
class Target:
    """A sampling target: a manifold plus log-density and ambient gradient callables."""

    manifold: ManifoldSpec
    log_density: Callable
    grad_log_density: Callable
    name: str = "custom"


def uniform_target(manifold):
    zero = np.zeros(manifold.shape)
    return Target(manifold, lambda q: 0.0, lambda q: zero, name="uniform")


def fisher_bingham_target(params, manifold=None):
    # Unchecked fast paths: the sampler keeps q on the sphere itself.
    c, A = params.c, params.A
    if manifold is None:
        manifold = ManifoldSpec.sphere(params.p - 1)
    return Target(
        manifold,
        lambda x: float(c @ x + x @ A @ x),
        lambda x: c + 2.0 * (A @ x),
        name="fisher-bingham",
    )


def bingham_target(A, manifold=None):
    A = _symmetric(A)
    return fisher_bingham_target(FisherBinghamParams(np.zeros(A.shape[0]), A), manifold)


def matrix_fisher_target(params):
    """Matrix Fisher on SO(3), sampled as Bingham on unit quaternions."""
    A = matrix_fisher_to_bingham(params)
    t = bingham_target(A, ManifoldSpec.so3())
    return Target(t.manifold, t.log_density, t.grad_log_density, name="matrix-fisher")


def matrix_fisher_bingham_target(params):
    p, k = params.C.shape
    return Target(
        ManifoldSpec.stiefel(k, p),
        lambda Q: log_density_matrix_fb(params, Q),
        lambda Q: grad_matrix_fb(params, Q),
        name="matrix-fisher-bingham",
    )


def dirichlet_target(params):
    expo = 2.0 * params.alpha - 1.0

    def log_density(q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(np.sum(np.where(expo == 0.0, 0.0, expo * np.log(np.abs(q)))))

    def grad(q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(expo == 0.0, 0.0, expo / q)

    return Target(ManifoldSpec.simplex(params.alpha.size - 1), log_density, grad, name="dirichlet")
