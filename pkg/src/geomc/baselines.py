"""Exact samplers by rejection, used standalone and as oracles for GMC.

* :func:`naive_conditional_fb` conditions a Gaussian on a thin shell around
  the unit sphere.
* :func:`acg_rejection_bingham` draws Bingham variates using an angular
  central Gaussian envelope; :func:`bingham_envelope_fb` stacks a second
  rejection step on top for Fisher-Bingham, and
  :func:`matrix_fisher_sampler` reuses it on unit quaternions.
* :func:`barbell_rejection_x` and :func:`barbell_uniform_surface` sample
  the barbell surface uniformly by area.
"""
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .exceptions import NumericError, ParameterError
from .targets import (
    BarbellParams,
    barbell_embed,
    matrix_fisher_to_bingham,
    quaternion_to_rotation,
    surface_density_barbell,
    _symmetric,
)

BATCH = 1 << 20


@dataclass
class RejectionReport:
    """Outcome of a rejection sampler.

    ``envelope_constant`` is the bound ``M`` with target <= M * envelope
    (unnormalized). ``inner`` holds the report of a nested proposal sampler,
    when there is one.
    """

    n_proposals: int
    n_accepted: int
    samples: np.ndarray
    envelope_constant: float
    inner: "RejectionReport" = None
    aux: dict = None

    @property
    def acceptance_rate(self):
        return self.n_accepted / self.n_proposals if self.n_proposals else float("nan")


def naive_conditional_fb(g, nu, n_proposals, rng, batch_size=BATCH):
    """Keep Gaussian draws with ``| |Y| - 1 | < nu`` and normalize them to the sphere.

    Parameters
    ----------
    g : GaussianEquivalent
        From :func:`geomc.targets.gaussian_equivalent`.
    nu : float
        Half-width of the acceptance shell.
    n_proposals : int
    rng : numpy.random.Generator
    """
    if not nu > 0:
        raise ParameterError(f"nu must be > 0, got {nu}")
    try:
        chol = np.linalg.cholesky(g.sigma)
    except np.linalg.LinAlgError:
        raise ParameterError("sigma is not positive definite") from None
    p = g.mu.shape[0]
    kept = []
    remaining = int(n_proposals)
    while remaining > 0:
        n = min(batch_size, remaining)
        y = g.mu + rng.standard_normal((n, p)) @ chol.T
        r = np.linalg.norm(y, axis=1)
        ok = np.abs(r - 1.0) < nu
        kept.append(y[ok] / r[ok, None])
        remaining -= n
    samples = np.concatenate(kept) if kept else np.empty((0, p))
    return RejectionReport(int(n_proposals), len(samples), samples, float("nan"))


def _acg_b(lam, max_iter=200):
    # Unique root in [1, q] of sum 1 / (b + 2 lam_i) = 1, lam_i >= 0, min lam = 0.
    q = lam.size

    def f(b):
        return np.sum(1.0 / (b + 2.0 * lam)) - 1.0

    lo, hi = 1.0, float(q)
    if f(hi) >= 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            return mid
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    raise NumericError("root-finding for the ACG envelope parameter did not converge")


@dataclass(frozen=True)
class AcgEnvelope:
    """ACG envelope for ``exp(x^T A x)``: with ``K = lam_max I - A`` (PSD),
    ``exp(-x^T K x) <= M (x^T Omega x)^{-q/2}`` where ``Omega = I + 2K/b``."""

    K: np.ndarray
    omega: np.ndarray
    b: float
    log_M: float

    @classmethod
    def for_bingham(cls, A):
        A = _symmetric(A)
        q = A.shape[0]
        lam_max = np.linalg.eigvalsh(A)[-1]
        K = lam_max * np.eye(q) - A
        lam = np.clip(np.linalg.eigvalsh(K), 0.0, None)
        b = _acg_b(lam)
        omega = np.eye(q) + (2.0 / b) * K
        log_M = -0.5 * (q - b) + 0.5 * q * np.log(q / b)
        return cls(K, omega, b, float(log_M))

    def log_ratio(self, x):
        """``log(bingham / (M * acg))`` at unit vectors ``x`` (rows); always <= 0."""
        q = self.K.shape[0]
        u = np.einsum("...i,ij,...j->...", x, self.K, x)
        w = np.einsum("...i,ij,...j->...", x, self.omega, x)
        return -u + 0.5 * q * np.log(w) - self.log_M


def acg_rejection_bingham(A, n_draws, rng, n_proposals=None, batch_size=1 << 16):
    """Exact Bingham draws, density proportional to ``exp(x^T A x)`` on the unit sphere.

    Proposals come from the angular central Gaussian with ``Omega`` as in
    :class:`AcgEnvelope`, i.e. normalized ``N(0, Omega^{-1})`` draws. Either
    ``n_draws`` accepted samples are produced, or, if ``n_proposals`` is
    given, exactly that many proposals are made and all acceptances kept.
    """
    env = AcgEnvelope.for_bingham(A)
    q = env.K.shape[0]
    chol = np.linalg.cholesky(np.linalg.inv(env.omega))
    kept, n_acc, n_prop = [], 0, 0
    while (n_acc < n_draws) if n_proposals is None else (n_prop < n_proposals):
        n = batch_size if n_proposals is None else min(batch_size, n_proposals - n_prop)
        y = rng.standard_normal((n, q)) @ chol.T
        x = y / np.linalg.norm(y, axis=1, keepdims=True)
        ok = np.log(rng.uniform(size=n)) < env.log_ratio(x)
        if n_proposals is None:
            need = n_draws - n_acc
            idx = np.flatnonzero(ok)
            if idx.size >= need:
                # Stop at the proposal that completes the request.
                last = idx[need - 1]
                ok[last + 1:] = False
                n = last + 1
        kept.append(x[:n][ok[:n]])
        n_acc += int(ok[:n].sum())
        n_prop += n
    samples = np.concatenate(kept) if kept else np.empty((0, q))
    return RejectionReport(n_prop, n_acc, samples, float(np.exp(env.log_M)))


def bingham_envelope_fb(params, n_draws, rng):
    """Exact Fisher-Bingham draws by thinning Bingham(A) proposals.

    The linear term is bounded by ``exp(c.x) <= exp(|c|)``, so a Bingham
    proposal is kept with probability ``exp(c.x - |c|)``.
    """
    c = params.c
    cn = float(np.linalg.norm(c))
    kept, n_acc, n_prop = [], 0, 0
    inner_prop = inner_acc = 0
    while n_acc < n_draws:
        need = n_draws - n_acc
        batch = max(64, int(1.2 * need * np.exp(min(2.0 * cn, 20.0))))
        rep = acg_rejection_bingham(params.A, batch, rng)
        inner_prop += rep.n_proposals
        inner_acc += rep.n_accepted
        x = rep.samples
        ok = np.log(rng.uniform(size=len(x))) < x @ c - cn
        idx = np.flatnonzero(ok)
        if idx.size >= need:
            last = idx[need - 1]
            x, ok = x[: last + 1], ok[: last + 1]
        kept.append(x[ok])
        n_acc += int(ok.sum())
        n_prop += len(x)
    q = params.p
    samples = np.concatenate(kept) if kept else np.empty((0, q))
    inner = RejectionReport(inner_prop, inner_acc, np.empty((0, q)), float("nan"))
    return RejectionReport(n_prop, n_acc, samples, float(np.exp(cn)), inner=inner)


def matrix_fisher_sampler(params, n_draws, rng, n_proposals=None):
    """Exact matrix Fisher rotations via Bingham sampling on unit quaternions.

    ``samples`` in the returned report are ``(n, 3, 3)`` rotation matrices;
    the underlying quaternions are in ``report.inner.samples``.
    """
    A = matrix_fisher_to_bingham(params)
    rep = acg_rejection_bingham(A, n_draws, rng, n_proposals=n_proposals)
    rots = quaternion_to_rotation(rep.samples)
    return RejectionReport(rep.n_proposals, rep.n_accepted, rots, rep.envelope_constant, inner=rep)


def barbell_envelope(params):
    """Height ``M = r cosh^2((L - l) / r)`` of the uniform envelope over ``[-L, L]``."""
    return params.r * np.cosh((abs(params.L) - params.l) / params.r) ** 2


def barbell_rejection_x(params, n_proposals, rng):
    """Accept-reject draws of ``x`` with density proportional to the barbell surface measure.

    Proposals are ``x ~ U(-L, L)`` with heights ``eta ~ U(0, M)``; all
    ``x`` proposals are drawn first, then all heights.
    """
    n = int(n_proposals)
    M = barbell_envelope(params)
    xprop = rng.uniform(-params.L, params.L, size=n)
    eta = rng.uniform(0.0, M, size=n)
    ok = eta < surface_density_barbell(params, xprop)
    return RejectionReport(n, int(ok.sum()), xprop[ok], float(M))


def barbell_surface_integral(params, n_panels=10_000):
    """Composite Simpson quadrature of the surface density over ``[-L, L]``."""
    x = np.linspace(-params.L, params.L, n_panels + 1)
    return float(simpson(surface_density_barbell(params, x), x=x))


def barbell_acceptance_rate(params, n_panels=10_000):
    """Expected acceptance rate of :func:`barbell_rejection_x`."""
    return barbell_surface_integral(params, n_panels) / (2.0 * params.L * barbell_envelope(params))


def barbell_uniform_surface(params, n_draws, rng, batch_size=1 << 16):
    """Points uniform by surface area on the barbell, as ``(n_draws, 3)`` samples.

    Accepted ``x`` values are paired with ``theta ~ U[0, 2 pi)``; the angles
    are kept in ``report.aux["theta"]``.
    """
    M = barbell_envelope(params)
    xs, n_prop, n_acc = [], 0, 0
    while n_acc < n_draws:
        xprop = rng.uniform(-params.L, params.L, size=batch_size)
        eta = rng.uniform(0.0, M, size=batch_size)
        ok = eta < surface_density_barbell(params, xprop)
        idx = np.flatnonzero(ok)
        need = n_draws - n_acc
        n = batch_size
        if idx.size >= need:
            n = idx[need - 1] + 1
        xs.append(xprop[:n][ok[:n]])
        n_prop += int(n)
        n_acc += int(ok[:n].sum())
    x = np.concatenate(xs) if xs else np.empty(0)
    theta = rng.uniform(0.0, 2.0 * np.pi, size=len(x))
    pts = barbell_embed(params, x, theta) if len(x) else np.empty((0, 3))
    return RejectionReport(n_prop, n_acc, pts, float(M), aux={"theta": theta, "x": x})
