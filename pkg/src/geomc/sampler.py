"""Geodesic Monte Carlo: HMC with an exact geodesic drift and gradient kicks.

One integrator step is a half kick, an exact geodesic flow for the full
step, and a second half kick. A kick adds the scaled log-density gradient
to the velocity and projects the result back onto the tangent space. The
kinetic energy is ``|v|^2 / 2`` in ambient coordinates.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidPointError, KickError, ParameterError
from .manifolds import (
    ManifoldSpec,
    PhaseState,
    _project,
    ball_to_sphere,
    check_point,
    geodesic_flow,
    sample_tangent_gaussian,
    sphere_to_ball,
)
from .targets import Target


@dataclass(frozen=True)
class GmcConfig:
    """Step size, trajectory length, temperature and seed for a GMC run."""

    epsilon: float
    n_steps: int
    temperature: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.epsilon) and self.epsilon > 0):
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError(f"n_steps must be an integer >= 1, got {self.n_steps}")
        if not self.temperature >= 1:
            raise ParameterError(f"temperature must be >= 1, got {self.temperature}")

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "n_steps": int(self.n_steps),
            "temperature": self.temperature,
            "seed": self.seed,
        }


@dataclass
class ChainState:
    phase: PhaseState
    log_density: float
    rng: np.random.Generator


@dataclass
class RunRecord:
    """Draws and acceptance statistics from one chain.

    ``samples`` has shape ``(n_draws, *shape)``; ``delta_h`` holds the
    energy error of every post-burn-in proposal.
    """

    samples: np.ndarray
    accept_count: int
    total: int
    delta_h: np.ndarray
    config: dict
    manifold: ManifoldSpec
    n_divergent: int = 0
    elapsed: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def accept_rate(self):
        return self.accept_count / self.total if self.total else float("nan")


# -- integrator --------------------------------------------------------------


def kick(target, s, dt, temperature=1.0):
    """Velocity update ``v <- P_q(v + dt * grad log pi(q) / T)``; ``q`` is unchanged.

    Raises
    ------
    KickError
        If the gradient at ``s.q`` is not finite.
    """
    if dt == 0:
        return s
    g = np.asarray(target.grad_log_density(s.q), dtype=float)
    if not np.all(np.isfinite(g)):
        raise KickError(f"non-finite log-density gradient at q={s.q!r}", q=s.q)
    v = s.v + (dt / temperature) * g.reshape(s.v.shape)
    return PhaseState(s.q, _project(target.manifold, s.q, v))


def splitting_step(target, s, epsilon, temperature=1.0):
    """Half kick, geodesic flow for ``epsilon``, half kick."""
    s = kick(target, s, 0.5 * epsilon, temperature)
    s = geodesic_flow(target.manifold, s, epsilon)
    return kick(target, s, 0.5 * epsilon, temperature)


def integrate(target, s, epsilon, n_steps, temperature=1.0, trace=False):
    """Run ``n_steps`` splitting steps; with ``trace=True`` return every state."""
    path = [s] if trace else None
    for _ in range(n_steps):
        s = splitting_step(target, s, epsilon, temperature)
        if trace:
            path.append(s)
    return path if trace else s


def hamiltonian(target, s, temperature=1.0, log_density=None):
    if log_density is None:
        log_density = target.log_density(s.q)
    return -log_density / temperature + 0.5 * float(np.sum(s.v * s.v))


# -- Markov chain ------------------------------------------------------------


def init_chain(target, initial, seed_or_rng):
    q = check_point(target.manifold, initial, tol=1e-10)
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else np.random.default_rng(seed_or_rng)
    logp = float(target.log_density(q))
    return ChainState(PhaseState(q, np.zeros_like(q)), logp, rng)


def propose_and_accept(target, chain, cfg):
    """One GMC transition.

    Refreshes the velocity, integrates ``cfg.n_steps`` splitting steps and
    applies the Metropolis test on ``H = -log pi(q) / T + |v|^2 / 2``.
    Proposals with a non-finite energy error, including those whose
    trajectory hits a non-finite gradient, are rejected.

    Returns
    -------
    chain : ChainState
    accepted : bool
    delta_h : float
        ``inf`` marks a diverged proposal.
    """
    T = cfg.temperature
    rng = chain.rng
    q0 = chain.phase.q
    v0 = sample_tangent_gaussian(target.manifold, q0, rng)
    log_u = np.log(rng.uniform())
    start = PhaseState(q0, v0)
    h0 = hamiltonian(target, start, T, chain.log_density)
    try:
        with np.errstate(all="ignore"):
            end = integrate(target, start, cfg.epsilon, cfg.n_steps, T)
            logp1 = float(target.log_density(end.q))
        delta_h = hamiltonian(target, end, T, logp1) - h0
    except KickError:
        delta_h = float("inf")
    if not np.isfinite(delta_h):
        return ChainState(PhaseState(q0, v0), chain.log_density, rng), False, float("inf")
    if log_u < -delta_h:
        return ChainState(end, logp1, rng), True, float(delta_h)
    return ChainState(PhaseState(q0, v0), chain.log_density, rng), False, float(delta_h)


def _default_initial(m):
    if m.kind == "stiefel":
        return np.eye(m.p, m.k)
    q = np.zeros(m.shape)
    q[-1] = 1.0
    if m.kind == "simplex":
        q[:] = 1.0 / np.sqrt(m.dim + 1)
    return q


def sample(target, cfg, n_draws, n_burnin=0, initial=None, rng=None):
    """Draw ``n_draws`` post-burn-in states of a GMC chain.

    Parameters
    ----------
    target : Target
    cfg : GmcConfig
    n_draws, n_burnin : int
    initial : array-like, optional
        Starting point on ``target.manifold``; a fixed default point is used
        when omitted.
    rng : numpy.random.Generator, optional
        Overrides the generator seeded from ``cfg.seed``.

    Returns
    -------
    RunRecord
    """
    m = target.manifold
    if initial is None:
        initial = _default_initial(m)
    chain = init_chain(target, initial, rng if rng is not None else cfg.seed)
    t0 = time.perf_counter()
    for _ in range(n_burnin):
        chain, _, _ = propose_and_accept(target, chain, cfg)
    samples = np.empty((n_draws,) + m.shape)
    delta_h = np.empty(n_draws)
    accepted = 0
    for i in range(n_draws):
        chain, acc, dh = propose_and_accept(target, chain, cfg)
        accepted += acc
        delta_h[i] = dh
        samples[i] = chain.phase.q
    return RunRecord(
        samples=samples,
        accept_count=accepted,
        total=n_draws,
        delta_h=delta_h,
        config=cfg.to_dict(),
        manifold=m,
        n_divergent=int(np.sum(~np.isfinite(delta_h))),
        elapsed=time.perf_counter() - t0,
    )


# -- ball constraint via the sphere lift -------------------------------------


def lift_ball_target(D, log_density, grad_log_density):
    """Target on ``S^D`` whose projection to the first ``D`` coordinates is the ball target.

    The sphere density is ``pi_B(theta) * |q_{D+1}|``: the factor converts
    the ball volume element to the sphere's area element. Both hemispheres
    carry a copy, so no sign bookkeeping is needed.
    """
    m = ManifoldSpec.ball(D)

    def logp(q):
        with np.errstate(divide="ignore"):
            return float(log_density(q[:-1])) + float(np.log(abs(q[-1])))

    def grad(q):
        g = np.empty_like(q)
        g[:-1] = grad_log_density(q[:-1])
        with np.errstate(divide="ignore"):
            g[-1] = 1.0 / q[-1]
        return g

    return Target(m, logp, grad, name="ball-lift")


def uniform_ball_target(D):
    zero = np.zeros(D)
    return lift_ball_target(D, lambda theta: 0.0, lambda theta: zero)


def sample_on_ball(log_density, grad_log_density, D, cfg, n_draws, n_burnin=0, initial=None):
    """GMC on the unit ball ``B^D`` by sampling the lifted target on ``S^D``.

    ``log_density`` and ``grad_log_density`` act on ball points
    ``theta`` (length ``D``), with density relative to Lebesgue measure.
    Returned samples are ball coordinates; the sphere chain is kept in
    ``record.extra["sphere_samples"]``.
    """
    target = lift_ball_target(D, log_density, grad_log_density)
    if initial is None:
        initial = np.zeros(D)
    initial = np.asarray(initial, dtype=float)
    if initial.shape != (D,):
        raise InvalidPointError(f"initial ball point must have shape ({D},)")
    rec = sample(target, cfg, n_draws, n_burnin, ball_to_sphere(initial, 1))
    rec.extra["sphere_samples"] = rec.samples
    rec.samples = sphere_to_ball(rec.samples)
    return rec
