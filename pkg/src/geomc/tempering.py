"""Parallel tempering over a ladder of GMC chains."""
import time
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ParameterError
from .sampler import RunRecord, _default_initial, init_chain, propose_and_accept


@dataclass(frozen=True)
class TemperingLadder:
    """Ascending temperatures starting at exactly 1, and the swap cadence."""

    temperatures: tuple
    swap_interval: int = 1

    def __post_init__(self):
        temps = tuple(float(t) for t in self.temperatures)
        if not temps or temps[0] != 1.0:
            raise ParameterError("ladder must start at temperature 1")
        if any(b <= a for a, b in zip(temps, temps[1:])):
            raise ParameterError("ladder temperatures must be strictly ascending")
        if int(self.swap_interval) < 1:
            raise ParameterError("swap_interval must be >= 1")
        object.__setattr__(self, "temperatures", temps)

    @classmethod
    def geometric(cls, t_max, n_rungs, swap_interval=1):
        return cls(tuple(np.geomspace(1.0, t_max, n_rungs)), swap_interval)


def swap_log_ratio(t_i, t_j, logp_i, logp_j):
    """Log acceptance ratio for exchanging states between temperatures ``t_i`` and ``t_j``."""
    return (1.0 / t_i - 1.0 / t_j) * (logp_j - logp_i)


@dataclass
class TemperingResult:
    record: RunRecord
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    hot_accept_rates: np.ndarray

    @property
    def swap_rates(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.swap_accepts / self.swap_attempts


def parallel_tempering(target, ladder, cfg, n_draws, n_burnin=0, initial=None):
    """Cold-chain draws from replica exchange across ``ladder``.

    Every chain runs GMC with ``cfg``'s step size and trajectory length at
    its own temperature. Every ``ladder.swap_interval`` iterations each
    adjacent pair proposes an exchange of positions. The cold chain's
    generator is seeded exactly as :func:`~geomc.sampler.sample` would seed
    it, so a one-rung ladder reproduces ``sample`` draw for draw.
    """
    temps = ladder.temperatures
    n = len(temps)
    m = target.manifold
    if initial is None:
        initial = _default_initial(m)
    children = np.random.SeedSequence(cfg.seed).spawn(n)
    swap_rng = np.random.default_rng(children[0])
    chains = [init_chain(target, initial, cfg.seed)]
    chains += [init_chain(target, initial, np.random.default_rng(children[i])) for i in range(1, n)]
    cfgs = [replace(cfg, temperature=t) for t in temps]
    attempts = np.zeros(max(n - 1, 0), dtype=int)
    accepts = np.zeros(max(n - 1, 0), dtype=int)
    hot_acc = np.zeros(n, dtype=int)

    samples = np.empty((n_draws,) + m.shape)
    delta_h = np.empty(n_draws)
    cold_acc = 0
    t0 = time.perf_counter()
    for it in range(n_burnin + n_draws):
        for i in range(n):
            chains[i], acc, dh = propose_and_accept(target, chains[i], cfgs[i])
            hot_acc[i] += acc
            if i == 0 and it >= n_burnin:
                cold_acc += acc
                delta_h[it - n_burnin] = dh
        if n > 1 and (it + 1) % ladder.swap_interval == 0:
            for i in range(n - 1):
                a, b = chains[i], chains[i + 1]
                log_r = swap_log_ratio(temps[i], temps[i + 1], a.log_density, b.log_density)
                attempts[i] += 1
                if np.log(swap_rng.uniform()) < log_r:
                    accepts[i] += 1
                    chains[i] = replace(a, phase=b.phase, log_density=b.log_density)
                    chains[i + 1] = replace(b, phase=a.phase, log_density=a.log_density)
        if it >= n_burnin:
            samples[it - n_burnin] = chains[0].phase.q

    rec = RunRecord(
        samples=samples,
        accept_count=cold_acc,
        total=n_draws,
        delta_h=delta_h,
        config={**cfg.to_dict(), "temperatures": list(temps), "swap_interval": ladder.swap_interval},
        manifold=m,
        n_divergent=int(np.sum(~np.isfinite(delta_h))),
        elapsed=time.perf_counter() - t0,
    )
    total_iters = n_burnin + n_draws
    return TemperingResult(rec, attempts, accepts, hot_acc / max(total_iters, 1))
