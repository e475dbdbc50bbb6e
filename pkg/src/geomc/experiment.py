"""Experiment configuration, validation and sampler dispatch for the CLI.

A configuration is one JSON document::

    {
      "experiment": "fb-gmc",
      "manifold": {"kind": "sphere", "dim": 4},
      "target": {"kind": "fisher-bingham", "c": [...], "A": [[...]]},
      "sampler": {"kind": "gmc", "epsilon": 0.3, "n_steps": 10},
      "n_draws": 5000,
      "n_burnin": 500,
      "seed": 1,
      "output_dir": "runs/fb-gmc",
      "histograms": {"coordinates": [4], "bins": 60}
    }

See the README for every supported manifold / target / sampler pairing.
"""
import json
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import baselines, diagnostics
from .exceptions import ConfigError, GeomcError
from .io import coordinate_names, flatten_samples
from .manifolds import ManifoldSpec
from .sampler import GmcConfig, lift_ball_target, sample, sample_on_ball
from .targets import (
    BarbellParams,
    DirichletParams,
    FisherBinghamParams,
    MatrixFisherBinghamParams,
    MatrixFisherParams,
    bingham_target,
    dirichlet_target,
    fisher_bingham_target,
    gaussian_equivalent,
    matrix_fisher_bingham_target,
    matrix_fisher_target,
    matrix_fisher_to_bingham,
    uniform_target,
)
from .tempering import TemperingLadder, parallel_tempering

SAMPLERS = ("gmc", "tempered-gmc", "naive-conditional", "acg-bingham", "fb-envelope", "matrix-fisher", "barbell")
MCMC_SAMPLERS = ("gmc", "tempered-gmc")

# (sampler, manifold kind) -> allowed target kinds
PAIRINGS = {
    ("gmc", "sphere"): ("uniform", "fisher-bingham", "bingham"),
    ("gmc", "so3"): ("uniform", "matrix-fisher", "bingham"),
    ("gmc", "stiefel"): ("uniform", "matrix-fisher-bingham"),
    ("gmc", "simplex"): ("dirichlet",),
    ("gmc", "ball"): ("uniform", "gaussian"),
    ("naive-conditional", "sphere"): ("fisher-bingham", "bingham"),
    ("acg-bingham", "sphere"): ("bingham", "uniform"),
    ("acg-bingham", "so3"): ("bingham", "matrix-fisher", "uniform"),
    ("fb-envelope", "sphere"): ("fisher-bingham", "bingham", "uniform"),
    ("matrix-fisher", "so3"): ("matrix-fisher",),
    ("barbell", "barbell"): ("uniform",),
}
for (_s, _m), _t in list(PAIRINGS.items()):
    if _s == "gmc":
        PAIRINGS[("tempered-gmc", _m)] = _t


def _line_of(text, field):
    """1-based line of a dotted field such as ``sampler.epsilon``, if found."""
    if text is None:
        return None
    lines = text.splitlines()
    start, found = 0, None
    for key in field.split("."):
        needle = json.dumps(key)
        for i in range(start, len(lines)):
            if needle in lines[i]:
                found, start = i + 1, i
                break
        else:
            return found
    return found


@dataclass
class ExperimentConfig:
    name: str
    manifold: dict
    target: dict
    sampler: dict
    n_draws: int
    n_burnin: int
    seed: int
    output_dir: str
    histograms: dict
    source: str = None

    def echo(self):
        return {
            "experiment": self.name,
            "manifold": self.manifold,
            "target": self.target,
            "sampler": self.sampler,
            "n_draws": self.n_draws,
            "n_burnin": self.n_burnin,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "histograms": self.histograms,
        }


def parse_config(text, seed=None, output_dir=None):
    """Parse and validate a JSON configuration document.

    Raises
    ------
    ConfigError
        With the offending line when it can be located.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object", line=1)

    def fail(field, msg):
        line = _line_of(text, field)
        if line is None and "." not in field:
            line = 1  # a missing top-level field belongs to the root object
        raise ConfigError(f"{field}: {msg}", field=field, line=line)

    def require(d, key, where):
        if key not in d:
            fail(where + key if where else key, "missing required field")
        return d[key]

    for key in ("manifold", "target", "sampler"):
        if not isinstance(require(doc, key, ""), dict):
            fail(key, "must be an object")
        if "kind" not in doc[key]:
            fail(f"{key}.kind", "missing required field")
    if "seed" not in doc and seed is None:
        fail("seed", "missing required field (runs are never seeded from the clock)")
    seed = doc.get("seed") if seed is None else seed
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        fail("seed", f"must be a non-negative integer, got {seed!r}")

    man, tgt, smp = doc["manifold"], doc["target"], doc["sampler"]
    skind, mkind, tkind = smp["kind"], man["kind"], tgt["kind"]
    if skind not in SAMPLERS:
        fail("sampler.kind", f"unknown sampler {skind!r}; expected one of {', '.join(SAMPLERS)}")
    allowed_targets = PAIRINGS.get((skind, mkind))
    if allowed_targets is None:
        fail("manifold.kind", f"sampler {skind!r} does not support manifold {mkind!r}")
    if tkind not in allowed_targets:
        fail("target.kind", f"sampler {skind!r} on {mkind!r} supports targets {', '.join(allowed_targets)}; got {tkind!r}")

    n_draws = doc.get("n_draws", 0 if skind == "naive-conditional" else None)
    if n_draws is None:
        fail("n_draws", "missing required field")
    if not isinstance(n_draws, int) or n_draws < 0:
        fail("n_draws", f"must be a non-negative integer, got {n_draws!r}")
    n_burnin = doc.get("n_burnin", 0)
    if not isinstance(n_burnin, int) or n_burnin < 0:
        fail("n_burnin", f"must be a non-negative integer, got {n_burnin!r}")

    if skind in MCMC_SAMPLERS:
        for key in ("epsilon", "n_steps"):
            require(smp, key, "sampler.")
        eps, steps = smp["epsilon"], smp["n_steps"]
        if not isinstance(eps, (int, float)) or not eps > 0:
            fail("sampler.epsilon", f"must be > 0, got {eps!r}")
        if not isinstance(steps, int) or isinstance(steps, bool) or steps < 1:
            fail("sampler.n_steps", f"must be an integer >= 1, got {steps!r}")
        if skind == "tempered-gmc":
            temps = require(smp, "temperatures", "sampler.")
            try:
                TemperingLadder(tuple(temps), int(smp.get("swap_interval", 1)))
            except (GeomcError, TypeError, ValueError) as exc:
                fail("sampler.temperatures", str(exc))
    if skind == "naive-conditional":
        nu = require(smp, "nu", "sampler.")
        if not isinstance(nu, (int, float)) or not nu > 0:
            fail("sampler.nu", f"must be > 0, got {nu!r}")
        n_prop = require(smp, "n_proposals", "sampler.")
        if not isinstance(n_prop, int) or n_prop < 1:
            fail("sampler.n_proposals", f"must be a positive integer, got {n_prop!r}")

    try:
        build_manifold(man)
        if mkind != "barbell":
            _build_target(man, tgt)
    except ConfigError:
        raise
    except (GeomcError, KeyError, TypeError, ValueError) as exc:
        detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
        field = "manifold" if "manifold" in str(exc) else "target"
        fail(field, detail)

    hist = doc.get("histograms") or {}
    if not isinstance(hist, dict):
        fail("histograms", "must be an object")

    out = output_dir or doc.get("output_dir") or doc.get("experiment") or "run"
    return ExperimentConfig(
        name=str(doc.get("experiment", "experiment")),
        manifold=man,
        target=tgt,
        sampler=smp,
        n_draws=n_draws,
        n_burnin=n_burnin,
        seed=seed,
        output_dir=out,
        histograms=hist,
        source=text,
    )


def build_manifold(d):
    if d["kind"] == "barbell":
        return BarbellParams.from_dict(d)
    return ManifoldSpec.from_dict(d)


def _build_target(man, tgt):
    m = ManifoldSpec.from_dict(man)
    kind = tgt["kind"]
    if m.kind == "ball":
        if kind == "uniform":
            return None
        mu = np.asarray(tgt["mean"], dtype=float)
        prec = np.asarray(tgt["precision"], dtype=float)
        if mu.shape != (m.dim,) or prec.shape != (m.dim, m.dim):
            raise ValueError(f"ball gaussian target needs mean ({m.dim},) and precision ({m.dim}, {m.dim})")
        return (mu, prec)
    if kind == "uniform":
        return uniform_target(m)
    if kind == "fisher-bingham":
        p = FisherBinghamParams.from_dict(tgt)
        _check_dim(m, p.p)
        return fisher_bingham_target(p, m)
    if kind == "bingham":
        A = np.asarray(tgt["A"], dtype=float)
        _check_dim(m, A.shape[0])
        return bingham_target(A, m)
    if kind == "matrix-fisher":
        return matrix_fisher_target(MatrixFisherParams.from_dict(tgt))
    if kind == "matrix-fisher-bingham":
        p = MatrixFisherBinghamParams.from_dict(tgt)
        if p.C.shape != m.shape:
            raise ValueError(f"target C has shape {p.C.shape}, manifold frames are {m.shape}")
        return matrix_fisher_bingham_target(p)
    if kind == "dirichlet":
        p = DirichletParams.from_dict(tgt)
        _check_dim(m, p.alpha.size)
        return dirichlet_target(p)
    raise ValueError(f"unknown target kind {kind!r}")


def _check_dim(m, n):
    if n != m.ambient_dim:
        raise ValueError(f"target dimension {n} does not match manifold ambient dimension {m.ambient_dim}")


@dataclass
class RunOutput:
    names: list
    rows: np.ndarray
    diagnostics: dict
    output_kind: str
    histogram_columns: list


def _uniform_sphere_cdf(D):
    # Each coordinate of a uniform point on S^D satisfies (x + 1) / 2 ~ Beta(D/2, D/2).
    dist = stats.beta(D / 2.0, D / 2.0)
    return lambda x: dist.cdf((np.asarray(x) + 1.0) / 2.0)


def run_experiment(cfg):
    """Run the configured sampler and collect rows plus diagnostics (no file I/O)."""
    skind = cfg.sampler["kind"]
    mkind = cfg.manifold["kind"]
    rng = np.random.default_rng(cfg.seed)
    extra = {"sampler": skind}
    correlated = skind in MCMC_SAMPLERS
    reference = {}
    t0 = time.perf_counter()

    if mkind == "barbell":
        params = build_manifold(cfg.manifold)
        rep = baselines.barbell_uniform_surface(params, cfg.n_draws, rng)
        samples = rep.samples
        accept = rep.acceptance_rate
        extra.update(
            n_proposals=rep.n_proposals,
            n_accepted=rep.n_accepted,
            envelope_constant=rep.envelope_constant,
            predicted_acceptance_rate=baselines.barbell_acceptance_rate(params),
        )
        out_kind, shape = "barbell", (3,)
    else:
        m = ManifoldSpec.from_dict(cfg.manifold)
        target = _build_target(cfg.manifold, cfg.target)
        out_kind, shape = m.kind, m.shape
        if skind in MCMC_SAMPLERS:
            gcfg = GmcConfig(float(cfg.sampler["epsilon"]), int(cfg.sampler["n_steps"]), seed=cfg.seed)
            if m.kind == "ball":
                samples, accept, rec = _run_ball(cfg, m, target, gcfg)
                shape = (m.dim,)
            else:
                if skind == "gmc":
                    rec = sample(target, gcfg, cfg.n_draws, cfg.n_burnin)
                else:
                    ladder = TemperingLadder(tuple(cfg.sampler["temperatures"]), int(cfg.sampler.get("swap_interval", 1)))
                    res = parallel_tempering(target, ladder, gcfg, cfg.n_draws, cfg.n_burnin)
                    rec = res.record
                    extra["swap_rates"] = res.swap_rates.tolist()
                    extra["replica_accept_rates"] = res.hot_accept_rates.tolist()
                samples = rec.samples
                accept = rec.accept_rate
                if m.kind == "simplex":
                    samples = samples ** 2
            dh = rec.delta_h[np.isfinite(rec.delta_h)]
            extra.update(
                n_divergent=rec.n_divergent,
                median_abs_delta_h=float(np.median(np.abs(dh))) if dh.size else None,
            )
        elif skind == "naive-conditional":
            fb = _fb_params(cfg.target, m)
            rep = baselines.naive_conditional_fb(gaussian_equivalent(fb), float(cfg.sampler["nu"]), int(cfg.sampler["n_proposals"]), rng)
            samples = rep.samples[: cfg.n_draws] if cfg.n_draws else rep.samples
            accept = rep.acceptance_rate
            extra.update(n_proposals=rep.n_proposals, n_accepted=rep.n_accepted, gaussian_shift=gaussian_equivalent(fb).a)
        elif skind == "acg-bingham":
            if cfg.target["kind"] == "matrix-fisher":
                A = matrix_fisher_to_bingham(MatrixFisherParams.from_dict(cfg.target))
            elif cfg.target["kind"] == "uniform":
                A = np.zeros((m.ambient_dim, m.ambient_dim))
            else:
                A = np.asarray(cfg.target["A"], dtype=float)
            rep = baselines.acg_rejection_bingham(A, cfg.n_draws, rng)
            samples, accept = rep.samples, rep.acceptance_rate
            extra.update(n_proposals=rep.n_proposals, n_accepted=rep.n_accepted, envelope_constant=rep.envelope_constant)
        elif skind == "fb-envelope":
            fb = _fb_params(cfg.target, m)
            rep = baselines.bingham_envelope_fb(fb, cfg.n_draws, rng)
            samples, accept = rep.samples, rep.acceptance_rate
            extra.update(n_proposals=rep.n_proposals, n_accepted=rep.n_accepted, envelope_constant=rep.envelope_constant,
                         inner_acceptance_rate=rep.inner.acceptance_rate)
        elif skind == "matrix-fisher":
            rep = baselines.matrix_fisher_sampler(MatrixFisherParams.from_dict(cfg.target), cfg.n_draws, rng)
            samples, accept = rep.inner.samples, rep.acceptance_rate
            extra.update(n_proposals=rep.n_proposals, n_accepted=rep.n_accepted, envelope_constant=rep.envelope_constant)
        else:  # pragma: no cover - rejected by validation
            raise ConfigError(f"unsupported sampler {skind!r}")
        if cfg.target["kind"] == "uniform" and m.kind in ("sphere", "so3"):
            reference = {j: _uniform_sphere_cdf(m.dim) for j in range(m.ambient_dim)}

    elapsed = time.perf_counter() - t0
    rows = flatten_samples(samples) if len(samples) else np.empty((0, int(np.prod(shape))))
    names = coordinate_names(out_kind, shape)
    summary = diagnostics.summarize(rows, accept, correlated=correlated, reference_cdfs=reference) if len(rows) >= 10 else \
        diagnostics.DiagnosticsSummary([], [], float(accept) if accept == accept else 0.0)
    extra.update(n_draws=len(rows), elapsed_seconds=elapsed, correlated=correlated, coordinates=names)
    summary.extra = extra
    hist_cols = cfg.histograms.get("coordinates")
    if hist_cols is None:
        hist_cols = [0] if out_kind == "barbell" else []
    return RunOutput(names, rows, summary.to_dict(), out_kind, list(hist_cols))


def _fb_params(tgt, m):
    if tgt["kind"] == "uniform":
        return FisherBinghamParams(np.zeros(m.ambient_dim), np.zeros((m.ambient_dim, m.ambient_dim)))
    return FisherBinghamParams.from_dict(tgt)


def _run_ball(cfg, m, target, gcfg):
    D = m.dim
    if target is None:
        logp = lambda th: 0.0  # noqa: E731
        zero = np.zeros(D)
        grad = lambda th: zero  # noqa: E731
    else:
        mu, prec = target
        logp = lambda th: -0.5 * float((th - mu) @ prec @ (th - mu))  # noqa: E731
        grad = lambda th: -(prec @ (th - mu))  # noqa: E731
    if cfg.sampler["kind"] == "gmc":
        rec = sample_on_ball(logp, grad, D, gcfg, cfg.n_draws, cfg.n_burnin)
        return rec.samples, rec.accept_rate, rec
    ladder = TemperingLadder(tuple(cfg.sampler["temperatures"]), int(cfg.sampler.get("swap_interval", 1)))
    res = parallel_tempering(lift_ball_target(D, logp, grad), ladder, gcfg, cfg.n_draws, cfg.n_burnin)
    return res.record.samples[:, :-1], res.record.accept_rate, res.record
