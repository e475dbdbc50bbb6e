"""Command-line driver: ``geomc run``, ``geomc compare`` and ``geomc tour``.

Exit codes: 0 on success, 2 for parse or validation errors, 3 for
runtime failures.
"""
import argparse
import logging
import os
import sys

import numpy as np

from . import diagnostics, io
from .exceptions import ConfigError, GeomcError, InvalidPointError
from .experiment import MCMC_SAMPLERS, parse_config, run_experiment
from .manifolds import ManifoldSpec, geodesic_interpolate

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3

log = logging.getLogger("geomc")


def _fail(code, msg):
    print(f"geomc: error: {msg}", file=sys.stderr)
    return code


def cmd_run(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        return _fail(EXIT_VALIDATION, f"{args.config}: {exc.strerror}")
    try:
        cfg = parse_config(text, seed=args.seed, output_dir=args.out)
    except ConfigError as exc:
        return _fail(EXIT_VALIDATION, f"{args.config}: {exc}")

    out_dir = cfg.output_dir
    paths = {
        "samples": os.path.join(out_dir, "samples.csv"),
        "diagnostics": os.path.join(out_dir, "diagnostics.json"),
        "echo": os.path.join(out_dir, "config-echo.json"),
    }
    written = []
    try:
        result = run_experiment(cfg)
        os.makedirs(out_dir, exist_ok=True)
        bins = int(cfg.histograms.get("bins", 50))
        for j in result.histogram_columns:
            hp = os.path.join(out_dir, f"histogram_{result.names[j]}.csv")
            written.append(hp)
            io.write_histogram_csv(hp, result.rows[:, j], bins=bins)
        written.append(paths["samples"])
        io.write_samples_csv(paths["samples"], result.names, result.rows)
        written.append(paths["diagnostics"])
        io.write_json(paths["diagnostics"], result.diagnostics)
        written.append(paths["echo"])
        io.write_json(paths["echo"], cfg.echo())
    except (GeomcError, FloatingPointError, np.linalg.LinAlgError, OSError, MemoryError) as exc:
        io.remove_quietly(written)
        return _fail(EXIT_RUNTIME, f"run failed: {exc}")
    log.info("wrote %d draws to %s", len(result.rows), out_dir)
    return EXIT_OK


def _load_run(run_dir):
    header, rows = io.read_samples_csv(os.path.join(run_dir, "samples.csv"))
    echo = io.read_json(os.path.join(run_dir, "config-echo.json"))
    diag = io.read_json(os.path.join(run_dir, "diagnostics.json"))
    return header, rows, echo, diag


def _ess_per_second(rows, correlated, elapsed):
    if len(rows) < 10 or not elapsed:
        return None
    if correlated:
        vals = []
        for col in rows.T:
            try:
                vals.append(diagnostics.ess(col))
            except (GeomcError, ValueError):
                pass
        if not vals:
            return None
        n_eff = min(vals)
    else:
        n_eff = len(rows)
    return n_eff / elapsed


def _thin(rows, correlated):
    if not correlated or len(rows) < 10:
        return rows
    taus = []
    for col in rows.T:
        try:
            taus.append(diagnostics.integrated_autocorr_time(col))
        except (GeomcError, ValueError):
            pass
    step = max(1, int(np.ceil(max(taus)))) if taus else 1
    return rows[::step]


def compare_runs(dir_a, dir_b):
    """Side-by-side agreement report for two runs of the same target.

    Raises
    ------
    ConfigError
        When the runs target different distributions.
    """
    ha, ra, ea, da = _load_run(dir_a)
    hb, rb, eb, db = _load_run(dir_b)
    if ea["manifold"] != eb["manifold"] or ea["target"] != eb["target"]:
        raise ConfigError(
            "runs target different distributions "
            f"(a: {ea['manifold']} / {ea['target'].get('kind')}, b: {eb['manifold']} / {eb['target'].get('kind')}); "
            "comparison refused"
        )
    if ha != hb:
        raise ConfigError("runs have different coordinate columns; comparison refused")
    ca = ea["sampler"]["kind"] in MCMC_SAMPLERS
    cb = eb["sampler"]["kind"] in MCMC_SAMPLERS
    # KS assumes independent draws, so MCMC runs are thinned by their
    # largest autocorrelation time first.
    ta, tb = _thin(ra, ca), _thin(rb, cb)
    ks = []
    for j, name in enumerate(ha):
        stat, pval = diagnostics.ks_two_sample(ta[:, j], tb[:, j])
        ks.append({"coordinate": name, "statistic": stat, "pvalue": pval})
    moments = diagnostics.moment_compare(ra, rb, correlated_a=ca, correlated_b=cb)

    def side(echo, diag, rows, corr):
        extra = diag.get("extra", {})
        return {
            "run": echo.get("experiment"),
            "sampler": echo["sampler"]["kind"],
            "n_draws": len(rows),
            "accept_rate": diag.get("accept_rate"),
            "ess_per_second": _ess_per_second(rows, corr, extra.get("elapsed_seconds")),
        }

    return {
        "target": ea["target"].get("kind"),
        "manifold": ea["manifold"],
        "a": side(ea, da, ra, ca),
        "b": side(eb, db, rb, cb),
        "ks": ks,
        "moment_deltas": moments.to_dict(),
    }


def cmd_compare(args):
    try:
        report = compare_runs(args.run_a, args.run_b)
    except ConfigError as exc:
        return _fail(EXIT_VALIDATION, str(exc))
    except (OSError, KeyError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, f"could not read runs: {exc}")
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    io.write_json(os.path.join(out_dir, "comparison.json"), report)
    return EXIT_OK


def tour_frames(frames, n_interp):
    """Concatenated geodesic interpolation through consecutive Stiefel frames.

    Each segment has ``n_interp`` frames; shared endpoints between segments
    are emitted once.
    """
    p, k = frames[0].shape
    m = ManifoldSpec.stiefel(k, p)
    path = []
    for i in range(len(frames) - 1):
        seg = geodesic_interpolate(m, frames[i], frames[i + 1], n_interp)
        path.extend(seg if i == 0 else seg[1:])
    return np.stack(path)


def cmd_tour(args):
    try:
        frames = io.read_frames_csv(args.frames)
    except InvalidPointError as exc:
        return _fail(EXIT_VALIDATION, f"{args.frames}: {exc}")
    except (OSError, ValueError) as exc:
        return _fail(EXIT_VALIDATION, f"{args.frames}: {exc}")
    if len(frames) < 2:
        return _fail(EXIT_VALIDATION, f"{args.frames}: need at least 2 frames, got {len(frames)}")
    if args.n_interp < 2:
        return _fail(EXIT_VALIDATION, "--n-interp must be >= 2")
    try:
        path = tour_frames(frames, args.n_interp)
    except GeomcError as exc:
        return _fail(EXIT_RUNTIME, f"tour failed: {exc}")
    p, k = frames[0].shape
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    io.write_samples_csv(os.path.join(out_dir, "frames.csv"), io.coordinate_names("stiefel", (p, k)), io.flatten_samples(path))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="geomc", description="Geodesic Monte Carlo experiments on embedded manifolds.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config_path", nargs="?", help="experiment config (JSON)")
    run.add_argument("--config", dest="config_flag", help="experiment config (JSON)")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    run.set_defaults(func=cmd_run)

    cmp_ = sub.add_parser("compare", help="compare two run directories")
    cmp_.add_argument("run_a")
    cmp_.add_argument("run_b")
    cmp_.add_argument("--out", help="directory for comparison.json (default: current directory)")
    cmp_.set_defaults(func=cmd_compare)

    tour = sub.add_parser("tour", help="geodesic interpolation through Stiefel frames")
    tour.add_argument("frames", help="CSV of frames, columns q<row>_<col> in column-major order")
    tour.add_argument("--n-interp", type=int, default=10, help="frames per segment, endpoints included")
    tour.add_argument("--out", help="directory for frames.csv (default: current directory)")
    tour.set_defaults(func=cmd_tour)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.command == "run":
        args.config = args.config_flag or args.config_path
        if not args.config:
            parser.error("run: a config path is required (positional or --config)")
    return args.func(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
