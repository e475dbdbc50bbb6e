import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from geomc import cli, io
from geomc.experiment import parse_config
from geomc.exceptions import ConfigError, NumericError
from geomc.targets import BarbellParams

from .conftest import random_point
from geomc.manifolds import ManifoldSpec, geodesic_distance

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def load(name, **overrides):
    doc = json.loads((CONFIGS / name).read_text())
    doc.update(overrides)
    return doc


def write_config(tmp_path, doc, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return str(path)


def run(tmp_path, doc, out="out", extra=()):
    cfg = write_config(tmp_path, doc)
    out_dir = str(tmp_path / out)
    return cli.main(["run", cfg, "--out", out_dir, *extra]), Path(out_dir)


@pytest.mark.parametrize(
    "name, kind, params",
    [
        ("fb-gmc.json", "sphere", None),
        ("fb-naive.json", "sphere", None),
        ("fb-envelope.json", "sphere", None),
        ("uniform-sphere.json", "sphere", None),
        ("tempered-bingham.json", "sphere", None),
        ("matrix-fisher.json", "so3", None),
        ("dirichlet-simplex.json", "simplex", None),
        ("ball-uniform.json", "ball", None),
        ("barbell.json", "barbell", BarbellParams()),
    ],
)
def test_shipped_configs_run(tmp_path, name, kind, params):
    doc = load(name)
    if "n_proposals" in doc["sampler"]:
        doc["sampler"]["n_proposals"] = 200_000
    else:
        doc["n_draws"] = 60
    doc["n_burnin"] = min(doc.get("n_burnin", 0), 10)
    code, out = run(tmp_path, doc)
    assert code == 0
    header, rows = io.read_samples_csv(out / "samples.csv")
    assert len(rows) > 0
    assert io.validate_rows(kind, rows, params=params) < 1e-10
    diag = io.read_json(out / "diagnostics.json")
    assert 0 <= diag["accept_rate"] <= 1
    assert io.read_json(out / "config-echo.json")["seed"] == doc["seed"]


def test_stiefel_run(tmp_path, rng):
    C = rng.standard_normal((4, 2))
    doc = {
        "manifold": {"kind": "stiefel", "k": 2, "p": 4},
        "target": {"kind": "matrix-fisher-bingham", "C": C.tolist(), "A": np.diag([1.0, 0, 0, -1]).tolist()},
        "sampler": {"kind": "gmc", "epsilon": 0.2, "n_steps": 5},
        "n_draws": 50,
        "seed": 3,
    }
    code, out = run(tmp_path, doc)
    assert code == 0
    header, rows = io.read_samples_csv(out / "samples.csv")
    assert header[:5] == ["q0_0", "q1_0", "q2_0", "q3_0", "q0_1"]
    assert io.validate_rows("stiefel", rows, params=(4, 2)) < 1e-10


def test_barbell_writes_histogram(tmp_path):
    doc = load("barbell.json", n_draws=500)
    code, out = run(tmp_path, doc)
    assert code == 0
    text = (out / "histogram_x.csv").read_text().splitlines()
    assert text[0] == "bin_left,bin_right,count,density"
    assert len(text) == 1 + doc["histograms"]["bins"]
    assert sum(int(line.split(",")[2]) for line in text[1:]) == 500


def test_bitwise_deterministic(tmp_path):
    doc = load("fb-gmc.json", n_draws=100, n_burnin=10)
    assert run(tmp_path, doc, out="a")[0] == 0
    assert run(tmp_path, doc, out="b")[0] == 0
    assert (tmp_path / "a/samples.csv").read_bytes() == (tmp_path / "b/samples.csv").read_bytes()


def test_seed_flag_overrides(tmp_path):
    doc = load("fb-gmc.json", n_draws=50, n_burnin=0)
    run(tmp_path, doc, out="a")
    run(tmp_path, doc, out="b", extra=["--seed", "99"])
    assert (tmp_path / "a/samples.csv").read_bytes() != (tmp_path / "b/samples.csv").read_bytes()
    assert io.read_json(tmp_path / "b/config-echo.json")["seed"] == 99


def test_config_flag_equivalent_to_positional(tmp_path):
    path = write_config(tmp_path, load("uniform-sphere.json", n_draws=20))
    assert cli.main(["run", "--config", path, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o/samples.csv").exists()


class TestValidationErrors:
    def test_missing_seed_is_rejected_with_line(self, tmp_path, capsys):
        doc = load("uniform-sphere.json")
        del doc["seed"]
        code, out = run(tmp_path, doc)
        assert code == 2
        err = capsys.readouterr().err
        assert "seed" in err and "line" in err
        assert not out.exists()

    def test_seed_flag_satisfies_missing_seed(self, tmp_path):
        doc = load("uniform-sphere.json", n_draws=20)
        del doc["seed"]
        assert run(tmp_path, doc, extra=["--seed", "1"])[0] == 0

    def test_invalid_json_reports_line(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "seed": 1,\n  "manifold": oops\n}\n')
        assert cli.main(["run", str(path)]) == 2
        assert "line 3" in capsys.readouterr().err

    def test_line_points_at_offending_field(self):
        text = json.dumps(load("fb-gmc.json"), indent=2).replace('"epsilon": 0.3', '"epsilon": -1')
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        expected = next(i for i, line in enumerate(text.splitlines(), 1) if '"epsilon"' in line)
        assert info.value.line == expected
        assert str(info.value).startswith(f"line {expected}: sampler.epsilon")

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d["sampler"].update(kind="nuts"),
            lambda d: d["manifold"].update(kind="stiefel", k=2, p=5),
            lambda d: d["target"].update(kind="dirichlet"),
            lambda d: d["sampler"].pop("n_steps"),
            lambda d: d.update(n_draws=-3),
            lambda d: d["manifold"].update(dim=3),
            lambda d: d["target"].update(A=[[1.0, 2.0], [0.0, 1.0]]),
            lambda d: d.update(seed="abc"),
        ],
    )
    def test_rejected(self, tmp_path, mutate):
        doc = load("fb-gmc.json")
        mutate(doc)
        assert run(tmp_path, doc)[0] == 2

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.json")]) == 2

    def test_run_needs_a_config(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["run"])
        assert info.value.code == 2


class TestRuntimeErrors:
    def test_exit_3_without_outputs(self, tmp_path, monkeypatch):
        def boom(cfg):
            raise NumericError("did not converge")

        monkeypatch.setattr(cli, "run_experiment", boom)
        code, out = run(tmp_path, load("uniform-sphere.json"))
        assert code == 3
        assert not out.exists() or not any(out.iterdir())

    def test_partial_files_removed(self, tmp_path, monkeypatch):
        real = io.write_json

        def fail_on_echo(path, obj):
            if str(path).endswith("config-echo.json"):
                raise OSError("disk full")
            real(path, obj)

        monkeypatch.setattr(io, "write_json", fail_on_echo)
        code, out = run(tmp_path, load("uniform-sphere.json", n_draws=20))
        assert code == 3
        assert list(out.iterdir()) == []


class TestCompare:
    def test_agreeing_runs(self, tmp_path):
        gmc = load("fb-gmc.json", n_draws=3000, n_burnin=200)
        env = load("fb-envelope.json", n_draws=3000)
        assert run(tmp_path, gmc, out="gmc")[0] == 0
        assert run(tmp_path, env, out="env")[0] == 0
        assert cli.main(["compare", str(tmp_path / "gmc"), str(tmp_path / "env"), "--out", str(tmp_path)]) == 0
        report = io.read_json(tmp_path / "comparison.json")
        assert len(report["ks"]) == 5
        assert all(k["pvalue"] > 1e-3 for k in report["ks"])
        assert report["moment_deltas"]["max_abs"] < 5
        assert report["a"]["sampler"] == "gmc" and report["b"]["sampler"] == "fb-envelope"
        assert report["a"]["ess_per_second"] > 0

    def test_mismatched_targets_refused(self, tmp_path, capsys):
        run(tmp_path, load("fb-gmc.json", n_draws=30, n_burnin=0), out="a")
        run(tmp_path, load("uniform-sphere.json", n_draws=30), out="b")
        code = cli.main(["compare", str(tmp_path / "a"), str(tmp_path / "b"), "--out", str(tmp_path)])
        assert code == 2
        assert "refused" in capsys.readouterr().err
        assert not (tmp_path / "comparison.json").exists()

    def test_missing_run(self, tmp_path):
        assert cli.main(["compare", str(tmp_path / "x"), str(tmp_path / "y")]) == 2


class TestTour:
    def test_tour_through_frames(self, tmp_path, rng):
        m = ManifoldSpec.stiefel(2, 5)
        frames = [random_point(m, rng) for _ in range(3)]
        path = tmp_path / "frames.in.csv"
        io.write_samples_csv(path, io.coordinate_names("stiefel", (5, 2)), io.flatten_samples(np.stack(frames)))
        assert cli.main(["tour", str(path), "--n-interp", "6", "--out", str(tmp_path)]) == 0
        out = io.read_frames_csv(tmp_path / "frames.csv", tol=1e-10)
        assert len(out) == 2 * 5 + 1
        for i, f in enumerate(frames):
            np.testing.assert_allclose(out[5 * i], f, atol=1e-12)
        # Equal spacing within each segment.
        steps = [geodesic_distance(m, out[j], out[j + 1]) for j in range(5)]
        np.testing.assert_allclose(steps, steps[0], rtol=1e-6)

    def test_shipped_frames(self, tmp_path):
        assert cli.main(["tour", str(CONFIGS / "tour-frames.csv"), "--out", str(tmp_path)]) == 0

    def test_bad_frame_names_row(self, tmp_path, capsys, rng):
        m = ManifoldSpec.stiefel(2, 4)
        frames = np.stack([random_point(m, rng), random_point(m, rng) * 1.1])
        path = tmp_path / "bad.csv"
        io.write_samples_csv(path, io.coordinate_names("stiefel", (4, 2)), io.flatten_samples(frames))
        assert cli.main(["tour", str(path), "--out", str(tmp_path)]) == 2
        assert "row 2" in capsys.readouterr().err

    def test_needs_two_frames(self, tmp_path, rng):
        path = tmp_path / "one.csv"
        m = ManifoldSpec.stiefel(1, 3)
        io.write_samples_csv(path, io.coordinate_names("stiefel", (3, 1)), io.flatten_samples(random_point(m, rng)[None]))
        assert cli.main(["tour", str(path), "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    cfg = write_config(tmp_path, load("uniform-sphere.json", n_draws=20))
    res = subprocess.run([sys.executable, "-m", "geomc", "run", cfg, "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    res = subprocess.run([sys.executable, "-m", "geomc", "bogus"], capture_output=True, text=True)
    assert res.returncode == 2
