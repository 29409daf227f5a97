import json
import math

import numpy as np
import pytest

from isosep import cli
from isosep.config import ConfigError, ExperimentConfig, load_config
from isosep.experiments import (PipelineError, REPORT_SCHEMA, VerificationReport, family_sets,
                                iso_rows, run_pipeline, slope_through_origin,
                                verify_isoperimetric, verify_volume)
from isosep.measure import SampleSet
from isosep.metric_core import ManifoldSpec, generate


@pytest.fixture(scope="module")
def sphere4k():
    return generate(ManifoldSpec("sphere", {}, 4000, 0))


def small_cfg(**sections):
    base = {"manifold": {"samples": 4000}, "sets": {"family": "equator"}}
    for sec, keys in sections.items():
        base.setdefault(sec, {}).update(keys)
    return ExperimentConfig(base)


# -- config -----------------------------------------------------------------------

def test_config_rejects_unknown_names():
    with pytest.raises(ConfigError, match="section"):
        load_config(text="[bogus]\nx = 1\n")
    with pytest.raises(ConfigError, match="key"):
        load_config(text="[manifold]\ncolour = red\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        load_config(text="[manifold]\nsamples = many\n")


def test_config_parses_pi_and_defaults():
    cfg = load_config(text="[volume]\nradii = 0.3, pi/2\n[run]\nresolution = low\n")
    assert cfg["volume"]["radii"] == [0.3, math.pi / 2]
    assert cfg["cover"]["doubling_trials"] == 100
    assert cfg.manifold_spec().sample_count == 5000


@pytest.mark.parametrize("text", ["[volume]\nradii = 0.3 -1\n", "[dumbbell]\neps_list = 0.7\n",
                                  "[run]\nresolution = huge\n", "[run]\nthreads = 0\n"])
def test_config_validation(text):
    with pytest.raises(ConfigError):
        load_config(text=text)


# -- reports ----------------------------------------------------------------------

def test_equator_ratio_near_four(sphere4k):
    cfg = small_cfg()
    rep = verify_isoperimetric(cfg, sphere4k, stability=False)
    (row,) = rep.rows
    # ring samples carry a discrete-parking bias of roughly +5% on lengths,
    # and the removed band trims a few percent off seprad
    assert row["ratio"] >= 3.5
    assert abs(row["ratio"] - row["expected_ratio"]) / row["expected_ratio"] < 0.15
    assert rep.derived["c_hat"] == row["ratio"]
    assert rep.passed


def test_empty_family_flags_undefined_c_hat(sphere4k):
    rep = verify_isoperimetric(small_cfg(sets={"family": "none"}), sphere4k)
    assert rep.derived["c_hat"] is None
    assert not rep.passed
    assert json.loads(rep.dumps())["derived"]["c_hat"] is None


def test_ratios_are_scale_free(sphere4k):
    cfg = small_cfg()
    big = sphere4k.scaled(3.0)
    a = iso_rows(sphere4k, cfg, witness=False)[0]["ratio"]
    b = iso_rows(big, cfg, witness=False)[0]["ratio"]
    assert math.isclose(a, b, rel_tol=1e-9)


def test_report_is_deterministic_across_threads(sphere4k):
    cfg1 = small_cfg(sets={"family": "latitudes", "colatitudes": [0.6, math.pi / 2]})
    cfg4 = cfg1.with_overrides(run={"threads": 4})
    a = verify_isoperimetric(cfg1, sphere4k, stability=False).to_json()
    b = verify_isoperimetric(cfg4, sphere4k, stability=False).to_json()
    c = verify_isoperimetric(cfg1, sphere4k, stability=False).to_json()
    assert a == c
    a.pop("config"), b.pop("config")
    assert a == b


def test_volume_rejects_radius_beyond_diameter(sphere4k):
    cfg = small_cfg(volume={"radii": [0.5, 4.0]})
    with pytest.raises(ValueError, match="outside"):
        verify_volume(cfg, sphere4k, c_hat=1.0)


def test_volume_small_cap_is_nearly_flat(sphere10k):
    # the ball edge bias scales like measure_scale / r, so this needs the finer sample
    cfg = small_cfg(volume={"radii": [0.3], "centers": 1})
    rep = verify_volume(cfg, sphere10k, c_hat=3.5)
    (row,) = rep.rows
    assert abs(row["analytic_ratio"] - math.pi) / math.pi < 0.03
    assert abs(row["ratio"] - row["analytic_ratio"]) / row["analytic_ratio"] < 0.15


def test_latitude_family_needs_sphere(dumbbell):
    with pytest.raises(ValueError, match="sphere"):
        family_sets(dumbbell, ExperimentConfig())


def test_slope_through_origin():
    assert math.isclose(slope_through_origin([1, 2, 3], [2, 4, 6]), 2.0)


# -- pipeline ---------------------------------------------------------------------

def test_pipeline_on_equator(sphere4k):
    # f(S) is far longer than the base constant; the projection still lands in the skeleton
    with pytest.warns(UserWarning, match="base constant"):
        rep = run_pipeline(small_cfg(), space=sphere4k, epsilon=0.5)
    names = {c["name"] for c in rep.checks}
    assert {"support_monotone", "target_skeleton", "growth_finite", "cover_diameter"} <= names
    assert rep.passed
    assert rep.derived["witness_S"]["betti"] == [1, 1]
    assert rep.derived["projection"]["max_offskeleton"] <= 1e-12
    assert math.isfinite(rep.derived["projection"]["measure_initial"])
    assert any("homotopy" in n for n in rep.notes)


def test_pipeline_with_empty_set(sphere4k):
    rep = run_pipeline(small_cfg(), SampleSet([], 0.1), space=sphere4k, epsilon=0.5)
    assert rep.derived["projection"] is None
    assert rep.passed


def test_pipeline_whole_sphere_hits_base_obstruction():
    cfg = ExperimentConfig({"manifold": {"samples": 400}})
    sp = generate(cfg.manifold_spec())
    with pytest.warns(UserWarning, match="base constant"), pytest.raises(PipelineError) as exc:
        run_pipeline(cfg, SampleSet(np.arange(sp.n), 0.1), space=sp, epsilon=0.8, full=False)
    assert exc.value.stage == "projection"
    assert type(exc.value.cause).__name__ == "BaseCaseObstruction"
    failed = [c for c in exc.value.partial.checks if not c["passed"]]
    assert failed[-1]["detail"]["simplex"] == list(exc.value.cause.simplex)
    assert len(exc.value.cause.simplex) == 2


# -- CLI --------------------------------------------------------------------------

def test_cli_gen_writes_space(tmp_path, capsys):
    code = cli.main(["gen", "--out", str(tmp_path), "--resolution", "low", "--seed", "3"])
    assert code == 0
    assert (tmp_path / "space.txt").exists()
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema"] == REPORT_SCHEMA and doc["passed"]
    assert doc["config"]["manifold"]["seed"] == 3
    assert "PASS  connected" in capsys.readouterr().out


def test_cli_bad_config_exits_2(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[manifold]\nshape = cube\n")
    assert cli.main(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert cli.main(["gen", "--config", str(tmp_path / "missing.ini")]) == 2


def test_cli_pipeline_error_writes_partial(tmp_path, monkeypatch):
    def boom(cfg, args):
        rep = VerificationReport("pipeline", cfg.to_json())
        rep.check("stage[cover]", "pipeline stage completes", False, error="forced")
        raise PipelineError("cover", RuntimeError("forced"), rep)
    monkeypatch.setitem(cli.HANDLERS, "pipeline", boom)
    assert cli.main(["pipeline", "--out", str(tmp_path)]) == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["checks"][0]["name"] == "stage[cover]" and not doc["passed"]


def test_cli_measure_and_rerun_is_byte_identical(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[manifold]\nsamples = 3000\n[sets]\nfamily = equator\n")
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["measure", "--config", str(cfg), "--out", str(a)]) == 0
    assert cli.main(["measure", "--config", str(cfg), "--out", str(b), "--threads", "2"]) == 0
    ja, jb = json.loads((a / "report.json").read_text()), json.loads((b / "report.json").read_text())
    ja.pop("config"), jb.pop("config")
    assert ja == jb
    first = (a / "report.json").read_bytes()
    assert cli.main(["measure", "--config", str(cfg), "--out", str(a)]) == 0
    assert (a / "report.json").read_bytes() == first
    assert (b / "tables" / "measure.csv").read_text() == (a / "tables" / "measure.csv").read_text()


def test_cli_requires_command():
    with pytest.raises(SystemExit):
        cli.main([])
