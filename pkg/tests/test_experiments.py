import csv
import time

import numpy as np
import pytest

from memrc import cli
from memrc.bifurcation import Calibration
from memrc.errors import ConfigError, InvalidParameterError
from memrc.experiments import (
    FIGURES,
    ExperimentManifest,
    HarvestSettings,
    get_preset,
    load_features,
    reproduce,
    require_calibration,
    run_experiment,
)
from memrc.tasks import make_dataset

FAST = HarvestSettings(steps_per_period=200)


def manifest(task="poly5", preset="a-nonchaotic-s2.1", seed=42, n=300):
    return ExperimentManifest(task, preset, n_points=n, harvest=FAST, seed=seed)


def test_unknown_preset_lists_choices():
    with pytest.raises(InvalidParameterError) as info:
        get_preset("r-mystery")
    assert "a-chaotic-fig7" in str(info.value) and "r-full" in str(info.value)


def test_unknown_task():
    with pytest.raises(InvalidParameterError):
        ExperimentManifest("sine", "r-full")


def test_figures_have_six_cells():
    assert all(len(cells) == 6 for cells in FIGURES.values())


def test_manifest_digest_tracks_settings():
    a, b = manifest(), manifest(seed=43)
    assert a.digest == manifest().digest
    assert a.digest != b.digest


def test_records_byte_identical(tmp_path):
    m = manifest()
    run_experiment(m, tmp_path / "one")
    run_experiment(m, tmp_path / "two")
    for suffix in ("record.csv", "predictions.csv", "model.txt"):
        name = f"{m.stem}_{suffix}"
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()
    head = (tmp_path / "one" / f"{m.stem}_predictions.csv").read_text().splitlines()[0]
    assert head.startswith(f"# manifest={m.digest} seed=42")


def test_record_contents(tmp_path):
    res = run_experiment(manifest(), tmp_path)
    r = res.record
    assert r.n_points == 300 and r.task == "poly5"
    assert len(res.prediction) == 300 - 201
    full_var = np.var(make_dataset("poly5", 300).target)
    assert r.normalized_test_mse == pytest.approx(r.test_mse / full_var, rel=1e-12)
    assert 0 <= r.train_mse and r.test_mse < 1.0


def test_cache_hit_is_fast(tmp_path):
    m = ExperimentManifest("poly5", "a-nonchaotic-s2.1", n_points=2000)
    u = np.arange(2000) / 1999
    t0 = time.perf_counter()
    fm1, hit1 = load_features(m, u, tmp_path)
    cold = time.perf_counter() - t0
    t0 = time.perf_counter()
    fm2, hit2 = load_features(m, u, tmp_path)
    warm = time.perf_counter() - t0
    assert (hit1, hit2) == (False, True)
    assert np.array_equal(fm1.features, fm2.features)
    assert cold > 10 * warm


def test_missing_calibration_message(tmp_path):
    with pytest.raises(ConfigError) as info:
        require_calibration(None, tmp_path)
    assert "memrc calibrate" in str(info.value)
    Calibration(0.8, 1).save(tmp_path / "calibration.json")
    assert require_calibration(None, tmp_path) == Calibration(0.8, 1)


def test_reproduce_fig6_rows(tmp_path):
    cells = reproduce("fig6", n_points=150, harvest=FAST, out_dir=tmp_path, cache_dir=tmp_path / "cache")
    assert len(cells) == 6 and all(c.ok for c in cells)
    with open(tmp_path / "fig6_summary.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 7
    assert rows[0][:3] == ["figure", "task", "preset"]
    assert {r[-1] for r in rows[1:]} == {"ok"}


# -- command line ---------------------------------------------------------

def write_config(tmp_path, **extra):
    lines = ["[calibration]", "omega_prime = 0.813", "forcing_sign = 1", "[harvest]", "steps_per_period = 200"]
    top = [f"{k} = {v}" for k, v in extra.items()]
    path = tmp_path / "cfg.toml"
    path.write_text("\n".join(top + lines) + "\n")
    return str(path)


def test_cli_train_and_eval(tmp_path, capsys):
    cfg = write_config(tmp_path, n_points=200)
    out = str(tmp_path / "out")
    assert cli.main(["--config", cfg, "--out-dir", out, "train", "--task", "poly9", "--preset", "a-nonchaotic-s2.1"]) == 0
    assert cli.main(["eval", "--config", cfg, "--out-dir", out, "--task", "poly9", "--preset", "a-nonchaotic-s2.1"]) == 0
    assert "test_mse=" in capsys.readouterr().out
    assert (tmp_path / "out" / "poly9_a-nonchaotic-s2.1_s42_record.csv").exists()


def test_cli_missing_calibration_exit_2(tmp_path, capsys):
    code = cli.main(["harvest", "--preset", "r-full", "--out-dir", str(tmp_path)])
    assert code == 2
    assert "memrc calibrate" in capsys.readouterr().err


def test_cli_bad_config_exit_2(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("this is = = not toml")
    assert cli.main(["--config", str(bad), "harvest", "--preset", "r-full"]) == 2


def test_cli_unknown_preset_exit_2(tmp_path):
    cfg = write_config(tmp_path)
    assert cli.main(["--config", cfg, "harvest", "--preset", "nope"]) == 2


def test_cli_experiment_failure_exit_1(tmp_path):
    # two points cannot be split into train and test
    cfg = write_config(tmp_path, n_points=2)
    assert cli.main(["--config", cfg, "--out-dir", str(tmp_path), "train", "--task", "poly5", "--preset", "r-full"]) == 1


def test_cli_seed_flag_before_and_after_subcommand(tmp_path):
    cfg = write_config(tmp_path, n_points=100)
    out = tmp_path / "o"
    assert cli.main(["--seed", "7", "--config", cfg, "--out-dir", str(out), "train", "--task", "poly5", "--preset", "r-full"]) == 0
    assert cli.main(["train", "--seed", "8", "--config", cfg, "--out-dir", str(out), "--task", "poly5", "--preset", "r-full"]) == 0
    assert (out / "poly5_r-full_s7_model.txt").exists() and (out / "poly5_r-full_s8_model.txt").exists()
