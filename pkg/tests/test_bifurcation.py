import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memrc.bifurcation import (
    CHAOTIC,
    Calibration,
    CalibrationSettings,
    LyapunovSettings,
    Regime,
    SweepSpec,
    benettin,
    calibrate_omega,
    classify_points,
    classify_regime,
    count_clusters,
    largest_lyapunov,
    sweep,
)
from memrc.dynsys import PhysicalComponents, normalize_components
from memrc.errors import CalibrationError, InsufficientDataError, InvalidParameterError

QUICK = CalibrationSettings(transient_periods=30, record_periods=32, lyap_periods=40, steps_per_period=200)


# -- classification -------------------------------------------------------

@pytest.mark.parametrize("p", [1, 2, 3, 4])
def test_synthetic_periodic(p):
    levels = np.linspace(-1.0, 1.0, p) if p > 1 else np.array([0.4])
    samples = np.tile(levels, 64 // p + 1)[:64]
    assert classify_regime(samples, lyap=-0.1) == Regime("periodic", p)


def test_noisy_cloud_is_chaotic():
    samples = np.random.default_rng(0).uniform(-1, 1, 128)
    assert classify_regime(samples, lyap=0.05) == CHAOTIC


def test_positive_exponent_overrides_clusters():
    assert classify_regime(np.tile([0.0, 1.0], 32), lyap=0.2) == CHAOTIC


def test_too_few_samples():
    with pytest.raises(InsufficientDataError):
        classify_regime(np.zeros(10), lyap=-1.0)


def test_nonfinite_samples_are_diverged():
    s = np.zeros(40)
    s[5] = np.nan
    assert classify_regime(s, lyap=-1.0).kind == "diverged"


def test_regime_text_roundtrip():
    for r in (Regime("periodic", 3), CHAOTIC, Regime("diverged")):
        assert Regime.parse(str(r)) == r
    assert str(Regime("periodic", 2)) == "periodic(2)"


@given(st.integers(1, 16), st.floats(-5, 5), st.floats(0.1, 3))
def test_cluster_count_invariant_to_shift_and_scale(p, shift, scale):
    levels = np.arange(p, dtype=float)
    samples = np.tile(levels, 4)
    assert count_clusters(samples)[0] == p
    assert count_clusters(samples * scale + shift)[0] == p


def test_converged_fixed_point_is_one_cluster():
    samples = 0.7 + 1e-13 * np.random.default_rng(1).normal(size=64)
    assert count_clusters(samples)[0] == 1


# -- Lyapunov estimate ----------------------------------------------------

def test_benettin_linear_decay():
    lam, diverged, _ = benettin(lambda s, t: -s, np.array([1.0]), 1.0, n_periods=50, steps_per_period=100)
    assert not diverged
    assert lam == pytest.approx(-1.0, abs=1e-6)


def test_benettin_linear_growth_rate():
    lam, _, _ = benettin(lambda s, t: 0.3 * s, np.array([0.0]), 2.0, n_periods=30, steps_per_period=200)
    assert lam == pytest.approx(0.3, abs=1e-6)


def test_largest_lyapunov_custom_system():
    lam = largest_lyapunov(None, LyapunovSettings(n_periods=40, transient_periods=0, steps_per_period=100),
                           rhs=lambda s, t: -2.0 * s, s0=np.array([0.5]), period=1.0)
    assert lam == pytest.approx(-2.0, abs=1e-6)


def test_lyapunov_requires_params():
    with pytest.raises(InvalidParameterError):
        largest_lyapunov(None)


def test_benettin_strobe_shape():
    _, _, strobe = benettin(lambda s, t: -s, np.zeros((2, 3)), 1.0, n_periods=10, transient_periods=2,
                            steps_per_period=10, record_periods=7)
    assert strobe.shape == (7, 2, 3)


# -- sweeps ---------------------------------------------------------------

def test_sweep_rejects_empty_range():
    with pytest.raises(InvalidParameterError):
        SweepSpec("R", 2.1e3, 2.1e3)
    with pytest.raises(InvalidParameterError):
        SweepSpec("Q", 1.0, 2.0)


@pytest.fixture(scope="module")
def small_scan(default_cal):
    spec = SweepSpec("R", 1.9e3, 2.7e3, n_points=5, transient_periods=20, record_periods=32, lyap_periods=40,
                     steps_per_period=200, base=PhysicalComponents(A=2.0), calibration=default_cal)
    return spec, sweep(spec)


def test_sweep_sample_counts(small_scan):
    spec, scan = small_scan
    assert len(scan.samples) == 5
    assert all(len(s) == spec.record_periods for s in scan.samples)
    assert len(scan.regime) == 5 and scan.lyap.shape == (5,)


def test_sweep_deterministic(small_scan):
    spec, scan = small_scan
    again = sweep(spec)
    assert np.array_equal(again.lyap, scan.lyap)
    assert all(np.array_equal(a, b) for a, b in zip(again.samples, scan.samples))


def test_sweep_csv_headers(small_scan, tmp_path):
    _, scan = small_scan
    d, s = tmp_path / "diag.csv", tmp_path / "sum.csv"
    scan.write_csv(d, s)
    assert d.read_text().splitlines()[0] == "R_ohm,v1_V"
    lines = s.read_text().splitlines()
    assert lines[0] == "R_ohm,regime,period,lyap_per_dimensionless_time,diverged"
    assert len(lines) == 6
    assert len(d.read_text().splitlines()) == 1 + 5 * 32


def test_windows_merge_runs(small_scan):
    _, scan = small_scan
    w = scan.windows()
    assert w[0][1] == scan.param_values[0] and w[-1][2] == scan.param_values[-1]
    assert all(a[0] != b[0] for a, b in zip(w, w[1:]))


def test_extrema_mode(default_cal):
    spec = SweepSpec("A", 1.5, 1.6, n_points=2, transient_periods=20, record_periods=32, lyap_periods=40,
                     steps_per_period=200, base=PhysicalComponents(R=2.6e3), calibration=default_cal, mode="extrema")
    scan = sweep(spec)
    # a period-one orbit has one maximum of v1 per period
    for s in scan.samples:
        assert 28 <= len(s) <= 40


def test_batched_points_match_individual(default_cal):
    values = [2.0e3, 2.3e3]
    both, lam = classify_points("R", values, calibration=default_cal, settings=QUICK)
    for j, v in enumerate(values):
        one, lam1 = classify_points("R", [v], calibration=default_cal, settings=QUICK)
        assert one[0] == both[j] and lam1[0] == lam[j]


# -- calibration ----------------------------------------------------------

def test_calibrate_empty_candidates():
    with pytest.raises(InvalidParameterError):
        calibrate_omega([])


def test_calibrate_single_candidate_returned():
    res = calibrate_omega([(0.813, 1)], settings=QUICK, min_matches=0)
    assert res.calibration == Calibration(0.813, 1)
    assert len(res.table) == 1


def test_calibrate_reports_failure():
    # the nominal sign locks to period one and cannot reproduce the chaotic landmarks
    with pytest.raises(CalibrationError) as info:
        calibrate_omega([(0.813, -1)], settings=QUICK, min_matches=4)
    assert info.value.diagnostics is not None


def test_calibration_file_roundtrip(tmp_path):
    cal = Calibration(0.8130000000000001, 1)
    cal.save(tmp_path / "c.json", matches=4)
    assert Calibration.load(tmp_path / "c.json") == cal
    assert json.loads((tmp_path / "c.json").read_text())["matches"] == 4


def test_calibration_gives_frequency_in_hz():
    cal = Calibration(0.813, 1)
    pc = PhysicalComponents()
    p = normalize_components(pc.with_(nu=cal.nu(pc)), 1)
    assert p.omega_prime == pytest.approx(0.813, rel=1e-12)


def test_lyapunov_insensitive_to_d0(default_cal):
    coarse = dict(transient_periods=100, record_periods=32, lyap_periods=200, steps_per_period=250)
    lams = [classify_points("R", [2.15e3], calibration=default_cal, settings=CalibrationSettings(d0=d0, **coarse))[1][0]
            for d0 in (1e-6, 1e-8, 1e-10)]
    assert lams[1] > 0
    assert max(lams) - min(lams) <= 0.1 * abs(lams[1])
