from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from memrc.errors import InvalidParameterError
from memrc.tasks import (
    POLY5_COEFFS,
    POLY9_COEFFS,
    Dataset,
    gen_lorenz_dataset,
    gen_poly_dataset,
    make_dataset,
    poly5,
    poly9,
)


def factored5(x):
    return x * (x - 1) * (x + 1) * (x - 2) * (x - 3) - 1


def exact_poly(coeffs, x):
    """Exact rational evaluation rounded once to float."""
    X = Fraction(float(x))
    acc = Fraction(0)
    for c in coeffs:
        acc = acc * X + Fraction(c)
    return float(acc)


def eval_scale(coeffs, x):
    """sum |c_i| |x|^i: the magnitude the floating-point evaluation works at."""
    ax = np.abs(x)
    acc = np.zeros_like(ax)
    for c in coeffs:
        acc = acc * ax + abs(c)
    return acc


@pytest.mark.parametrize("x,expected", [(0.0, -1.0), (1.0, -1.0), (0.5, -2.40625)])
def test_poly5_values(x, expected):
    assert poly5(x) == expected
    assert factored5(x) == expected


@pytest.mark.parametrize("x,expected", [(0.0, 0.0), (1.0, 0.5), (-1.0, 1.5)])
def test_poly9_values(x, expected):
    assert poly9(x) == expected


@given(st.floats(-1.25, 3.25))
def test_poly5_equals_factored_form(x):
    diff = abs(poly5(x) - factored5(x))
    assert diff <= 4 * np.spacing(eval_scale(POLY5_COEFFS, x))


@given(st.floats(-1.791, 1.834))
def test_poly9_near_exact(x):
    diff = abs(poly9(x) - exact_poly(POLY9_COEFFS, x))
    assert diff <= 4 * np.spacing(eval_scale(POLY9_COEFFS, x))


def test_poly5_dataset_first_row():
    ds = gen_poly_dataset(5, 10000)
    assert len(ds) == 10000
    assert (ds.u[0], ds.x_raw[0]) == (0.0, -1.25)
    assert ds.target[0] == pytest.approx(factored5(-1.25), abs=1e-12)
    assert ds.x_raw[-1] == 3.25


def test_poly9_dataset_last_x():
    ds = gen_poly_dataset(9, 500)
    assert ds.x_raw[-1] == 1.834
    assert ds.x_raw[0] == -1.791


def test_two_point_dataset_is_endpoints():
    ds = gen_poly_dataset(5, 2)
    assert ds.u.tolist() == [0.0, 1.0]
    assert ds.x_raw.tolist() == [-1.25, 3.25]


def test_unit_grid_uniform():
    n = 10000
    u = gen_poly_dataset(9, n).u
    step = 1 / (n - 1)
    assert np.max(np.abs(np.diff(u) - step)) <= np.spacing(1.0)
    assert np.all(np.diff(u) > 0)


def test_affine_abscissa():
    ds = gen_poly_dataset(5, 101)
    assert np.allclose(ds.x_raw, -1.25 + 4.5 * ds.u, rtol=0, atol=1e-14)


def test_unknown_task():
    with pytest.raises(InvalidParameterError):
        gen_poly_dataset(7)
    with pytest.raises(InvalidParameterError):
        make_dataset("sine")


@pytest.fixture(scope="module")
def lorenz_small():
    return gen_lorenz_dataset(n=2000, duration=10.0, transient_time=5.0)


def test_lorenz_bounded(lorenz_small):
    assert np.all(np.abs(lorenz_small.target) < 30)
    assert lorenz_small.target.std() > 1  # actually on the attractor


def test_lorenz_time_axis():
    ds = gen_lorenz_dataset(n=10000, duration=10.0, transient_time=0.5)
    assert ds.x_raw[1] - ds.x_raw[0] == pytest.approx(10 / 9999, rel=1e-12)
    assert ds.x_raw[-1] == pytest.approx(10.0)


def test_lorenz_deterministic(lorenz_small):
    again = gen_lorenz_dataset(n=2000, duration=10.0, transient_time=5.0)
    assert np.array_equal(again.target, lorenz_small.target)


def test_lorenz_matches_fine_reference():
    # a 4x finer step must agree closely over a short horizon
    a = gen_lorenz_dataset(n=201, duration=1.0, transient_time=1.0, h=1e-3)
    b = gen_lorenz_dataset(n=201, duration=1.0, transient_time=1.0, h=2.5e-4)
    assert np.max(np.abs(a.target - b.target)) < 1e-6


def test_dataset_csv_roundtrip(tmp_path):
    ds = gen_poly_dataset(9, 50)
    path = tmp_path / "d.csv"
    ds.write_csv(path)
    first = path.read_text().splitlines()[:2]
    assert first == ["# task=poly9", "u,x_raw,target"]
    back = Dataset.read_csv(path)
    assert back.name == "poly9"
    assert np.array_equal(back.target, ds.target) and np.array_equal(back.u, ds.u)
