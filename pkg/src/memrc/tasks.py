"""Target datasets: two polynomials and a Lorenz x(t) trace."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .dynsys import LorenzParams, integrate, lorenz_rhs, rk4_step
from .errors import InvalidParameterError

# highest degree first
POLY5_COEFFS = (1.0, -5.0, 5.0, 5.0, -6.0, -1.0)
POLY9_COEFFS = (1.0, 3.0, -4.5, -21.0, 1.0, 44.0, 13.0, -25.0, -11.0, 0.0)

POLY_RANGES = {5: (-1.25, 3.25), 9: (-1.791, 1.834)}

LORENZ_IC = (0.5, 1.0, 2.0)

TASKS = ("poly5", "poly9", "lorenz")


def horner(coeffs, x):
    x = np.asarray(x, dtype=float)
    acc = np.zeros_like(x)
    for c in coeffs:
        acc = acc * x + c
    return acc


def poly5(x):
    """x^5 - 5x^4 + 5x^3 + 5x^2 - 6x - 1, i.e. x(x-1)(x+1)(x-2)(x-3) - 1."""
    return horner(POLY5_COEFFS, x)


def poly9(x):
    return horner(POLY9_COEFFS, x)


@dataclass(frozen=True)
class Dataset:
    """Normalized inputs ``u`` with the task abscissa and targets.

    ``x_raw`` is the polynomial argument, or the sample time for the
    Lorenz trace.
    """

    name: str
    u: np.ndarray
    x_raw: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        if not len(self.u) == len(self.x_raw) == len(self.target):
            raise InvalidParameterError("dataset columns differ in length")

    def __len__(self):
        return len(self.u)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# task={self.name}\n")
            w = csv.writer(fh)
            w.writerow(["u", "x_raw", "target"])
            for row in zip(self.u, self.x_raw, self.target):
                w.writerow([repr(float(v)) for v in row])

    @classmethod
    def read_csv(cls, path) -> "Dataset":
        with open(path, newline="") as fh:
            meta = fh.readline().strip()
            if not meta.startswith("# task="):
                raise InvalidParameterError(f"{path}: missing task metadata line")
            data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
        return cls(meta[len("# task="):], data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy())


def unit_grid(n: int) -> np.ndarray:
    if n < 2:
        raise InvalidParameterError("need at least two points")
    return np.arange(n) / (n - 1)


def gen_poly_dataset(which: int, n: int = 10000) -> Dataset:
    if which not in POLY_RANGES:
        raise InvalidParameterError(f"unknown polynomial task {which!r}; expected 5 or 9")
    u = unit_grid(n)
    lo, hi = POLY_RANGES[which]
    x = lo + u * (hi - lo)
    x[-1] = hi  # pin the endpoint against rounding in the affine map
    f = poly5 if which == 5 else poly9
    return Dataset(f"poly{which}", u, x, f(x))


def gen_lorenz_dataset(
    n: int = 10000,
    duration: float = 10.0,
    transient_time: float = 30.0,
    h: float = 1e-3,
    params: LorenzParams = LorenzParams(),
    ic=LORENZ_IC,
) -> Dataset:
    """x(t) of the Lorenz system sampled at ``n`` equally spaced times.

    The trajectory starts at ``ic``; ``transient_time`` is integrated with
    step ``h`` and discarded.  Between consecutive samples (spacing
    ``duration/(n-1)``) the step is reduced to the largest value not above
    ``h`` that divides the spacing evenly.
    """
    if not duration > 0:
        raise InvalidParameterError("duration must be positive")
    u = unit_grid(n)

    def rhs(s, t):
        return lorenz_rhs(s, params)

    s = integrate(rhs, np.asarray(ic, dtype=float), 0.0, transient_time, h).final
    spacing = duration / (n - 1)
    sub = math.ceil(spacing / h - 1e-9)
    hs = spacing / sub
    xs = np.empty(n)
    xs[0] = s[0]
    for i in range(1, n):
        for j in range(sub):
            s = rk4_step(rhs, s, transient_time + (i - 1) * spacing + j * hs, hs)
        xs[i] = s[0]
    return Dataset("lorenz", u, u * duration, xs)


def make_dataset(task: str, n: int = 10000, **lorenz_kwargs) -> Dataset:
    if task == "poly5":
        return gen_poly_dataset(5, n)
    if task == "poly9":
        return gen_poly_dataset(9, n)
    if task == "lorenz":
        return gen_lorenz_dataset(n, **lorenz_kwargs)
    raise InvalidParameterError(f"unknown task {task!r}; expected one of {TASKS}")
