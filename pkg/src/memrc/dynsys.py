"""Vector fields of the forced memristive oscillator and the Lorenz system,
plus the fixed-step RK4 machinery every other module integrates with.

Integration happens in the dimensionless frame

    x' = -alpha*y - x
    y' = sign*beta*(A'*sin(omega'*t) - y) + gamma*(1 - x**2)*y

with x = v0*sqrt(g), y = v1*sqrt(g) and t = t_phys / (R2*C0).  All circuit
routines accept parameters that are either floats or numpy arrays; arrays
broadcast against a trailing batch axis of the state, which is how sweeps and
feature harvesting integrate many parameter values at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Callable

import numpy as np

from .errors import IntegrationDivergedError, InvalidParameterError

#: Steps per forcing period used by every periodic driver unless overridden.
DEFAULT_STEPS_PER_PERIOD = 1000

#: Nominal sign of the beta-term; the calibrated circuit uses +1.
NOMINAL_FORCING_SIGN = -1

Rhs = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class PhysicalComponents:
    """Component values of the oscillator circuit (SI units).

    ``nu`` is the forcing frequency in Hz.  It is left unset by default
    because the frequency is fixed by calibration in dimensionless form
    (see :class:`memrc.bifurcation.Calibration`).
    """

    R: float = 2.1e3
    R1: float = 8.0e3
    R2: float = 4.0e3
    R3: float = 1.4e3
    C0: float = 4.7e-9
    C1: float = 6.8e-9
    g: float = 0.1
    A: float = 2.0
    nu: float | None = None

    def __post_init__(self):
        for name in ("R", "R1", "R2", "R3", "C0", "C1", "g"):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise InvalidParameterError(f"{name} must be strictly positive")
        if not np.all(np.isfinite(np.asarray(self.A))):
            raise InvalidParameterError("A must be finite")
        if self.nu is not None and not self.nu > 0:
            raise InvalidParameterError("nu must be strictly positive")

    @property
    def time_scale(self) -> float:
        """Seconds per unit of dimensionless time (R2*C0)."""
        return self.R2 * self.C0

    def with_(self, **changes) -> "PhysicalComponents":
        return replace(self, **changes)


@dataclass(frozen=True)
class CircuitParams:
    alpha: float | np.ndarray
    beta: float | np.ndarray
    gamma: float | np.ndarray
    a_prime: float | np.ndarray
    omega_prime: float | np.ndarray
    forcing_sign: int = NOMINAL_FORCING_SIGN

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "a_prime", "omega_prime"):
            if not np.all(np.asarray(getattr(self, name)) > 0):
                raise InvalidParameterError(f"{name} must be strictly positive")
        if self.forcing_sign not in (1, -1):
            raise InvalidParameterError("forcing_sign must be +1 or -1")

    @property
    def period(self):
        """Forcing period in dimensionless time."""
        return 2.0 * np.pi / self.omega_prime


def normalize_components(
    pc: PhysicalComponents,
    forcing_sign: int = NOMINAL_FORCING_SIGN,
    omega_prime: float | None = None,
) -> CircuitParams:
    """Convert physical component values to dimensionless coefficients.

    Args:
        pc: circuit component values.
        forcing_sign: sign applied to the beta-term of the y equation.
        omega_prime: dimensionless angular forcing frequency.  When omitted it
            is derived from ``pc.nu`` as ``2*pi*nu*R2*C0``.

    Raises:
        InvalidParameterError: no forcing frequency available, or a derived
            coefficient is not positive.
    """
    if omega_prime is None:
        if pc.nu is None:
            raise InvalidParameterError("forcing frequency unknown: set pc.nu or pass omega_prime")
        omega_prime = 2.0 * np.pi * pc.nu * pc.R2 * pc.C0
    tau = pc.R2 * pc.C0
    return CircuitParams(
        alpha=pc.R2 / pc.R1,
        beta=tau / (pc.R * pc.C1),
        gamma=tau / (pc.R3 * pc.C1),
        a_prime=pc.A * math.sqrt(pc.g),
        omega_prime=omega_prime,
        forcing_sign=forcing_sign,
    )


def circuit_rhs(s: np.ndarray, t, p: CircuitParams) -> np.ndarray:
    """Time derivative of the dimensionless circuit state ``s = (x, y, ...)``."""
    x, y = s[0], s[1]
    dx = -p.alpha * y - x
    dy = p.forcing_sign * p.beta * (p.a_prime * np.sin(p.omega_prime * t) - y) + p.gamma * (1.0 - x * x) * y
    return np.stack((dx, dy))


def memductance(v0, g: float, R3: float):
    """Memristor memductance W(v0) = -(1 - g*v0**2)/R3 in siemens."""
    if not R3 > 0:
        raise InvalidParameterError("R3 must be strictly positive")
    return -(1.0 - g * np.square(v0)) / R3


@dataclass(frozen=True)
class LorenzParams:
    sigma: float = 10.0
    rho: float = 28.0
    beta: float = 2.667

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise InvalidParameterError(f"{f.name} must be strictly positive")


def lorenz_rhs(s: np.ndarray, p: LorenzParams = LorenzParams()) -> np.ndarray:
    x, y, z = s[0], s[1], s[2]
    return np.stack((p.sigma * (y - x), p.rho * x - y - x * z, x * y - p.beta * z))


def rk4_step(rhs: Rhs, s: np.ndarray, t, h, check_finite: bool = True) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size ``h``.

    ``h`` may be an array broadcasting against the state's batch axes (one
    step size per trajectory).  With ``check_finite`` the result is checked
    and :class:`IntegrationDivergedError` raised on any non-finite entry;
    batch drivers switch this off and track divergence themselves.
    """
    if not np.all(np.asarray(h) > 0):
        raise InvalidParameterError("step size must be strictly positive")
    out = _rk4(rhs, s, t, h)
    if check_finite and not np.all(np.isfinite(out)):
        raise IntegrationDivergedError(f"non-finite state after step from t={t!r}", t=t)
    return out


def _rk4(rhs: Rhs, s, t, h):
    half = 0.5 * h
    k1 = rhs(s, t)
    k2 = rhs(s + half * k1, t + half)
    k3 = rhs(s + half * k2, t + half)
    k4 = rhs(s + h * k3, t + h)
    return s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass(frozen=True)
class Trajectory:
    """Time stamps and the state at each stamp.

    ``states[i]`` is the state at ``t[i]``; ``time_unit`` is either
    ``"dimensionless"`` or ``"s"``.
    """

    t: np.ndarray
    states: np.ndarray
    time_unit: str = "dimensionless"

    def __post_init__(self):
        if len(self.t) != len(self.states):
            raise InvalidParameterError("t and states differ in length")
        if len(self.t) > 1 and not np.all(np.diff(self.t) > 0):
            raise InvalidParameterError("time stamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def integrate(rhs: Rhs, s0, t0: float, t1: float, h: float) -> Trajectory:
    """Integrate ``rhs`` from ``t0`` to ``t1`` with fixed step ``h``.

    Step ``i`` starts at ``t0 + i*h``; a final shortened step lands exactly on
    ``t1``.  The returned trajectory includes ``s0``.

    Raises:
        IntegrationDivergedError: carrying the time of the failing step.
    """
    if not h > 0:
        raise InvalidParameterError("step size must be strictly positive")
    if t1 < t0:
        raise InvalidParameterError("t1 must not precede t0")
    s = np.asarray(s0, dtype=float)
    span = t1 - t0
    n_full = int(span // h)
    # guard against t0 + n_full*h overshooting t1 through rounding
    while n_full > 0 and t0 + n_full * h > t1:
        n_full -= 1
    ts = [t0]
    states = [s]
    for i in range(n_full):
        s = rk4_step(rhs, s, t0 + i * h, h)
        ts.append(t0 + (i + 1) * h)
        states.append(s)
    t_last = ts[-1]
    rest = t1 - t_last
    if rest > 1e-12 * max(1.0, abs(t1)):
        s = rk4_step(rhs, s, t_last, rest)
        ts.append(t1)
        states.append(s)
    elif len(ts) > 1:
        ts[-1] = t1
    return Trajectory(np.asarray(ts), np.asarray(states))


def to_physical(traj: Trajectory, pc: PhysicalComponents) -> Trajectory:
    """Rescale a dimensionless circuit trajectory to seconds and volts."""
    if traj.time_unit != "dimensionless":
        raise InvalidParameterError("trajectory is already in physical units")
    return Trajectory(traj.t * pc.time_scale, traj.states / math.sqrt(pc.g), time_unit="s")


def stroboscope(
    p: CircuitParams,
    s0,
    n_periods: int,
    samples_per_period: int = 1,
    skip_periods: int = 0,
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
):
    """Integrate the forced circuit and sample it phase-locked to the drive.

    The circuit starts from ``s0`` at t=0 (forcing phase 0).  Over each of the
    ``n_periods`` forcing periods the state is sampled at the phases
    ``0, T/k, ..., (k-1)T/k`` with ``k = samples_per_period``; samples from the
    first ``skip_periods`` periods are discarded.  Each sub-interval of length
    ``T/k`` is covered by ``ceil(steps_per_period/k)`` RK4 steps.

    Parameters in ``p`` may be arrays; ``s0`` is broadcast to shape
    ``(2, *batch)``.

    Returns:
        ``(samples, diverged)`` where ``samples`` has shape
        ``(n_periods - skip_periods, k, 2, *batch)`` and ``diverged`` is a
        boolean array of the batch shape (True where the state went
        non-finite; those trajectories carry NaN/inf).
    """
    k = int(samples_per_period)
    if k < 1 or n_periods < 1 or not 0 <= skip_periods <= n_periods:
        raise InvalidParameterError("invalid period/sample counts")
    batch = np.broadcast(*(np.asarray(v) for v in (p.alpha, p.beta, p.gamma, p.a_prime, p.omega_prime))).shape
    s = np.broadcast_to(np.asarray(s0, dtype=float).reshape((2,) + (1,) * len(batch)), (2,) + batch).copy()
    m = -(-int(steps_per_period) // k)
    period = p.period
    if not np.all(period > 0):
        raise InvalidParameterError("forcing period must be positive")
    sub = period / k
    h = sub / m

    def rhs(state, t):
        return circuit_rhs(state, t, p)

    out = np.empty((n_periods - skip_periods, k, 2) + batch)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(n_periods):
            for j in range(k):
                if n >= skip_periods:
                    out[n - skip_periods, j] = s
                t_start = n * period + j * sub
                for i in range(m):
                    s = _rk4(rhs, s, t_start + i * h, h)
    diverged = ~np.all(np.isfinite(out), axis=(0, 1, 2)) | ~np.all(np.isfinite(s), axis=0)
    return out, diverged
