"""Parameter sweeps, regime classification and forcing-frequency calibration.

A sweep integrates the circuit once per parameter value (all values in one
vectorized batch), records one v1 sample per forcing period at phase 0 and
estimates the largest Lyapunov exponent from a companion trajectory.  The
pair of clustering result and exponent decides whether a parameter value is
periodic (with its period) or chaotic.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynsys import (
    DEFAULT_STEPS_PER_PERIOD,
    CircuitParams,
    PhysicalComponents,
    circuit_rhs,
    normalize_components,
    _rk4,
)
from .errors import (
    CalibrationError,
    InsufficientDataError,
    IntegrationDivergedError,
    InvalidParameterError,
)

CHANNELS = ("R", "A")


@dataclass(frozen=True)
class Calibration:
    """Dimensionless forcing frequency and sign of the beta-term."""

    omega_prime: float
    forcing_sign: int

    def __post_init__(self):
        if not self.omega_prime > 0:
            raise InvalidParameterError("omega_prime must be positive")
        if self.forcing_sign not in (1, -1):
            raise InvalidParameterError("forcing_sign must be +1 or -1")

    def nu(self, pc: PhysicalComponents) -> float:
        """Physical forcing frequency (Hz) implied for components ``pc``."""
        return self.omega_prime / (2.0 * math.pi * pc.time_scale)

    def save(self, path, **extra) -> None:
        payload = {"omega_prime": repr(self.omega_prime), "forcing_sign": self.forcing_sign, **extra}
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "Calibration":
        d = json.loads(Path(path).read_text())
        return cls(float(d["omega_prime"]), int(d["forcing_sign"]))


#: Result of running :func:`calibrate` with its default settings on the
#: default components; all four phase-portrait landmarks classify correctly.
DEFAULT_CALIBRATION = Calibration(omega_prime=0.813, forcing_sign=1)


@dataclass(frozen=True)
class Regime:
    kind: str  # "periodic", "chaotic" or "diverged"
    period: int | None = None

    def __str__(self):
        return f"periodic({self.period})" if self.kind == "periodic" else self.kind

    @classmethod
    def parse(cls, text: str) -> "Regime":
        text = text.strip()
        if text.startswith("periodic(") and text.endswith(")"):
            return cls("periodic", int(text[len("periodic("):-1]))
        if text in ("chaotic", "diverged"):
            return cls(text)
        raise ValueError(f"unrecognized regime {text!r}")


CHAOTIC = Regime("chaotic")

#: Resistance (ohm) and expected regime of the four phase-portrait landmarks, A = 2 V.
FIG4_LANDMARKS: tuple[tuple[float, Regime], ...] = (
    (1.9e3, Regime("periodic", 1)),
    (2.1e3, CHAOTIC),
    (2.3e3, Regime("periodic", 3)),
    (2.7e3, CHAOTIC),
)


def channel_components(base: PhysicalComponents, channel: str, values) -> PhysicalComponents:
    """Components with the swept channel (``"R"`` or ``"A"``) set to ``values``."""
    if channel not in CHANNELS:
        raise InvalidParameterError(f"unknown channel {channel!r}; expected one of {CHANNELS}")
    return replace(base, **{channel: np.asarray(values, dtype=float)})


def count_clusters(samples, rel_tol: float = 1e-3) -> tuple[int, float]:
    """Group sorted samples into clusters separated by gaps larger than tol.

    The tolerance is ``rel_tol`` times the sample range, floored at
    ``rel_tol`` times the largest magnitude so that an already converged
    fixed point (range ~ 1e-12) is not split by rounding noise.

    Returns the cluster count and the widest cluster's spread divided by
    the tolerance (<= 1 means every cluster is tight).
    """
    s = np.sort(np.asarray(samples, dtype=float))
    tol = rel_tol * max(s[-1] - s[0], float(np.max(np.abs(s))), np.finfo(float).tiny)
    breaks = np.flatnonzero(np.diff(s) > tol)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [len(s) - 1]))
    widest = float(np.max(s[ends] - s[starts]))
    return len(starts), widest / tol


def classify_regime(
    samples,
    lyap: float,
    lyap_threshold: float = 1e-3,
    max_period: int = 16,
    rel_tol: float = 1e-3,
    min_samples: int = 32,
) -> Regime:
    """Label a stroboscopic sample set as periodic(p) or chaotic.

    Periodic needs both a tight clustering into at most ``max_period``
    points and a Lyapunov exponent no larger than ``lyap_threshold``; every
    other combination (including a NaN exponent) is chaotic.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < min_samples:
        raise InsufficientDataError(f"need at least {min_samples} samples, got {samples.size}")
    if not np.all(np.isfinite(samples)):
        return Regime("diverged")
    n, spread = count_clusters(samples, rel_tol)
    if n <= max_period and spread <= 1.0 and lyap <= lyap_threshold:
        return Regime("periodic", n)
    return CHAOTIC


@dataclass(frozen=True)
class LyapunovSettings:
    d0: float = 1e-8
    transient_periods: int = 200
    n_periods: int = 500
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    reset_state: tuple[float, float] = (0.0, 0.0)


def benettin(
    rhs,
    s0,
    period,
    n_periods: int,
    transient_periods: int = 0,
    d0: float = 1e-8,
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
    record_periods: int = 0,
):
    """Two-trajectory largest-Lyapunov estimate, renormalized once per period.

    ``rhs(s, t)`` must accept states of shape ``(dim, *batch)``; ``period``
    may be an array over the batch.  The perturbed companion starts ``d0``
    away along the first state component.  Log-stretch is accumulated over
    ``n_periods`` periods after ``transient_periods`` and divided by the
    elapsed time.

    Returns:
        ``(exponent, diverged, strobe)``; ``strobe`` holds the reference state
        at phase 0 of the first ``record_periods`` periods after the transient,
        shape ``(record_periods, dim, *batch)``.  Diverged entries of
        ``exponent`` hold the partial estimate at the point of divergence.
    """
    ref = np.array(s0, dtype=float)
    pert = ref.copy()
    pert[0] = pert[0] + d0
    period = np.asarray(period, dtype=float)
    h = period / steps_per_period
    batch = ref.shape[1:]
    log_sum = np.zeros(batch)
    diverged = np.zeros(batch, dtype=bool)
    done = np.zeros(batch)  # periods accumulated before divergence
    strobe = np.empty((record_periods,) + ref.shape)
    unit = np.zeros_like(ref)
    unit[0] = 1.0
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for n in range(transient_periods + n_periods):
            rec = n - transient_periods
            if 0 <= rec < record_periods:
                strobe[rec] = ref
            t0 = n * period
            pair = np.stack((ref, pert), axis=1)  # (dim, 2, *batch)
            for i in range(steps_per_period):
                pair = _rk4(rhs, pair, t0 + i * h, h)
            ref, pert = pair[:, 0], pair[:, 1]
            delta = pert - ref
            d = np.sqrt(np.sum(delta * delta, axis=0))
            diverged |= ~np.isfinite(d) | ~np.all(np.isfinite(ref), axis=0)
            # companion collapsed onto the reference: restart along the first axis
            collapsed = d == 0
            if np.any(collapsed):
                delta = np.where(collapsed, unit, delta)
                d = np.where(collapsed, 1.0, d)
            if rec >= 0:
                ok = ~diverged
                stretch = np.where(collapsed, np.finfo(float).tiny, np.where(ok, d, d0))
                log_sum = np.where(ok, log_sum + np.log(stretch / d0), log_sum)
                done = np.where(ok, done + 1, done)
            pert = ref + delta * (d0 / d)
    elapsed = np.maximum(done, 1) * period
    return log_sum / elapsed, diverged, strobe


def largest_lyapunov(
    params: CircuitParams | None,
    settings: LyapunovSettings = LyapunovSettings(),
    rhs=None,
    s0=None,
    period=None,
):
    """Largest Lyapunov exponent (per unit dimensionless time).

    By default the forced circuit with ``params`` is used.  Passing ``rhs``,
    ``s0`` and ``period`` evaluates an arbitrary system instead, which is how
    the estimator is checked against systems with known exponents.

    Raises:
        IntegrationDivergedError: carrying the partial estimate.
    """
    if rhs is None:
        if params is None:
            raise InvalidParameterError("params required when no rhs is given")
        p = params

        def rhs(s, t):
            return circuit_rhs(s, t, p)

        period = params.period
        batch = np.broadcast(*(np.asarray(v) for v in (p.alpha, p.beta, p.gamma, p.a_prime, p.omega_prime))).shape
        s0 = np.broadcast_to(np.asarray(settings.reset_state, dtype=float).reshape((2,) + (1,) * len(batch)), (2,) + batch)
    elif s0 is None or period is None:
        raise InvalidParameterError("custom rhs needs s0 and period")
    lam, diverged, _ = benettin(
        rhs,
        s0,
        period,
        settings.n_periods,
        settings.transient_periods,
        settings.d0,
        settings.steps_per_period,
    )
    if np.any(diverged):
        raise IntegrationDivergedError("trajectory diverged during Lyapunov estimate", partial=lam)
    return float(lam) if np.ndim(lam) == 0 else lam


@dataclass(frozen=True)
class SweepSpec:
    channel: str
    start: float
    stop: float
    n_points: int = 600
    transient_periods: int = 200
    record_periods: int = 128
    lyap_periods: int = 500
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    base: PhysicalComponents = field(default_factory=PhysicalComponents)
    calibration: Calibration = DEFAULT_CALIBRATION
    mode: str = "section"  # or "extrema"
    d0: float = 1e-8
    lyap_threshold: float = 1e-3
    reset_state: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise InvalidParameterError(f"unknown channel {self.channel!r}")
        if not self.stop > self.start:
            raise InvalidParameterError("stop must exceed start")
        if self.n_points < 2:
            raise InvalidParameterError("n_points must be at least 2")
        if min(self.transient_periods, self.record_periods, self.lyap_periods, self.steps_per_period) < 1:
            raise InvalidParameterError("period and step counts must be positive")
        if self.mode not in ("section", "extrema"):
            raise InvalidParameterError("mode must be 'section' or 'extrema'")

    @property
    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)


@dataclass
class BifurcationScan:
    channel: str
    param_values: np.ndarray
    samples: list  # per value: stroboscopic (or extrema) v1 in volts
    regime: list
    lyap: np.ndarray
    diverged: np.ndarray

    def windows(self) -> list[tuple[str, float, float]]:
        """Maximal runs of equal regime kind as ``(kind, first, last)``."""
        out = []
        for value, reg in zip(self.param_values, self.regime):
            if out and out[-1][0] == reg.kind:
                out[-1] = (reg.kind, out[-1][1], value)
            else:
                out.append((reg.kind, value, value))
        return out

    def write_csv(self, diagram_path, summary_path) -> None:
        unit = "ohm" if self.channel == "R" else "V"
        with open(diagram_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{self.channel}_{unit}", "v1_V"])
            for value, s in zip(self.param_values, self.samples):
                for v in s:
                    w.writerow([repr(float(value)), repr(float(v))])
        with open(summary_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"{self.channel}_{unit}", "regime", "period", "lyap_per_dimensionless_time", "diverged"])
            for value, reg, lam, div in zip(self.param_values, self.regime, self.lyap, self.diverged):
                w.writerow([repr(float(value)), reg.kind, reg.period or "", repr(float(lam)), int(div)])


def _run_points(comps: PhysicalComponents, cal: Calibration, settings) -> tuple:
    p = normalize_components(comps, cal.forcing_sign, cal.omega_prime)
    batch = np.broadcast(*(np.asarray(v) for v in (p.alpha, p.beta, p.gamma, p.a_prime))).shape
    p = replace(p, omega_prime=np.broadcast_to(np.asarray(p.omega_prime, dtype=float), batch))
    return _run_points_params(p, settings)


def _extrema(comps: PhysicalComponents, spec: SweepSpec) -> list:
    """Local maxima of y over the record window, one list per parameter value."""
    cal = spec.calibration
    p = normalize_components(comps, cal.forcing_sign, cal.omega_prime)
    batch = np.broadcast(*(np.asarray(v) for v in (p.alpha, p.beta, p.gamma, p.a_prime))).shape
    s = np.broadcast_to(np.asarray(spec.reset_state, dtype=float).reshape((2,) + (1,) * len(batch)), (2,) + batch).copy()
    period = float(p.period)
    h = period / spec.steps_per_period
    found = [[] for _ in range(int(np.prod(batch)))]

    def rhs(state, t):
        return circuit_rhs(state, t, p)

    prev2 = prev = None
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(spec.transient_periods + spec.record_periods):
            for i in range(spec.steps_per_period):
                s = _rk4(rhs, s, n * period + i * h, h)
                if n >= spec.transient_periods:
                    y = s[1]
                    if prev2 is not None:
                        for idx in np.flatnonzero((prev > prev2) & (prev >= y)):
                            found[idx].append(prev.flat[idx])
                    prev2, prev = prev, y
    return [np.asarray(f) for f in found]


def sweep(spec: SweepSpec) -> BifurcationScan:
    """Bifurcation data and regime labels for every value of the swept channel.

    Each value is integrated from ``spec.reset_state``; after
    ``transient_periods`` forcing periods one y sample per period is taken at
    phase 0 for ``record_periods`` periods and converted to volts.  In
    ``"extrema"`` mode the diagram samples are the local maxima of v1 instead;
    classification always uses the stroboscopic section.
    """
    values = spec.values
    comps = channel_components(spec.base, spec.channel, values)
    lam, diverged, strobe = _run_points(comps, spec.calibration, spec)
    scale = 1.0 / math.sqrt(spec.base.g)
    section = strobe[:, 1, :] * scale  # (record, n_points)
    regimes = []
    for j in range(len(values)):
        if diverged[j]:
            regimes.append(Regime("diverged"))
        else:
            regimes.append(classify_regime(section[:, j], lam[j], spec.lyap_threshold, min_samples=min(32, spec.record_periods)))
    if spec.mode == "extrema":
        samples = [e * scale for e in _extrema(comps, spec)]
    else:
        samples = [section[:, j].copy() for j in range(len(values))]
    return BifurcationScan(spec.channel, values, samples, regimes, lam, diverged)


@dataclass
class CalibrationResult:
    calibration: Calibration
    matches: int
    margin: float
    table: list = field(default_factory=list)  # (omega_prime, sign, matches, margin, labels)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["omega_prime", "forcing_sign", "matches", "margin"] + [f"R{int(r)}" for r, _ in FIG4_LANDMARKS])
            for om, sign, m, margin, labels in self.table:
                w.writerow([repr(float(om)), sign, m, repr(float(margin))] + [str(x) for x in labels])


@dataclass(frozen=True)
class CalibrationSettings:
    transient_periods: int = 200
    record_periods: int = 128
    lyap_periods: int = 500
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD
    d0: float = 1e-8
    lyap_threshold: float = 1e-3
    reset_state: tuple[float, float] = (0.0, 0.0)


def _score(labels, lams, landmarks, threshold) -> tuple[int, float]:
    matches = 0
    margin = math.inf
    for (_, want), got, lam in zip(landmarks, labels, lams):
        if got == want:
            matches += 1
            margin = min(margin, (lam - threshold) if want.kind == "chaotic" else (threshold - lam))
    return matches, (margin if matches else -math.inf)


def calibrate_omega(
    candidates: Iterable,
    landmarks: Sequence = FIG4_LANDMARKS,
    base: PhysicalComponents | None = None,
    settings: CalibrationSettings = CalibrationSettings(),
    min_matches: int = 3,
) -> CalibrationResult:
    """Pick the (omega', sign) candidate that reproduces the most landmarks.

    ``candidates`` holds ``(omega_prime, forcing_sign)`` pairs.  Every
    candidate is integrated at every landmark resistance in one batch.  Ties
    on the match count go to the larger safety margin (the smallest distance
    of a matched landmark's exponent from the chaos threshold), then to the
    earlier candidate.

    Raises:
        InvalidParameterError: empty candidate list.
        CalibrationError: best candidate matches fewer than ``min_matches``.
    """
    cands = [(float(om), int(sg)) for om, sg in candidates]
    if not cands:
        raise InvalidParameterError("empty candidate list")
    base = base or PhysicalComponents(A=2.0)
    rs = np.array([r for r, _ in landmarks], dtype=float)
    table = []
    for sign in sorted({sg for _, sg in cands}):
        idx = [i for i, (_, sg) in enumerate(cands) if sg == sign]
        oms = np.array([cands[i][0] for i in idx])
        comps = replace(base, R=np.repeat(rs[None, :], len(idx), axis=0))
        p = normalize_components(comps, sign, oms[:, None])
        om_b = np.broadcast_to(oms[:, None], comps.R.shape)
        lam, div, strobe = _run_points_params(replace(p, omega_prime=om_b), settings)
        ys = strobe[:, 1] / math.sqrt(base.g)
        for row, i in enumerate(idx):
            labels = []
            for col in range(len(rs)):
                if div[row, col]:
                    labels.append(Regime("diverged"))
                else:
                    labels.append(classify_regime(ys[:, row, col], lam[row, col], settings.lyap_threshold, min_samples=min(32, settings.record_periods)))
            m, margin = _score(labels, lam[row], landmarks, settings.lyap_threshold)
            table.append((i, cands[i][0], sign, m, margin, labels))
    table.sort(key=lambda r: r[0])
    best = max(table, key=lambda r: (r[3], r[4], -r[0]))
    result = CalibrationResult(
        Calibration(best[1], best[2]),
        best[3],
        best[4],
        [r[1:] for r in table],
    )
    if best[3] < min_matches:
        raise CalibrationError(
            f"best candidate omega'={best[1]:.6g}, sign={best[2]:+d} matches only {best[3]}/{len(rs)} landmarks",
            diagnostics=result,
        )
    return result


def _run_points_params(p: CircuitParams, settings) -> tuple:
    batch = np.shape(p.omega_prime)
    s0 = np.broadcast_to(np.asarray(settings.reset_state, dtype=float).reshape((2,) + (1,) * len(batch)), (2,) + batch)

    def rhs(s, t):
        return circuit_rhs(s, t, p)

    return benettin(
        rhs,
        s0,
        p.period,
        settings.lyap_periods,
        settings.transient_periods,
        settings.d0,
        settings.steps_per_period,
        record_periods=settings.record_periods,
    )


def classify_points(
    channel: str,
    values,
    base: PhysicalComponents | None = None,
    calibration: Calibration = DEFAULT_CALIBRATION,
    settings: CalibrationSettings = CalibrationSettings(),
) -> tuple[list, np.ndarray]:
    """Regime and Lyapunov exponent at explicit values of one channel."""
    base = base or PhysicalComponents(A=2.0)
    comps = channel_components(base, channel, np.atleast_1d(np.asarray(values, dtype=float)))
    lam, div, strobe = _run_points(comps, calibration, settings)
    ys = strobe[:, 1] / math.sqrt(base.g)
    regimes = [
        Regime("diverged") if div[j] else classify_regime(ys[:, j], lam[j], settings.lyap_threshold, min_samples=min(32, settings.record_periods))
        for j in range(len(lam))
    ]
    return regimes, lam


def default_candidates(n: int = 64, lo: float = 0.01, hi: float = 2.0, signs=(1, -1)) -> list:
    """Log-spaced omega' grid crossed with both forcing signs."""
    return [(float(om), s) for s in signs for om in np.geomspace(lo, hi, n)]


def calibrate(
    coarse: Sequence | None = None,
    landmarks: Sequence = FIG4_LANDMARKS,
    base: PhysicalComponents | None = None,
    settings: CalibrationSettings = CalibrationSettings(),
    coarse_settings: CalibrationSettings | None = None,
    refine_top: int = 4,
    refine_points: int = 25,
) -> CalibrationResult:
    """Two-stage search: a cheap coarse scan, then dense grids around the best.

    The coarse stage screens ``coarse`` (default :func:`default_candidates`
    with 160 frequencies) at reduced resolution.  The ``refine_top`` best
    coarse candidates each get ``refine_points`` linearly spaced frequencies
    spanning their two coarse neighbours, evaluated at full ``settings``; the
    winner of that refined set is returned.
    """
    coarse = list(coarse) if coarse is not None else default_candidates(160)
    if not coarse:
        raise InvalidParameterError("empty candidate list")
    coarse_settings = coarse_settings or replace(settings, steps_per_period=250, transient_periods=100, lyap_periods=200)
    first = calibrate_omega(coarse, landmarks, base, coarse_settings, min_matches=0)
    ranked = sorted(first.table, key=lambda r: (r[2], r[3]), reverse=True)[:refine_top]
    refined = []
    for om, sign, *_ in ranked:
        same = sorted(o for o, s in coarse if s == sign)
        k = same.index(om)
        lo = same[max(k - 1, 0)]
        hi = same[min(k + 1, len(same) - 1)]
        refined.extend((float(o), sign) for o in np.linspace(lo, hi, refine_points))
    refined = list(dict.fromkeys(refined))
    return calibrate_omega(refined, landmarks, base, settings)
