"""Single-node, time-multiplexed reservoir built on the forced oscillator.

A normalized input ``u`` sets one circuit hyperparameter (the resistance R,
which enters through beta, or the forcing amplitude A, which enters through
A').  The circuit is restarted from a fixed reset state and its y output is
sampled k times per forcing period over N periods; those kN numbers are the
feature vector for ``u``.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .bifurcation import CHANNELS, DEFAULT_CALIBRATION, Calibration, channel_components
from .dynsys import DEFAULT_STEPS_PER_PERIOD, PhysicalComponents, normalize_components, stroboscope
from .errors import HarvestError, InvalidParameterError, OutOfRangeError

#: Inputs integrated together in one vectorized batch by :func:`build_features`.
CHUNK = 2500


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameter channel, working range and harvesting counts.

    ``x_min``/``x_max`` are in ohm for the ``"R"`` channel and volt for
    ``"A"``.  ``base`` supplies every component that is not driven by the
    input.
    """

    channel: str
    x_min: float
    x_max: float
    n_periods: int = 5
    samples_per_period: int = 10
    transient_periods: int = 0
    reset_state: tuple[float, float] = (0.0, 0.0)
    base: PhysicalComponents = field(default_factory=PhysicalComponents)
    calibration: Calibration = DEFAULT_CALIBRATION
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD

    def __post_init__(self):
        if self.channel not in CHANNELS:
            raise InvalidParameterError(f"unknown channel {self.channel!r}; expected one of {CHANNELS}")
        if not self.x_max > self.x_min:
            raise InvalidParameterError("x_max must exceed x_min")
        if self.channel == "R" and not self.x_min > 0:
            raise InvalidParameterError("resistance range must be positive")
        if self.n_periods < 1 or self.samples_per_period < 1:
            raise InvalidParameterError("n_periods and samples_per_period must be at least 1")
        if self.transient_periods < 0 or self.steps_per_period < 1:
            raise InvalidParameterError("invalid transient or step count")

    @property
    def n_features(self) -> int:
        return self.n_periods * self.samples_per_period

    def to_dict(self) -> dict:
        d = asdict(self)
        d["reset_state"] = list(self.reset_state)
        return d


def map_input(u, cfg: ReservoirConfig):
    """Affine map of ``u`` in [0, 1] onto ``[x_min, x_max]``."""
    arr = np.asarray(u, dtype=float)
    if np.any(~(arr >= 0) | ~(arr <= 1)):
        raise OutOfRangeError(f"normalized input outside [0, 1]: {u!r}")
    return cfg.x_min + arr * (cfg.x_max - cfg.x_min)


def _harvest_batch(u: np.ndarray, cfg: ReservoirConfig) -> tuple[np.ndarray, np.ndarray]:
    comps = channel_components(cfg.base, cfg.channel, map_input(u, cfg))
    cal = cfg.calibration
    p = normalize_components(comps, cal.forcing_sign, cal.omega_prime)
    samples, diverged = stroboscope(
        p,
        cfg.reset_state,
        cfg.transient_periods + cfg.n_periods,
        cfg.samples_per_period,
        skip_periods=cfg.transient_periods,
        steps_per_period=cfg.steps_per_period,
    )
    # (N, k, 2, batch) -> y only, chronological: (batch, N*k)
    feats = samples[:, :, 1].reshape(cfg.n_features, -1).T
    return np.ascontiguousarray(feats), diverged


def harvest(u: float, cfg: ReservoirConfig) -> np.ndarray:
    """kN-sample feature vector for one input; a pure function of (u, cfg).

    Raises:
        HarvestError: the integration diverged.
    """
    feats, diverged = _harvest_batch(np.array([u], dtype=float), cfg)
    if diverged[0]:
        raise HarvestError(f"integration diverged for u={u!r}", u=u, index=0)
    return feats[0]


@dataclass
class FeatureMatrix:
    u: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        if self.features.shape[0] != len(self.u):
            raise InvalidParameterError("one feature row per input required")

    @property
    def shape(self):
        return self.features.shape

    def write_csv(self, path) -> None:
        n = self.features.shape[1]
        header = ",".join(["u"] + [f"f_{i}" for i in range(n)])
        data = np.column_stack((self.u, self.features)) if len(self.u) else np.empty((0, n + 1))
        np.savetxt(path, data, fmt="%.17g", delimiter=",", header=header, comments="")

    @classmethod
    def read_csv(cls, path) -> "FeatureMatrix":
        with open(path) as fh:
            header = fh.readline().strip().split(",")
            if not header or header[0] != "u":
                raise InvalidParameterError(f"{path}: bad feature header")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        if data.size == 0:
            return cls(np.empty(0), np.empty((0, len(header) - 1)))
        return cls(data[:, 0].copy(), np.ascontiguousarray(data[:, 1:]))


def build_features(inputs, cfg: ReservoirConfig, chunk: int = CHUNK) -> FeatureMatrix:
    """Harvest every input; row ``i`` equals ``harvest(inputs[i], cfg)``.

    Rows are integrated in vectorized chunks; the arithmetic is elementwise
    so batching does not change any value.

    Raises:
        HarvestError: naming the index of the first diverged input.
    """
    u = np.asarray(inputs, dtype=float).reshape(-1)
    map_input(u, cfg)  # range check before any integration
    out = np.empty((len(u), cfg.n_features))
    for start in range(0, len(u), chunk):
        block = u[start:start + chunk]
        feats, diverged = _harvest_batch(block, cfg)
        if np.any(diverged):
            i = start + int(np.flatnonzero(diverged)[0])
            raise HarvestError(f"integration diverged for input #{i} (u={u[i]!r})", u=float(u[i]), index=i)
        out[start:start + len(block)] = feats
    return FeatureMatrix(u, out)


def cache_key(inputs, cfg: ReservoirConfig) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(cfg.to_dict(), sort_keys=True, default=repr).encode())
    h.update(np.ascontiguousarray(inputs, dtype="<f8").tobytes())
    return h.hexdigest()[:24]


class FeatureCache:
    """Feature matrices on disk: ``<key>.csv`` plus a ``<key>.json`` sidecar.

    The sidecar records the reservoir configuration, calibration and the
    SHA-256 of the CSV bytes; an entry is valid only if the hash matches.
    Writes go through a temporary file and an atomic rename.
    """

    _lock = threading.Lock()

    def __init__(self, directory):
        self.directory = Path(directory)

    def paths(self, key: str) -> tuple[Path, Path]:
        return self.directory / f"features_{key}.csv", self.directory / f"features_{key}.json"

    def load(self, inputs, cfg: ReservoirConfig) -> FeatureMatrix | None:
        key = cache_key(inputs, cfg)
        csv_path, meta_path = self.paths(key)
        if not (csv_path.exists() and meta_path.exists()):
            return None
        meta = json.loads(meta_path.read_text())
        if meta.get("sha256") != hashlib.sha256(csv_path.read_bytes()).hexdigest():
            return None
        fm = FeatureMatrix.read_csv(csv_path)
        if not np.array_equal(fm.u, np.asarray(inputs, dtype=float)):
            return None
        return fm

    def store(self, fm: FeatureMatrix, cfg: ReservoirConfig) -> str:
        key = cache_key(fm.u, cfg)
        csv_path, meta_path = self.paths(key)
        self.directory.mkdir(parents=True, exist_ok=True)
        with self._lock:
            tmp = _tmp_in(self.directory)
            fm.write_csv(tmp)
            digest = hashlib.sha256(Path(tmp).read_bytes()).hexdigest()
            os.replace(tmp, csv_path)
            meta = {
                "key": key,
                "config": cfg.to_dict(),
                "calibration": {"omega_prime": repr(cfg.calibration.omega_prime), "forcing_sign": cfg.calibration.forcing_sign},
                "n_inputs": len(fm.u),
                "n_features": fm.features.shape[1],
                "sha256": digest,
            }
            tmp = _tmp_in(self.directory)
            Path(tmp).write_text(json.dumps(meta, indent=2, sort_keys=True, default=repr) + "\n")
            os.replace(tmp, meta_path)
        return key

    def get_or_build(self, inputs, cfg: ReservoirConfig) -> tuple[FeatureMatrix, bool]:
        """Return ``(features, hit)``; builds and stores on a miss."""
        fm = self.load(inputs, cfg)
        if fm is not None:
            return fm, True
        fm = build_features(inputs, cfg)
        self.store(fm, cfg)
        return fm, False


def _tmp_in(directory: Path) -> str:
    fd, name = tempfile.mkstemp(dir=directory, suffix=".tmp")
    os.close(fd)
    return name
