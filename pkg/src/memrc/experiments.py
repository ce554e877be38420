"""Experiment wiring: named reservoir presets, manifests, single runs and the
two figure-level reproduction grids."""
from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .bifurcation import DEFAULT_CALIBRATION, Calibration
from .dynsys import DEFAULT_STEPS_PER_PERIOD, PhysicalComponents
from .errors import ConfigError, InvalidParameterError, MemrcError
from .readout import CVConfig, cross_validate, fit_ridge, mse, predict, train_test_split
from .reservoir import FeatureCache, ReservoirConfig, build_features
from .tasks import TASKS, make_dataset

DEFAULT_SEED = 42
FULL_POINTS = 10000
CI_POINTS = 1000

# Fixed components while the other channel carries the input.
R_CHANNEL_BASE = PhysicalComponents(A=2.0)
A_CHANNEL_BASE = PhysicalComponents(R=2.6e3)


@dataclass(frozen=True)
class Preset:
    channel: str
    x_min: float
    x_max: float
    regime: str
    note: str = ""

    @property
    def base(self) -> PhysicalComponents:
        return R_CHANNEL_BASE if self.channel == "R" else A_CHANNEL_BASE


# Named working ranges.  Where two ranges were quoted for the same role, both are
# kept side by side under distinct names.
PRESETS: dict[str, Preset] = {
    "r-nonchaotic-s2.1": Preset("R", 2.2e3, 2.8e3, "mixed", "R-reservoir range for the polynomial tasks"),
    "r-nonchaotic-s2.3": Preset("R", 2.1e3, 2.19e3, "mixed", "worked mapping example for the 5th-degree polynomial"),
    "r-chaotic-s2.1": Preset("R", 2.10e3, 2.19e3, "chaotic", "R-reservoir range for chaotic data"),
    "r-periodic-fig7": Preset("R", 2.3e3, 2.4e3, "periodic"),
    "r-chaotic-fig7": Preset("R", 2.10e3, 2.19e3, "chaotic"),
    "r-full": Preset("R", 1.9e3, 2.8e3, "full"),
    "a-nonchaotic-s2.1": Preset("A", 2.1, 2.5, "mixed", "A-reservoir range for the polynomial tasks"),
    "a-nonchaotic-s3": Preset("A", 2.0, 2.5, "mixed", "A-reservoir range as restated with the results"),
    "a-chaotic-s2.1": Preset("A", 2.75, 3.25, "chaotic", "A-reservoir range for chaotic data"),
    "a-periodic-fig7": Preset("A", 1.5, 1.8, "periodic"),
    "a-chaotic-fig7": Preset("A", 2.5, 3.4, "chaotic"),
    "a-full": Preset("A", 1.5, 3.5, "full"),
}

FIGURES = {
    "fig6": (
        ("poly5", "r-nonchaotic-s2.1"),
        ("poly9", "r-nonchaotic-s2.1"),
        ("lorenz", "r-chaotic-s2.1"),
        ("poly5", "a-nonchaotic-s2.1"),
        ("poly9", "a-nonchaotic-s2.1"),
        ("lorenz", "a-chaotic-s2.1"),
    ),
    "fig7": (
        ("lorenz", "r-periodic-fig7"),
        ("lorenz", "r-chaotic-fig7"),
        ("lorenz", "r-full"),
        ("lorenz", "a-periodic-fig7"),
        ("lorenz", "a-chaotic-fig7"),
        ("lorenz", "a-full"),
    ),
}

# Reference MSE values for the fig6 cells, reported next to ours in summaries.
REPORTED_MSE = {
    ("fig6", "poly5", "r-nonchaotic-s2.1"): 0.0766,
    ("fig6", "poly9", "r-nonchaotic-s2.1"): 0.2499,
    ("fig6", "lorenz", "r-chaotic-s2.1"): 11.1691,
    ("fig6", "poly5", "a-nonchaotic-s2.1"): 0.000102,
    ("fig6", "poly9", "a-nonchaotic-s2.1"): 0.001170,
    ("fig6", "lorenz", "a-chaotic-s2.1"): 9.0455,
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None


@dataclass(frozen=True)
class HarvestSettings:
    n_periods: int = 5
    samples_per_period: int = 10
    transient_periods: int = 0
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD


@dataclass(frozen=True)
class ExperimentManifest:
    task: str
    preset: str
    calibration: Calibration = DEFAULT_CALIBRATION
    n_points: int = FULL_POINTS
    harvest: HarvestSettings = HarvestSettings()
    cv: CVConfig = CVConfig()
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        if self.task not in TASKS:
            raise InvalidParameterError(f"unknown task {self.task!r}; expected one of {TASKS}")
        get_preset(self.preset)

    def reservoir_config(self) -> ReservoirConfig:
        pr = get_preset(self.preset)
        return ReservoirConfig(
            pr.channel,
            pr.x_min,
            pr.x_max,
            n_periods=self.harvest.n_periods,
            samples_per_period=self.harvest.samples_per_period,
            transient_periods=self.harvest.transient_periods,
            base=pr.base,
            calibration=self.calibration,
            steps_per_period=self.harvest.steps_per_period,
        )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cv"]["alpha_grid"] = [repr(float(a)) for a in self.cv.alpha_grid]
        d["calibration"]["omega_prime"] = repr(self.calibration.omega_prime)
        return d

    @property
    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def stem(self) -> str:
        return f"{self.task}_{self.preset}_s{self.seed}"


@dataclass
class ResultRecord:
    manifest_hash: str
    task: str
    preset: str
    seed: int
    n_points: int
    best_alpha: float
    train_mse: float
    test_mse: float
    normalized_test_mse: float
    wall_time: float = field(default=0.0, compare=False)

    COLUMNS = (
        "manifest_hash", "task", "preset", "seed", "n_points",
        "best_alpha", "train_mse", "test_mse", "normalized_test_mse",
    )

    def row(self) -> list:
        return [self._fmt(getattr(self, c)) for c in self.COLUMNS]

    @staticmethod
    def _fmt(v):
        return repr(v) if isinstance(v, float) else str(v)

    def write_csv(self, path) -> None:
        """Deterministic record file; wall time is kept out of it."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.COLUMNS)
            w.writerow(self.row())


@dataclass
class ExperimentResult:
    record: ResultRecord
    u: np.ndarray
    x_raw: np.ndarray
    target: np.ndarray
    prediction: np.ndarray
    model: object = None
    cache_hit: bool = False

    def write_predictions(self, path, manifest: ExperimentManifest) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# manifest={manifest.digest} seed={manifest.seed} task={manifest.task} preset={manifest.preset}\n")
            w = csv.writer(fh)
            w.writerow(["u", "x_raw", "target", "prediction"])
            for row in zip(self.u, self.x_raw, self.target, self.prediction):
                w.writerow([repr(float(v)) for v in row])


def _cv_seed(seed: int) -> int:
    return int(np.random.SeedSequence(seed).spawn(1)[0].generate_state(1)[0])


def load_features(m: ExperimentManifest, u: np.ndarray, cache_dir=None):
    cfg = m.reservoir_config()
    if cache_dir is None:
        return build_features(u, cfg), False
    return FeatureCache(cache_dir).get_or_build(u, cfg)


def fit_readout(m: ExperimentManifest, cache_dir=None):
    """Dataset, features, split and the readout fitted on the training part."""
    ds = make_dataset(m.task, m.n_points)
    fm, hit = load_features(m, ds.u, cache_dir)
    split = train_test_split(len(ds), seed=m.seed)
    X_tr, Y_tr = fm.features[split.train_idx], ds.target[split.train_idx]
    best_alpha, _ = cross_validate(X_tr, Y_tr, m.cv, seed=_cv_seed(m.seed))
    model = fit_ridge(X_tr, Y_tr, best_alpha, standardize=m.cv.standardize)
    return ds, fm, split, model, hit


def evaluate(m: ExperimentManifest, model, ds, fm, split, wall_time: float = 0.0, hit: bool = False) -> ExperimentResult:
    X_tr, Y_tr = fm.features[split.train_idx], ds.target[split.train_idx]
    te = split.test_idx
    pred = predict(model, fm.features[te])
    test_mse = mse(pred, ds.target[te])
    rec = ResultRecord(
        m.digest, m.task, m.preset, m.seed, m.n_points,
        float(model.reg_alpha),
        mse(predict(model, X_tr), Y_tr),
        test_mse,
        test_mse / float(np.var(ds.target)),
        wall_time,
    )
    return ExperimentResult(rec, ds.u[te], ds.x_raw[te], ds.target[te], pred, model, hit)


def run_experiment(m: ExperimentManifest, out_dir=None, cache_dir=None) -> ExperimentResult:
    """Dataset -> features -> 67:33 split -> CV -> fit -> test-set evaluation.

    With ``out_dir`` the record (``<stem>_record.csv``), the test-point
    predictions (``<stem>_predictions.csv``) and the model file are written.
    Normalized MSE divides by the variance of the whole target series.
    """
    t0 = time.perf_counter()
    ds, fm, split, model, hit = fit_readout(m, cache_dir)
    res = evaluate(m, model, ds, fm, split, hit=hit)
    res.record.wall_time = time.perf_counter() - t0
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        res.record.write_csv(out / f"{m.stem}_record.csv")
        res.write_predictions(out / f"{m.stem}_predictions.csv", m)
        model.save(out / f"{m.stem}_model.txt")
    return res


@dataclass
class CellOutcome:
    figure: str
    task: str
    preset: str
    records: list
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def reproduce(
    figure: str,
    calibration: Calibration = DEFAULT_CALIBRATION,
    seeds=(DEFAULT_SEED,),
    n_points: int = FULL_POINTS,
    harvest: HarvestSettings = HarvestSettings(),
    cv: CVConfig = CVConfig(),
    out_dir=None,
    cache_dir=None,
) -> list[CellOutcome]:
    """Run the six cells of ``figure`` ("fig6" or "fig7") for every seed.

    A failing cell is recorded with its error message; the remaining cells
    still run.
    """
    if figure not in FIGURES:
        raise InvalidParameterError(f"unknown figure {figure!r}; expected one of {tuple(FIGURES)}")
    cells = []
    for task, preset in FIGURES[figure]:
        recs = []
        try:
            for seed in seeds:
                m = ExperimentManifest(task, preset, calibration, n_points, harvest, cv, int(seed))
                recs.append(run_experiment(m, out_dir, cache_dir).record)
        except MemrcError as exc:
            cells.append(CellOutcome(figure, task, preset, recs, f"{type(exc).__name__}: {exc}"))
            continue
        cells.append(CellOutcome(figure, task, preset, recs))
    if out_dir is not None:
        write_summary(cells, Path(out_dir) / f"{figure}_summary.csv")
    return cells


SUMMARY_COLUMNS = (
    "figure", "task", "preset", "channel", "range_lo", "range_hi", "seeds",
    "test_mse_mean", "test_mse_std", "normalized_mse_mean", "best_alpha_first",
    "reported_mse", "manifest_hashes", "status",
)


def summary_rows(cells: list[CellOutcome]) -> list[list]:
    rows = []
    for c in cells:
        pr = PRESETS[c.preset]
        mses = np.array([r.test_mse for r in c.records])
        norm = np.array([r.normalized_test_mse for r in c.records])
        reported = REPORTED_MSE.get((c.figure, c.task, c.preset))
        rows.append([
            c.figure, c.task, c.preset, pr.channel, repr(pr.x_min), repr(pr.x_max),
            " ".join(str(r.seed) for r in c.records),
            repr(float(mses.mean())) if len(mses) else "",
            repr(float(mses.std())) if len(mses) else "",
            repr(float(norm.mean())) if len(norm) else "",
            repr(c.records[0].best_alpha) if c.records else "",
            "" if reported is None else repr(reported),
            " ".join(r.manifest_hash for r in c.records),
            "ok" if c.ok else f"failed: {c.error}",
        ])
    return rows


def write_summary(cells: list[CellOutcome], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        w.writerows(summary_rows(cells))


def require_calibration(explicit: Calibration | None, out_dir) -> Calibration:
    """Calibration from config, else ``<out_dir>/calibration.json``."""
    if explicit is not None:
        return explicit
    path = Path(out_dir) / "calibration.json"
    if path.exists():
        return Calibration.load(path)
    raise ConfigError(
        f"no calibration found (looked for {path}); run `memrc calibrate --out-dir {out_dir}` "
        "or set [calibration] omega_prime/forcing_sign in the --config file"
    )
