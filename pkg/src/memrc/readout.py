"""Linear readout: ridge regression with an unpenalized intercept,
k-fold selection of the regularization strength, and MSE scoring."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InsufficientDataError, InvalidParameterError

TRAIN_RATIO = 0.67


@dataclass
class RidgeModel:
    """Readout weights in raw feature units.

    ``x_mean`` and ``x_scale`` are the centering/scaling constants used
    while fitting (``x_scale`` is all ones without standardization); they
    are already folded into ``weights`` and ``intercept``.
    """

    weights: np.ndarray
    intercept: float
    reg_alpha: float
    x_mean: np.ndarray | None = None
    x_scale: np.ndarray | None = None
    rank_deficient: bool = False

    @property
    def width(self) -> int:
        return len(self.weights)

    def save(self, path) -> None:
        """Write a plain-text model file (17 significant digits)."""
        n = self.width
        mean = self.x_mean if self.x_mean is not None else np.zeros(n)
        scale = self.x_scale if self.x_scale is not None else np.ones(n)
        lines = [
            "# memrc ridge readout",
            f"width {n}",
            f"reg_alpha {self.reg_alpha!r}",
            f"rank_deficient {int(self.rank_deficient)}",
            "x_mean " + " ".join(repr(float(v)) for v in mean),
            "x_scale " + " ".join(repr(float(v)) for v in scale),
            "weights " + " ".join(repr(float(v)) for v in self.weights),
            f"intercept {float(self.intercept)!r}",
        ]
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "RidgeModel":
        fields_ = {}
        with open(path) as fh:
            for line in fh:
                if not line.strip() or line.startswith("#"):
                    continue
                key, _, rest = line.partition(" ")
                fields_[key] = rest.split()
        try:
            n = int(fields_["width"][0])
            vec = {k: np.array([float(v) for v in fields_[k]]) for k in ("x_mean", "x_scale", "weights")}
            model = cls(
                weights=vec["weights"],
                intercept=float(fields_["intercept"][0]),
                reg_alpha=float(fields_["reg_alpha"][0]),
                x_mean=vec["x_mean"],
                x_scale=vec["x_scale"],
                rank_deficient=bool(int(fields_.get("rank_deficient", ["0"])[0])),
            )
        except (KeyError, IndexError, ValueError) as exc:
            raise InvalidParameterError(f"{path}: malformed model file ({exc})") from exc
        if any(len(v) != n for v in vec.values()):
            raise InvalidParameterError(f"{path}: vector lengths disagree with width {n}")
        return model


def _check_xy(X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or Y.ndim != 1:
        raise InvalidParameterError("X must be 2-D and Y 1-D")
    if X.shape[0] != Y.shape[0]:
        raise InvalidParameterError(f"X has {X.shape[0]} rows but Y has {Y.shape[0]} entries")
    if X.shape[0] < 2:
        raise InsufficientDataError("need at least two samples")
    return X, Y


def fit_ridge(X, Y, reg_alpha: float, fit_intercept: bool = True, standardize: bool = False) -> RidgeModel:
    """Minimize ``sum((X w + b - Y)**2) + reg_alpha * |w|**2`` over w and b.

    The intercept is left out of the penalty by centering X and Y.  With
    ``standardize`` the penalty acts on weights of unit-variance columns
    (constant columns keep scale 1); the returned weights are mapped back
    to raw units.  The normal equations are solved by Cholesky; if the
    system is numerically singular a least-squares solve is used instead,
    and ``rank_deficient`` is set when that happened with ``reg_alpha == 0``.
    """
    X, Y = _check_xy(X, Y)
    if not reg_alpha >= 0:
        raise InvalidParameterError("reg_alpha must be non-negative")
    n_feat = X.shape[1]
    if fit_intercept:
        x_mean = X.mean(axis=0)
        y_mean = Y.mean()
    else:
        x_mean = np.zeros(n_feat)
        y_mean = 0.0
    Xc = X - x_mean
    if standardize:
        x_scale = Xc.std(axis=0)
        x_scale[x_scale == 0] = 1.0
        Xc = Xc / x_scale
    else:
        x_scale = np.ones(n_feat)
    Yc = Y - y_mean
    gram = Xc.T @ Xc
    gram[np.diag_indices_from(gram)] += reg_alpha
    rhs = Xc.T @ Yc
    rank_deficient = False
    try:
        factor = linalg.cho_factor(gram, lower=False, check_finite=False)
        d = np.abs(np.diag(factor[0]))
        # squared diagonal ratio bounds the condition number from below
        if n_feat and (d.min() == 0 or (d.max() / d.min()) ** 2 * np.finfo(float).eps * max(X.shape) > 1):
            raise linalg.LinAlgError("numerically singular normal equations")
        w = linalg.cho_solve(factor, rhs, check_finite=False)
        if not np.all(np.isfinite(w)):
            raise linalg.LinAlgError("non-finite Cholesky solution")
    except linalg.LinAlgError:
        rank_deficient = reg_alpha == 0
        if reg_alpha > 0:
            aug = np.vstack((Xc, np.sqrt(reg_alpha) * np.eye(n_feat)))
            w = linalg.lstsq(aug, np.concatenate((Yc, np.zeros(n_feat))))[0]
        else:
            w = linalg.lstsq(Xc, Yc)[0]
    w = w / x_scale
    b = y_mean - float(x_mean @ w) if fit_intercept else 0.0
    return RidgeModel(w, b, float(reg_alpha), x_mean, x_scale, rank_deficient)


def predict(m: RidgeModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.shape[1] != m.width:
        raise InvalidParameterError(f"model expects {m.width} features, got {X.shape[1]}")
    return X @ m.weights + m.intercept


def mse(pred, target) -> float:
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.size == 0:
        raise InvalidParameterError("pred and target must be non-empty and equally shaped")
    return float(np.mean((pred - target) ** 2))


@dataclass(frozen=True)
class SplitPlan:
    train_idx: np.ndarray
    test_idx: np.ndarray
    seed: int


def train_test_split(n: int, ratio: float = TRAIN_RATIO, seed: int = 42) -> SplitPlan:
    """Random partition of ``range(n)`` with ``floor(ratio*n)`` training indices."""
    if n < 3:
        raise InsufficientDataError("need at least three samples to split")
    if not 0 < ratio < 1:
        raise InvalidParameterError("ratio must lie strictly between 0 and 1")
    # round before flooring so that 0.67*10000 = 6700.000000000001 does not matter
    n_train = int(np.floor(round(ratio * n, 9)))
    perm = np.random.default_rng(seed).permutation(n)
    return SplitPlan(np.sort(perm[:n_train]), np.sort(perm[n_train:]), seed)


def default_alpha_grid() -> np.ndarray:
    return np.logspace(-9, 2, 12)


@dataclass(frozen=True)
class CVConfig:
    folds: int = 5
    alpha_grid: tuple = field(default_factory=lambda: tuple(default_alpha_grid()))
    standardize: bool = True

    def __post_init__(self):
        if self.folds < 2:
            raise InvalidParameterError("folds must be at least 2")
        if len(self.alpha_grid) == 0 or min(self.alpha_grid) < 0:
            raise InvalidParameterError("alpha grid must be non-empty and non-negative")


def kfold_indices(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def cross_validate(X, Y, cv: CVConfig = CVConfig(), seed: int = 42):
    """Shuffled k-fold search over ``cv.alpha_grid``.

    Returns ``(best_alpha, scores)`` where ``scores`` maps each alpha to
    its mean validation MSE.  Ties go to the larger alpha.
    """
    X, Y = _check_xy(X, Y)
    n = X.shape[0]
    if n < cv.folds:
        raise InsufficientDataError(f"{n} rows cannot fill {cv.folds} folds")
    parts = kfold_indices(n, cv.folds, seed)
    alphas = sorted({float(a) for a in cv.alpha_grid})
    scores = {}
    for a in alphas:
        errs = []
        for k, val in enumerate(parts):
            train = np.concatenate([p for j, p in enumerate(parts) if j != k])
            model = fit_ridge(X[train], Y[train], a, standardize=cv.standardize)
            errs.append(mse(predict(model, X[val]), Y[val]))
        scores[a] = float(np.mean(errs))
    best = min(alphas, key=lambda a: (scores[a], -a))
    return best, scores
