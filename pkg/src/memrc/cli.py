"""Command-line entry point: ``memrc <subcommand> [options]``.

Exit codes: 0 success, 1 experiment failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
import tomli

from .bifurcation import (
    FIG4_LANDMARKS,
    Calibration,
    CalibrationSettings,
    SweepSpec,
    calibrate,
    default_candidates,
    sweep,
)
from .errors import CalibrationError, ConfigError, InvalidParameterError, MemrcError
from .experiments import (
    A_CHANNEL_BASE,
    CI_POINTS,
    DEFAULT_SEED,
    FULL_POINTS,
    PRESETS,
    ExperimentManifest,
    HarvestSettings,
    evaluate,
    fit_readout,
    load_features,
    reproduce,
    require_calibration,
    R_CHANNEL_BASE,
)
from .readout import CVConfig, RidgeModel, train_test_split
from .tasks import TASKS, make_dataset

log = logging.getLogger("memrc")


def load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


class Context:
    """Resolved global options (flags override the config file)."""

    def __init__(self, args):
        cfg = load_config(args.config)
        self.raw = cfg
        self.seed = args.seed if args.seed is not None else int(cfg.get("seed", DEFAULT_SEED))
        self.out_dir = Path(args.out_dir or cfg.get("out_dir", "results"))
        self.ci_scale = args.ci_scale or bool(cfg.get("ci_scale", False))
        self.n_points = CI_POINTS if self.ci_scale else int(cfg.get("n_points", FULL_POINTS))
        self.cache_dir = Path(cfg.get("cache_dir", self.out_dir / "cache"))
        try:
            self.harvest = HarvestSettings(**cfg.get("harvest", {}))
            cv = dict(cfg.get("cv", {}))
            if "alpha_grid" in cv:
                cv["alpha_grid"] = tuple(float(a) for a in cv["alpha_grid"])
            self.cv = CVConfig(**cv)
            cal = cfg.get("calibration")
            self.calibration = Calibration(float(cal["omega_prime"]), int(cal["forcing_sign"])) if cal else None
        except (TypeError, KeyError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}") from exc

    def require_calibration(self) -> Calibration:
        return require_calibration(self.calibration, self.out_dir)

    def manifest(self, task, preset) -> ExperimentManifest:
        return ExperimentManifest(task, preset, self.require_calibration(), self.n_points, self.harvest, self.cv, self.seed)


def cmd_calibrate(ctx: Context, args) -> int:
    settings = CalibrationSettings()
    coarse = default_candidates(args.coarse_points)
    try:
        res = calibrate(coarse, FIG4_LANDMARKS, R_CHANNEL_BASE, settings)
    except CalibrationError as exc:
        log.error("%s", exc)
        if exc.diagnostics is not None:
            ctx.out_dir.mkdir(parents=True, exist_ok=True)
            exc.diagnostics.write_csv(ctx.out_dir / "calibration_table.csv")
        return 1
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    res.calibration.save(ctx.out_dir / "calibration.json", matches=res.matches, landmarks=len(FIG4_LANDMARKS), margin=res.margin)
    res.write_csv(ctx.out_dir / "calibration_table.csv")
    print(f"omega_prime={res.calibration.omega_prime!r} forcing_sign={res.calibration.forcing_sign:+d} "
          f"matches={res.matches}/{len(FIG4_LANDMARKS)} margin={res.margin:.4g}")
    return 0


def cmd_bifurcate(ctx: Context, args) -> int:
    cal = ctx.require_calibration()
    base = R_CHANNEL_BASE if args.channel == "R" else A_CHANNEL_BASE
    defaults = {"R": (1.9e3, 2.8e3), "A": (1.5, 3.5)}[args.channel]
    spec = SweepSpec(
        args.channel,
        args.start if args.start is not None else defaults[0],
        args.stop if args.stop is not None else defaults[1],
        n_points=args.n_points,
        transient_periods=args.transient,
        record_periods=args.record,
        base=base,
        calibration=cal,
        mode=args.mode,
    )
    scan = sweep(spec)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"bifurcation_{args.channel}"
    scan.write_csv(ctx.out_dir / f"{stem}_diagram.csv", ctx.out_dir / f"{stem}_summary.csv")
    for kind, lo, hi in scan.windows():
        print(f"{kind:9s} {lo:.6g} .. {hi:.6g}")
    return 0


def cmd_harvest(ctx: Context, args) -> int:
    m = ctx.manifest(TASKS[0], args.preset)
    u = np.arange(ctx.n_points) / (ctx.n_points - 1)
    fm, hit = load_features(m, u, ctx.cache_dir)
    print(f"features {fm.shape[0]}x{fm.shape[1]} for preset {args.preset} ({'cache hit' if hit else 'computed'}) in {ctx.cache_dir}")
    return 0


def cmd_train(ctx: Context, args) -> int:
    m = ctx.manifest(args.task, args.preset)
    ds, fm, split, model, hit = fit_readout(m, ctx.cache_dir)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    path = ctx.out_dir / f"{m.stem}_model.txt"
    model.save(path)
    res = evaluate(m, model, ds, fm, split, hit=hit)
    print(f"model -> {path}  reg_alpha={model.reg_alpha:.3g}  train_mse={res.record.train_mse:.6g}")
    return 0


def cmd_eval(ctx: Context, args) -> int:
    m = ctx.manifest(args.task, args.preset)
    path = Path(args.model) if args.model else ctx.out_dir / f"{m.stem}_model.txt"
    if not path.exists():
        raise ConfigError(f"model file {path} not found; run `memrc train` first")
    model = RidgeModel.load(path)
    ds = make_dataset(m.task, m.n_points)
    fm, hit = load_features(m, ds.u, ctx.cache_dir)
    split = train_test_split(len(ds), seed=m.seed)
    res = evaluate(m, model, ds, fm, split, hit=hit)
    ctx.out_dir.mkdir(parents=True, exist_ok=True)
    res.record.write_csv(ctx.out_dir / f"{m.stem}_record.csv")
    res.write_predictions(ctx.out_dir / f"{m.stem}_predictions.csv", m)
    r = res.record
    print(f"test_mse={r.test_mse:.6g} normalized={r.normalized_test_mse:.6g} manifest={r.manifest_hash}")
    return 0


def cmd_reproduce(ctx: Context, args) -> int:
    cal = ctx.require_calibration()
    seeds = [ctx.seed + i for i in range(args.seeds)]
    cells = reproduce(args.figure, cal, seeds, ctx.n_points, ctx.harvest, ctx.cv, ctx.out_dir, ctx.cache_dir)
    for c in cells:
        if c.ok:
            mses = np.array([r.test_mse for r in c.records])
            spread = f" +- {mses.std():.3g}" if len(mses) > 1 else ""
            print(f"{c.task:7s} {c.preset:20s} test_mse={mses.mean():.4g}{spread}")
        else:
            print(f"{c.task:7s} {c.preset:20s} FAILED {c.error}")
    print(f"summary -> {ctx.out_dir / (args.figure + '_summary.csv')}")
    return 0 if all(c.ok for c in cells) else 1


def _global_options(suppress: bool) -> argparse.ArgumentParser:
    # subcommands re-declare the globals with SUPPRESS so that a flag given
    # before the subcommand is not reset to None by the subparser
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file", **kw)
    common.add_argument("--seed", type=int, help=f"RNG seed (default {DEFAULT_SEED})", **kw)
    common.add_argument("--out-dir", help="output directory (default ./results)", **kw)
    common.add_argument("--ci-scale", action="store_true", help=f"use {CI_POINTS} data points instead of {FULL_POINTS}", **kw)
    common.add_argument("-v", "--verbose", action="store_true", **kw)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_options(suppress=True)
    parser = argparse.ArgumentParser(prog="memrc", description=__doc__, parents=[_global_options(suppress=False)])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", parents=[common], help="fit omega' and the forcing sign to the phase-portrait landmarks")
    p.add_argument("--coarse-points", type=int, default=160)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("bifurcate", parents=[common], help="bifurcation diagram and regime summary CSVs")
    p.add_argument("--channel", choices=("R", "A"), default="R")
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--n-points", type=int, default=600)
    p.add_argument("--transient", type=int, default=200)
    p.add_argument("--record", type=int, default=128)
    p.add_argument("--mode", choices=("section", "extrema"), default="section")
    p.set_defaults(func=cmd_bifurcate)

    preset_help = "reservoir preset: " + ", ".join(PRESETS)
    p = sub.add_parser("harvest", parents=[common], help="compute (or load cached) reservoir features")
    p.add_argument("--preset", required=True, help=preset_help)
    p.set_defaults(func=cmd_harvest)

    for name, func, text in (("train", cmd_train, "fit the readout on the training split"),
                             ("eval", cmd_eval, "evaluate a saved readout on the test split")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--task", required=True, choices=TASKS)
        p.add_argument("--preset", required=True, help=preset_help)
        if name == "eval":
            p.add_argument("--model", help="model file (default: the one `train` writes)")
        p.set_defaults(func=func)

    p = sub.add_parser("reproduce", parents=[common], help="run the six cells of a figure")
    p.add_argument("--figure", required=True, choices=("fig6", "fig7"))
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds (mean +- std when > 1)")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        ctx = Context(args)
        return args.func(ctx, args)
    except (ConfigError, InvalidParameterError) as exc:
        print(f"memrc: configuration error: {exc}", file=sys.stderr)
        return 2
    except MemrcError as exc:
        print(f"memrc: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
