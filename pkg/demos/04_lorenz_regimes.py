#!/usr/bin/env python3
"""Does a chaotic reservoir predict the Lorenz x(t) trace better than a
periodic one?  Compare the two regime presets on identical splits."""

from memrc.experiments import ExperimentManifest, run_experiment

for channel in ("r", "a"):
    for seed in (0, 1, 2):
        mse = {}
        for regime in ("periodic", "chaotic"):
            m = ExperimentManifest("lorenz", f"{channel}-{regime}-fig7", n_points=2000, seed=seed)
            mse[regime] = run_experiment(m).record.test_mse
        verdict = "chaotic wins" if mse["chaotic"] < mse["periodic"] else "periodic wins"
        print(f"{channel.upper()} seed {seed}: periodic {mse['periodic']:.2f}  chaotic {mse['chaotic']:.2f}  {verdict}")
