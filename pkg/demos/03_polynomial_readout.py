#!/usr/bin/env python3
"""End-to-end polynomial fit with the A-reservoir at CI scale."""

import numpy as np

from memrc.experiments import ExperimentManifest, run_experiment

for task in ("poly5", "poly9"):
    m = ExperimentManifest(task, "a-nonchaotic-s2.1", n_points=1000)
    res = run_experiment(m)
    r = res.record
    print(f"{task}: alpha={r.best_alpha:.1e} test MSE={r.test_mse:.3g} normalized={r.normalized_test_mse:.3g}")
    worst = np.argmax(np.abs(res.prediction - res.target))
    print(f"  worst test point x={res.x_raw[worst]:.3f} target={res.target[worst]:.4f} prediction={res.prediction[worst]:.4f}")
