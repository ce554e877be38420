#!/usr/bin/env python3
"""Coarse R sweep with regime windows, written to CSV for plotting."""

from pathlib import Path

from memrc.bifurcation import SweepSpec, sweep
from memrc.dynsys import PhysicalComponents

out = Path("demo_output")
out.mkdir(exist_ok=True)

spec = SweepSpec("R", 1.9e3, 2.8e3, n_points=46, base=PhysicalComponents(A=2.0))
scan = sweep(spec)
scan.write_csv(out / "bifurcation_R_diagram.csv", out / "bifurcation_R_summary.csv")

for kind, lo, hi in scan.windows():
    print(f"{kind:9s} {lo:7.0f} .. {hi:7.0f} ohm")
print(f"diagram and summary in {out}/")
