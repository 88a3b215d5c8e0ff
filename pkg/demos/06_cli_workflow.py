"""The command line round trip on a simulated trial.

Writes a trial CSV, then drives the installed entry point in process:
estimates at two landmarks with resampled intervals, and exports the
survival curves that a plotting script would consume.
"""

import tempfile
from pathlib import Path

from surropt import generate_setting, to_csv
from surropt.cli import main

workdir = Path(tempfile.mkdtemp(prefix="surropt-demo-"))
trial = workdir / "trial.csv"
_, data = generate_setting(1, 1000, seed=3)
to_csv(data, trial)
print(f"wrote {trial}\n")

print("$ surropt estimate --input trial.csv --t 5 --t0 1 2 --perturb 100 --seed 9")
main([
    "estimate", "--input", str(trial), "--t", "5", "--t0", "1", "2",
    "--perturb", "100", "--seed", "9",
])

curves = workdir / "curves.csv"
print("\n$ surropt curves --input trial.csv --output curves.csv")
main(["curves", "--input", str(trial), "--output", str(curves)])
lines = curves.read_text().splitlines()
print(f"wrote {curves} ({len(lines) - 1} rows); first three:")
for line in lines[:4]:
    print(f"  {line}")
