"""A small Monte Carlo study: bias, spread, and interval coverage.

The full benchmark runs hundreds of replicates per cell; this keeps the
shape (truth from a mega-sample oracle, per-replicate resampled intervals)
at a size that finishes in about a minute.
"""

from surropt import run_study

table = run_study(
    settings=(1,),
    t0_values=(1.0, 2.0),
    reps=20,
    n=1000,
    b=100,
    seed=42,
    metrics=("pte", "g2"),
    oracle_m=10**6,
)

print(table.to_csv())
for row in table.rows:
    print(
        f"setting {row.setting} t0={row.t0:g} {row.metric:4s} "
        f"truth {row.truth:.3f} mean {row.est:.3f} bias {row.bias:+.3f} "
        f"ese {row.ese:.3f} ase {row.ase:.3f} cp {row.cp:.2f}"
    )
