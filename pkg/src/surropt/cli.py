"""Command line front end.

Three subcommands: ``estimate`` reports the explained-effect summaries for
a trial CSV at one or more landmark times, ``simulate`` runs the built-in
benchmark study, and ``curves`` emits per-arm survival and progression-free
survival curves for plotting. Every output is deterministic for a fixed
seed, JSON payloads carry a ``schema_version`` field, and failures print a
single-line JSON reason to stderr with a documented exit code: 2 for input
problems, 3 for estimation failures, 4 for unreliable resampling.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from .data import ingest_csv
from .errors import (
    EstimationError,
    ParseError,
    UnreliableInferenceError,
    ValidationError,
)
from .inference import (
    PerturbationConfig,
    perturb_landmark_metrics,
    perturb_rmst_metrics,
)
from .pte import AnalysisOptions, LandmarkWorkspace, estimate_pte, estimate_pte_ind
from .rmst import TimeGrid, estimate_pte_rmst, estimate_pte_rmst_ind
from .sim import SimSetting, run_study
from .survival import km_with_ci

SCHEMA_VERSION = 1

ESTIMATE_COLUMNS = (
    "t0",
    "pte",
    "pte_se",
    "pte_ind",
    "pte_ind_se",
    "pte_rmst",
    "pte_rmst_se",
    "pte_rmst_ind",
    "pte_rmst_ind_se",
    "low",
    "low_rmst",
)

CURVE_COLUMNS = ("curve", "arm", "time", "survival", "lower", "upper")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="surropt",
        description=(
            "Evaluate a censored surrogate endpoint against a censored "
            "primary endpoint via an optimal landmark transformation."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser(
        "estimate",
        help="explained-effect estimates for a trial CSV at given landmarks",
    )
    est.add_argument("--input", required=True, help="trial CSV (id,arm,x,delta,s_time)")
    est.add_argument("--t", type=float, required=True, help="evaluation horizon")
    est.add_argument(
        "--t0", type=float, nargs="+", required=True, help="landmark time(s)"
    )
    est.add_argument(
        "--tau", type=float, default=None, help="restricted-mean horizon (default: t)"
    )
    est.add_argument(
        "--perturb",
        type=int,
        default=500,
        metavar="B",
        help="resampling replicates for SEs and CIs; 0 disables",
    )
    est.add_argument("--seed", type=int, default=0, help="resampling seed")
    est.add_argument(
        "--grid", type=int, default=400, metavar="G", help="transform grid size"
    )
    est.add_argument(
        "--eps-rel",
        type=float,
        default=1e-3,
        help="relative floor for the smoothed denominator",
    )
    est.add_argument(
        "--dt", type=float, default=None, help="restricted-mean node spacing"
    )
    est.add_argument(
        "--min-delta",
        type=float,
        default=1e-3,
        help="smallest overall effect treated as well defined",
    )
    est.add_argument(
        "--bandwidth", type=float, default=None, help="override the smoothing bandwidth"
    )
    est.add_argument(
        "--format", choices=("table", "csv", "json"), default="table", dest="fmt"
    )
    est.add_argument("--output", default=None, help="output path (default: stdout)")
    est.set_defaults(func=cmd_estimate)

    simp = sub.add_parser("simulate", help="run the benchmark simulation study")
    simp.add_argument(
        "--setting", type=int, nargs="+", choices=(1, 2, 3), default=[1, 2, 3]
    )
    simp.add_argument("--t0", type=float, nargs="+", default=[1.0, 2.0, 3.0])
    simp.add_argument("--t", type=float, default=5.0, help="evaluation horizon")
    simp.add_argument("--tau", type=float, default=5.0, help="restricted-mean horizon")
    simp.add_argument("--reps", type=int, default=500, help="replicates per cell")
    simp.add_argument("--n", type=int, default=2000, help="subjects per replicate")
    simp.add_argument(
        "--perturb",
        type=int,
        default=500,
        metavar="B",
        help="resampling replicates per study replicate; 0 disables",
    )
    simp.add_argument("--perturb-rmst", action="store_true")
    simp.add_argument("--seed", type=int, default=0)
    simp.add_argument(
        "--oracle-m", type=int, default=1_000_000, help="mega-sample size for truths"
    )
    simp.add_argument(
        "--threads",
        type=int,
        default=1,
        help="worker processes (SURROPT_THREADS overrides)",
    )
    simp.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    simp.add_argument("--output", default=None)
    simp.set_defaults(func=cmd_simulate)

    cur = sub.add_parser(
        "curves",
        help="per-arm survival and progression-free survival curves with bands",
    )
    cur.add_argument("--input", required=True, help="trial CSV (id,arm,x,delta,s_time)")
    cur.add_argument("--format", choices=("csv", "json"), default="csv", dest="fmt")
    cur.add_argument("--output", default=None)
    cur.set_defaults(func=cmd_curves)

    return parser


def _read_dataset(path):
    try:
        return ingest_csv(path)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc


def _resolve_threads(args):
    raw = os.environ.get("SURROPT_THREADS")
    if raw is None:
        value = args.threads
    else:
        try:
            value = int(raw)
        except ValueError:
            raise ValidationError(
                f"SURROPT_THREADS must be an integer, got {raw!r}"
            ) from None
    if value < 1:
        raise ValidationError("thread count must be at least 1")
    return value


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _cell(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return repr(value) if isinstance(value, float) else str(value)


def _emit(text, path):
    if not text.endswith("\n"):
        text += "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _rows_to_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def _rows_to_table(columns, rows):
    def fmt(value):
        if value is None or (isinstance(value, float) and not math.isfinite(value)):
            return ""
        if isinstance(value, float):
            return f"{value:.4f}"
        return str(value)

    cells = [[fmt(row[c]) for c in columns] for row in rows]
    widths = [
        max(len(name), *(len(r[i]) for r in cells)) if cells else len(name)
        for i, name in enumerate(columns)
    ]
    lines = ["  ".join(name.rjust(w) for name, w in zip(columns, widths))]
    for r in cells:
        lines.append("  ".join(v.rjust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def cmd_estimate(args):
    data = _read_dataset(args.input)
    tau = args.t if args.tau is None else args.tau
    options = AnalysisOptions(
        grid_size=args.grid,
        eps_rel=args.eps_rel,
        min_delta=args.min_delta,
        bandwidth=args.bandwidth,
    )
    options.validate()
    landmarks = [float(v) for v in args.t0]
    seeds = np.random.SeedSequence(args.seed).spawn(2 * len(landmarks))

    rows = []
    diagnostics = {}
    for k, t0 in enumerate(landmarks):
        ws = LandmarkWorkspace(data, t0, options)
        grid = TimeGrid.build(t0, tau, args.dt)
        point = {
            "pte": estimate_pte(data, args.t, t0, options, workspace=ws),
            "pte_ind": estimate_pte_ind(data, args.t, t0, options, workspace=ws),
            "pte_rmst": estimate_pte_rmst(data, t0, tau, options, workspace=ws, grid=grid),
            "pte_rmst_ind": estimate_pte_rmst_ind(
                data, t0, tau, options, workspace=ws, grid=grid
            ),
        }
        row = {"t0": t0}
        for name, res in point.items():
            row[name] = res.pte
            row[name + "_se"] = math.nan
        row["low"] = math.nan
        row["low_rmst"] = math.nan

        if args.perturb > 0:
            intervals = perturb_landmark_metrics(
                ws,
                args.t,
                PerturbationConfig(replicates=args.perturb, seed=seeds[2 * k]),
                metrics=("pte", "pte_ind"),
            )
            intervals.update(
                perturb_rmst_metrics(
                    ws,
                    tau,
                    PerturbationConfig(replicates=args.perturb, seed=seeds[2 * k + 1]),
                    metrics=("pte_rmst", "pte_rmst_ind"),
                    grid=grid,
                )
            )
            bad = {name: iv for name, iv in intervals.items() if not iv.reliable}
            if bad:
                worst = max(bad, key=lambda name: bad[name].failures)
                raise UnreliableInferenceError(
                    f"resampling unreliable at t0={t0:g} for {sorted(bad)}: "
                    f"{bad[worst].failures} of {args.perturb} replicates failed",
                    partial=bad[worst],
                )
            for name, iv in intervals.items():
                row[name + "_se"] = iv.se
            row["low"] = intervals["pte"].ci95[0]
            row["low_rmst"] = intervals["pte_rmst"].ci95[0]

        rows.append(row)
        diagnostics[f"{t0:g}"] = {
            "landmark": _jsonable(point["pte"].diagnostics),
            "restricted_mean": _jsonable(point["pte_rmst"].diagnostics),
        }

    if args.fmt == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "estimate",
            "input": args.input,
            "t": args.t,
            "tau": tau,
            "perturb": args.perturb,
            "seed": args.seed,
            "columns": list(ESTIMATE_COLUMNS),
            "rows": [_jsonable(row) for row in rows],
            "diagnostics": diagnostics,
        }
        _emit(json.dumps(payload, indent=2), args.output)
    elif args.fmt == "csv":
        _emit(_rows_to_csv(ESTIMATE_COLUMNS, rows), args.output)
    else:
        _emit(_rows_to_table(ESTIMATE_COLUMNS, rows), args.output)


def cmd_simulate(args):
    settings = tuple(
        SimSetting(setting=s, t=args.t, tau=args.tau) for s in args.setting
    )
    table = run_study(
        settings=settings,
        t0_values=tuple(float(v) for v in args.t0),
        reps=args.reps,
        n=args.n,
        b=args.perturb,
        seed=args.seed,
        perturb_rmst=args.perturb_rmst,
        oracle_m=args.oracle_m,
        threads=_resolve_threads(args),
    )
    _emit(table.to_csv() if args.fmt == "csv" else table.to_json(), args.output)


def cmd_curves(args):
    data = _read_dataset(args.input)
    blocks = []
    for arm in (0, 1):
        mask = data.arm == arm
        x = data.x[mask]
        delta = data.delta[mask]
        s = data.s[mask]
        has_s = ~np.isnan(s)
        # Progression-free time: the surrogate event if one was observed,
        # otherwise follow-up ends at x with the primary status.
        pfs_time = np.where(has_s, s, x)
        pfs_event = np.where(has_s, 1, delta)
        for curve, times, events in (
            ("os", x, delta),
            ("pfs", pfs_time, pfs_event),
        ):
            grid, surv, lower, upper = km_with_ci(times, events)
            blocks.append((curve, arm, grid, surv, lower, upper))

    if args.fmt == "json":
        payload = {
            "schema_version": SCHEMA_VERSION,
            "command": "curves",
            "input": args.input,
            "curves": [
                {
                    "curve": curve,
                    "arm": arm,
                    "time": _jsonable(grid.tolist()),
                    "survival": _jsonable(surv.tolist()),
                    "lower": _jsonable(lower.tolist()),
                    "upper": _jsonable(upper.tolist()),
                }
                for curve, arm, grid, surv, lower, upper in blocks
            ],
        }
        _emit(json.dumps(payload, indent=2), args.output)
    else:
        rows = [
            {
                "curve": curve,
                "arm": arm,
                "time": float(t),
                "survival": float(sv),
                "lower": float(lo),
                "upper": float(hi),
            }
            for curve, arm, grid, surv, lower, upper in blocks
            for t, sv, lo, hi in zip(grid, surv, lower, upper)
        ]
        _emit(_rows_to_csv(CURVE_COLUMNS, rows), args.output)


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ParseError, ValidationError) as exc:
        return _fail(2, exc)
    except UnreliableInferenceError as exc:
        return _fail(4, exc)
    except EstimationError as exc:
        return _fail(3, exc)
    return 0


def _fail(code, exc):
    reason = {
        "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}
    }
    print(json.dumps(reason), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
