"""Command-line entry point.

Exit codes: 0 success, 2 usage or configuration error, 3 infeasible plan,
4 runtime failure, 5 ``compare`` found the utility ordering violated.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import io
from .params import ConfigError, SystemParams, load_config
from .planner import ApproximationWarning, InfeasiblePlanError, PlanResult, beta_sweep, derive, check_feasible
from .sim import POLICIES, AggregateMetrics, RunResult, aggregate, run_experiment, utility_ordering

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUNTIME = 4
EXIT_ORDERING = 5

OUT_ENV = "MECGAME_OUT"
PLAN_COLUMNS = (
    "beta", "mu_theta", "var_theta", "k_max", "k_min", "c_min", "c_max",
    "c_th_real", "c_th", "c_th_ceil", "e_p_star",
)
RUN_COLUMNS = ("t", "attendance", "winning_bit", "jobs_per_server", "qoe_tail", "mean_utility")
REFERENCE_CUT_OFF = 15


class UsageError(Exception):
    pass


def _params_dict(params: SystemParams) -> dict:
    return {f.name: getattr(params, f.name) for f in dataclasses.fields(params) if f.name != "name"}


def _load(args: argparse.Namespace) -> SystemParams:
    overrides = {
        "seed": args.seed,
        "runs": args.runs,
        "rounds": args.rounds,
        "beta": args.beta,
        "memory": args.memory,
        "scoring_mode": args.scoring,
        "c_th_override": args.c_th,
    }
    return load_config(args.config, overrides)


def _out_dir(args: argparse.Namespace) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "results")


def _print_plan(params: SystemParams, result: PlanResult) -> None:
    print(f"config            : {params.name or '-'}")
    print(f"beta              : {result.beta:.6g}")
    print(f"mean delay        : {result.mu_theta:.6g}")
    print(f"delay variance    : {result.var_theta:.6g}")
    print(f"k_max             : {result.k_max:.6g}")
    print(f"k_min (charged)   : {result.k_min:.6g}")
    print(f"c_min / c_max     : {result.c_min:.6g} / {result.c_max:.6g}")
    print(f"K_T / k_max       : {result.c_th_real:.6g}")
    print(f"c_th floor / ceil : {result.c_th} / {result.c_th_ceil} (game uses {result.game_cut_off})")
    print(f"price e_p*        : {result.e_p_star:.6g}")
    if REFERENCE_CUT_OFF not in (result.c_th, result.c_th_ceil):
        print(f"note              : neither rounding gives the reference cut-off {REFERENCE_CUT_OFF}")
    elif result.c_th != result.c_th_ceil:
        which = "floor" if result.c_th == REFERENCE_CUT_OFF else "ceil"
        print(f"note              : reference cut-off {REFERENCE_CUT_OFF} matches the {which}")


def cmd_plan(args: argparse.Namespace) -> int:
    params = _load(args)
    result = derive(params)
    _print_plan(params, result)
    try:
        check_feasible(result, params.M)
    except InfeasiblePlanError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    out = _out_dir(args)
    row = result.as_row()
    formats = [args.format] if args.format else ["json", "csv"]
    if "json" in formats:
        io.write_json(out / "plan.json", {"params": _params_dict(params), "plan": row})
    if "csv" in formats:
        io.write_csv(out / "plan.csv", PLAN_COLUMNS, [[row[c] for c in PLAN_COLUMNS]])
    return EXIT_OK


def cmd_sweep_beta(args: argparse.Namespace) -> int:
    lo, hi, steps = args.beta_from, args.beta_to, args.steps
    if not 0.0 < lo < 0.5 or not 0.0 < hi < 0.5 or not lo < hi:
        raise UsageError(f"need 0 < from < to < 0.5, got from={lo}, to={hi}")
    if steps < 1:
        raise UsageError(f"steps must be >= 1, got {steps}")
    params = _load(args)
    betas = [float(b) for b in np.linspace(lo, hi, steps)]
    rows = beta_sweep(params, betas)
    table = []
    for row in rows:
        values = row.result.as_row() if row.result else {"beta": row.beta}
        table.append([values.get(c) for c in PLAN_COLUMNS] + [row.status])
    path = io.write_csv(_out_dir(args) / "sweep_beta.csv", PLAN_COLUMNS + ("status",), table)
    bad = sum(not r.feasible for r in rows)
    print(f"wrote {len(rows)} rows to {path}" + (f" ({bad} infeasible)" if bad else ""))
    return EXIT_OK


def _run_rows(res: RunResult):
    mean_u = res.mean_utility
    for i in range(res.rounds):
        yield (
            i + 1,
            int(res.attendance[i]),
            int(res.winning_bit[i]),
            float(res.jobs_per_server[i]),
            float(res.qoe_tail[i]),
            float(mean_u[i]),
        )


def _simulate(args: argparse.Namespace) -> tuple[SystemParams, AggregateMetrics, Path]:
    params = _load(args)
    results = run_experiment(params, POLICIES, workers=args.workers)
    out = _out_dir(args)
    if not args.no_run_csv:
        for policy, runs in results.items():
            for res in runs:
                io.write_csv(out / "runs" / f"{policy}_run{res.run_index:03d}.csv", RUN_COLUMNS, _run_rows(res))
    metrics = aggregate(results, params.tail_fraction)
    series = [metrics.policies[p].qoe_series for p in POLICIES]
    io.write_csv(
        out / "qoe_series.csv",
        ("t",) + tuple(f"qoe_tail_{p}" for p in POLICIES),
        ([t + 1] + [s[t] for s in series] for t in range(params.rounds)),
    )
    report = {
        "params": _params_dict(params),
        "plan": derive(params).as_row(),
        "metrics": metrics.to_dict(include_series=False),
        "utility_ordering": utility_ordering(metrics),
    }
    io.write_json(out / "aggregate.json", report)
    for p in POLICIES:
        pm = metrics.policies[p]
        print(
            f"{p:8s} attendance {pm.mean_attendance.mean:8.4f}  "
            f"qoe_tail {pm.mean_qoe_tail.mean:.4f}  "
            f"utility {pm.mean_utility.mean:.4f} +/- {pm.mean_utility.stderr:.4f}"
        )
    return params, metrics, out


def cmd_simulate(args: argparse.Namespace) -> int:
    _simulate(args)
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    _, metrics, out = _simulate(args)
    ordering = utility_ordering(metrics)
    io.write_json(out / "comparison.json", ordering)
    for name, ok in ordering.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(ordering.values()) else EXIT_ORDERING


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="paper_sec4", help="config file or bundled name")
    common.add_argument("--seed", type=int)
    common.add_argument("--runs", type=int)
    common.add_argument("--rounds", type=int)
    common.add_argument("--beta", type=float)
    common.add_argument("--memory", type=int)
    common.add_argument("--scoring", choices=("literal", "virtual"))
    common.add_argument("--c-th", dest="c_th", type=int, help="pin the game cut-off")
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./results)")
    common.add_argument("--format", choices=("csv", "json"))

    parser = argparse.ArgumentParser(prog="mecgame", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common]).set_defaults(func=cmd_plan)
    sweep = sub.add_parser("sweep-beta", parents=[common])
    sweep.add_argument("--from", dest="beta_from", type=float, default=0.01)
    sweep.add_argument("--to", dest="beta_to", type=float, default=0.45)
    sweep.add_argument("--steps", type=int, default=45)
    sweep.set_defaults(func=cmd_sweep_beta)
    for name, func in (("simulate", cmd_simulate), ("compare", cmd_compare)):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--no-run-csv", action="store_true", help="skip per-run CSV files")
        p.set_defaults(func=func)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always", ApproximationWarning)
            return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasiblePlanError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except Exception as exc:  # noqa: BLE001
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
