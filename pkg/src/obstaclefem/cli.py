"""Command-line driver.

``run`` executes one refinement study and writes a CSV convergence table
with the columns

    nE,nDof,est,eta,estContact,oscF[,errNormU,errNormV,errU,errSigma,
    errDivSigmaLambda],iters

(the error block is present when the example has a known solution).  Rows
are written incrementally, so a partial table survives an aborted run.
``rates`` fits the experimental convergence rate of one column.

Exit codes: 0 success, 2 invalid configuration, 3 solver non-convergence
(partial CSV retained).
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .adaptivity import LevelRecord, fit_rate, run_adaptive
from .assembly import ObstacleError, default_beta
from .problems import get_problem, problem_names
from .vi_solver import (FormulationError, NonConvergenceError, SolverOptions,
                        validate_config)

_BASE_COLUMNS = ["nE", "nDof", "est", "eta", "estContact", "oscF"]
_ERROR_COLUMNS = ["errNormU", "errNormV", "errU", "errSigma",
                  "errDivSigmaLambda"]


@dataclass(frozen=True)
class RunConfig:
    example: str
    form: str
    set_kind: str
    mode: str
    theta: float
    beta: float | None
    max_dofs: int
    max_levels: int | None
    initial_n: int
    seed: int
    output: Path
    dump_mesh: tuple[int, ...]
    max_solver_iterations: int


def _columns(problem) -> list[str]:
    cols = list(_BASE_COLUMNS)
    if problem.has_exact:
        cols += _ERROR_COLUMNS
    return cols + ["iters"]


def _row(record: LevelRecord, columns) -> list[str]:
    vals = []
    for name in columns:
        v = getattr(record, name)
        vals.append(repr(v) if isinstance(v, float) else str(v))
    return vals


def run_command(cfg: RunConfig) -> int:
    problem = get_problem(cfg.example)
    validate_config(cfg.form, cfg.set_kind, problem.traits)
    np.random.seed(cfg.seed)

    columns = _columns(problem)
    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    opts = SolverOptions(max_iterations=cfg.max_solver_iterations)

    with open(cfg.output, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        handle.flush()

        def on_level(level, mesh, dofmap, report, local, record):
            writer.writerow(_row(record, columns))
            handle.flush()
            if level in cfg.dump_mesh:
                dump = cfg.output.with_suffix(f".mesh{level}.txt")
                dump.write_text(mesh.dump_text())

        try:
            records = run_adaptive(
                problem, cfg.form, cfg.set_kind,
                theta=cfg.theta, mode=cfg.mode, beta=cfg.beta,
                max_dofs=cfg.max_dofs, max_levels=cfg.max_levels,
                initial_subdivisions=cfg.initial_n,
                solver_options=opts, on_level=on_level)
        except NonConvergenceError as exc:
            print(f"solver did not converge: {exc}", file=sys.stderr)
            print(f"partial table with {len(exc.records)} levels kept in "
                  f"{cfg.output}", file=sys.stderr)
            return 3

    beta = cfg.beta if cfg.beta is not None else default_beta(problem)
    print(f"{cfg.example}: form {cfg.form} over {cfg.set_kind}, {cfg.mode} "
          f"refinement, beta={beta:g}, {len(records)} levels -> {cfg.output}")
    return 0


def rates_command(path: Path, column: str, tail: int) -> int:
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or column not in reader.fieldnames:
            have = ", ".join(reader.fieldnames or [])
            print(f"column {column!r} not in {path} (columns: {have})",
                  file=sys.stderr)
            return 2
        rows = list(reader)
    if len(rows) < tail:
        print(f"table has {len(rows)} rows, need at least {tail}",
              file=sys.stderr)
        return 2
    n_elems = [float(r["nE"]) for r in rows]
    vals = [float(r[column]) for r in rows]
    rate = fit_rate(n_elems, vals, tail=tail)
    print(f"{column}: rate {rate:.4f} over the last {tail} levels")
    return 0 if math.isfinite(rate) else 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="obstaclefem",
        description="Adaptive least-squares finite elements for the "
                    "obstacle problem")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one refinement study")
    run_p.add_argument("--example", required=True, choices=problem_names())
    run_p.add_argument("--form", required=True, choices=["A", "B", "C"])
    run_p.add_argument("--set", dest="set_kind", required=True,
                       choices=["Ks", "K0", "K1"])
    run_p.add_argument("--mode", default="adaptive",
                       choices=["uniform", "adaptive"])
    run_p.add_argument("--theta", type=float, default=0.25,
                       help="bulk marking parameter (default 0.25)")
    run_p.add_argument("--beta", type=float, default=None,
                       help="weight of the flux-residual term "
                            "(default 1 + diam^2)")
    run_p.add_argument("--max-dofs", type=int, default=200_000)
    run_p.add_argument("--max-levels", type=int, default=None)
    run_p.add_argument("--initial-n", type=int, default=2,
                       help="subdivisions of the initial structured mesh")
    run_p.add_argument("--seed", type=int, default=0,
                       help="seed for any sampling diagnostics; the "
                            "solve pipeline itself is deterministic")
    run_p.add_argument("--output", "-o", type=Path, default=Path("results.csv"))
    run_p.add_argument("--dump-mesh", default="",
                       help="comma-separated level indices whose meshes are "
                            "dumped as text next to the CSV")
    run_p.add_argument("--max-solver-iterations", type=int, default=100)

    rates_p = sub.add_parser("rates", help="fit a convergence rate")
    rates_p.add_argument("csv", type=Path)
    rates_p.add_argument("column")
    rates_p.add_argument("--tail", type=int, default=3,
                         help="number of trailing levels (default 3)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            levels = tuple(int(part) for part in args.dump_mesh.split(",")
                           if part.strip() != "")
            cfg = RunConfig(
                example=args.example, form=args.form, set_kind=args.set_kind,
                mode=args.mode, theta=args.theta, beta=args.beta,
                max_dofs=args.max_dofs, max_levels=args.max_levels,
                initial_n=args.initial_n, seed=args.seed,
                output=args.output, dump_mesh=levels,
                max_solver_iterations=args.max_solver_iterations)
            if not 0.0 < cfg.theta <= 1.0:
                raise FormulationError("theta must lie in (0, 1]")
            return run_command(cfg)
        return rates_command(args.csv, args.column, args.tail)
    except (FormulationError, ObstacleError, ValueError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
