"""Command-line study harness: convergence tables, certification, sweeps.

Subcommands mirror the study workflows; all numeric output files are byte
deterministic for a fixed invocation (wall-clock metadata is kept off disk
for exactly that reason).  Exit codes: 0 success / property certified,
1 analyzed property violated, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .allen_cahn import (
    NewtonDivergenceError,
    SingularJacobianError,
    SolverConfig,
    consistency_probe,
    run,
)
from .bdf_kernels import doc_kernels
from .ratio_analysis import (
    EigenConvergenceError,
    PowerIterationError,
    certify_positive_definite,
    sweep_lemma_bounds,
    sylvester_trace_A_from_ratios,
)
from .spectral import chebyshev_operator, fourier_operator
from .time_grid import (
    build_from_steps,
    build_alternating,
    build_random,
    build_uniform,
    load_grid,
    random_bounded_grid,
    validate_ratios,
)

__all__ = [
    "ConvergenceRow",
    "ConvergenceReport",
    "run_convergence",
    "emit",
    "main",
    "ENERGY_TOL",
]

# Slack allowed on the E(u^n) <= E(u^0) check in the energy study.
ENERGY_TOL = 1e-10


@dataclass(frozen=True)
class ConvergenceRow:
    n: int
    error: float
    rate: float | None
    max_ratio: float | None
    min_ratio: float | None


@dataclass(frozen=True)
class ConvergenceReport:
    """Errors and observed orders for one forcing case at one eps2."""

    case: str
    eps2: float
    m: int
    seed: int | None
    newton_tol: float
    rows: tuple[ConvergenceRow, ...]
    wall_time: float


def _case_grid(case: str, n: int, seed: int | None):
    if case == "1":
        return build_alternating(n, 1.0)
    if case == "2":
        # a fresh grid per refinement level, reproducible from the base seed
        return build_random(n, 1.0, seed + n)
    if case == "uniform":
        return build_uniform(n, 1.0)
    raise ValueError(f"unknown case {case!r}")


def run_convergence(case, eps2_list, n_list, m, seed=None, threads=1):
    """One manufactured-solution run per (eps2, N); a report per eps2.

    Case "1" uses the alternating grid, case "2" a random grid drawn from
    seed+N, "uniform" equal steps.  All runs share one Chebyshev operator.
    """
    eps2_list = list(eps2_list)
    n_list = sorted(set(int(n) for n in n_list))
    if case == "2" and seed is None:
        raise ValueError("case 2 needs a seed")
    operator = chebyshev_operator(m)
    grids = {n: _case_grid(case, n, seed) for n in n_list}
    jobs = [(eps2, n) for eps2 in eps2_list for n in n_list]

    def job(args):
        eps2, n = args
        config = SolverConfig(grid=grids[n], operator=operator, eps2=eps2)
        return run(config).final_error

    start = time.perf_counter()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            errors = dict(zip(jobs, pool.map(job, jobs)))
    else:
        errors = {j: job(j) for j in jobs}
    wall = time.perf_counter() - start

    reports = []
    for eps2 in eps2_list:
        rows = []
        prev = None
        for n in n_list:
            err = errors[(eps2, n)]
            rate = None
            if prev is not None:
                rate = math.log(prev[1] / err) / math.log(n / prev[0])
            ratio_report = validate_ratios(grids[n], threshold=math.inf)
            rows.append(ConvergenceRow(n, err, rate,
                                       ratio_report.max_ratio, ratio_report.min_ratio))
            prev = (n, err)
        reports.append(ConvergenceReport(case=case, eps2=eps2, m=m, seed=seed,
                                         newton_tol=1e-10, rows=tuple(rows),
                                         wall_time=wall))
    return tuple(reports)


def _fmt_error(x: float) -> str:
    return f"{x:.4e}"


def _fmt_rate(x: float | None) -> str:
    return "" if x is None else f"{x:.4f}"


def _fmt_ratio(x: float | None) -> str:
    return "" if x is None else f"{x:.6g}"


def emit(report: ConvergenceReport, fmt: str, path) -> Path:
    """Write a report as CSV or JSON; both carry identical rounded numbers.

    Wall time stays off disk so identical invocations produce identical
    bytes.
    """
    path = Path(path)
    if fmt == "csv":
        lines = ["N,error,rate,max_r,min_r"]
        for row in report.rows:
            lines.append(",".join([
                str(row.n),
                _fmt_error(row.error),
                _fmt_rate(row.rate),
                _fmt_ratio(row.max_ratio),
                _fmt_ratio(row.min_ratio),
            ]))
        path.write_text("\n".join(lines) + "\n")
        return path
    if fmt == "json":
        data = {
            "metadata": {
                "case": report.case,
                "eps2": report.eps2,
                "M": report.m,
                "seed": report.seed,
                "newton_tol": report.newton_tol,
            },
            "rows": [
                {
                    "N": row.n,
                    "error": float(_fmt_error(row.error)),
                    "rate": None if row.rate is None else float(_fmt_rate(row.rate)),
                    "max_r": None if row.max_ratio is None else float(_fmt_ratio(row.max_ratio)),
                    "min_r": None if row.min_ratio is None else float(_fmt_ratio(row.min_ratio)),
                }
                for row in report.rows
            ],
        }
        path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
        return path
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# subcommands


def _say(args, message: str) -> None:
    if not args.quiet:
        print(message)


def cmd_convergence(args) -> int:
    if args.case == "2" and args.seed is None:
        print("error: --case 2 needs --seed", file=sys.stderr)
        return 2
    try:
        reports = run_convergence(args.case, args.eps2, args.n, args.m,
                                  seed=args.seed, threads=args.threads)
    except (NewtonDivergenceError, SingularJacobianError) as exc:
        print(f"error: case {args.case} run failed: {exc}", file=sys.stderr)
        return 3
    for report in reports:
        _say(args, f"case {report.case}  eps2={report.eps2:g}  M={report.m}")
        for row in report.rows:
            _say(args, f"  N={row.n:<5d} error={_fmt_error(row.error)}"
                       f" rate={_fmt_rate(row.rate) or '-'}")
        if args.out is not None:
            path = Path(args.out)
            if len(reports) > 1:
                path = path.with_name(f"{path.stem}_eps2_{report.eps2:g}{path.suffix}")
            emit(report, args.format, path)
            _say(args, f"  wrote {path}")
    return 0


def cmd_ratio_figure(args) -> int:
    if args.length < 2:
        print("error: --length must be at least 2", file=sys.stderr)
        return 2
    trace = sylvester_trace_A_from_ratios([args.ratio] * (args.length - 1))
    lines = ["j,p"]
    for j, pj in enumerate(trace.p, start=1):
        lines.append(f"{j},{pj!r}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    if trace.first_negative is None:
        _say(args, f"ratio {args.ratio:g}: all {len(trace.p)} pivots positive")
    else:
        _say(args, f"ratio {args.ratio:g}: first nonpositive pivot at j={trace.first_negative}")
    _say(args, f"wrote {args.out}")
    return 0


def cmd_validate_lemmas(args) -> int:
    result = sweep_lemma_bounds(resolution=args.resolution)
    _say(args, f"resolution {result.resolution:g}, kappas {list(result.kappas)}")
    _say(args, f"  transfer factor   in [{result.transfer_min:.12f}, {result.transfer_max:.12f}]"
               f"  (certified [1, 2.7])")
    _say(args, f"  subdiag cert      in [{result.subdiag_min:.6e}, {result.subdiag_max:.6e}]"
               f"  (certified <= 0)")
    _say(args, f"  pivot lower cert  in [{result.pivot_lower_min:.6e}, {result.pivot_lower_max:.6e}]"
               f"  (certified >= 0)")
    _say(args, f"  pivot upper cert  in [{result.pivot_upper_min:.6e}, {result.pivot_upper_max:.6e}]"
               f"  (certified <= 0)")
    _say(args, "all bounds hold" if result.passed else "BOUND VIOLATION")
    return 0 if result.passed else 1


def cmd_certify(args) -> int:
    grid = load_grid(args.grid)
    ok, trace = certify_positive_definite(grid)
    report = validate_ratios(grid)
    _say(args, f"grid: {grid.n_steps} steps, horizon {grid.horizon:g}, "
               f"max ratio {report.max_ratio}")
    if ok:
        _say(args, "certified: all pivots positive")
        return 0
    _say(args, f"NOT certified: first nonpositive pivot at level {trace.first_negative}")
    return 1


def cmd_energy(args) -> int:
    if args.tau <= 0 or args.steps < 1:
        print("error: --tau must be positive and --steps >= 1", file=sys.stderr)
        return 2
    if args.seed is None:
        grid = build_from_steps((args.tau,) * args.steps)
    else:
        grid = random_bounded_grid(args.steps, args.tau, args.seed)
    operator = fourier_operator(args.m)
    config = SolverConfig(grid=grid, operator=operator, eps2=args.eps2, forcing="none")
    result = run(config)
    e0 = result.energies[0]
    worst = float(np.max(result.energies - e0))
    if args.out is not None:
        lines = ["t,energy"]
        for state, e in zip(result.states, result.energies):
            lines.append(f"{float(state.time)!r},{float(e)!r}")
        Path(args.out).write_text("\n".join(lines) + "\n")
        _say(args, f"wrote {args.out}")
    _say(args, f"E(u^0) = {e0:.12f}; max excess over E(u^0): {worst:.3e}")
    ok = worst <= ENERGY_TOL
    _say(args, "energy bounded by its initial value" if ok else "ENERGY EXCEEDED E(u^0)")
    return 0 if ok else 1


def cmd_kernels(args) -> int:
    grid = load_grid(args.grid)
    km = doc_kernels(grid)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, mat, banded in (("B", km.B, True), ("A", km.A, True), ("D", km.D, False)):
        lines = ["row,col,value"]
        n = mat.shape[0]
        for i in range(n):
            lo = max(0, i - 2) if banded else 0
            for j in range(lo, i + 1):
                lines.append(f"{i + 1},{j + 1},{float(mat[i, j])!r}")
        (out / f"{name}.csv").write_text("\n".join(lines) + "\n")
    _say(args, f"wrote B.csv, A.csv, D.csv to {out}")
    return 0


_PROBE_FUNCTIONS = {
    "t3": (lambda t: t**3, lambda t: 3.0 * t**2),
    "t4": (lambda t: t**4, lambda t: 4.0 * t**3),
    "sin": (math.sin, math.cos),
}


def cmd_consistency(args) -> int:
    bad = [n for n in args.levels if n < 3]
    if bad:
        print(f"error: level counts must be >= 3, got {bad}", file=sys.stderr)
        return 2
    v, v_prime = _PROBE_FUNCTIONS[args.function]
    lines = ["N,tau,max_eta"]
    for n in sorted(set(args.levels)):
        grid = build_uniform(n, 1.0)
        eta = consistency_probe(grid, v, v_prime)
        max_eta = float(np.max(np.abs(eta[2:])))
        lines.append(f"{n},{1.0 / n!r},{max_eta!r}")
        _say(args, f"  N={n:<5d} tau={1.0 / n:.6g} max residual (3-step levels) {max_eta:.6e}")
    Path(args.out).write_text("\n".join(lines) + "\n")
    _say(args, f"wrote {args.out}")
    return 0


def _float_list(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part != ""]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad int list {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vsbdf3",
        description="Variable-step three-step integration studies for the Allen-Cahn equation.",
    )
    p.add_argument("--quiet", action="store_true", help="suppress progress output")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads for independent runs (default 1)")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("convergence", help="manufactured-solution error table")
    pc.add_argument("--case", choices=("1", "2", "uniform"), required=True,
                    help="1: alternating steps, 2: random steps (needs --seed), uniform")
    pc.add_argument("--eps2", type=_float_list, default=[0.16, 0.36],
                    help="comma-separated interface parameters (default 0.16,0.36)")
    pc.add_argument("--n", type=_int_list, default=[20, 40, 80, 160],
                    help="comma-separated step counts (default 20,40,80,160)")
    pc.add_argument("--m", type=int, default=20, help="spatial resolution (default 20)")
    pc.add_argument("--seed", type=int, default=None, help="base seed for case 2")
    pc.add_argument("--out", type=Path, default=None,
                    help="output path; multiple eps2 values get per-value suffixes")
    pc.add_argument("--format", choices=("csv", "json"), default="csv")
    pc.set_defaults(func=cmd_convergence)

    pr = sub.add_parser("ratio-figure", help="pivot sequence at a constant step ratio")
    pr.add_argument("--ratio", type=float, required=True)
    pr.add_argument("--length", type=int, required=True, help="number of levels to trace")
    pr.add_argument("--out", type=Path, required=True)
    pr.set_defaults(func=cmd_ratio_figure)

    pv = sub.add_parser("validate-lemmas", help="sweep the certificate bounds on the ratio box")
    pv.add_argument("--resolution", type=float, default=0.005)
    pv.set_defaults(func=cmd_validate_lemmas)

    pk = sub.add_parser("certify", help="positive-definiteness certification of a grid")
    pk.add_argument("--grid", type=Path, required=True, help="grid JSON file")
    pk.set_defaults(func=cmd_certify)

    pe = sub.add_parser("energy", help="unforced run checking energy stays below E(u^0)")
    pe.add_argument("--eps2", type=float, required=True)
    pe.add_argument("--tau", type=float, required=True, help="largest step size")
    pe.add_argument("--steps", type=int, required=True)
    pe.add_argument("--seed", type=int, default=None,
                    help="random-ratio grid seed; omit for uniform steps")
    pe.add_argument("--m", type=int, default=32, help="periodic resolution (default 32)")
    pe.add_argument("--out", type=Path, default=None, help="energy trace CSV")
    pe.set_defaults(func=cmd_energy)

    pm = sub.add_parser("kernels", help="dump kernel matrices B, A, D for a grid")
    pm.add_argument("--grid", type=Path, required=True, help="grid JSON file")
    pm.add_argument("--out", type=Path, required=True, help="output directory")
    pm.set_defaults(func=cmd_kernels)

    ps = sub.add_parser("consistency", help="discrete-derivative residuals on uniform grids")
    ps.add_argument("--function", choices=tuple(_PROBE_FUNCTIONS), required=True)
    ps.add_argument("--levels", type=_int_list, required=True,
                    help="comma-separated step counts")
    ps.add_argument("--out", type=Path, required=True)
    ps.set_defaults(func=cmd_consistency)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NewtonDivergenceError, SingularJacobianError,
            EigenConvergenceError, PowerIterationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
