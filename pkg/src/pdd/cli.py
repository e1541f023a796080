"""``pdd-solve`` command line tool: run, bench and check subcommands."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import sys
from pathlib import Path

from .branching import check_marked_assumptions
from .config import LoadedConfig, load_config
from .errors import AssumptionViolation, PddError
from .feynman_kac import LinearBvpSpec
from .orchestrator import GlobalSolution, benchmark, max_error, measure_speedup, run_pdd


def _f(v) -> str:
    return repr(float(v))


def write_solution_csv(path: Path, sol: GlobalSolution):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if sol.kind == "parabolic":
            xs, ts = sol.axes
            w.writerow(["x", "t", "u"])
            for i, t in enumerate(ts):
                for x, u in zip(xs, sol.values[i]):
                    w.writerow([_f(x), _f(t), _f(u)])
        else:
            xs, ys = sol.axes
            w.writerow(["x", "y", "u"])
            for i, x in enumerate(xs):
                for y, u in zip(ys, sol.values[i]):
                    w.writerow([_f(x), _f(y), _f(u)])


def write_interface_csv(path: Path, sol: GlobalSolution):
    level_name = "t" if sol.kind == "parabolic" else "y"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cut", level_name, "estimate", "std_error", "n"])
        grid = sol.interface
        if grid is None:
            return
        for k, cut in enumerate(grid.cut_points):
            for i, lev in enumerate(grid.levels):
                w.writerow([_f(cut), _f(lev), _f(grid.values[k, i]), _f(grid.std_errors[k, i]),
                            int(grid.n_samples[k, i])])


def _json_safe(value):
    # strict JSON has no Infinity/NaN
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    return value


def _error_table(loaded: LoadedConfig, sol: GlobalSolution) -> dict:
    if loaded.exact is None:
        return {}
    if sol.kind == "elliptic":
        return {"max_abs_error": max_error(sol, loaded.exact)}
    rows = []
    for t in sol.axes[1]:
        row = {"t": float(t), "max_abs_error": max_error(sol, loaded.exact, t)}
        if loaded.window is not None:
            row["max_abs_error_window"] = max_error(sol, loaded.exact, t, loaded.window)
        rows.append(row)
    return {"window": loaded.window, "by_time": rows}


def _summary(loaded: LoadedConfig) -> dict:
    cfg = loaded.config
    out = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg) if f.name != "problem"}
    out["kind"] = loaded.kind
    return out


def cmd_run(loaded: LoadedConfig, out_dir: Path) -> int:
    sol, timings = run_pdd(loaded.config)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_solution_csv(out_dir / "solution.csv", sol)
    write_interface_csv(out_dir / "interface_nodes.csv", sol)
    report = {"config": _summary(loaded), "timings": timings.as_dict(),
              "restarts": sol.restarts, "errors": _error_table(loaded, sol)}
    (out_dir / "report.json").write_text(json.dumps(_json_safe(report), indent=2, allow_nan=False))
    print(f"solved {loaded.kind} with {loaded.config.subdomains} subdomain(s) in "
          f"{timings.total_seconds:.3f} s; outputs in {out_dir}")
    return 0


def cmd_bench(loaded: LoadedConfig, out_dir: Path, counts, repeats: int = 1) -> int:
    runs = benchmark(loaded.config, counts, repeats)
    for p, timings in runs.items():
        print(f"p={p}: mc {timings.mc_model():.3f} s, solve {timings.solve_model():.3f} s "
              f"(model); wall {timings.total_seconds:.3f} s")
    table = []
    base = runs.get(1)
    for p, t in runs.items():
        row = {"p": p, "timings": t.as_dict()}
        if base is not None:
            row["solve_speedup_model"] = measure_speedup(base, t, "solve", True).speedup
            row["solve_speedup_wall"] = measure_speedup(base, t, "solve").speedup
        table.append(row)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(json.dumps(
        _json_safe({"config": _summary(loaded), "bench": table}), indent=2, allow_nan=False))
    return 0


def cmd_check(loaded: LoadedConfig) -> int:
    problem = loaded.config.problem
    if isinstance(problem, LinearBvpSpec):
        problem.validate()
        print("linear problem: coefficient checks passed")
        return 0
    report = check_marked_assumptions(problem.branching_spec(loaded.config.prune_limit))
    print(json.dumps(_json_safe(dataclasses.asdict(report)), indent=2, allow_nan=False))
    if report.case == "violated":
        raise AssumptionViolation(report.reason)
    return 0


def _counts(text: str):
    try:
        counts = [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from e
    if not counts or min(counts) < 1:
        raise argparse.ArgumentTypeError("subdomain counts must be positive integers")
    return counts


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdd-solve",
                                     description="Probabilistic domain decomposition solver")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (("run", "solve and write CSV/JSON outputs"),
                            ("bench", "time the stages over several subdomain counts"),
                            ("check", "run the branching assumption checker only")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", type=Path)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--out-dir", type=Path, default=Path("."))
        if name == "bench":
            p.add_argument("--subdomains", type=_counts, default=[1, 2, 4, 8])
            p.add_argument("--repeats", type=int, default=1,
                           help="best-of-N timing per task")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        loaded = load_config(args.config, master_seed=args.seed, workers=args.workers)
        if args.command == "run":
            return cmd_run(loaded, args.out_dir)
        if args.command == "bench":
            return cmd_bench(loaded, args.out_dir, args.subdomains, args.repeats)
        return cmd_check(loaded)
    except PddError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return e.code


if __name__ == "__main__":
    sys.exit(main())
