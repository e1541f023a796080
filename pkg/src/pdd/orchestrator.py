"""Two-stage probabilistic domain decomposition.

Stage 1 estimates the solution at interface nodes by Monte Carlo
(branching diffusions for the semilinear parabolic problems, Feynman-Kac
paths for linear elliptic ones).  Stage 2 fits a polynomial along every
cut, hands it to the neighbouring subdomains as Dirichlet data and solves
them independently; the pieces are then concatenated.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional, Union

import numpy as np

from .branching import check_marked_assumptions, estimate_branching
from .errors import (AssumptionViolation, IncompleteGrid, InvalidArgument, InvalidMeasurement,
                     PddError, UnsupportedConfiguration)
from .feynman_kac import LinearBvpSpec, _map, estimate_point
from .geometry import (InterfaceGrid, Partition, build_interface_grid, build_transverse_grid,
                       partition_box)
from .pde import EllipticProblem2D, GridSolution, solve_elliptic_2d, solve_parabolic_1d
from .problems import CvaSpec, KppSpec
from .sde import RngStream

Problem = Union[LinearBvpSpec, KppSpec, CvaSpec]


@dataclass(frozen=True)
class PddConfig:
    problem: Problem
    subdomains: int = 1
    axis: int = 0
    levels: int = 11
    samples: int = 1000
    dt: float = 1e-3  # Euler step of Feynman-Kac paths
    target_se: Optional[float] = None
    dx: float = 1e-2
    dt_solver: float = 1e-3
    tol: float = 1e-3
    master_seed: int = 0
    workers: int = 1
    prune_limit: int = 1000
    degree: Optional[int] = None

    def __post_init__(self):
        if self.subdomains < 1:
            raise InvalidArgument("subdomain count must be >= 1")
        if self.samples < 2:
            raise InvalidArgument("need at least two samples per node")
        if self.levels < 2:
            raise InvalidArgument("need at least two interface levels")
        if self.workers < 1:
            raise InvalidArgument("worker count must be >= 1")
        if self.degree is not None and not 0 <= self.degree < self.levels:
            raise InvalidArgument("interpolation degree must be in [0, levels)")
        if not isinstance(self.problem, (LinearBvpSpec, KppSpec, CvaSpec)):
            raise InvalidArgument(f"unsupported problem type {type(self.problem).__name__}")

    @property
    def interp_degree(self) -> int:
        return min(4, self.levels - 1) if self.degree is None else self.degree


def _round_robin_max(costs, workers: int) -> float:
    if not costs:
        return 0.0
    loads = [0.0] * max(1, workers)
    for i, c in enumerate(costs):
        loads[i % len(loads)] += c
    return max(loads)


@dataclass
class StageTimings:
    """Wall-clock stage times plus per-task costs.

    The ``*_model`` methods give the idealised parallel time: tasks dealt
    round-robin to ``workers`` workers, stage time = busiest worker.
    """

    mc_seconds: float
    interp_seconds: float
    solve_seconds: float
    total_seconds: float
    per_subdomain_seconds: list
    per_node_seconds: list = field(default_factory=list)
    workers: int = 1

    def mc_model(self, workers: Optional[int] = None) -> float:
        return _round_robin_max(self.per_node_seconds, workers or self.workers)

    def solve_model(self, workers: Optional[int] = None) -> float:
        return _round_robin_max(self.per_subdomain_seconds, workers or self.workers)

    def total_model(self, workers: Optional[int] = None) -> float:
        return self.mc_model(workers) + self.interp_seconds + self.solve_model(workers)

    def stage(self, name: str, model: bool = False) -> float:
        if model:
            table = {"mc": self.mc_model, "solve": self.solve_model, "total": self.total_model}
            return table[name]()
        table = {"mc": self.mc_seconds, "interp": self.interp_seconds,
                 "solve": self.solve_seconds, "total": self.total_seconds}
        return table[name]

    def as_dict(self) -> dict:
        return {"mc_seconds": self.mc_seconds, "interp_seconds": self.interp_seconds,
                "solve_seconds": self.solve_seconds, "total_seconds": self.total_seconds,
                "per_subdomain_seconds": list(self.per_subdomain_seconds),
                "per_node_seconds": list(self.per_node_seconds), "workers": self.workers,
                "mc_model_seconds": self.mc_model(), "solve_model_seconds": self.solve_model(),
                "total_model_seconds": self.total_model()}


@dataclass(frozen=True)
class SpeedupReport:
    baseline_label: str
    method_label: str
    speedup: float
    baseline_seconds: float
    method_seconds: float


def measure_speedup(baseline: StageTimings, method: StageTimings, stage: str = "total",
                    model: bool = False, baseline_label: str = "baseline",
                    method_label: str = "method") -> SpeedupReport:
    """``baseline time / method time`` for one stage (wall clock or model)."""
    b = float(baseline.stage(stage, model))
    m = float(method.stage(stage, model))
    if not (math.isfinite(b) and math.isfinite(m)) or b < 0:
        raise InvalidMeasurement(f"unusable timings: baseline={b}, method={m}")
    if m <= 0:
        raise InvalidMeasurement(f"method time for stage '{stage}' is {m}; speedup undefined")
    return SpeedupReport(baseline_label, method_label, b / m, b, m)


# -- interface interpolation -------------------------------------------------------

@dataclass(frozen=True)
class InterfaceInterpolant:
    cut: float
    poly: np.polynomial.Polynomial
    _horner: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        off, scl = self.poly.mapparms()
        object.__setattr__(self, "_horner", (float(off), float(scl), self.poly.coef[::-1].tolist()))

    def __call__(self, level):
        if isinstance(level, float):
            # Horner in the fit's scaled variable; Polynomial.__call__ costs
            # microseconds per scalar, paid twice per solver step
            off, scl, coefs = self._horner
            s = off + scl * level
            acc = 0.0
            for c in coefs:
                acc = acc * s + c
            return acc
        out = self.poly(np.asarray(level, dtype=float))
        return float(out) if np.ndim(out) == 0 else out


def interpolate_interface(grid: InterfaceGrid, degree: Optional[int] = None) -> list:
    """Least-squares polynomial in the level coordinate for each cut."""
    n_levels = len(grid.levels)
    degree = min(4, n_levels - 1) if degree is None else degree
    if not 0 <= degree < n_levels:
        raise InvalidArgument(f"degree must be in [0, {n_levels}), got {degree}")
    if grid.values is None:
        raise IncompleteGrid("interface grid has no values")
    values = np.asarray(grid.values, dtype=float)
    if values.shape != grid.shape:
        raise IncompleteGrid(f"values have shape {values.shape}, grid is {grid.shape}")
    out = []
    for k, cut in enumerate(grid.cut_points):
        missing = np.nonzero(~np.isfinite(values[k]))[0]
        if missing.size:
            raise IncompleteGrid(
                f"cut {cut:g}: no value at level(s) {grid.levels[missing].tolist()}")
        poly = np.polynomial.Polynomial.fit(grid.levels, values[k], degree)
        out.append(InterfaceInterpolant(float(cut), poly))
    return out


# -- global solution ----------------------------------------------------------

@dataclass
class GlobalSolution:
    """Stitched solution.

    Parabolic: ``axes = (x, t)``, ``values[i_t, i_x]``.
    Elliptic: ``axes = (x, y)``, ``values[i_x, i_y]``.
    """

    kind: str
    axes: tuple
    values: np.ndarray
    partition: Partition
    pieces: list
    interface: Optional[InterfaceGrid] = None
    interpolants: list = field(default_factory=list)
    restarts: int = 0

    def at_time(self, t: float) -> np.ndarray:
        if self.kind != "parabolic":
            raise InvalidArgument("elliptic solutions have no time axis")
        return GridSolution(self.axes, self.values).at_time(t)


def _domain_box(problem: Problem):
    if isinstance(problem, LinearBvpSpec):
        return problem.domain
    from .geometry import BoxDomain
    return BoxDomain.interval(problem.lo, problem.hi)


def _wrap(what: str, fn: Callable, *args):
    try:
        return fn(*args)
    except PddError as e:
        raise type(e)(f"{what}: {e}") from e


def _timed(fn, *args):
    # per-thread CPU time: unaffected by other workers sharing a core
    t0 = time.thread_time()
    out = fn(*args)
    return out, time.thread_time() - t0


# -- parabolic 1-d (branching interface estimates) ----------------------------------------

def _parabolic_stage1(config: PddConfig, grid: InterfaceGrid, stream: RngStream):
    spec = config.problem.branching_spec(prune_limit=config.prune_limit)
    checkpoints = grid.levels[1:]

    def node(k):
        cut = grid.cut_points[k]
        return _wrap(f"interface cut x={cut:g}", estimate_branching, [cut], spec, checkpoints,
                     config.samples, stream.child(k), 1, 1000, config.target_se)

    results = _map(lambda k: _timed(node, k), range(len(grid.cut_points)), config.workers)
    values = np.empty(grid.shape)
    ses = np.zeros(grid.shape)
    ns = np.zeros(grid.shape, dtype=int)
    values[:, 0] = spec.terminal(grid.cut_points[:, None])
    restarts = 0
    for k, (est, _) in enumerate(results):
        values[k, 1:] = [e.value for e in est.estimates]
        ses[k, 1:] = [e.std_error for e in est.estimates]
        ns[k, 1:] = [e.n_samples for e in est.estimates]
        restarts += est.restarts
    grid = grid.with_values(values, ses, ns)
    grid.meta["restarts"] = restarts
    return grid, [sec for _, sec in results], restarts


def _parabolic_piece(problem, lo, hi, left_bc, right_bc):
    return problem.parabolic_problem(lo=lo, hi=hi, left_bc=left_bc, right_bc=right_bc)


def _stitch(pieces, axis_index: int, value_axis: int, partition: Partition):
    """Concatenate piece grids, checking shared cuts agree exactly."""
    coords = [pieces[0].axes[axis_index]]
    vals = [pieces[0].values]
    for j in range(1, len(pieces)):
        prev, cur = pieces[j - 1], pieces[j]
        a = np.take(prev.values, -1, axis=value_axis)
        b = np.take(cur.values, 0, axis=value_axis)
        if not np.array_equal(a, b):
            raise PddError(f"subdomains {j - 1} and {j} disagree on the cut "
                           f"{partition.cut_points[j - 1]:g}")
        coords.append(cur.axes[axis_index][1:])
        vals.append(np.delete(cur.values, 0, axis=value_axis))
    return np.concatenate(coords), np.concatenate(vals, axis=value_axis)


def _run_parabolic(config: PddConfig, t_start: float):
    problem = config.problem
    if isinstance(problem, CvaSpec):
        report = check_marked_assumptions(problem.branching_spec(config.prune_limit))
        if report.case == "violated":
            raise AssumptionViolation(f"CVA branching assumptions fail: {report.reason}")
    box = _domain_box(problem)
    partition = partition_box(box, 0, config.subdomains)
    levels = np.linspace(0.0, problem.horizon, config.levels)

    if config.subdomains == 1:
        sol, sec = _timed(solve_parabolic_1d, problem.parabolic_problem(), config.dx,
                          config.dt_solver, config.tol, levels)
        timings = StageTimings(0.0, 0.0, sec, time.perf_counter() - t_start, [sec], [],
                               config.workers)
        return GlobalSolution("parabolic", sol.axes, sol.values, partition, [sol]), timings

    stream = RngStream(config.master_seed, (0,))
    grid = build_interface_grid(partition, levels)
    t0 = time.perf_counter()
    grid, per_node, restarts = _parabolic_stage1(config, grid, stream)
    mc_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    interps = interpolate_interface(grid, config.interp_degree)
    interp_seconds = time.perf_counter() - t0

    subproblems = []
    for j, sub in enumerate(partition.subdomains):
        left = interps[j - 1] if j > 0 else None
        right = interps[j] if j < config.subdomains - 1 else None
        subproblems.append(_parabolic_piece(problem, sub.lo[0], sub.hi[0], left, right))

    def solve(j):
        sub = partition.subdomains[j]
        return _timed(_wrap, f"subdomain {j} [{sub.lo[0]:g}, {sub.hi[0]:g}]",
                      solve_parabolic_1d, subproblems[j], config.dx, config.dt_solver,
                      config.tol, levels)

    t0 = time.perf_counter()
    solved = _map(solve, range(config.subdomains), config.workers)
    solve_seconds = time.perf_counter() - t0
    pieces = [s for s, _ in solved]
    xs, values = _stitch(pieces, 0, 1, partition)
    timings = StageTimings(mc_seconds, interp_seconds, solve_seconds,
                           time.perf_counter() - t_start, [sec for _, sec in solved],
                           per_node, config.workers)
    sol = GlobalSolution("parabolic", (xs, pieces[0].axes[1]), values, partition, pieces,
                         grid, interps, restarts)
    return sol, timings


# -- elliptic 2-d (Feynman-Kac interface estimates) ----------------------------------------

def _on_grid(fn, x, y):
    return fn(np.stack(np.broadcast_arrays(x, y), axis=-1), 0.0)


def _drift_component(drift, i, x, y):
    return drift(np.stack(np.broadcast_arrays(x, y), axis=-1), 0.0)[..., i]


def _patched_g(g, axis: int, cuts: dict, x, y):
    """Outer datum ``g`` except on cut lines, where the interface fit is used."""
    pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
    out = np.asarray(g(pts, 0.0), dtype=float).copy()
    along = pts[..., axis]
    across = pts[..., 1 - axis]
    for c, interp in cuts.items():
        on = along == c
        if np.any(on):
            out[on] = interp(across[on])
    return out


def elliptic_problem_from_spec(spec: LinearBvpSpec, domain=None, g=None) -> EllipticProblem2D:
    """Grid form of a 2-d elliptic ``LinearBvpSpec`` with constant isotropic noise."""
    if spec.domain.dim != 2 or not spec.elliptic:
        raise UnsupportedConfiguration("deterministic solves need a 2-d elliptic problem")
    sigma = spec.coeffs.sigma
    if callable(sigma):
        raise UnsupportedConfiguration("grid solver needs a constant dispersion matrix")
    a = np.asarray(sigma, dtype=float)
    a = a * a * np.eye(2) if a.ndim == 0 else a @ a.T
    if abs(a[0, 1]) > 0:
        raise UnsupportedConfiguration("grid solver has no mixed-derivative term")
    drift = spec.coeffs.drift
    b1 = 0.0 if drift is None else partial(_drift_component, drift, 0)
    b2 = 0.0 if drift is None else partial(_drift_component, drift, 1)
    c = 0.0 if spec.c is None else partial(_on_grid, spec.c)
    f = 0.0 if spec.f is None else partial(_on_grid, spec.f)
    g = g or partial(_on_grid, spec.g)
    return EllipticProblem2D(domain or spec.domain, a[0, 0], a[1, 1], b1, b2, c, f, g)


def _elliptic_stage1(config: PddConfig, grid: InterfaceGrid, stream: RngStream):
    spec = config.problem
    axis = config.axis
    lo, hi = spec.domain.lo[1 - axis], spec.domain.hi[1 - axis]
    tasks = [(k, i) for k in range(len(grid.cut_points)) for i in range(len(grid.levels))]

    def point(k, i):
        p = np.empty(2)
        p[axis] = grid.cut_points[k]
        p[1 - axis] = grid.levels[i]
        return p

    def node(task):
        k, i = task
        p = point(k, i)
        if grid.levels[i] <= lo or grid.levels[i] >= hi:
            return float(spec.g(p[None, :], 0.0)[0]), 0.0, 0
        est = _wrap(f"interface node {tuple(p)}", estimate_point, p, 0.0, spec, config.samples,
                    config.dt, stream.child(k, i), 2048, 1, config.target_se)
        return est.value, est.std_error, est.n_samples

    results = _map(lambda task: _timed(node, task), tasks, config.workers)
    values = np.empty(grid.shape)
    ses = np.empty(grid.shape)
    ns = np.empty(grid.shape, dtype=int)
    for (k, i), ((v, se, n), _) in zip(tasks, results):
        values[k, i], ses[k, i], ns[k, i] = v, se, n
    return grid.with_values(values, ses, ns), [sec for _, sec in results]


def _run_elliptic(config: PddConfig, t_start: float):
    spec = config.problem
    if spec.domain.dim != 2 or not spec.elliptic:
        raise UnsupportedConfiguration(
            "linear problems are supported as 2-d elliptic boundary value problems only")
    spec.validate()
    if spec.domain.has_reflecting_face:
        raise UnsupportedConfiguration("grid solver supports Dirichlet faces only")
    partition = partition_box(spec.domain, config.axis, config.subdomains)

    if config.subdomains == 1:
        sol, sec = _timed(solve_elliptic_2d, elliptic_problem_from_spec(spec), config.dx, config.dx)
        timings = StageTimings(0.0, 0.0, sec, time.perf_counter() - t_start, [sec], [],
                               config.workers)
        return GlobalSolution("elliptic", sol.axes, sol.values, partition, [sol]), timings

    other = 1 - config.axis
    levels = np.linspace(spec.domain.lo[other], spec.domain.hi[other], config.levels)
    grid = build_transverse_grid(partition, levels)
    stream = RngStream(config.master_seed, (1,))
    t0 = time.perf_counter()
    grid, per_node = _elliptic_stage1(config, grid, stream)
    mc_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    interps = interpolate_interface(grid, config.interp_degree)
    interp_seconds = time.perf_counter() - t0
    cut_map = {it.cut: it for it in interps}
    g = partial(_patched_g, spec.g, config.axis, cut_map)
    subproblems = [elliptic_problem_from_spec(spec, sub, g) for sub in partition.subdomains]

    def solve(j):
        return _timed(_wrap, f"subdomain {j}", solve_elliptic_2d, subproblems[j],
                      config.dx, config.dx)

    t0 = time.perf_counter()
    solved = _map(solve, range(config.subdomains), config.workers)
    solve_seconds = time.perf_counter() - t0
    pieces = [s for s, _ in solved]
    along, values = _stitch(pieces, config.axis, config.axis, partition)
    axes = (along, pieces[0].axes[1]) if config.axis == 0 else (pieces[0].axes[0], along)
    timings = StageTimings(mc_seconds, interp_seconds, solve_seconds,
                           time.perf_counter() - t_start, [sec for _, sec in solved],
                           per_node, config.workers)
    return GlobalSolution("elliptic", axes, values, partition, pieces, grid, interps), timings


def run_pdd(config: PddConfig):
    """Run both stages; returns ``(GlobalSolution, StageTimings)``.

    With one subdomain the Monte Carlo stage is skipped and the result is
    the direct deterministic solve of the whole domain.
    """
    t_start = time.perf_counter()
    if isinstance(config.problem, LinearBvpSpec):
        return _run_elliptic(config, t_start)
    if config.axis != 0:
        raise InvalidArgument("1-d problems are partitioned along axis 0")
    return _run_parabolic(config, t_start)


def max_error(solution: GlobalSolution, exact: Callable, t: Optional[float] = None,
              window: Optional[tuple] = None) -> float:
    """Largest deviation from ``exact`` over the grid (optionally an x-window)."""
    if solution.kind == "parabolic":
        xs = solution.axes[0]
        times = solution.axes[1] if t is None else [t]
        keep = np.ones(xs.size, bool) if window is None else (xs >= window[0]) & (xs <= window[1])
        return max(float(np.max(np.abs(solution.at_time(s)[keep] - exact(xs[keep], s))))
                   for s in times)
    xs, ys = solution.axes
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return float(np.max(np.abs(solution.values - exact(X, Y))))


def benchmark(config: PddConfig, counts=(1, 2, 4, 8), repeats: int = 1) -> dict:
    """Stage timings for each subdomain count, modelled with one worker
    per subdomain (tasks themselves run on ``config.workers`` threads).

    With ``repeats > 1`` every per-task time is the best over the repeats,
    which filters scheduler noise out of the parallel model.
    """
    if repeats < 1:
        raise InvalidArgument("repeats must be >= 1")
    out = {}
    for p in counts:
        cfg = replace(config, subdomains=p)
        runs = [run_pdd(cfg)[1] for _ in range(repeats)]

        def best(attr):
            return [min(col) for col in zip(*(getattr(r, attr) for r in runs))]

        out[p] = StageTimings(min(r.mc_seconds for r in runs),
                              min(r.interp_seconds for r in runs),
                              min(r.solve_seconds for r in runs),
                              min(r.total_seconds for r in runs),
                              best("per_subdomain_seconds"), best("per_node_seconds"), p)
    return out
