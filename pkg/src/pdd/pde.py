"""Deterministic subdomain solvers.

``solve_parabolic_1d``: theta-scheme (Crank-Nicolson by default) for
``u_t = D u_xx + s(x, t, u)`` with Dirichlet data, the source handled by
Picard iteration inside each step.

``solve_elliptic_2d``: centred 5-point scheme for
``1/2 (a11 u_xx + a22 u_yy) + b1 u_x + b2 u_y + c u + f = 0`` with
Dirichlet data on all four edges, solved by ILU-preconditioned BiCGSTAB.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import lapack

from .errors import DivergenceError, InvalidArgument
from .geometry import BoxDomain


@dataclass(frozen=True)
class ParabolicProblem1D:
    lo: float
    hi: float
    diffusion: float
    source: Optional[Callable]  # (x, t, u) -> array
    initial: Callable  # x -> array
    left_bc: Callable  # t -> value
    right_bc: Callable
    horizon: float
    source_depends_on_u: bool = True

    def __post_init__(self):
        if not self.hi > self.lo:
            raise InvalidArgument("empty interval")
        if not self.diffusion > 0:
            raise InvalidArgument("diffusion must be positive")
        if not self.horizon > 0:
            raise InvalidArgument("horizon must be positive")

    def compatibility_gap(self) -> float:
        """Mismatch between boundary data at t=0 and the initial datum."""
        ends = np.asarray(self.initial(np.array([self.lo, self.hi])), dtype=float)
        return float(max(abs(ends[0] - self.left_bc(0.0)), abs(ends[1] - self.right_bc(0.0))))


@dataclass
class GridSolution:
    axes: tuple
    values: np.ndarray
    max_residual: float = 0.0
    info: dict = field(default_factory=dict)

    def at_time(self, t: float) -> np.ndarray:
        ts = self.axes[1]
        k = int(np.argmin(np.abs(ts - t)))
        if not math.isclose(ts[k], t, rel_tol=1e-9, abs_tol=1e-12):
            raise InvalidArgument(f"time {t} was not stored")
        return self.values[k]


def _grid(lo, hi, h, what):
    if not h > 0:
        raise InvalidArgument(f"{what} must be positive")
    n = max(1, int(round((hi - lo) / h)))
    return np.linspace(lo, hi, n + 1)


def _store_steps(n_steps, horizon, store_times):
    if store_times is None:
        return np.arange(n_steps + 1)
    t = np.asarray(store_times, dtype=float)
    k = np.rint(t / horizon * n_steps).astype(int)
    if np.any(k < 0) or np.any(k > n_steps) or np.any(np.abs(k * horizon / n_steps - t) > 1e-9 * max(1.0, horizon)):
        raise InvalidArgument("store_times must lie on the solver time grid")
    return np.unique(k)


def solve_parabolic_1d(problem: ParabolicProblem1D, dx: float, dt_solver: float, tol: float = 1e-3,
                       store_times: Optional[Sequence[float]] = None, theta: float = 0.5,
                       max_picard: int = 50) -> GridSolution:
    """Returns values on ``(x, t_stored)``; ``info`` holds iteration counts.

    Picard stops when successive iterates differ by at most
    ``tol * (1 + max|u|)`` (mixed absolute/relative test).
    """
    if not tol > 0:
        raise InvalidArgument("tolerance must be positive")
    x = _grid(problem.lo, problem.hi, dx, "dx")
    h = x[1] - x[0]
    n_steps = max(1, int(round(problem.horizon / dt_solver)))
    k_dt = problem.horizon / n_steps
    keep = _store_steps(n_steps, problem.horizon, store_times)
    keep_set = {int(k): i for i, k in enumerate(keep)}

    u = np.asarray(problem.initial(x), dtype=float).copy()
    u[0] = problem.left_bc(0.0)
    u[-1] = problem.right_bc(0.0)
    out = np.empty((len(keep), x.size))
    if 0 in keep_set:
        out[keep_set[0]] = u

    m = x.size - 2
    r = problem.diffusion * k_dt / h**2
    src = problem.source
    picard = src is not None and problem.source_depends_on_u
    if m > 0:
        dl = np.full(m - 1, -theta * r)
        d = np.full(m, 1.0 + 2.0 * theta * r)
        du = dl.copy()
        dl, d, du, du2, ipiv, info = lapack.dgttrf(dl, d, du)
        if info != 0:
            raise DivergenceError("singular Crank-Nicolson matrix")
    xi = x[1:-1]
    max_res = 0.0
    iters_total = 0
    max_iters = 0
    # explicit half of the scheme as one 3-tap stencil over the full state
    explicit = np.array([(1.0 - theta) * r, 1.0 - 2.0 * (1.0 - theta) * r, (1.0 - theta) * r])
    implicit_edge = theta * r
    s_old = src(xi, 0.0, u[1:-1]) if src is not None else None
    for k in range(1, n_steps + 1):
        t_new = k * k_dt
        gl, gr = problem.left_bc(t_new), problem.right_bc(t_new)
        if m > 0:
            rhs = np.convolve(u, explicit, "valid")
            rhs[0] += implicit_edge * gl
            rhs[-1] += implicit_edge * gr
            if src is not None:
                rhs += (1.0 - theta) * k_dt * s_old
            guess = u[1:-1]
            it = 0
            while True:
                b = rhs
                if src is not None:
                    s_new = src(xi, t_new, guess)
                    b = rhs + theta * k_dt * s_new
                new, info = lapack.dgttrs(dl, d, du, du2, ipiv, b)
                it += 1
                if not picard:
                    break
                delta = float(np.abs(new - guess).max())
                guess = new
                if delta <= tol * (1.0 + float(np.abs(new).max())):
                    max_res = max(max_res, delta)
                    break
                if it >= max_picard:
                    raise DivergenceError(
                        f"Picard iteration stalled at t={t_new:.6g} (step {k}): "
                        f"increment {delta:.3e} after {it} iterations")
            if src is not None:
                s_old = src(xi, t_new, new)
            iters_total += it
            max_iters = max(max_iters, it)
            u = np.empty_like(u)
            u[0], u[1:-1], u[-1] = gl, new, gr
        else:
            u = np.array([gl, gr], dtype=float)
        if k in keep_set:
            out[keep_set[k]] = u
    if not np.all(np.isfinite(out)):
        raise DivergenceError("non-finite values in parabolic solve")
    times = keep * k_dt
    return GridSolution((x, times), out, max_res,
                        {"picard_iterations": iters_total, "max_picard": max_iters,
                         "steps": n_steps, "dt": k_dt, "dx": h})


@dataclass(frozen=True)
class EllipticProblem2D:
    domain: BoxDomain
    a11: object = 1.0
    a22: object = 1.0
    b1: object = 0.0
    b2: object = 0.0
    c: object = 0.0
    f: object = 0.0
    g: Callable = None

    def __post_init__(self):
        if self.domain.dim != 2:
            raise InvalidArgument("EllipticProblem2D needs a 2-d box")


def _field(v, x, y):
    if callable(v):
        return np.asarray(v(x, y), dtype=float) * np.ones_like(x)
    return np.full_like(x, float(v))


def assemble_elliptic_2d(problem: EllipticProblem2D, dx: float, dy: float):
    """Sparse system ``M u = rhs`` for the interior unknowns, row-major in (i, j)."""
    dom = problem.domain
    xs = _grid(dom.lo[0], dom.hi[0], dx, "dx")
    ys = _grid(dom.lo[1], dom.hi[1], dy, "dy")
    hx, hy = xs[1] - xs[0], ys[1] - ys[0]
    nx, ny = xs.size - 2, ys.size - 2
    if nx < 1 or ny < 1:
        raise InvalidArgument("grid has no interior nodes")
    X, Y = np.meshgrid(xs[1:-1], ys[1:-1], indexing="ij")
    a11 = _field(problem.a11, X, Y)
    a22 = _field(problem.a22, X, Y)
    b1 = _field(problem.b1, X, Y)
    b2 = _field(problem.b2, X, Y)
    cc = _field(problem.c, X, Y)
    ff = _field(problem.f, X, Y)
    # sign flipped so the diagonal is positive
    w = -(0.5 * a11 / hx**2 - b1 / (2 * hx))
    e = -(0.5 * a11 / hx**2 + b1 / (2 * hx))
    s = -(0.5 * a22 / hy**2 - b2 / (2 * hy))
    n = -(0.5 * a22 / hy**2 + b2 / (2 * hy))
    p = a11 / hx**2 + a22 / hy**2 - cc
    rhs = ff.copy()

    G = np.empty((xs.size, ys.size))
    XX, YY = np.meshgrid(xs, ys, indexing="ij")
    edge = np.zeros_like(G, dtype=bool)
    edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
    G[edge] = np.asarray(problem.g(XX[edge], YY[edge]), dtype=float)
    rhs[0, :] -= w[0, :] * G[0, 1:-1]
    rhs[-1, :] -= e[-1, :] * G[-1, 1:-1]
    rhs[:, 0] -= s[:, 0] * G[1:-1, 0]
    rhs[:, -1] -= n[:, -1] * G[1:-1, -1]

    idx = np.arange(nx * ny).reshape(nx, ny)
    rows = [idx.ravel()]
    cols = [idx.ravel()]
    vals = [p.ravel()]
    for coef, sl_from, sl_to in (
            (w, (slice(1, None), slice(None)), (slice(None, -1), slice(None))),
            (e, (slice(None, -1), slice(None)), (slice(1, None), slice(None))),
            (s, (slice(None), slice(1, None)), (slice(None), slice(None, -1))),
            (n, (slice(None), slice(None, -1)), (slice(None), slice(1, None)))):
        rows.append(idx[sl_from].ravel())
        cols.append(idx[sl_to].ravel())
        vals.append(coef[sl_from].ravel())
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(nx * ny, nx * ny))
    return M, rhs.ravel(), xs, ys, G


def solve_elliptic_2d(problem: EllipticProblem2D, dx: float, dy: float,
                      rtol: float = 1e-8, maxiter: int = 5000) -> GridSolution:
    M, rhs, xs, ys, G = assemble_elliptic_2d(problem, dx, dy)
    bnorm = float(np.linalg.norm(rhs)) or 1.0
    ilu = spla.spilu(M.tocsc(), drop_tol=1e-5, fill_factor=20)
    prec = spla.LinearOperator(M.shape, ilu.solve)
    sol, info = spla.bicgstab(M, rhs, rtol=rtol * 1e-2, atol=0.0, maxiter=maxiter, M=prec)
    res = float(np.linalg.norm(M @ sol - rhs)) / bnorm
    if info != 0 or not res <= rtol:
        raise DivergenceError(f"elliptic solve did not converge: info={info}, relative residual {res:.3e}")
    U = G.copy()
    U[1:-1, 1:-1] = sol.reshape(xs.size - 2, ys.size - 2)
    return GridSolution((xs, ys), U, res, {"unknowns": int(M.shape[0])})
