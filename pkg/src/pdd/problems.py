"""Reference problems with known solutions.

* KPP travelling wave ``u_t = u_xx + u^2 - u``.
* Manufactured 2-D elliptic problem with variable drift and absorption.
* Rescaled CVA equation with a quartic surrogate for ``max(v, 0)``.

Functions are module level (not lambdas) so specs stay picklable for
process pools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable, Optional

import numpy as np

from .geometry import BoxDomain
from .sde import DiffusionCoefficients

SQRT6 = math.sqrt(6.0)

# quartic surrogate of max(v, 0) on [-1, 1], coefficients of v^0..v^4
CVA_QUARTIC_COEFFS = (0.0586, 0.5, 0.8199, 0.0, -0.4095)


# -- KPP ---------------------------------------------------------------------

def _softplus(z: float) -> float:
    return z + math.log1p(math.exp(-z)) if z > 0 else math.log1p(math.exp(z))


def kpp_exact(x, t):
    if isinstance(x, (float, int)) and isinstance(t, (float, int)):
        # scalar path for per-step boundary data in the grid solver
        return -math.expm1(-2.0 * _softplus(x / SQRT6 - 5.0 * t / 6.0))
    x = np.asarray(x, dtype=float)
    if x.ndim and x.shape[-1:] == (1,):
        x = x[..., 0]
    z = x / SQRT6 - 5.0 * np.asarray(t) / 6.0
    # 1 - (1 + e^z)^-2 without cancellation: tiny values far behind the
    # front stay normal floats instead of collapsing to 0 and re-entering
    # the solver as subnormals
    return -np.expm1(-2.0 * np.logaddexp(0.0, z))


def kpp_initial(x):
    return kpp_exact(x, 0.0)


def kpp_source(x, t, u):
    # factored form: u*u underflows to slow subnormals far ahead of the front
    return u * (u - 1.0)


@dataclass(frozen=True)
class KppSpec:
    """KPP with ``D = r = 1`` on ``[lo, hi]`` and exact Dirichlet data."""

    lo: float = -2000.0
    hi: float = 2000.0
    horizon: float = 1.0

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain.interval(self.lo, self.hi)

    def branching_spec(self, prune_limit: int = 1000, step: float = math.inf):
        from .branching import BranchingSpec
        return BranchingSpec(
            intensity=1.0, alpha=(0.0, 0.0, 1.0), terminal=kpp_initial,
            dirichlet=kpp_exact, coeffs=DiffusionCoefficients.brownian(math.sqrt(2.0)),
            horizon=self.horizon, prune_limit=prune_limit, domain=self.domain, step=step,
            psi_norm=1.0)

    def parabolic_problem(self, lo=None, hi=None, left_bc=None, right_bc=None):
        from .pde import ParabolicProblem1D
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return ParabolicProblem1D(
            lo, hi, 1.0, kpp_source, kpp_initial,
            left_bc or partial(kpp_exact, lo), right_bc or partial(kpp_exact, hi),
            self.horizon)

    def exact(self, x, t):
        return kpp_exact(x, t)


# -- manufactured elliptic problem ---------------------------------------------

def _split(pts):
    pts = np.asarray(pts, dtype=float)
    return pts[..., 0], pts[..., 1]


def manufactured_u(x, y):
    return 2.0 * np.cos(2.0 * (y - 2.0) * x) + np.sin(3.0 * (x - 2.0) * y) + 3.1


def _manufactured_derivatives(x, y):
    a = 2.0 * (y - 2.0) * x
    b = 3.0 * (x - 2.0) * y
    ux = -4.0 * (y - 2.0) * np.sin(a) + 3.0 * y * np.cos(b)
    uy = -4.0 * x * np.sin(a) + 3.0 * (x - 2.0) * np.cos(b)
    uxx = -8.0 * (y - 2.0) ** 2 * np.cos(a) - 9.0 * y**2 * np.sin(b)
    uyy = -8.0 * x**2 * np.cos(a) - 9.0 * (x - 2.0) ** 2 * np.sin(b)
    return ux, uy, uxx, uyy


def manufactured_beta(x, y):
    return np.cos(x + y) / (1.1 + np.sin(x + y))


def manufactured_gamma(x, y):
    return (x * x + y * y) / (1.1 + np.sin(x + y))


def manufactured_f(x, y):
    """Source making ``manufactured_u`` solve
    ``lap u + beta (u_x + u_y) - gamma u + f = 0``."""
    ux, uy, uxx, uyy = _manufactured_derivatives(x, y)
    return -(uxx + uyy) - manufactured_beta(x, y) * (ux + uy) + manufactured_gamma(x, y) * manufactured_u(x, y)


def manufactured_c(x, y):
    return -manufactured_gamma(x, y)


def _pts_u(pts, t=0.0):
    return manufactured_u(*_split(pts))


def _pts_drift(pts, t=0.0):
    beta = manufactured_beta(*_split(pts))
    return np.stack([beta, beta], axis=-1)


def _pts_c(pts, t=0.0):
    return -manufactured_gamma(*_split(pts))


def _pts_f(pts, t=0.0):
    return manufactured_f(*_split(pts))


@dataclass(frozen=True)
class ManufacturedElliptic:
    lo: tuple = (0.0, 0.0)
    hi: tuple = (1.0, 1.0)

    @property
    def domain(self) -> BoxDomain:
        return BoxDomain(self.lo, self.hi)

    def linear_bvp_spec(self):
        from .feynman_kac import LinearBvpSpec
        return LinearBvpSpec(self.domain, DiffusionCoefficients(_pts_drift, math.sqrt(2.0)),
                             c=_pts_c, f=_pts_f, g=_pts_u)

    def elliptic_problem(self, g=None, lo=None, hi=None):
        from .pde import EllipticProblem2D
        dom = self.domain if lo is None else BoxDomain(lo, hi)
        return EllipticProblem2D(dom, a11=2.0, a22=2.0, b1=manufactured_beta,
                                 b2=manufactured_beta,
                                 c=manufactured_c,
                                 f=manufactured_f, g=g or manufactured_u)

    def exact(self, x, y):
        return manufactured_u(x, y)


# -- CVA -----------------------------------------------------------------------

def polynomial_source(coeffs, intensity, x, t, u):
    return intensity * (np.polynomial.polynomial.polyval(u, coeffs) - u)


def _scaled(fn, norm, x):
    return np.asarray(fn(x), dtype=float) / norm


def default_cva_payoff(x):
    x = np.asarray(x, dtype=float)
    if x.ndim and x.shape[-1:] == (1,):
        x = x[..., 0]
    return np.tanh(x)


@dataclass(frozen=True)
class CvaSpec:
    """Rescaled CVA equation in time-to-maturity form,

        v_t = 1/2 sigma^2 v_xx + c (F(v) - v),   v(x, 0) = psi(x) / |psi|_inf,

    with ``F`` the quartic surrogate of ``max(v, 0)``.
    """

    intensity: float = 1.0
    volatility: float = 1.0
    horizon: float = 0.25
    payoff: Callable = default_cva_payoff
    payoff_norm: float = 1.0
    coefficients: tuple = CVA_QUARTIC_COEFFS
    offspring_law: Optional[tuple] = None
    lo: float = -8.0
    hi: float = 8.0

    @property
    def terminal(self):
        return partial(_scaled, self.payoff, self.payoff_norm)

    def branching_spec(self, prune_limit: int = 1000):
        from .branching import BranchingSpec
        return BranchingSpec(
            intensity=self.intensity, alpha=tuple(self.coefficients), terminal=self.terminal,
            coeffs=DiffusionCoefficients.brownian(self.volatility), horizon=self.horizon,
            offspring_law=self.offspring_law, prune_limit=prune_limit, psi_norm=1.0)

    def source(self):
        return partial(polynomial_source, tuple(self.coefficients), self.intensity)

    def far_field(self, v0: float, t_grid):
        """Spatially constant solution from ``v(0) = v0``; used as Dirichlet data."""
        from scipy.integrate import solve_ivp
        src = self.source()
        sol = solve_ivp(lambda t, v: src(None, t, v), (0.0, self.horizon), [float(v0)],
                        t_eval=np.asarray(t_grid), rtol=1e-12, atol=1e-14)
        return sol.y[0]

    def boundary_series(self, at: float):
        """Dirichlet data ``t -> v`` at ``x = at`` from the far-field ODE."""
        ts = np.linspace(0.0, self.horizon, 2001)
        vs = self.far_field(float(self.terminal(np.array([[at]]))[0]), ts)
        return partial(np.interp, xp=ts, fp=vs)

    def parabolic_problem(self, lo=None, hi=None, left_bc=None, right_bc=None):
        from .pde import ParabolicProblem1D
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return ParabolicProblem1D(
            lo, hi, 0.5 * self.volatility**2, self.source(), self.terminal,
            left_bc or self.boundary_series(lo), right_bc or self.boundary_series(hi),
            self.horizon)
