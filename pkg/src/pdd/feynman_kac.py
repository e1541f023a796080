"""Pointwise Monte Carlo solution of linear parabolic / elliptic problems.

The problem is stated forward in time,

    u_t = L u + c u + f      in the domain,
    u = p                    at t = 0,
    u = g                    on absorbing faces,
    du/dN = phi u + psi      on reflecting faces,

with ``L = 1/2 sum A_ij d_ij + sum b_i d_i`` and ``A = sigma sigma^T``.
Paths run backwards in PDE time, so coefficients are evaluated at
``T - s`` along a path started at time ``T``.  Elliptic problems
(``horizon = inf``) drop ``p`` and the time arguments.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import (ConfigurationError, HorizonExhausted, InvalidArgument,
                     UnsupportedConfiguration)
from .geometry import BoxDomain, FaceKind
from .sde import (DiffusionCoefficients, PathBatch, PathOutcome, PathScalars, RngStream,
                  as_generator, simulate_paths)

ELLIPTIC = math.inf


@dataclass(frozen=True)
class LinearBvpSpec:
    domain: BoxDomain
    coeffs: DiffusionCoefficients = DiffusionCoefficients()
    c: Optional[Callable] = None
    f: Optional[Callable] = None
    p: Optional[Callable] = None
    g: Optional[Callable] = None
    phi_r: Optional[Callable] = None
    psi_r: Optional[Callable] = None
    horizon: float = ELLIPTIC

    @property
    def elliptic(self) -> bool:
        return not math.isfinite(self.horizon)

    @property
    def scalars(self) -> PathScalars:
        return PathScalars(self.c, self.f, self.phi_r, self.psi_r)

    def validate(self, samples: int = 17):
        """Spot-check sign conditions on a tensor grid of the closed box."""
        dom = self.domain
        if self.elliptic and not dom.has_absorbing_face:
            raise ConfigurationError("elliptic problem needs an absorbing face")
        if dom.has_absorbing_face and self.g is None:
            raise ConfigurationError("absorbing faces need a Dirichlet datum g")
        if not self.elliptic and self.p is None:
            raise ConfigurationError("parabolic problem needs an initial datum p")
        axes = [np.linspace(a, b, samples) for a, b in zip(dom.lo, dom.hi)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dom.dim)
        if self.elliptic and self.c is not None and np.any(np.asarray(self.c(pts, 0.0)) > 0):
            raise ConfigurationError("elliptic mode requires c <= 0")
        if self.phi_r is not None and np.any(np.asarray(self.phi_r(pts, 0.0)) > 0):
            raise ConfigurationError("reflecting-face coefficient phi must be <= 0")
        self.coeffs.check_nondegenerate(pts[:: max(1, len(pts) // 50)])


@dataclass(frozen=True)
class PointEstimate:
    value: float
    std_error: float
    n_samples: int
    elapsed: float = 0.0

    @classmethod
    def from_scores(cls, scores, elapsed=0.0) -> "PointEstimate":
        scores = np.asarray(scores, dtype=float)
        n = scores.size
        mean = float(scores.mean())
        se = float(scores.std(ddof=1) / np.sqrt(n)) if n > 1 else math.inf
        if np.all(scores == scores[0]):
            se = 0.0
        return cls(mean, se, n, elapsed)


def _terminal_weight(spec: LinearBvpSpec, x, exit_time, absorbed, horizon):
    q = np.empty(x.shape[0])
    if absorbed.any():
        s = 0.0 if not math.isfinite(horizon) else horizon - exit_time[absorbed]
        q[absorbed] = spec.g(x[absorbed], s)
    alive = ~absorbed
    if alive.any():
        if not math.isfinite(horizon):
            raise HorizonExhausted(f"{int(alive.sum())} elliptic path(s) never exited")
        q[alive] = spec.p(x[alive])
    return q


def score_batch(batch: PathBatch, spec: LinearBvpSpec) -> np.ndarray:
    """``q(X_tau) Y_tau + Z_tau`` for every path in the batch."""
    absorbing = np.array([k == FaceKind.ABSORBING for k in spec.domain.face_kinds])
    absorbed = (batch.exit_face >= 0) & absorbing[np.maximum(batch.exit_face, 0)]
    q = _terminal_weight(spec, batch.x, batch.exit_time, absorbed, batch.horizon)
    return q * batch.y + batch.z


def score_path(outcome: PathOutcome, spec: LinearBvpSpec, horizon: Optional[float] = None) -> float:
    horizon = spec.horizon if horizon is None else horizon
    st = outcome.terminal_state
    absorbed = np.array([outcome.exit.kind == FaceKind.ABSORBING])
    q = _terminal_weight(spec, np.atleast_2d(st.x), np.array([outcome.exit_time]), absorbed, horizon)
    return float(q[0] * st.y + st.z)


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def sample_scores(x, t, spec: LinearBvpSpec, n: int, dt: float, stream: RngStream,
                  block_size: int = 2048, first_block: int = 0, workers: int = 1,
                  max_steps: int = 10**7) -> np.ndarray:
    """Path scores for blocks ``first_block, first_block+1, ...`` of ``stream``.

    Block ``k`` always holds the same ``block_size`` paths, drawn from
    ``stream.child(k)``, so results do not depend on ``workers``.
    """
    x = np.asarray(x, dtype=float)
    horizon = spec.horizon if spec.elliptic else float(t)
    n_blocks = -(-n // block_size)

    def run(k):
        size = min(block_size, n - (k - first_block) * block_size)
        starts = np.broadcast_to(x, (size, x.size))
        batch = simulate_paths(starts, horizon, spec.domain, spec.coeffs, spec.scalars, dt,
                               stream.child(k), max_steps)
        return score_batch(batch, spec)

    parts = _map(run, range(first_block, first_block + n_blocks), workers)
    return np.concatenate(parts)


def estimate_point(x, t, spec: LinearBvpSpec, n: int, dt: float, stream: RngStream,
                   block_size: int = 2048, workers: int = 1, target_se: Optional[float] = None,
                   max_samples: Optional[int] = None, max_steps: int = 10**7) -> PointEstimate:
    """Monte Carlo estimate of ``u(x, t)`` (``t`` ignored for elliptic problems).

    With ``target_se`` set, further batches of ``n`` paths are added until the
    standard error drops below it or ``max_samples`` is reached.
    """
    if n < 2:
        raise InvalidArgument("need at least two samples for a standard error")
    x = np.asarray(x, dtype=float)
    if not spec.domain.contains(x):
        raise InvalidArgument(f"estimation point {x} is not interior")
    if not spec.elliptic and not 0 < t <= spec.horizon:
        raise InvalidArgument(f"time {t} outside (0, {spec.horizon}]")
    t0 = time.perf_counter()
    block_size = min(block_size, n)
    per_round = -(-n // block_size)
    scores = sample_scores(x, t, spec, n, dt, stream, block_size, 0, workers, max_steps)
    est = PointEstimate.from_scores(scores)
    cap = max_samples or 100 * n
    rounds = 1
    while target_se is not None and est.std_error > target_se and scores.size < cap:
        more = sample_scores(x, t, spec, n, dt, stream, block_size,
                             rounds * per_round, workers, max_steps)
        rounds += 1
        scores = np.concatenate([scores, more])
        est = PointEstimate.from_scores(scores)
    return PointEstimate(est.value, est.std_error, est.n_samples, time.perf_counter() - t0)


def walk_on_spheres(x, domain: BoxDomain, g: Callable, n: int, eps: Optional[float] = None,
                    stream=None, max_jumps: int = 10**5) -> PointEstimate:
    """Walk on Spheres for the Laplace equation with Dirichlet data ``g(x, t)``.

    Each walker jumps to a uniform point on the largest sphere inside the box
    until it is within ``eps`` of a face, then scores ``g`` at its projection
    on that face.  The absorption shell adds an O(eps) bias.
    """
    if domain.has_reflecting_face:
        raise UnsupportedConfiguration("walk on spheres handles absorbing faces only")
    if n < 2:
        raise InvalidArgument("need at least two samples for a standard error")
    eps = 1e-3 * domain.diameter if eps is None else eps
    if eps <= 0:
        raise InvalidArgument("absorption shell width must be positive")
    gen = as_generator(stream if stream is not None else RngStream(0))
    t0 = time.perf_counter()
    lo, hi = domain.lo_array, domain.hi_array
    pos = np.tile(np.asarray(x, dtype=float), (n, 1))
    if not domain.contains(pos[0]):
        raise InvalidArgument(f"start point {x} is not interior")
    active = np.arange(n)
    for _ in range(max_jumps):
        p = pos[active]
        dist = np.concatenate([p - lo, hi - p], axis=1)
        r = dist.min(axis=1)
        walking = r >= eps
        active = active[walking]
        if active.size == 0:
            break
        direction = gen.standard_normal((active.size, domain.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        pos[active] += r[walking, None] * direction
    dist = np.concatenate([pos - lo, hi - pos], axis=1)
    face = dist.argmin(axis=1)
    axis = face % domain.dim
    upper = face >= domain.dim
    rows = np.arange(n)
    pos[rows, axis] = np.where(upper, hi[axis], lo[axis])
    scores = np.asarray(g(pos, 0.0), dtype=float) * np.ones(n)
    est = PointEstimate.from_scores(scores)
    return PointEstimate(est.value, est.std_error, n, time.perf_counter() - t0)
