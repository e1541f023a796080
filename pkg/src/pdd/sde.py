"""Euler-Maruyama time stepping of the coupled (X, Y, Z, xi) system.

The state carries the position ``X``, the multiplicative weight ``Y``
(``dY = c Y dt + phi Y dxi``), the additive accumulator ``Z``
(``dZ = f Y dt + psi Y dxi``) and the local time ``xi`` on reflecting
faces.  Exits through absorbing faces use the plain post-step boundary
test; the crossing is reported at the projected point and at the end of
the step.  This discrete test over-estimates exit times by O(sqrt(dt)).

Random numbers come from :class:`RngStream`, a (seed, key) pair mapped to
the 128-bit key of a counter-based Philox generator (the seed fills one
word, a SplitMix64 hash chain of the key tuple the other), so any draw can
be reproduced from its key alone regardless of how work was scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, InvalidArgument
from .geometry import BoundaryEvent, BoxDomain, FaceKind, project_to_face, violated_faces

ScalarFn = Callable[[np.ndarray, np.ndarray], np.ndarray]

# local-time increment per unit of overshoot under symmetric reflection;
# the mirrored step moves the point back by twice the overshoot
REFLECTION_PUSH = 2.0


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    key: tuple = ()

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.master_seed, self.key + tuple(int(i) for i in ids))

    def philox_key(self) -> list:
        h = len(self.key)
        for k in self.key:
            h = _splitmix64(h ^ (int(k) & _MASK64))
        return [int(self.master_seed) & _MASK64, h]

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=self.philox_key()))


_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    raise InvalidArgument(f"expected RngStream or Generator, got {type(rng).__name__}")


def sample_gaussian_increment(stream, dt: float, dim: int, size=None) -> np.ndarray:
    """Brownian increment(s) with variance ``dt`` per component.

    Passing an :class:`RngStream` replays the same draw every call;
    pass a ``Generator`` to consume a running sequence.
    """
    if dt < 0:
        raise InvalidArgument(f"negative time step {dt}")
    shape = (dim,) if size is None else (size, dim)
    z = as_generator(stream).standard_normal(shape)
    return np.sqrt(dt) * z


@dataclass(frozen=True)
class DiffusionCoefficients:
    """Drift ``b(x, t)`` and dispersion ``sigma`` with ``A = sigma sigma^T``.

    ``sigma`` may be a scalar (isotropic), a constant ``(d, d)`` matrix, or a
    callable returning ``(..., d, d)``.  ``drift=None`` means zero drift.
    """

    drift: Optional[Callable] = None
    sigma: Union[float, np.ndarray, Callable] = 1.0

    @classmethod
    def brownian(cls, scale: float = 1.0) -> "DiffusionCoefficients":
        return cls(None, float(scale))

    @property
    def is_constant(self) -> bool:
        return self.drift is None and not callable(self.sigma)

    def b(self, x, t):
        if self.drift is None:
            return np.zeros_like(x)
        return np.asarray(self.drift(x, t), dtype=float)

    def sigma_at(self, x, t):
        if callable(self.sigma):
            return np.asarray(self.sigma(x, t), dtype=float)
        return self.sigma

    def diffuse(self, x, t, dW):
        s = self.sigma_at(x, t)
        if np.ndim(s) == 0:
            return s * dW
        if np.ndim(s) == 2:
            return dW @ np.asarray(s).T
        return np.einsum("...ij,...j->...i", s, dW)

    def check_nondegenerate(self, x, t=0.0):
        x = np.atleast_2d(np.asarray(x, float))
        s = self.sigma_at(x, t)
        d = x.shape[-1]
        if np.ndim(s) == 0:
            ok = s != 0
        else:
            mats = np.broadcast_to(s, x.shape[:-1] + (d, d))
            ok = np.all(np.linalg.matrix_rank(mats) == d)
        if not ok:
            raise ConfigurationError("sigma is rank deficient (A not positive definite)")


@dataclass(frozen=True)
class PathScalars:
    """Zeroth-order term ``c``, source ``f`` and reflecting-face data ``phi_r``,
    ``psi_r``.  Each is ``fn(x, t) -> array`` over the leading axes of ``x``,
    or ``None`` for zero."""

    c: Optional[ScalarFn] = None
    f: Optional[ScalarFn] = None
    phi_r: Optional[ScalarFn] = None
    psi_r: Optional[ScalarFn] = None


def _eval(fn, x, t):
    if fn is None:
        return 0.0
    return np.asarray(fn(x, t), dtype=float)


@dataclass
class PathState:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    xi: np.ndarray
    t: float = 0.0

    @classmethod
    def initial(cls, x) -> "PathState":
        x = np.array(x, dtype=float)
        lead = x.shape[:-1]
        return cls(x, np.ones(lead), np.zeros(lead), np.zeros(lead), 0.0)

    def copy(self) -> "PathState":
        return PathState(self.x.copy(), np.copy(self.y), np.copy(self.z),
                         np.copy(self.xi), self.t)


def coefficient_time(t, horizon):
    """Coefficients run backwards in time on parabolic problems."""
    if horizon is None or not np.isfinite(horizon):
        return 0.0
    return horizon - t


def advance_state(state: PathState, coeffs: DiffusionCoefficients, scalars: PathScalars,
                  dt: float, dW: np.ndarray, horizon: Optional[float] = None) -> PathState:
    """One Euler-Maruyama step away from the boundary (no local-time term)."""
    s = coefficient_time(state.t, horizon)
    x = state.x
    c = _eval(scalars.c, x, s)
    f = _eval(scalars.f, x, s)
    x_new = x + coeffs.b(x, s) * dt + coeffs.diffuse(x, s, dW)
    y_new = state.y + c * state.y * dt
    z_new = state.z + f * state.y * dt
    return PathState(x_new, y_new, z_new, np.copy(state.xi), state.t + dt)


def reflect(domain: BoxDomain, state: PathState, scalars: PathScalars, rows: np.ndarray,
            face: np.ndarray, overshoot: np.ndarray, horizon: Optional[float] = None):
    """Mirror the overshoot of ``rows`` back across their reflecting face, in place."""
    hit = project_to_face(domain, state.x[rows], face)
    axis = face // 2
    bound = np.where(face % 2 == 1, domain.hi_array[axis], domain.lo_array[axis])
    r = np.arange(rows.size)
    xr = state.x[rows]
    xr[r, axis] = 2.0 * bound - xr[r, axis]
    state.x[rows] = xr
    dxi = REFLECTION_PUSH * overshoot
    s = coefficient_time(state.t, horizon)
    y_old = state.y[rows]
    phi = _eval(scalars.phi_r, hit, s)
    psi = _eval(scalars.psi_r, hit, s)
    state.y[rows] = y_old + phi * y_old * dxi
    state.z[rows] = state.z[rows] + psi * y_old * dxi
    state.xi[rows] = state.xi[rows] + dxi


@dataclass
class PathOutcome:
    terminal_state: PathState
    exit: BoundaryEvent
    exit_time: float


@dataclass
class PathBatch:
    """Terminal states of ``n`` independent paths."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    xi: np.ndarray
    exit_time: np.ndarray
    exit_face: np.ndarray  # -1 when the path never met an absorbing face
    horizon: float
    domain: BoxDomain
    steps: int = 0
    xi_monotone: bool = True
    extra: dict = field(default_factory=dict)

    def __len__(self):
        return self.x.shape[0]

    @property
    def absorbed(self) -> np.ndarray:
        return self.exit_face >= 0

    def outcome(self, i: int) -> PathOutcome:
        face = int(self.exit_face[i])
        if face >= 0:
            ev = BoundaryEvent(self.domain.face_kinds[face], face, self.x[i].copy())
        else:
            ev = BoundaryEvent(None)
        st = PathState(self.x[i].copy(), self.y[i], self.z[i], self.xi[i], float(self.exit_time[i]))
        return PathOutcome(st, ev, float(self.exit_time[i]))


def simulate_paths(starts, horizon: float, domain: BoxDomain, coeffs: DiffusionCoefficients,
                   scalars: PathScalars, dt: float, rng, max_steps: int = 10**7) -> PathBatch:
    """Vectorised Euler-Maruyama for a batch of paths sharing one generator.

    ``horizon = inf`` selects elliptic (autonomous) mode, which needs at least
    one absorbing face.  Paths still inside after ``max_steps`` come back
    with ``exit_face == -1``.
    """
    if dt <= 0:
        raise InvalidArgument(f"time step must be positive, got {dt}")
    if not horizon > 0:
        raise InvalidArgument(f"horizon must be positive, got {horizon}")
    elliptic = not np.isfinite(horizon)
    if elliptic and not domain.has_absorbing_face:
        raise ConfigurationError(
            "elliptic problem with only reflecting faces: solution defined up to a constant")
    gen = as_generator(rng)
    starts = np.atleast_2d(np.asarray(starts, dtype=float))
    n, d = starts.shape
    if d != domain.dim:
        raise InvalidArgument(f"start has dimension {d}, domain has {domain.dim}")
    out_x = starts.copy()
    out_y = np.ones(n)
    out_z = np.zeros(n)
    out_xi = np.zeros(n)
    out_t = np.full(n, horizon)
    out_face = np.full(n, -1, dtype=int)

    idx = np.arange(n)
    state = PathState.initial(starts)
    reflecting = np.array([k == FaceKind.REFLECTING for k in domain.face_kinds])
    coef_h = None if elliptic else horizon
    k = 0
    monotone = True
    while idx.size and k < max_steps:
        t_next = (k + 1) * dt if elliptic else min((k + 1) * dt, horizon)
        h = t_next - state.t
        dW = np.sqrt(h) * gen.standard_normal((idx.size, d))
        new = advance_state(state, coeffs, scalars, h, dW, coef_h)
        new.t = t_next
        for _ in range(2 * d):
            face, over = violated_faces(domain, new.x)
            refl = np.nonzero((face >= 0) & reflecting[np.maximum(face, 0)])[0]
            if refl.size == 0:
                break
            xi_before = new.xi[refl].copy()
            reflect(domain, new, scalars, refl, face[refl], over[refl], coef_h)
            monotone &= bool(np.all(new.xi[refl] >= xi_before))
        face, _ = violated_faces(domain, new.x)
        gone = face >= 0
        k += 1
        if gone.any():
            rows = idx[gone]
            out_x[rows] = project_to_face(domain, new.x[gone], face[gone])
            out_y[rows] = new.y[gone]
            out_z[rows] = new.z[gone]
            out_xi[rows] = new.xi[gone]
            out_t[rows] = t_next
            out_face[rows] = face[gone]
            keep = ~gone
            idx = idx[keep]
            new = PathState(new.x[keep], new.y[keep], new.z[keep], new.xi[keep], t_next)
        state = new
        if not elliptic and t_next >= horizon:
            break
    if idx.size:
        out_x[idx] = state.x
        out_y[idx] = state.y
        out_z[idx] = state.z
        out_xi[idx] = state.xi
        out_t[idx] = state.t if elliptic else horizon
    return PathBatch(out_x, out_y, out_z, out_xi, out_t, out_face, horizon, domain, k, monotone)


def simulate_path(start, horizon: float, domain: BoxDomain, coeffs: DiffusionCoefficients,
                  scalars: PathScalars, dt: float, stream, max_steps: int = 10**7) -> PathOutcome:
    start = np.asarray(start, dtype=float)
    if not domain.contains(start):
        raise InvalidArgument(f"start point {start} is not interior")
    batch = simulate_paths(start[None, :], horizon, domain, coeffs, scalars, dt, stream, max_steps)
    return batch.outcome(0)
