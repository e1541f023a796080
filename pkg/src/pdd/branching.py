"""Branching-diffusion estimators for semilinear equations

    u_t = L u + c (sum_i alpha_i(x, t) u^i - u),   u(x, 0) = psi(x),

optionally on a box with Dirichlet data ``g``.

A tree starts with one particle.  The whole population carries a single
exponential clock of rate ``c * N`` (``N`` alive particles); when it rings a
uniformly chosen particle is replaced by ``I ~ q`` offspring at its current
position.  The score at time ``t`` is the product of ``psi`` over particles
alive at ``t`` and ``g`` over particles that hit the boundary before ``t``,
times ``alpha_I / q_I`` for every branching before ``t``.  With ``q = alpha``
(the classical setting) those weights are all one.
"""

from __future__ import annotations

import enum
import functools
import logging
import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import AssumptionViolation, DivergenceError, InvalidArgument, MissingDatum
from .feynman_kac import PointEstimate
from .geometry import BoxDomain, FaceKind, face_overshoot, project_to_face, violated_faces
from .sde import DiffusionCoefficients, RngStream

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BranchingSpec:
    intensity: float
    alpha: tuple  # constants or callables (x, t) -> array
    terminal: Callable  # psi(x), x of shape (n, d)
    coeffs: DiffusionCoefficients = DiffusionCoefficients()
    horizon: float = 1.0
    dirichlet: Optional[Callable] = None  # g(x, t)
    offspring_law: Optional[tuple] = None
    prune_limit: int = 1000
    domain: Optional[BoxDomain] = None  # None: whole space
    step: float = math.inf  # largest internal diffusion step
    psi_norm: Optional[float] = None
    alpha_norms: Optional[tuple] = None
    dim: int = 1

    def __post_init__(self):
        if not self.intensity > 0:
            raise InvalidArgument("branching intensity must be positive")
        if not self.horizon > 0:
            raise InvalidArgument("horizon must be positive")
        if self.prune_limit < 1:
            raise InvalidArgument("prune_limit must be >= 1")
        if self.domain is not None:
            object.__setattr__(self, "dim", self.domain.dim)
            if self.domain.has_reflecting_face:
                raise InvalidArgument("branching supports Dirichlet (absorbing) faces only")
        q = self.offspring_law
        if q is None:
            q = self.alpha if self.is_classical else _uniform_over_support(self.alpha)
        q = np.asarray(q, dtype=float)
        if q.shape != (len(self.alpha),):
            raise InvalidArgument("offspring law needs one probability per alpha coefficient")
        if np.any(q < 0) or not math.isclose(q.sum(), 1.0, rel_tol=0, abs_tol=1e-12):
            raise InvalidArgument("offspring law must be a probability vector")
        for i, a in enumerate(self.alpha):
            if not _is_zero(a) and q[i] <= 0:
                raise InvalidArgument(f"q[{i}] must be positive where alpha[{i}] != 0")
        object.__setattr__(self, "offspring_law", tuple(float(v) for v in q))

    @functools.cached_property
    def is_classical(self) -> bool:
        if any(callable(a) for a in self.alpha):
            return False
        a = np.asarray(self.alpha, dtype=float)
        return bool(np.all(a >= 0) and math.isclose(a.sum(), 1.0, abs_tol=1e-12))

    @functools.cached_property
    def q(self) -> np.ndarray:
        return np.asarray(self.offspring_law)

    @functools.cached_property
    def weights_trivial(self) -> bool:
        """True when every ``alpha_i / q_i`` is exactly one."""
        return self.is_classical and all(
            float(a) == qi for a, qi in zip(self.alpha, self.offspring_law) if qi > 0)

    def weight(self, i: int, x, t) -> float:
        a = self.alpha[i]
        val = a(x, t) if callable(a) else a
        return float(val) / self.offspring_law[i]


def _is_zero(a) -> bool:
    return not callable(a) and float(a) == 0.0


def _uniform_over_support(alpha):
    support = np.array([not _is_zero(a) for a in alpha], dtype=float)
    if support.sum() == 0:
        raise InvalidArgument("all alpha coefficients vanish")
    return support / support.sum()


class ParticleStatus(enum.Enum):
    ALIVE = "alive"
    BRANCHED = "branched"
    DEAD = "dead"
    HIT_BOUNDARY = "hit_boundary"


@dataclass
class Particle:
    id: int
    parent_id: int
    birth_time: float
    birth_position: np.ndarray
    status: ParticleStatus = ParticleStatus.ALIVE
    end_time: Optional[float] = None
    end_position: Optional[np.ndarray] = None
    trajectory: list = field(default_factory=list)


@dataclass(frozen=True)
class BranchEvent:
    time: float
    particle: int  # K_n
    offspring: int  # I_n
    position: np.ndarray


@dataclass
class Snapshot:
    time: float
    alive_ids: np.ndarray
    positions: np.ndarray


@dataclass
class ParticleTree:
    particles: list
    branch_events: list
    snapshots: list
    checkpoints: np.ndarray
    restarts: int = 0
    key: tuple = ()

    @property
    def branch_count(self) -> int:
        return len(self.branch_events)

    @property
    def alive_count(self) -> int:
        return sum(p.status == ParticleStatus.ALIVE for p in self.particles)

    def population_after_events(self) -> list:
        """Replay ``N`` through the branch events: ``N -> N + I_n - 1``."""
        n = [1]
        for ev in self.branch_events:
            n.append(n[-1] + ev.offspring - 1)
        return n

    def snapshot(self, at) -> Snapshot:
        k = int(np.argmin(np.abs(self.checkpoints - at)))
        if not math.isclose(self.checkpoints[k], at, rel_tol=1e-12, abs_tol=1e-15):
            raise InvalidArgument(f"{at} is not a recorded checkpoint")
        return self.snapshots[k]


def _normalise_checkpoints(spec: BranchingSpec, checkpoints) -> np.ndarray:
    cps = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    if cps.size == 0 or np.any(np.diff(cps) <= 0):
        raise InvalidArgument("checkpoints must be non-empty and strictly increasing")
    if cps[0] <= 0 or cps[-1] > spec.horizon * (1 + 1e-12):
        raise InvalidArgument("checkpoints must lie in (0, horizon]")
    return cps


class _Pruned(Exception):
    pass


def simulate_tree(start, spec: BranchingSpec, time_checkpoints, stream: RngStream,
                  record_paths: bool = False, max_restarts: int = 10**6) -> ParticleTree:
    """One replicate of the branching system, observed at ``time_checkpoints``.

    A population above ``spec.prune_limit`` discards the replicate and
    restarts it from ``stream.child(attempt)``; ``tree.restarts`` counts
    how many times that happened.
    """
    start = np.atleast_1d(np.asarray(start, dtype=float))
    cps = _normalise_checkpoints(spec, time_checkpoints)
    if spec.domain is not None and not spec.domain.contains(start):
        raise InvalidArgument(f"start point {start} is not interior")
    for attempt in range(max_restarts):
        try:
            tree = _grow(start, spec, cps, stream.child(attempt), record_paths)
        except _Pruned:
            continue
        tree.restarts = attempt
        tree.key = stream.child(attempt).key
        return tree
    raise AssumptionViolation(f"every one of {max_restarts} attempts exceeded the prune limit")


# Brownian-bridge boundary detection for plain Brownian particles
BRIDGE_MIN_FRACTION = 1e-4  # finest bridge interval, as a fraction of the horizon


def _crossing_probability(dom: BoxDomain, a, b, var):
    """Per-particle probability that the Brownian bridge ``a -> b`` (variance
    rate ``var`` over the interval) leaves the box; faces treated as
    independent barriers, certain when an end point is outside."""
    lo, hi = dom.lo_array, dom.hi_array
    p_lo = np.exp(-2.0 * np.maximum(a - lo, 0.0) * np.maximum(b - lo, 0.0) / var)
    p_hi = np.exp(-2.0 * np.maximum(hi - a, 0.0) * np.maximum(hi - b, 0.0) / var)
    return 1.0 - np.prod(1.0 - p_lo, axis=-1) * np.prod(1.0 - p_hi, axis=-1)


def _likeliest_face(dom: BoxDomain, a, b) -> int:
    lo, hi = dom.lo_array, dom.hi_array
    score = np.empty(2 * dom.dim)
    score[0::2] = -np.maximum(a - lo, 0.0) * np.maximum(b - lo, 0.0)
    score[1::2] = -np.maximum(hi - a, 0.0) * np.maximum(hi - b, 0.0)
    return int(np.argmax(score))


def _draw_accepted(propose, accept_prob, gen, what: str, limit: int = 10**8):
    """Rejection sampling: ``(candidates, j)`` where ``candidates[j]`` is the
    first proposal accepted with probability ``accept_prob``.

    Batches double in size, so rare acceptance costs O(1 / rate) proposals
    without a per-proposal Python loop.
    """
    batch, used = 8, 0
    while used < limit:
        cands = propose(batch)
        ok = np.nonzero(gen.random(batch) < accept_prob(cands))[0]
        if ok.size:
            return cands, int(ok[0])
        used += batch
        batch = min(2 * batch, 1 << 20)
    raise DivergenceError(f"rejection sampler for {what} failed after {used} proposals")


def _first_passage(dom: BoxDomain, a, b, ta, tb, sigma, gen, h_min):
    """First exit time of a Brownian bridge ``a -> b`` known to leave the box.

    Bisection: each midpoint is drawn from the bridge conditioned on a
    crossing in ``[ta, tb]``; the crossing is then placed in the left half
    with its conditional probability.  Returns ``(time, face, point)`` with
    the time resolved to ``h_min`` and the bridge point there.
    """
    s2 = sigma * sigma
    while tb - ta > h_min:
        h = tb - ta
        tm = 0.5 * (ta + tb)
        centre, sd = 0.5 * (a + b), sigma * math.sqrt(0.25 * h)

        def propose(k):
            return centre + sd * gen.standard_normal((k, a.size))

        def union(m):
            return 1.0 - ((1.0 - _crossing_probability(dom, a, m, 0.5 * s2 * h))
                          * (1.0 - _crossing_probability(dom, m, b, 0.5 * s2 * h)))

        cands, j = _draw_accepted(propose, union, gen, "a crossing bridge midpoint")
        mid = cands[j]
        left = _crossing_probability(dom, a, mid, 0.5 * s2 * h)
        right = _crossing_probability(dom, mid, b, 0.5 * s2 * h)
        if gen.random() * (1.0 - (1.0 - left) * (1.0 - right)) < left:
            b, tb = mid, tm
        else:
            a, ta = mid, tm
    return tb, _likeliest_face(dom, a, b), b


def _surviving_position(dom: BoxDomain, a, h, sigma, gen):
    """Position after time ``h`` of Brownian motion from ``a`` that stayed inside."""
    sd = sigma * math.sqrt(h)

    def propose(k):
        return a + sd * gen.standard_normal((k, a.size))

    def survives(m):
        return 1.0 - _crossing_probability(dom, a, m, sigma * sigma * h)

    cands, j = _draw_accepted(propose, survives, gen, "a surviving position")
    return cands[j]


def _bridge_first_hit(dom: BoxDomain, a, b, t0, t1, sigma, gen, h_min):
    """Earliest exit among independent Brownian bridges ``a -> b``.

    Returns ``(positions at the exit time, hit_rows, hit_faces, time)`` or
    ``None`` when no bridge left the box.
    """
    h = t1 - t0
    reach = 8.0 * sigma * math.sqrt(h)
    if (np.all(np.minimum(a.min(axis=0), b.min(axis=0)) - dom.lo_array > reach)
            and np.all(dom.hi_array - np.maximum(a.max(axis=0), b.max(axis=0)) > reach)):
        return None
    prob = _crossing_probability(dom, a, b, sigma * sigma * h)
    crossed = np.nonzero(gen.random(prob.size) < prob)[0]
    if crossed.size == 0:
        return None
    passages = [_first_passage(dom, a[i], b[i], t0, t1, sigma, gen, h_min) for i in crossed]
    k = int(np.argmin([tp for tp, _, _ in passages]))
    who, (t_hit, face, point) = int(crossed[k]), passages[k]
    pos = np.empty_like(a)
    for j in range(a.shape[0]):
        if j != who:
            pos[j] = _surviving_position(dom, a[j], t_hit - t0, sigma, gen)
    pos[who] = project_to_face(dom, point[None, :], np.array([face]))[0]
    return pos, np.array([who]), np.array([face]), t_hit


def _advance(pos, t0, t1, spec: BranchingSpec, gen):
    """Diffuse ``pos`` from ``t0`` to ``t1``.

    Returns ``(pos, hit_rows, hit_faces, hit_time)``; on a boundary hit the
    advance stops there and ``pos`` holds every particle at ``hit_time``.
    Plain Brownian particles are checked with Brownian-bridge refinement
    (hit time resolved to ``BRIDGE_MIN_FRACTION * horizon``); drifted or
    state-dependent ones use Euler sub-steps of ``spec.step`` with a
    post-step test.
    """
    span = t1 - t0
    dom = spec.domain
    coeffs = spec.coeffs
    plain = coeffs.drift is None and np.ndim(coeffs.sigma) == 0 and not callable(coeffs.sigma)
    n_sub = 1 if not math.isfinite(spec.step) else max(1, math.ceil(span / spec.step - 1e-12))
    h = span / n_sub
    t = t0
    for j in range(n_sub):
        t_next = t1 if j == n_sub - 1 else t0 + (j + 1) * h
        hh = t_next - t
        if plain:
            new = pos + (coeffs.sigma * math.sqrt(hh)) * gen.standard_normal(pos.shape)
            if dom is not None:
                found = _bridge_first_hit(dom, pos, new, t, t_next, float(coeffs.sigma), gen,
                                          BRIDGE_MIN_FRACTION * spec.horizon)
                if found is not None:
                    return found
            pos = new
        else:
            dW = math.sqrt(hh) * gen.standard_normal(pos.shape)
            s = spec.horizon - t
            pos = pos + coeffs.b(pos, s) * hh + coeffs.diffuse(pos, s, dW)
            if dom is not None and ((pos.min(axis=0) <= dom.lo_array).any()
                                    or (pos.max(axis=0) >= dom.hi_array).any()):
                face, _ = violated_faces(dom, pos)
                hit = np.nonzero(face >= 0)[0]
                if hit.size:
                    return pos, hit, face[hit], t_next
        t = t_next
    return pos, np.empty(0, dtype=int), np.empty(0, dtype=int), t1


def _grow(start, spec: BranchingSpec, cps, stream: RngStream, record_paths: bool) -> ParticleTree:
    gen = stream.generator()
    cq = np.cumsum(spec.q)
    top = cq.size - 1
    c = spec.intensity
    particles = [Particle(0, -1, 0.0, start.copy())]
    ids = [0]
    pos = start[None, :].copy()
    if record_paths:
        particles[0].trajectory.append((0.0, start.copy()))
    events = []
    snaps = []
    t = 0.0
    k = 0
    n_cp = cps.size
    while k < n_cp:
        n_alive = len(ids)
        if n_alive == 0:
            empty = np.empty((0, start.size))
            while k < n_cp:
                snaps.append(Snapshot(float(cps[k]), np.empty(0, dtype=int), empty))
                k += 1
            break
        tc = gen.exponential(1.0 / (c * n_alive))
        target = cps[k]
        branch = t + tc < target
        if branch:
            target = t + tc
        pos, hit, faces, t_reached = _advance(pos, t, target, spec, gen)
        t = t_reached
        if record_paths:
            for j, pid in enumerate(ids):
                particles[pid].trajectory.append((t, pos[j].copy()))
        if hit.size:
            proj = project_to_face(spec.domain, pos[hit], faces)
            for j, row in enumerate(hit):
                p = particles[ids[row]]
                p.status = ParticleStatus.HIT_BOUNDARY
                p.end_time = t
                p.end_position = proj[j]
            keep = np.ones(len(ids), dtype=bool)
            keep[hit] = False
            ids = [pid for pid, kp in zip(ids, keep) if kp]
            pos = pos[keep]
            if t < cps[k]:
                # clock is memoryless: redraw with the new population
                continue
            branch = False
        if branch:
            j = int(gen.integers(len(ids)))
            n_off = min(int(np.searchsorted(cq, gen.random(), side="right")), top)
            parent = particles[ids[j]]
            here = pos[j].copy()
            parent.status = ParticleStatus.BRANCHED if n_off else ParticleStatus.DEAD
            parent.end_time = t
            parent.end_position = here
            events.append(BranchEvent(t, parent.id, n_off, here))
            new_ids = []
            for _ in range(n_off):
                pid = len(particles)
                child = Particle(pid, parent.id, t, here)
                if record_paths:
                    child.trajectory.append((t, here.copy()))
                particles.append(child)
                new_ids.append(pid)
            ids = ids[:j] + ids[j + 1:] + new_ids
            pos = np.concatenate([np.delete(pos, j, axis=0),
                                  np.broadcast_to(here, (n_off, here.size))])
            if len(ids) > spec.prune_limit:
                raise _Pruned
        else:
            snaps.append(Snapshot(float(cps[k]), np.asarray(ids, dtype=int), pos.copy()))
            k += 1
    for j, pid in enumerate(ids):
        particles[pid].end_time = t
        particles[pid].end_position = pos[j].copy()
    return ParticleTree(particles, events, snaps, cps)


def score_tree(tree: ParticleTree, spec: BranchingSpec, at: float,
               assumptions: Optional["AssumptionReport"] = None) -> float:
    """Product estimator at checkpoint ``at``.

    Marked (non-classical) specs are refused when the assumption check
    fails; pass a precomputed ``assumptions`` report to skip re-checking.
    """
    snap = tree.snapshot(at)
    k = tree.snapshots.index(snap)
    return float(score_tree_checkpoints(tree, spec, assumptions, [k])[0])


def score_tree_checkpoints(tree: ParticleTree, spec: BranchingSpec,
                           assumptions: Optional["AssumptionReport"] = None,
                           which: Optional[Sequence[int]] = None) -> np.ndarray:
    """Scores at the checkpoints indexed by ``which`` (all by default)."""
    if not spec.weights_trivial:
        report = assumptions or check_marked_assumptions(spec)
        if report.case == "violated":
            raise AssumptionViolation(f"marked branching assumptions fail: {report.reason}")
    which = range(len(tree.snapshots)) if which is None else which
    snaps = [tree.snapshots[k] for k in which]
    pos = np.concatenate([sn.positions for sn in snaps])
    vals = np.asarray(spec.terminal(pos), dtype=float).tolist() if pos.shape[0] else []
    hits = [p for p in tree.particles if p.status == ParticleStatus.HIT_BOUNDARY]
    if hits and spec.dirichlet is None:
        raise MissingDatum("a particle hit the boundary but no Dirichlet datum is configured")
    out = np.empty(len(snaps))
    a = 0
    for j, sn in enumerate(snaps):
        b = a + sn.positions.shape[0]
        value = math.prod(vals[a:b])
        a = b
        at = sn.time
        done = [p for p in hits if p.end_time <= at]
        if done:
            pts = np.array([p.end_position for p in done])
            ages = at - np.array([p.end_time for p in done])
            value *= float(np.prod(spec.dirichlet(pts, ages)))
        if not spec.weights_trivial:
            for ev in tree.branch_events:
                if ev.time >= at:
                    break
                value *= spec.weight(ev.offspring, ev.position[None, :], at - ev.time)
        out[j] = value
    return out


@dataclass
class BranchingEstimate:
    checkpoints: np.ndarray
    estimates: list  # PointEstimate per checkpoint
    restarts: int
    elapsed: float
    max_population: int = 0

    def at(self, t) -> PointEstimate:
        k = int(np.argmin(np.abs(self.checkpoints - t)))
        return self.estimates[k]


def tree_scores(start, spec: BranchingSpec, checkpoints, stream: RngStream,
                replicates: Sequence[int], assumptions=None):
    """Scores of replicates ``replicates`` (rows) at every checkpoint (columns)."""
    cps = _normalise_checkpoints(spec, checkpoints)
    if not spec.weights_trivial and assumptions is None:
        assumptions = check_marked_assumptions(spec)
    out = np.empty((len(replicates), cps.size))
    restarts = 0
    biggest = 0
    for row, r in enumerate(replicates):
        tree = simulate_tree(start, spec, cps, stream.child(r))
        restarts += tree.restarts
        biggest = max(biggest, len(tree.particles))
        out[row] = score_tree_checkpoints(tree, spec, assumptions)
    return out, restarts, biggest


def estimate_branching(start, spec: BranchingSpec, checkpoints, n: int, stream: RngStream,
                       workers: int = 1, chunk: int = 1000, target_se: Optional[float] = None,
                       max_samples: Optional[int] = None) -> BranchingEstimate:
    """Mean and standard error of ``n`` tree scores at each checkpoint.

    Replicate ``r`` always uses ``stream.child(r)``, so the result does not
    depend on ``workers`` or ``chunk``.
    """
    if n < 2:
        raise InvalidArgument("need at least two replicates")
    t0 = time.perf_counter()
    cps = _normalise_checkpoints(spec, checkpoints)
    report = None if spec.weights_trivial else check_marked_assumptions(spec)
    if report is not None and report.case == "violated":
        raise AssumptionViolation(f"marked branching assumptions fail: {report.reason}")

    def run(lo_hi):
        return tree_scores(start, spec, cps, stream, range(*lo_hi), report)

    def batch(first, count):
        chunks = [(a, min(a + chunk, first + count)) for a in range(first, first + count, chunk)]
        if workers <= 1:
            parts = [run(cv) for cv in chunks]
        else:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(run, chunks))
        return (np.concatenate([p[0] for p in parts]), sum(p[1] for p in parts),
                max(p[2] for p in parts))

    scores, restarts, biggest = batch(0, n)
    cap = max_samples or 100 * n

    def summarise(s):
        return [PointEstimate.from_scores(s[:, j]) for j in range(cps.size)]

    ests = summarise(scores)
    while (target_se is not None and max(e.std_error for e in ests) > target_se
           and scores.shape[0] < cap):
        more, r2, b2 = batch(scores.shape[0], n)
        scores = np.concatenate([scores, more])
        restarts += r2
        biggest = max(biggest, b2)
        ests = summarise(scores)
    elapsed = time.perf_counter() - t0
    ests = [PointEstimate(e.value, e.std_error, e.n_samples, elapsed) for e in ests]
    return BranchingEstimate(cps, ests, restarts, elapsed, biggest)


# -- marked-branching admissibility -------------------------------------------------

@dataclass(frozen=True)
class AssumptionReport:
    radius: float
    l_at_1: float
    case: str  # "i" | "ii" | "iii" | "violated"
    horizon_bound: float
    psi_norm: float
    root: Optional[float] = None
    reason: str = ""

    @property
    def admissible(self) -> bool:
        return self.case != "violated"


def _alpha_norms(spec: BranchingSpec) -> np.ndarray:
    if spec.alpha_norms is not None:
        return np.abs(np.asarray(spec.alpha_norms, dtype=float))
    out = []
    for a in spec.alpha:
        if callable(a):
            raise InvalidArgument("callable alpha needs alpha_norms (sup-norms) on the spec")
        out.append(abs(float(a)))
    return np.asarray(out)


def _psi_norm(spec: BranchingSpec) -> float:
    if spec.psi_norm is not None:
        return float(spec.psi_norm)
    if spec.domain is None:
        raise InvalidArgument("psi_norm is required when the domain is unbounded")
    dom = spec.domain
    axes = [np.linspace(a, b, 201 if dom.dim == 1 else 41) for a, b in zip(dom.lo, dom.hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, dom.dim)
    return float(np.max(np.abs(spec.terminal(pts))))


def l_function(spec: BranchingSpec):
    """``(l0, l)`` with ``l0(s) = sum |alpha_k|_inf s^k`` and
    ``l(s) = c (l0(s |psi|) / |psi| - s)``."""
    norms = _alpha_norms(spec)
    psi = _psi_norm(spec)
    c = spec.intensity

    def l0(s):
        return np.polynomial.polynomial.polyval(s, norms)

    def l(s):
        return c * (l0(s * psi) / psi - s)

    return l0, l


def check_marked_assumptions(spec: BranchingSpec, horizon: Optional[float] = None) -> AssumptionReport:
    """Classify the spec into cases (i)-(iii) of the admissibility condition.

    The power series is a polynomial here, so its radius of convergence is
    infinite.  Case (iii) computes ``T* = int_1^inf ds / l(s)`` and admits
    horizons ``T <= T*`` (equality with a warning).
    """
    horizon = spec.horizon if horizon is None else horizon
    radius = math.inf
    psi = _psi_norm(spec)
    if psi == 0:
        return AssumptionReport(radius, -spec.intensity, "i", math.inf, psi)
    l0, l = l_function(spec)
    if not psi < radius:
        return AssumptionReport(radius, float(l(1.0)), "violated", 0.0, psi,
                                reason="|psi|_inf >= radius of convergence")
    l1 = float(l(1.0))
    if l1 <= 0:
        return AssumptionReport(radius, l1, "i", math.inf, psi)
    root = _first_root_above_one(l)
    if root is not None:
        return AssumptionReport(radius, l1, "ii", math.inf, psi, root=root)
    t_star, _ = quad(lambda s: 1.0 / l(s), 1.0, math.inf, limit=200, epsabs=1e-13, epsrel=1e-12)
    if horizon > t_star * (1 + 1e-12):
        return AssumptionReport(radius, l1, "violated", t_star, psi,
                                reason=f"horizon {horizon} exceeds T* = {t_star:.6g}")
    if math.isclose(horizon, t_star, rel_tol=1e-9):
        warnings.warn("horizon equals T*: admitted at the edge of case (iii)")
    return AssumptionReport(radius, l1, "iii", t_star, psi)


def _first_root_above_one(l) -> Optional[float]:
    """Smallest ``s > 1`` with ``l(s) = 0`` when ``l`` is a polynomial positive at 1."""
    s_hi = 1.0
    for _ in range(200):
        grid = np.linspace(s_hi, 2.0 * s_hi + 1.0, 401)
        vals = l(grid)
        neg = np.nonzero(vals <= 0)[0]
        if neg.size:
            j = int(neg[0])
            if vals[j] == 0:
                return float(grid[j])
            return float(brentq(l, grid[j - 1], grid[j]))
        if np.all(np.diff(vals) > 0) and vals[-1] > 1e6:
            return None
        s_hi = grid[-1]
    return None


# -- polynomial surrogate of max(v, 0) ------------------------------------------------

@dataclass(frozen=True)
class PolynomialFit:
    coefficients: tuple
    fit_interval: tuple = (-1.0, 1.0)
    max_abs_residual: float = 0.0

    def __call__(self, v):
        return np.polynomial.polynomial.polyval(v, self.coefficients)


def fit_positive_part(degree: int = 4) -> PolynomialFit:
    """Continuous least-squares fit of ``max(v, 0)`` on ``[-1, 1]`` in monomials.

    Normal equations: ``sum_j a_j int v^(i+j) dv = int_0^1 v^(i+1) dv``.
    """
    if degree < 0:
        raise InvalidArgument("degree must be non-negative")
    # max(v, 0) = v/2 + |v|/2: the odd part is represented exactly, only the
    # even block of the normal equations needs solving
    coef = np.zeros(degree + 1)
    if degree >= 1:
        coef[1] = 0.5
    k = np.arange(0, degree + 1, 2)
    gram = 2.0 / (k[:, None] + k[None, :] + 1.0)
    rhs = 1.0 / (k + 2.0)
    coef[k] = np.linalg.solve(gram, rhs)
    v = np.linspace(-1.0, 1.0, 20001)
    resid = float(np.max(np.abs(np.polynomial.polynomial.polyval(v, coef) - np.maximum(v, 0.0))))
    return PolynomialFit(tuple(float(a) for a in coef), (-1.0, 1.0), resid)
