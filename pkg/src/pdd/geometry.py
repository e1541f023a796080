"""Axis-aligned boxes, strip partitions and interface node grids.

Faces are numbered ``2*i`` (lower face of axis ``i``) and ``2*i + 1``
(upper face).  All geometry objects are frozen after construction.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument


class FaceKind(enum.Enum):
    ABSORBING = "absorbing"
    REFLECTING = "reflecting"


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple
    hi: tuple
    face_kinds: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or not lo:
            raise InvalidArgument("lo and hi must be non-empty and of equal length")
        if any(a >= b for a, b in zip(lo, hi)):
            raise InvalidArgument(f"degenerate box: lo={lo}, hi={hi}")
        kinds = tuple(self.face_kinds) or (FaceKind.ABSORBING,) * (2 * len(lo))
        if len(kinds) != 2 * len(lo):
            raise InvalidArgument("need one face kind per face (2 * dim)")
        kinds = tuple(FaceKind(k) if not isinstance(k, FaceKind) else k for k in kinds)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "face_kinds", kinds)

    @classmethod
    def interval(cls, a, b, left=FaceKind.ABSORBING, right=FaceKind.ABSORBING):
        return cls((a,), (b,), (left, right))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @functools.cached_property
    def lo_array(self) -> np.ndarray:
        return np.asarray(self.lo)

    @functools.cached_property
    def hi_array(self) -> np.ndarray:
        return np.asarray(self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi_array - self.lo_array))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.hi_array - self.lo_array))

    @property
    def has_absorbing_face(self) -> bool:
        return FaceKind.ABSORBING in self.face_kinds

    @property
    def has_reflecting_face(self) -> bool:
        return FaceKind.REFLECTING in self.face_kinds

    def face_kind(self, face_id: int) -> FaceKind:
        return self.face_kinds[face_id]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lo_array) and np.all(x < self.hi_array))


@dataclass(frozen=True)
class BoundaryEvent:
    kind: Optional[FaceKind]
    face_id: int = -1
    hit_point: Optional[np.ndarray] = None


def face_overshoot(domain: BoxDomain, x: np.ndarray) -> np.ndarray:
    """Signed distance past each face, shape ``(..., 2*dim)``; > 0 means outside."""
    x = np.asarray(x, dtype=float)
    below = domain.lo_array - x
    above = x - domain.hi_array
    out = np.empty(x.shape[:-1] + (2 * domain.dim,))
    out[..., 0::2] = below
    out[..., 1::2] = above
    return out


def violated_faces(domain: BoxDomain, x: np.ndarray):
    """Batch boundary test for points ``x`` of shape ``(n, dim)``.

    Returns ``(face, overshoot)``: the face with the largest overshoot
    and its size, ``face == -1`` for strictly interior points.
    """
    over = face_overshoot(domain, x)
    face = np.argmax(over, axis=-1)
    worst = np.take_along_axis(over, face[..., None], axis=-1)[..., 0]
    face = np.where(worst >= 0.0, face, -1)
    return face, worst


def project_to_face(domain: BoxDomain, x: np.ndarray, face: np.ndarray) -> np.ndarray:
    """Project each point onto its face (rows with ``face == -1`` are untouched)."""
    x = np.array(x, dtype=float, copy=True)
    rows = np.nonzero(face >= 0)[0]
    if rows.size:
        axis = face[rows] // 2
        upper = face[rows] % 2 == 1
        x[rows, axis] = np.where(upper, domain.hi_array[axis], domain.lo_array[axis])
        x[rows] = np.clip(x[rows], domain.lo_array, domain.hi_array)
    return x


def classify_point(domain: BoxDomain, x) -> BoundaryEvent:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    face, _ = violated_faces(domain, x[None, :])
    f = int(face[0])
    if f < 0:
        return BoundaryEvent(None)
    hit = project_to_face(domain, x[None, :], face)[0]
    return BoundaryEvent(domain.face_kinds[f], f, hit)


@dataclass(frozen=True)
class Partition:
    parent: BoxDomain
    axis: int
    cut_points: tuple
    subdomains: tuple

    @property
    def count(self) -> int:
        return len(self.subdomains)

    def owner(self, x) -> int:
        """Index of the subdomain holding ``x``; points on a cut go to the lower index."""
        c = float(np.atleast_1d(x)[self.axis])
        return int(np.searchsorted(np.asarray(self.cut_points), c, side="left"))


def partition_box(domain: BoxDomain, axis: int, p: int) -> Partition:
    if p < 1:
        raise InvalidArgument(f"subdomain count must be >= 1, got {p}")
    if not 0 <= axis < domain.dim:
        raise InvalidArgument(f"axis {axis} out of range for a {domain.dim}-d box")
    a, b = domain.lo[axis], domain.hi[axis]
    edges = np.linspace(a, b, p + 1)
    edges[0], edges[-1] = a, b
    cuts = tuple(float(e) for e in edges[1:-1])
    subs = []
    for j in range(p):
        lo = list(domain.lo)
        hi = list(domain.hi)
        lo[axis], hi[axis] = float(edges[j]), float(edges[j + 1])
        kinds = list(domain.face_kinds)
        # artificial interfaces carry Dirichlet data
        if j > 0:
            kinds[2 * axis] = FaceKind.ABSORBING
        if j < p - 1:
            kinds[2 * axis + 1] = FaceKind.ABSORBING
        subs.append(BoxDomain(tuple(lo), tuple(hi), tuple(kinds)))
    return Partition(domain, axis, cuts, tuple(subs))


@dataclass
class InterfaceGrid:
    """Nodes ``(cut_points[k], levels[i])``; ``levels`` are times for
    parabolic problems, transverse coordinates for 2-D elliptic ones."""

    cut_points: np.ndarray
    levels: np.ndarray
    level_kind: str = "time"
    values: Optional[np.ndarray] = None
    std_errors: Optional[np.ndarray] = None
    n_samples: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return (len(self.cut_points), len(self.levels))

    @property
    def nodes(self) -> np.ndarray:
        kk, ll = np.meshgrid(self.cut_points, self.levels, indexing="ij")
        return np.column_stack([kk.ravel(), ll.ravel()])

    @property
    def node_count(self) -> int:
        return len(self.cut_points) * len(self.levels)

    @property
    def complete(self) -> bool:
        return self.values is not None and bool(np.all(np.isfinite(self.values)))

    def with_values(self, values, std_errors=None, n_samples=None) -> "InterfaceGrid":
        return replace(self, values=np.asarray(values, float),
                       std_errors=None if std_errors is None else np.asarray(std_errors, float),
                       n_samples=None if n_samples is None else np.asarray(n_samples))


def _check_levels(levels: np.ndarray):
    if levels.ndim != 1 or levels.size == 0:
        raise InvalidArgument("levels must be a non-empty 1-d sequence")
    if np.any(np.diff(levels) <= 0):
        raise InvalidArgument("levels must be strictly increasing")


def build_interface_grid(partition: Partition, time_levels: Sequence[float]) -> InterfaceGrid:
    levels = np.asarray(time_levels, dtype=float)
    _check_levels(levels)
    if levels[0] != 0.0:
        raise InvalidArgument("time levels must start at 0")
    return InterfaceGrid(np.asarray(partition.cut_points, float), levels, "time")


def build_transverse_grid(partition: Partition, levels: Sequence[float]) -> InterfaceGrid:
    """Interface grid for a 2-D partition: nodes along each cut line."""
    if partition.parent.dim != 2:
        raise InvalidArgument("transverse grids need a 2-d parent box")
    levels = np.asarray(levels, dtype=float)
    _check_levels(levels)
    other = 1 - partition.axis
    lo, hi = partition.parent.lo[other], partition.parent.hi[other]
    if levels[0] < lo or levels[-1] > hi:
        raise InvalidArgument("transverse levels must lie on the cut segment")
    return InterfaceGrid(np.asarray(partition.cut_points, float), levels, "space")
