"""Domain types and geometry primitives shared by all modules.

Positions live in R^d (d = 2 for the segment model), marks are either
neighbor ranks (1..K) or axis-unit growth directions.  Boxes are half-open
products [c - s/2, c + s/2)^d so that lattice translates tile the plane
without overlap and every point belongs to exactly one site box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import GenericityError, ValidationError

# Mark kinds
RANK = "rank"
DIRECTION = "direction"
NONE = "none"

# Direction codes -> unit vectors (d = 2).  Order matters for file formats.
DIRECTION_VECTORS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
DIRECTION_TOKENS = ("+e1", "-e1", "+e2", "-e2")

# Rotation by +pi/2 maps +e1 -> +e2 -> -e1 -> -e2 -> +e1.
ROT_CCW = {0: 2, 2: 1, 1: 3, 3: 0}

DEFAULT_EPS = 1e-12


def direction_code(vec) -> int:
    """Map an exact axis unit vector to its mark code."""
    for code, v in enumerate(DIRECTION_VECTORS):
        if vec[0] == v[0] and vec[1] == v[1]:
            return code
    raise ValidationError(f"not an axis unit vector: {vec!r}")


@dataclass(frozen=True)
class BoxRegion:
    """Half-open box [center - side/2, center + side/2)^d."""

    center: tuple
    side: float

    def __post_init__(self):
        if not self.side > 0:
            raise ValidationError(f"box side must be positive, got {self.side}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.center) - self.side / 2.0

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.center) + self.side / 2.0

    @property
    def volume(self) -> float:
        return float(self.side ** self.dim)

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized half-open membership test; accepts (n, d) or (d,)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = np.all((pts >= self.lo) & (pts < self.hi), axis=1)
        return inside if np.asarray(points).ndim > 1 else bool(inside[0])

    def hull(self, other: "BoxRegion") -> "BoxRegion":
        """Smallest box (centered between them) covering both boxes."""
        lo = np.minimum(self.lo, other.lo)
        hi = np.maximum(self.hi, other.hi)
        side = float(np.max(hi - lo))
        center = (lo + hi) / 2.0
        return BoxRegion(tuple(center), side)


def centered_box(side: float, dim: int = 2, center=None) -> BoxRegion:
    """Q_side(center), centered at the origin by default."""
    if center is None:
        center = (0.0,) * dim
    return BoxRegion(tuple(center), float(side))


def subcube_partition(box: BoxRegion, parts_per_axis: int) -> list[BoxRegion]:
    """Split a box into parts_per_axis**d congruent half-open subcubes."""
    if parts_per_axis < 1:
        raise ValidationError("parts_per_axis must be >= 1")
    k = int(parts_per_axis)
    sub = box.side / k
    lo = box.lo
    d = box.dim
    out = []
    for idx in np.ndindex(*([k] * d)):
        center = tuple(lo[a] + (idx[a] + 0.5) * sub for a in range(d))
        out.append(BoxRegion(center, sub))
    return out


@dataclass(frozen=True)
class MarkedPoint:
    """Single point view: position tuple, mark, stable index in its configuration."""

    id: int
    position: tuple
    mark: int
    mark_kind: str = NONE

    @property
    def direction(self) -> np.ndarray:
        if self.mark_kind != DIRECTION:
            raise ValidationError("point carries no direction mark")
        return DIRECTION_VECTORS[self.mark]


@dataclass(frozen=True)
class MarkedConfiguration:
    """Finite marked point set with its sampling window.

    positions: (n, d) float array; marks: (n,) int array whose meaning is
    given by mark_kind ('rank' 1..K, 'direction' codes 0..3, or 'none').
    Points are immutable after construction.
    """

    positions: np.ndarray
    marks: np.ndarray
    mark_kind: str
    window: BoxRegion
    genericity_tolerance: float = DEFAULT_EPS

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float, copy=True)
        if pos.ndim != 2 and pos.size == 0:
            pos = pos.reshape(0, self.window.dim)
        if pos.ndim != 2:
            raise ValidationError("positions must be an (n, d) array")
        if not np.all(np.isfinite(pos)):
            raise ValidationError("positions must be finite")
        marks = np.array(self.marks, dtype=np.int64, copy=True)
        if marks.shape != (pos.shape[0],):
            raise ValidationError("marks must be one per point")
        if self.mark_kind not in (RANK, DIRECTION, NONE):
            raise ValidationError(f"unknown mark kind {self.mark_kind!r}")
        if self.mark_kind == DIRECTION and marks.size and (
            marks.min() < 0 or marks.max() > 3
        ):
            raise ValidationError("direction marks must be codes 0..3")
        if self.mark_kind == RANK and marks.size and marks.min() < 1:
            raise ValidationError("rank marks must be >= 1")
        if pos.shape[0] and pos.shape[1] != self.window.dim:
            raise ValidationError("point dimension does not match window")
        pos.setflags(write=False)
        marks.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "marks", marks)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.window.dim

    def point(self, i: int) -> MarkedPoint:
        return MarkedPoint(
            id=int(i),
            position=tuple(self.positions[i]),
            mark=int(self.marks[i]),
            mark_kind=self.mark_kind,
        )

    def points(self) -> Iterable[MarkedPoint]:
        return (self.point(i) for i in range(self.n))

    def direction_vectors(self) -> np.ndarray:
        if self.mark_kind != DIRECTION:
            raise ValidationError("configuration carries no direction marks")
        return DIRECTION_VECTORS[self.marks]

    def restrict(self, box: BoxRegion) -> "MarkedConfiguration":
        """Points inside the half-open box, renumbered 0..m-1."""
        mask = box.contains(self.positions) if self.n else np.zeros(0, bool)
        return MarkedConfiguration(
            self.positions[mask],
            self.marks[mask],
            self.mark_kind,
            box,
            self.genericity_tolerance,
        )

    def restrict_mask(self, box: BoxRegion) -> np.ndarray:
        return box.contains(self.positions) if self.n else np.zeros(0, bool)

    def union(self, other: "MarkedConfiguration") -> "MarkedConfiguration":
        if other.n == 0:
            return self
        if self.n == 0:
            return other
        if self.mark_kind != other.mark_kind:
            raise ValidationError("cannot union configurations of different mark kinds")
        return MarkedConfiguration(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.marks, other.marks]),
            self.mark_kind,
            self.window.hull(other.window),
            min(self.genericity_tolerance, other.genericity_tolerance),
        )

    def key_set(self) -> set:
        """Hashable (position..., mark) keys, for identity across configurations."""
        return {
            (*map(float, self.positions[i]), int(self.marks[i])) for i in range(self.n)
        }


def empty_configuration(window: BoxRegion, mark_kind: str = NONE) -> MarkedConfiguration:
    return MarkedConfiguration(
        np.zeros((0, window.dim)), np.zeros(0, dtype=np.int64), mark_kind, window
    )


def translate(config: MarkedConfiguration, eta) -> MarkedConfiguration:
    """Shift every position by eta; marks and ids are preserved."""
    eta = np.asarray(eta, dtype=float)
    window = BoxRegion(
        tuple(np.asarray(config.window.center) + eta), config.window.side
    )
    return MarkedConfiguration(
        config.positions + eta,
        config.marks,
        config.mark_kind,
        window,
        config.genericity_tolerance,
    )


def site_of(points: np.ndarray, s: float) -> np.ndarray:
    """Lattice site z with point in Q_s(s z), per half-open convention."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return np.floor(pts / s + 0.5).astype(np.int64)


def _sorted_gap_ok(values: np.ndarray, tol: float) -> bool:
    """True when consecutive sorted values differ by more than tol."""
    if values.size < 2:
        return True
    v = np.sort(values)
    return bool(np.min(np.diff(v)) > tol)


def check_generic_knn(config: MarkedConfiguration, eps: float = None, k_min: int = 2) -> bool:
    """All pairwise inter-point distances distinct (relative gap > eps).

    Finite-sample stand-in for the admissible-input family of the
    nearest-neighbor walk: requires at least k_min points and strictly
    separated sorted pairwise distances.  O(n^2) distances, sorted scan.
    """
    if eps is None:
        eps = config.genericity_tolerance
    n = config.n
    if n < k_min:
        return False
    pos = config.positions
    diff = pos[:, None, :] - pos[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    iu = np.triu_indices(n, k=1)
    dists = np.sqrt(d2[iu])
    scale = max(float(dists.max()), 1.0)
    return _sorted_gap_ok(dists, eps * scale)


def check_generic_lily(config: MarkedConfiguration, eps: float = None) -> bool:
    """No two points axis-aligned or exactly diagonal within tolerance.

    A pair is axis-aligned iff it shares a coordinate and diagonal iff
    x+y or x-y coincide, so four sorted-gap scans over {x, y, x+y, x-y}
    decide the predicate in O(n log n).  The tolerance is eps times the
    coordinate span, a conservative proxy for the angular condition.
    """
    if eps is None:
        eps = config.genericity_tolerance
    if config.dim != 2:
        raise ValidationError("segment-model genericity is defined for d = 2")
    n = config.n
    if n < 2:
        return True
    x = config.positions[:, 0]
    y = config.positions[:, 1]
    span = max(float(np.ptp(x)), float(np.ptp(y)), 1.0)
    tol = eps * span
    return (
        _sorted_gap_ok(x, tol)
        and _sorted_gap_ok(y, tol)
        and _sorted_gap_ok(x + y, tol)
        and _sorted_gap_ok(x - y, tol)
    )


def check_generic_lily_pairwise(config: MarkedConfiguration, eps: float = None) -> bool:
    """O(n^2) per-pair version of check_generic_lily (test oracle).

    A pair points along a forbidden direction iff dx = 0, dy = 0,
    dx = dy or dx = -dy; each is tested with the same span-scaled
    tolerance the sorted scans use.
    """
    if eps is None:
        eps = config.genericity_tolerance
    n = config.n
    if n < 2:
        return True
    pos = config.positions
    span = max(float(np.ptp(pos[:, 0])), float(np.ptp(pos[:, 1])), 1.0)
    tol = eps * span
    for i in range(n):
        for j in range(i + 1, n):
            dx = pos[j, 0] - pos[i, 0]
            dy = pos[j, 1] - pos[i, 1]
            if (
                abs(dx) <= tol
                or abs(dy) <= tol
                or abs(dx - dy) <= tol
                or abs(dx + dy) <= tol
            ):
                return False
    return True


def require_generic_lily(config: MarkedConfiguration, eps: float = None) -> None:
    if config.n == 0:
        raise GenericityError("empty configuration is not an admissible input")
    if not check_generic_lily(config, eps):
        raise GenericityError("configuration has an axis-aligned or diagonal pair")
