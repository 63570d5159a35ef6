"""Core geometric types and measure estimators.

Open balls, constant-slope height functions ("planes"), scalar fields over
ball domains, and the measure estimates every audit consumes.  Dimension
conventions: base points live in R^n, lifted points in R^(n+1); the cross
section weight of a lifted ball is the volume of its n-dimensional shadow.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .sampling import SamplingBudget, stratified_ball_mean, substream


def unit_ball_volume(n: int) -> float:
    """Volume of the unit ball in R^n: pi^(n/2) / Gamma(n/2 + 1)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def _as_point(p) -> np.ndarray:
    arr = np.array(p, dtype=float)
    if arr.ndim != 1:
        raise ValueError("point must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Ball:
    """Open ball with positive radius."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _as_point(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive and finite, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.center.size

    def volume(self) -> float:
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Open-interior membership for an (m, dim) array of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d2 = ((pts - self.center) ** 2).sum(axis=1)
        return d2 < self.radius**2

    def __eq__(self, other) -> bool:
        return (isinstance(other, Ball)
                and self.radius == other.radius
                and np.array_equal(self.center, other.center))

    def __hash__(self) -> int:
        return hash((tuple(self.center), self.radius))

    def __repr__(self) -> str:
        return f"Ball(center={tuple(self.center)}, radius={self.radius})"


def enlarge(b: Ball, factor: float) -> Ball:
    """Concentric enlargement; shrinking is rejected."""
    if factor < 1.0:
        raise ValueError(f"enlargement factor must be >= 1, got {factor}")
    return Ball(b.center, b.radius * factor)


def cross_section_area(b: Ball, n: int) -> float:
    """n-dimensional content carried by a lifted ball: omega_n * radius^n."""
    if n < 3:
        raise ValueError("cross sections are defined for base dimension n >= 3")
    if not b.radius > 0:
        raise ValueError("ball radius must be positive")
    return unit_ball_volume(n) * b.radius**n


@dataclass(frozen=True, eq=False)
class AffinePlane:
    """Constant-slope height function a(x) = offset + <gradient, x - anchor>.

    Embeds into R^(n+1) as x |-> (x, a(x)).  The anchor fixes where the
    offset is read; the construction anchors at the window centre.
    """

    index: int
    gradient: np.ndarray
    offset: float
    anchor: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "gradient", _as_point(self.gradient))
        object.__setattr__(self, "anchor", _as_point(self.anchor))
        if self.gradient.size != self.anchor.size:
            raise ValueError("gradient and anchor dimensions differ")
        if self.index < 1:
            raise ValueError("plane index is 1-based")

    @property
    def dim(self) -> int:
        return self.gradient.size

    @property
    def slope(self) -> float:
        return float(np.linalg.norm(self.gradient))

    def heights(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.offset + (pts - self.anchor) @ self.gradient

    def embed(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.hstack([pts, self.heights(pts)[:, None]])


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Scalar field over a ball domain with a certified gradient bound.

    ``fn`` maps an (m, n) array to (m,) values.  ``grad_fn`` is optional;
    absent, gradients fall back to centred finite differences with step
    ``fd_step`` (default 1e-5 times the domain radius).
    """

    domain: Ball
    fn: Callable[[np.ndarray], np.ndarray]
    grad_bound: float
    grad_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    fd_step: Optional[float] = None
    label: str = "field"

    def __post_init__(self) -> None:
        if not (self.grad_bound >= 0 and math.isfinite(self.grad_bound)):
            raise ValueError("grad_bound must be finite and >= 0")

    @property
    def step(self) -> float:
        return self.fd_step if self.fd_step is not None else 1e-5 * self.domain.radius

    def values(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.asarray(self.fn(pts), dtype=float)
        if out.shape != (pts.shape[0],):
            raise ValueError(f"field {self.label!r} returned shape {out.shape}")
        return out

    def gradients(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.grad_fn is not None:
            out = np.asarray(self.grad_fn(pts), dtype=float)
            if out.shape != pts.shape:
                raise ValueError(f"grad of {self.label!r} returned shape {out.shape}")
            return out
        h = self.step
        n = pts.shape[1]
        grads = np.empty_like(pts)
        for i in range(n):
            shift = np.zeros(n)
            shift[i] = h
            grads[:, i] = (self.values(pts + shift) - self.values(pts - shift)) / (2 * h)
        return grads


@dataclass(frozen=True)
class MeasureEstimate:
    """A measured value with a 99% confidence half-width."""

    value: float
    half_width: float
    method: str
    sample_count: int = 0

    def __post_init__(self) -> None:
        if self.value < 0 or self.half_width < 0:
            raise ValueError("estimate and half-width must be >= 0")
        if self.method not in ("exact", "monte_carlo", "grid"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.method == "exact" and self.half_width != 0:
            raise ValueError("exact estimates carry zero half-width")

    def lower(self) -> float:
        return max(0.0, self.value - self.half_width)

    def upper(self) -> float:
        return self.value + self.half_width


# ---------------------------------------------------------------------------
# union measure
# ---------------------------------------------------------------------------

_EXACT_PAIRWISE_CAP = 4096  # above this, skip the O(N^2) disjointness proof


def _dedupe(balls: Sequence[Ball]) -> list[Ball]:
    seen = set()
    out = []
    for b in balls:
        key = (tuple(b.center), b.radius)
        if key not in seen:
            seen.add(key)
            out.append(b)
    return out


def _certify_disjoint_in_region(balls: Sequence[Ball], region: Ball) -> bool:
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    inside = np.linalg.norm(centers - region.center, axis=1) + radii <= region.radius
    if not inside.all():
        return False
    if len(balls) > _EXACT_PAIRWISE_CAP:
        return False
    diff = centers[:, None, :] - centers[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=2))
    need = radii[:, None] + radii[None, :]
    np.fill_diagonal(dist, np.inf)
    return bool((dist >= need).all())


def contains_any(points: np.ndarray, centers: np.ndarray, radii: np.ndarray,
                 block: int = 262144) -> np.ndarray:
    """Open-union membership of points in a family given as arrays.

    Blocked over points so the (m, N) distance table never exceeds ~2e8
    entries at once.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if centers.shape[0] == 0:
        return np.zeros(pts.shape[0], dtype=bool)
    out = np.zeros(pts.shape[0], dtype=bool)
    per = max(1, block // max(1, centers.shape[0]))
    r2 = radii**2
    for start in range(0, pts.shape[0], per):
        chunk = pts[start:start + per]
        d2 = ((chunk[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        out[start:start + per] = (d2 < r2[None, :]).any(axis=1)
    return out


def union_measure(balls: Sequence[Ball], region: Ball,
                  budget: SamplingBudget, seed: int = 0) -> MeasureEstimate:
    """Measure of (union of balls) intersected with an open region ball.

    Exact summation applies when the (deduplicated) family is certified
    pairwise disjoint and contained in the region; otherwise stratified
    sampling over the region with membership tests.
    """
    balls = _dedupe(list(balls))
    if not balls:
        return MeasureEstimate(0.0, 0.0, "exact", 0)
    for b in balls:
        if b.dim != region.dim:
            raise ValueError("ball and region dimensions differ")
    if _certify_disjoint_in_region(balls, region):
        total = sum(b.volume() for b in balls)
        return MeasureEstimate(float(total), 0.0, "exact", 0)
    centers = np.array([b.center for b in balls])
    radii = np.array([b.radius for b in balls])
    mean, hw, count = stratified_ball_mean(
        lambda pts: contains_any(pts, centers, radii).astype(float),
        region.center, region.radius, seed, budget, key=("union_measure",))
    vol = region.volume()
    return MeasureEstimate(max(0.0, mean * vol), hw * vol, "monte_carlo", count)


def complement_measure(balls: Sequence[Ball], region: Ball,
                       budget: SamplingBudget, seed: int = 0) -> MeasureEstimate:
    """Measure of region minus the union, with the same error model."""
    est = union_measure(balls, region, budget, seed)
    vol = region.volume()
    return MeasureEstimate(max(0.0, vol - est.value), est.half_width,
                           est.method, est.sample_count)


# ---------------------------------------------------------------------------
# spatial index
# ---------------------------------------------------------------------------

class BallIndex:
    """Regular-grid membership index over a ball family.

    Balls are grouped into radius octaves; each group keeps its own grid
    with cell size twice the group's largest radius, so a ball's bounding
    box meets at most 2 cells per axis and a point query touches exactly
    one cell per group.
    """

    def __init__(self, centers: np.ndarray, radii: np.ndarray):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        radii = np.asarray(radii, dtype=float)
        if centers.shape[0] != radii.shape[0]:
            raise ValueError("centers and radii length mismatch")
        if (radii <= 0).any():
            raise ValueError("all radii must be positive")
        self.centers = centers
        self.radii = radii
        self.dim = centers.shape[1] if centers.size else 0
        self._groups: list[tuple[float, dict[tuple, np.ndarray]]] = []
        if len(radii) == 0:
            return
        octaves = np.floor(np.log2(radii)).astype(int)
        for octave in np.unique(octaves):
            ids = np.nonzero(octaves == octave)[0]
            cell = 2.0 * float(radii[ids].max())
            table: dict[tuple, list[int]] = {}
            for i in ids:
                lo = np.floor((centers[i] - radii[i]) / cell).astype(int)
                hi = np.floor((centers[i] + radii[i]) / cell).astype(int)
                ranges = [range(a, b + 1) for a, b in zip(lo, hi)]
                for key in _product(ranges):
                    table.setdefault(key, []).append(int(i))
            frozen = {k: np.array(v, dtype=int) for k, v in table.items()}
            self._groups.append((cell, frozen))

    def __len__(self) -> int:
        return len(self.radii)

    def query(self, point: np.ndarray) -> np.ndarray:
        """Sorted ids of balls whose open interior contains the point."""
        p = np.asarray(point, dtype=float)
        hits: list[np.ndarray] = []
        for cell, table in self._groups:
            key = tuple(np.floor(p / cell).astype(int))
            cand = table.get(key)
            if cand is None:
                continue
            d2 = ((self.centers[cand] - p) ** 2).sum(axis=1)
            hits.append(cand[d2 < self.radii[cand] ** 2])
        if not hits:
            return np.empty(0, dtype=int)
        return np.sort(np.concatenate(hits))

    def query_any(self, points: np.ndarray) -> np.ndarray:
        """Vectorised any-membership for a batch of points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0], dtype=bool)
        for cell, table in self._groups:
            keys = np.floor(pts / cell).astype(int)
            for row in range(pts.shape[0]):
                if out[row]:
                    continue
                cand = table.get(tuple(keys[row]))
                if cand is None:
                    continue
                d2 = ((self.centers[cand] - pts[row]) ** 2).sum(axis=1)
                if (d2 < self.radii[cand] ** 2).any():
                    out[row] = True
        return out


def _product(ranges):
    if not ranges:
        yield ()
        return
    for head in ranges[0]:
        for rest in _product(ranges[1:]):
            yield (head,) + rest


def ball_index_query(index: BallIndex, point: np.ndarray) -> np.ndarray:
    return index.query(point)


def linear_scan_query(centers: np.ndarray, radii: np.ndarray,
                      point: np.ndarray) -> np.ndarray:
    """Reference implementation for index queries."""
    p = np.asarray(point, dtype=float)
    d2 = ((np.atleast_2d(centers) - p) ** 2).sum(axis=1)
    return np.nonzero(d2 < radii**2)[0]


# ---------------------------------------------------------------------------
# finite-dimensional porosity pullback
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PorosityWitness:
    """A hole direction certifying porosity at a point: the ball of the
    given radius at (point + step * direction) misses the set."""

    direction: np.ndarray
    step: float
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "direction", _as_point(self.direction))
        if self.radius <= 0:
            raise ValueError("witness radius must be positive")
        norm = float(np.linalg.norm(self.direction))
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise ValueError("witness direction must be a unit vector")

    def hole_center(self, point: np.ndarray) -> np.ndarray:
        return np.asarray(point, dtype=float) + self.step * self.direction


def pullback_porosity_witness(matrix: np.ndarray, operator_norm: Optional[float],
                              witness: PorosityWitness) -> PorosityWitness:
    """Pull a hole witness back through a surjection onto R^(n+1).

    ``matrix`` maps a higher-dimensional space onto the ambient space of the
    witness; the preimage of the hole under the map contains a ball around
    the pulled-back centre of radius ``witness.radius / operator_norm``.
    """
    mat = np.atleast_2d(np.asarray(matrix, dtype=float))
    ambient, source = mat.shape
    if source <= ambient:
        raise ValueError("matrix must map a strictly higher-dimensional space")
    if witness.direction.size != ambient:
        raise ValueError("witness dimension does not match matrix rows")
    if np.linalg.matrix_rank(mat) < ambient:
        raise ValueError("matrix is not surjective")
    pre = np.linalg.pinv(mat) @ witness.direction
    residual = float(np.linalg.norm(mat @ pre - witness.direction))
    if residual > 1e-9:
        raise ValueError(f"right inverse failed, residual {residual:.2e}")
    if operator_norm is None:
        operator_norm = float(np.linalg.norm(mat, 2))
    if operator_norm <= 0:
        raise ValueError("operator norm must be positive")
    scale = float(np.linalg.norm(pre))
    return PorosityWitness(direction=pre / scale,
                           step=witness.step * scale,
                           radius=witness.radius / operator_norm)
