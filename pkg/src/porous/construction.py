"""Stratified hole-family builder.

Stages pack the window ball with shrinking levels of equal-radius balls,
lift each ball above a scheduled base plane, and expose the resulting
descriptors (per-stage enlarged unions, the union of raw holes, and the
truncated intersection set) as membership predicates.

Coverage bookkeeping uses the projection radius sqrt(L^2 - 4): that is the
base-plane footprint of a lifted hole's L-enlargement, so "covered" during
packing is exactly what the per-stage union will later cover on its plane.
New centers are sampled from uncovered points far from all prior coverage
spheres, which keeps each new E-enlarged ball wholly inside uncovered
territory — the packing and disjointness guarantees follow from that alone.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConstructionFailure, NeedsMoreSamples, ParseError
from .geometry import (AffinePlane, Ball, BallIndex, MeasureEstimate,
                       contains_any, unit_ball_volume)
from .sampling import (SamplingBudget, Z99, sample_shell, stratified_ball_mean,
                       substream)

FORMAT_VERSION = 1
HALF_MARGIN = 0.01          # slack on every "at least half" certification
MAX_HALVINGS = 60


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BuildConfig:
    n: int = 3
    s: float = 0.25
    r: float = 1.0 / 64.0
    L: float = math.sqrt(10.0)
    epsilons: tuple = (0.0025, 0.00125)
    E: float = 1.5
    stop_fractions: tuple = (0.25, 0.125)   # of the window volume
    depth: int = 2
    seed: int = 0
    max_levels: int = 12
    accept_partial: bool = False
    budget: SamplingBudget = SamplingBudget(32, 128)
    pool_size: int = 4096
    config_hash: str = ""

    def __post_init__(self) -> None:
        if self.n < 3:
            raise ValueError("base dimension must be >= 3")
        if not (0 < self.s < 0.5):
            raise ValueError("window radius must satisfy 0 < s < 1/2")
        if not (0 < self.r < 1.0 / 32.0):
            raise ValueError("slope bound must satisfy 0 < r < 1/32")
        if self.L <= 2.0:
            raise ValueError("enlargement L must exceed 2 (lift height)")
        if self.E <= 1.0:
            raise ValueError("packing enlargement E must exceed 1")
        if self.depth < 1:
            raise ValueError("depth must be >= 1")
        if len(self.epsilons) < self.depth:
            raise ValueError("need one epsilon per stage")
        if len(self.stop_fractions) < self.depth:
            raise ValueError("need one stop fraction per stage")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")
        if any(not (0 < f < 1) for f in self.stop_fractions):
            raise ValueError("stop fractions must lie in (0, 1)")
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        object.__setattr__(self, "stop_fractions",
                           tuple(float(f) for f in self.stop_fractions))

    @property
    def window(self) -> Ball:
        return Ball(np.full(self.n, 0.5), self.s)

    @property
    def cover_factor(self) -> float:
        """Base-plane footprint radius of an L-enlarged lifted hole, over t."""
        return math.sqrt(self.L**2 - 4.0)

    def stop_threshold(self, k: int) -> float:
        """Absolute uncovered-measure target for stage k (1-based)."""
        return self.stop_fractions[k - 1] * self.window.volume()

    @property
    def strict_mode(self) -> bool:
        eps = self.epsilons
        if validate_epsilons(eps) != "strict":
            return False
        return all(abs(self.E - 1.0 / e**3) <= 1e-9 / e**3 for e in eps) and \
            all(abs(self.stop_fractions[k - 1] - 2.0 ** -(k + 3)) < 1e-12
                for k in range(1, self.depth + 1))


def footprint_factor(L: float, slope: float) -> float:
    """Guaranteed base-footprint radius, over t, of an L-enlarged lifted hole.

    A base point y sits under the enlargement of the hole over x whenever
    |y-x|^2 + (a(y)-a(x)-2t)^2 <= L^2 t^2.  With |grad a| <= slope the worst
    case is full descent, leaving (1+slope^2) u^2 + 4 slope t u <= (L^2-4) t^2
    for u = |y-x|.  Zero slope recovers sqrt(L^2-4).
    """
    if L <= 2.0:
        raise ValueError("enlargement L must exceed 2 (lift height)")
    if slope < 0:
        raise ValueError("slope bound must be non-negative")
    a = 1.0 + slope**2
    return (-2.0 * slope + math.sqrt(4.0 * slope**2 + (L**2 - 4.0) * a)) / a


def validate_epsilons(eps: Sequence[float]) -> str:
    """"strict" when the sequence prefix meets the small-parameter regime."""
    if len(eps) == 0:
        raise ValueError("epsilon list must be non-empty")
    if any(e <= 0 for e in eps):
        raise ValueError("epsilons must be positive")
    strict = all(e < 2.0 ** -(i + 1) for i, e in enumerate(eps)) \
        and 3.0 * sum(eps) <= 1.0 / 64.0
    return "strict" if strict else "relaxed"


def plane_schedule(k: int) -> int:
    """Diagonal enumeration 1; 1,2; 1,2,3; ... — every index recurs forever."""
    if k < 1:
        raise ValueError("stage index is 1-based")
    b = 1
    while b * (b + 1) // 2 < k:
        b += 1
    return k - b * (b - 1) // 2


def _dyadic_sequence(i: int) -> float:
    """0, 1/2, -1/2, 1/4, 3/4, -1/4, -3/4, 1/8, ... — dense in (-1, 1)."""
    if i == 0:
        return 0.0
    i -= 1
    level = 1
    # level d holds 2^d positive odd numerators (and their negatives)
    while i >= 2 ** level:
        i -= 2 ** level
        level += 1
    sign = 1.0 if i % 2 == 0 else -1.0
    numerator = 2 * (i // 2) + 1
    return sign * numerator / 2.0 ** level


def _unpair(z: int) -> tuple[int, int]:
    w = int((math.isqrt(8 * z + 1) - 1) // 2)
    t = w * (w + 1) // 2
    return z - t, w - (z - t)


def plane_for_index(m: int, n: int, r: float,
                    anchor: Optional[np.ndarray] = None) -> AffinePlane:
    """Deterministic enumeration of reference planes, dense in the limit.

    Index 1 is the zero plane.  Later indices interleave a dyadic offset
    sequence (scaled to |offset| < 1/32) with a dyadic gradient lattice of
    magnitude below r.
    """
    if m < 1:
        raise ValueError("plane index is 1-based")
    if anchor is None:
        anchor = np.full(n, 0.5)
    if m == 1:
        return AffinePlane(index=1, gradient=np.zeros(n), offset=0.0,
                           anchor=anchor)
    i, j = _unpair(m - 2)
    offset = _dyadic_sequence(i) / 32.0
    grad_idx = j
    grad = np.zeros(n)
    for axis in range(n - 1):
        grad_idx, part = _unpair(grad_idx)
        grad[axis] = _dyadic_sequence(part)
    grad[n - 1] = _dyadic_sequence(grad_idx)
    norm = np.linalg.norm(grad)
    if norm > 0:
        # scale the lattice direction to magnitude < r while staying rational
        grad = grad * (r / 2.0)
    return AffinePlane(index=m, gradient=grad, offset=offset, anchor=anchor)


# ---------------------------------------------------------------------------
# stage-local geometry: uncovered region and boundary distances
# ---------------------------------------------------------------------------

@dataclass
class StageSpace:
    """Mutable per-stage view: coverage balls accrue as levels finish.

    Coverage (what the stop rule measures) uses the plane-footprint factor
    sqrt(L^2-4); the far condition measures distance to the spheres of the
    E-enlargements, the objects the packing keeps disjoint.
    """

    window: Ball
    cover_factor: float
    E: float
    centers: np.ndarray = field(
        default_factory=lambda: np.zeros((0, 3)))
    radii: np.ndarray = field(default_factory=lambda: np.zeros(0))  # base t

    def __post_init__(self) -> None:
        self.centers = np.zeros((0, self.window.dim))

    def add_level(self, centers: np.ndarray, t: float) -> None:
        self.centers = np.vstack([self.centers, centers])
        self.radii = np.concatenate([self.radii, np.full(len(centers), t)])

    def covered(self, pts: np.ndarray) -> np.ndarray:
        if len(self.radii) == 0:
            return np.zeros(len(np.atleast_2d(pts)), dtype=bool)
        return contains_any(np.atleast_2d(pts), self.centers,
                            self.cover_factor * self.radii)

    def boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance to the window complement and all enlarged-ball spheres."""
        pts = np.atleast_2d(pts)
        d = self.window.radius - np.linalg.norm(pts - self.window.center,
                                                axis=1)
        if len(self.radii):
            for lo in range(0, len(self.radii), 4096):
                hi = min(lo + 4096, len(self.radii))
                dist = np.linalg.norm(
                    pts[:, None, :] - self.centers[None, lo:hi, :], axis=2)
                sphere = np.abs(dist - self.E * self.radii[lo:hi])
                d = np.minimum(d, sphere.min(axis=1))
        return d

    def sample_uncovered(self, rng: np.random.Generator, count: int,
                         max_batches: int = 400) -> np.ndarray:
        """Uniform points of window-minus-coverage, by rejection."""
        out = []
        have = 0
        for _ in range(max_batches):
            cand = sample_shell(rng, self.window.center, 0.0,
                                self.window.radius, max(count, 1024))
            keep = cand[~self.covered(cand)]
            if len(keep):
                out.append(keep)
                have += len(keep)
            if have >= count:
                return np.vstack(out)[:count]
        raise NeedsMoreSamples(
            f"could not draw {count} uncovered points in {max_batches} "
            f"batches; uncovered region is likely below the stop threshold")

    def uncovered_measure(self, budget: SamplingBudget, seed: int,
                          key: Sequence = ()) -> MeasureEstimate:
        if len(self.radii) == 0:
            return MeasureEstimate(self.window.volume(), 0.0, "exact", 0)
        w = self.window

        def outside(pts: np.ndarray) -> np.ndarray:
            return (~self.covered(pts)).astype(float)

        frac, hw, count = stratified_ball_mean(
            outside, w.center, w.radius, seed, budget,
            key=("uncovered", *key))
        vol = w.volume()
        return MeasureEstimate(frac * vol, hw * vol, "monte_carlo", count)


# ---------------------------------------------------------------------------
# level construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LevelFamily:
    k: int
    level: int
    radius: float
    centers: np.ndarray

    def __len__(self) -> int:
        return len(self.centers)

    def balls(self) -> list[Ball]:
        return [Ball(c, self.radius) for c in self.centers]


def far_fraction(space: StageSpace, pts: np.ndarray, r_new: float,
                 E: float) -> np.ndarray:
    return space.boundary_distance(pts) >= E * r_new


def choose_level_radius(space: StageSpace, r_prev: float, E: float,
                        seed: int, budget: SamplingBudget,
                        key: Sequence = ()) -> tuple[float, float]:
    """Largest halving of r_prev/E whose far condition holds for half the
    uncovered mass; returns (radius, certified far fraction)."""
    r = r_prev / E
    for attempt in range(MAX_HALVINGS):
        rng = substream(seed, "radius", *key, attempt)
        total = budget.total
        for escalation in (1, 4):
            pts = space.sample_uncovered(rng, total * escalation)
            far = far_fraction(space, pts, r, E)
            frac = float(far.mean())
            hw = Z99 * math.sqrt(max(frac * (1 - frac), 1e-12) / len(pts))
            if frac - hw >= 0.5 + HALF_MARGIN:
                return r, frac
            if frac + hw < 0.5 + HALF_MARGIN:
                break  # clearly insufficient; no point escalating
        r /= 2.0
    raise NeedsMoreSamples(
        f"far condition not certifiable after {MAX_HALVINGS} halvings "
        f"(reached r={r:g})")


@dataclass(frozen=True)
class LevelLog:
    k: int
    level: int
    radius: float
    count: int
    far_fraction: float
    pair_cover_fraction: float      # by the 2E enlargements, of uncovered
    ball_fraction: float            # by the balls themselves, of uncovered
    uncovered_after: float
    uncovered_after_hw: float


def _greedy_select(pool: np.ndarray, min_sep: float) -> np.ndarray:
    """Greedy prefix of the pool with pairwise separation >= min_sep."""
    if len(pool) == 0:
        return pool
    dim = pool.shape[1]
    cell = min_sep
    grid: dict[tuple, list[int]] = {}
    chosen: list[int] = []
    min_sep2 = min_sep * min_sep
    for idx in range(len(pool)):
        p = pool[idx]
        key = tuple((p // cell).astype(np.int64))
        ok = True
        for nb in _neighbour_cells(key, dim):
            for j in grid.get(nb, ()):
                d = p - pool[j]
                if float(d @ d) < min_sep2:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            grid.setdefault(key, []).append(idx)
            chosen.append(idx)
    return pool[np.array(chosen, dtype=np.int64)]


def _neighbour_cells(key: tuple, dim: int):
    deltas = [(-1, 0, 1)] * dim
    out = [()]
    for d in deltas:
        out = [t + (dd,) for t in out for dd in d]
    return [tuple(k + dd for k, dd in zip(key, off)) for off in out]


def pack_level(space: StageSpace, k: int, level: int, r_new: float, E: float,
               cfg: BuildConfig, far_frac: float) -> tuple[LevelFamily, LevelLog]:
    """Greedy packing of certified-far uncovered points at separation 2 E r.

    Certifies that the doubled enlargements cover at least half of the
    uncovered region and that the balls themselves cover at least
    (1/(2E))^n / 2 of it.
    """
    floor = (1.0 / (2.0 * E)) ** cfg.n / 2.0
    target = None
    for round_idx in range(4):
        rng = substream(cfg.seed, "pack", k, level, round_idx)
        pool_size = cfg.pool_size * (2 ** round_idx)
        pts = space.sample_uncovered(rng, pool_size)
        pts = pts[far_fraction(space, pts, r_new, E)]
        pts = pts[rng.permutation(len(pts))]
        if target is None:
            centers = _greedy_select(pts, 2.0 * E * r_new)
        else:
            merged = np.vstack([target, pts])
            centers = _greedy_select(merged, 2.0 * E * r_new)
        target = centers

        check_rng = substream(cfg.seed, "pack-check", k, level, round_idx)
        probe = space.sample_uncovered(check_rng, cfg.budget.total)
        pair_cov = contains_any(probe, centers,
                                np.full(len(centers), 2.0 * E * r_new))
        ball_cov = contains_any(probe, centers,
                                np.full(len(centers), r_new))
        pc = float(pair_cov.mean())
        bc = float(ball_cov.mean())
        hw_p = Z99 * math.sqrt(max(pc * (1 - pc), 1e-12) / len(probe))
        hw_b = Z99 * math.sqrt(max(bc * (1 - bc), 1e-12) / len(probe))
        if pc - hw_p >= 0.5 and bc - hw_b >= floor:
            fam = LevelFamily(k=k, level=level, radius=r_new, centers=centers)
            log = LevelLog(k=k, level=level, radius=r_new, count=len(centers),
                           far_fraction=far_frac, pair_cover_fraction=pc,
                           ball_fraction=bc, uncovered_after=math.nan,
                           uncovered_after_hw=math.nan)
            return fam, log
    raise ConstructionFailure(
        f"stage {k} level {level}: could not certify coverage guarantees "
        f"(pair {pc:.3f}, ball {bc:.3f} vs floor {floor:.3e})",
        stage=k, level=level, pair_fraction=pc, ball_fraction=bc)


@dataclass(frozen=True)
class StageResult:
    k: int
    levels: tuple
    stage_radius: float
    uncovered: MeasureEstimate
    target_reached: bool
    logs: tuple


def build_stage(k: int, cfg: BuildConfig, r_prev: float) -> StageResult:
    """Run levels until the uncovered upper confidence bound meets the
    stage target, the level cap intervenes, or certification fails."""
    stage_plane = plane_for_index(plane_schedule(k), cfg.n, cfg.r)
    space = StageSpace(window=cfg.window,
                       cover_factor=footprint_factor(cfg.L, stage_plane.slope),
                       E=cfg.E)
    threshold = cfg.stop_threshold(k)
    levels: list[LevelFamily] = []
    logs: list[LevelLog] = []
    r_level = r_prev
    uncovered = space.uncovered_measure(cfg.budget, cfg.seed,
                                        key=("stage", k, 0))
    for level in range(1, cfg.max_levels + 1):
        if uncovered.upper() <= threshold:
            break
        r_level, far_frac = choose_level_radius(
            space, r_level, cfg.E, cfg.seed, cfg.budget, key=(k, level))
        fam, log = pack_level(space, k, level, r_level, cfg.E, far_frac=far_frac,
                              cfg=cfg)
        space.add_level(fam.centers, r_level)
        uncovered = space.uncovered_measure(cfg.budget, cfg.seed,
                                            key=("stage", k, level))
        logs.append(LevelLog(
            k=log.k, level=log.level, radius=log.radius, count=log.count,
            far_fraction=log.far_fraction,
            pair_cover_fraction=log.pair_cover_fraction,
            ball_fraction=log.ball_fraction,
            uncovered_after=uncovered.value,
            uncovered_after_hw=uncovered.half_width))
        levels.append(fam)
    reached = uncovered.upper() <= threshold
    if not reached and not cfg.accept_partial:
        raise ConstructionFailure(
            f"stage {k}: uncovered {uncovered.value:.4e} "
            f"(+{uncovered.half_width:.1e}) above target {threshold:.4e} "
            f"after {len(levels)} levels",
            partial=tuple(levels), stage=k,
            uncovered=uncovered.value, threshold=threshold)
    stage_radius = levels[-1].radius if levels else r_prev
    return StageResult(k=k, levels=tuple(levels), stage_radius=stage_radius,
                       uncovered=uncovered, target_reached=reached,
                       logs=tuple(logs))


# ---------------------------------------------------------------------------
# lifting and family assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HoleFamily:
    """Immutable array-of-records view of a finished build."""

    n: int
    s: float
    r: float
    L: float
    E: float
    epsilons: tuple
    seed: int
    config_hash: str
    ks: np.ndarray             # (N,) stage indices
    levels: np.ndarray         # (N,) level indices
    ms: np.ndarray             # (N,) plane indices
    base_centers: np.ndarray   # (N, n)
    ts: np.ndarray             # (N,)
    lifted_centers: np.ndarray  # (N, n+1)
    stage_radii: tuple = ()
    target_reached: tuple = ()

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def depth(self) -> int:
        return int(self.ks.max()) if len(self.ts) else 0

    @property
    def window(self) -> Ball:
        return Ball(np.full(self.n, 0.5), self.s)

    def stage_ids(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.ks == k)

    def lifted_balls(self, ids: Optional[np.ndarray] = None) -> list[Ball]:
        if ids is None:
            ids = np.arange(len(self))
        return [Ball(self.lifted_centers[i], self.ts[i]) for i in ids]

    def plane(self, k: int) -> AffinePlane:
        return plane_for_index(plane_schedule(k), self.n, self.r)


def lift(levels: Sequence[LevelFamily], plane: AffinePlane
         ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Each base ball B(x,t) becomes a hole centred at (x, a(x) + 2t)."""
    ks, ls, centers, ts = [], [], [], []
    for fam in levels:
        for c in fam.centers:
            ks.append(fam.k)
            ls.append(fam.level)
            centers.append(c)
            ts.append(fam.radius)
    if not ts:
        n = plane.dim
        return (np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64),
                np.zeros((0, n)), np.zeros(0))
    base = np.array(centers)
    ts_arr = np.array(ts)
    heights = plane.heights(base) + 2.0 * ts_arr
    lifted = np.hstack([base, heights[:, None]])
    return (np.array(ks, dtype=np.int64), np.array(ls, dtype=np.int64),
            lifted, ts_arr)


def build_family(cfg: BuildConfig) -> tuple[HoleFamily, dict]:
    """Run all stages and assemble the family plus a build log."""
    if cfg.strict_mode:
        raise ConstructionFailure(
            "strict parameters are computationally infeasible at this scale "
            "(per-level coverage ~(eps^3)^n); rerun in relaxed mode with a "
            "configured enlargement factor E and stop fractions",
            reason="strict-infeasible")
    ks_all, ls_all, ms_all = [], [], []
    base_all, ts_all, lifted_all = [], [], []
    stage_radii, reached_flags, stage_logs = [], [], []
    r_prev = cfg.s
    for k in range(1, cfg.depth + 1):
        result = build_stage(k, cfg, r_prev)
        m = plane_schedule(k)
        plane = plane_for_index(m, cfg.n, cfg.r)
        ks, ls, lifted, ts = lift(result.levels, plane)
        base = lifted[:, : cfg.n] if len(ts) else np.zeros((0, cfg.n))
        ks_all.append(ks)
        ls_all.append(ls)
        ms_all.append(np.full(len(ts), m, dtype=np.int64))
        base_all.append(base)
        ts_all.append(ts)
        lifted_all.append(lifted)
        stage_radii.append(result.stage_radius)
        reached_flags.append(result.target_reached)
        stage_logs.append({
            "k": k,
            "plane_index": m,
            "levels": [log.__dict__ for log in result.logs],
            "uncovered": result.uncovered.value,
            "uncovered_half_width": result.uncovered.half_width,
            "threshold": cfg.stop_threshold(k),
            "target_reached": result.target_reached,
        })
        r_prev = result.stage_radius
    family = HoleFamily(
        n=cfg.n, s=cfg.s, r=cfg.r, L=cfg.L, E=cfg.E,
        epsilons=cfg.epsilons, seed=cfg.seed, config_hash=cfg.config_hash,
        ks=np.concatenate(ks_all), levels=np.concatenate(ls_all),
        ms=np.concatenate(ms_all), base_centers=np.vstack(base_all),
        ts=np.concatenate(ts_all), lifted_centers=np.vstack(lifted_all),
        stage_radii=tuple(stage_radii), target_reached=tuple(reached_flags))
    return family, {"stages": stage_logs}


# ---------------------------------------------------------------------------
# membership descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PkDescriptor:
    """Union-of-balls membership for one truncation stage (or for H)."""

    k: Optional[int]
    member_ids: np.ndarray
    centers: np.ndarray
    radii: np.ndarray
    index: BallIndex

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if len(self.radii) == 0:
            return np.zeros(len(pts), dtype=bool)
        return contains_any(pts, self.centers, self.radii)


def assemble_Pk(family: HoleFamily, k: int) -> PkDescriptor:
    """L-enlargements of all holes of diameter below 1/k."""
    ids = np.flatnonzero(2.0 * family.ts < 1.0 / k)
    centers = family.lifted_centers[ids]
    radii = family.L * family.ts[ids]
    return PkDescriptor(k=k, member_ids=ids, centers=centers, radii=radii,
                        index=BallIndex(centers, radii))


def assemble_H(family: HoleFamily) -> PkDescriptor:
    """All raw holes, unenlarged."""
    ids = np.arange(len(family))
    centers = family.lifted_centers
    radii = family.ts.copy()
    return PkDescriptor(k=None, member_ids=ids, centers=centers, radii=radii,
                        index=BallIndex(centers, radii))


@dataclass(frozen=True)
class TruncatedP:
    """Membership in (intersection of P_k, k <= depth) minus H."""

    family: HoleFamily
    depth: int
    pks: tuple
    holes: PkDescriptor

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        inside = np.ones(len(pts), dtype=bool)
        for pk in self.pks:
            inside &= pk.contains(pts)
        inside &= ~self.holes.contains(pts)
        return inside


def truncated_P(family: HoleFamily, depth: Optional[int] = None) -> TruncatedP:
    depth = depth or family.depth
    pks = tuple(assemble_Pk(family, k) for k in range(1, depth + 1))
    return TruncatedP(family=family, depth=depth, pks=pks,
                      holes=assemble_H(family))


def sample_truncated_P(tp: TruncatedP, count: int, seed: int,
                       max_tries: int = 200) -> np.ndarray:
    """Volume-weighted sampling of the truncated set.

    Draw a hole eligible for every stage (diameter below 1/depth), sample
    its L-enlargement, reject points lying in any raw hole.  Accepted points
    are guaranteed members, which the caller may independently re-check.
    """
    fam = tp.family
    eligible = np.flatnonzero(2.0 * fam.ts < 1.0 / tp.depth)
    if len(eligible) == 0:
        raise ConstructionFailure("no holes eligible for every stage")
    radii = fam.L * fam.ts[eligible]
    weights = radii ** (fam.n + 1)
    weights = weights / weights.sum()
    rng = substream(seed, "sample-P")
    out: list[np.ndarray] = []
    have = 0
    for _ in range(max_tries):
        picks = rng.choice(len(eligible), size=count, p=weights)
        for i, pick in enumerate(picks):
            hid = eligible[pick]
            pt = sample_shell(rng, fam.lifted_centers[hid], 0.0,
                              fam.L * fam.ts[hid], 1)
            out.append(pt)
        pts = np.vstack(out)
        keep = pts[tp.contains(pts)]
        if len(keep) >= count:
            return keep[:count]
        out = [keep]
        have = len(keep)
    raise NeedsMoreSamples(
        f"could not sample {count} points of the truncated set "
        f"(have {have})")


# ---------------------------------------------------------------------------
# serialization: JSON lines, shortest round-trip floats, fixed order
# ---------------------------------------------------------------------------

def serialize_family(family: HoleFamily) -> str:
    header = {
        "format_version": FORMAT_VERSION,
        "n": family.n,
        "s": family.s,
        "r": family.r,
        "L": family.L,
        "E": family.E,
        "epsilons": list(family.epsilons),
        "seed": family.seed,
        "config_hash": family.config_hash,
    }
    lines = [json.dumps(header, separators=(",", ":"))]
    order = np.lexsort((np.arange(len(family)), family.levels, family.ks))
    for i in order:
        rec = {
            "k": int(family.ks[i]),
            "l": int(family.levels[i]),
            "m": int(family.ms[i]),
            "base_center": [float(v) for v in family.base_centers[i]],
            "t": float(family.ts[i]),
            "lifted_center": [float(v) for v in family.lifted_centers[i]],
        }
        lines.append(json.dumps(rec, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def deserialize_family(text: str) -> HoleFamily:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty family stream")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ParseError(f"line 1: invalid JSON header: {exc}") from exc
    required = {"format_version", "n", "s", "r", "L", "E", "epsilons",
                "seed", "config_hash"}
    missing = required - set(header)
    if missing:
        raise ParseError(f"line 1: header missing {sorted(missing)}")
    if header["format_version"] != FORMAT_VERSION:
        raise ParseError(
            f"line 1: unsupported format_version {header['format_version']}")
    n = int(header["n"])
    ks, ls, ms, bases, ts, lifted = [], [], [], [], [], []
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {lineno}: invalid JSON: {exc}") from exc
        try:
            k, l, m = int(rec["k"]), int(rec["l"]), int(rec["m"])
            base = [float(v) for v in rec["base_center"]]
            t = float(rec["t"])
            lift_c = [float(v) for v in rec["lifted_center"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"line {lineno}: malformed record: {exc}") from exc
        if k < 1 or l < 1 or m < 1:
            raise ParseError(f"line {lineno}: indices must be >= 1")
        if t <= 0:
            raise ParseError(f"line {lineno}: non-positive radius {t}")
        if len(base) != n or len(lift_c) != n + 1:
            raise ParseError(f"line {lineno}: wrong center dimension")
        ks.append(k)
        ls.append(l)
        ms.append(m)
        bases.append(base)
        ts.append(t)
        lifted.append(lift_c)
    count = len(ts)
    ks_arr = np.array(ks, dtype=np.int64)
    ts_arr = np.array(ts)
    # stage radii are not in the header: recover r_k as the smallest
    # (last-level) radius of each stage, which is how the build defined it
    depth = int(ks_arr.max()) if count else 0
    stage_radii = []
    for k in range(1, depth + 1):
        sel = ks_arr == k
        if not sel.any():
            raise ParseError(f"stage {k} has no records (stages 1..{depth})")
        stage_radii.append(float(ts_arr[sel].min()))
    return HoleFamily(
        n=n, s=float(header["s"]), r=float(header["r"]),
        L=float(header["L"]), E=float(header["E"]),
        epsilons=tuple(float(e) for e in header["epsilons"]),
        seed=int(header["seed"]), config_hash=str(header["config_hash"]),
        ks=ks_arr,
        levels=np.array(ls, dtype=np.int64),
        ms=np.array(ms, dtype=np.int64),
        base_centers=np.array(bases) if count else np.zeros((0, n)),
        ts=ts_arr,
        lifted_centers=np.array(lifted) if count else np.zeros((0, n + 1)),
        stage_radii=tuple(stage_radii))
