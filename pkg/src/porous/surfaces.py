"""C¹ surfaces over the unit cube and graph machinery.

Surfaces are stored analytically as a base affine embedding plus a sum of
polynomial bumps attached to coordinates, so sup-norms and slope maxima have
closed forms and every gradient bound is certified rather than sampled.
Graphs over the window ball are recovered by inverting the first n
coordinates with a damped Newton solve.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ExtractionError, ParseError, PreconditionError
from .geometry import AffinePlane, Ball, MeasureEstimate, ScalarField
from .sampling import SamplingBudget, stratified_ball_integral, substream

# max of u (1-u^2)^2 on [0,1] sits at u = 1/sqrt(5); the slope of the cubic
# bump profile is 6 A/w times that, i.e. SLOPE_FACTOR * A / w
SLOPE_FACTOR = 96.0 / (25.0 * math.sqrt(5.0))

DELTA_SCALE = 1e-2          # extraction basin: delta = DELTA_SCALE * r
NEWTON_CAP = 50
NEWTON_TOL = 1e-10


@dataclass(frozen=True)
class BumpSpec:
    """Radial cubic bump A * (1 - |u-u0|^2 / w^2)^3, supported on |u-u0| < w."""

    center: tuple
    amplitude: float
    width: float

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("bump width must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def slope_max(self) -> float:
        return SLOPE_FACTOR * abs(self.amplitude) / self.width

    def values(self, pts: np.ndarray) -> np.ndarray:
        u = (np.atleast_2d(pts) - np.array(self.center)) / self.width
        rho2 = (u**2).sum(axis=1)
        out = np.zeros(len(u))
        m = rho2 < 1.0
        out[m] = self.amplitude * (1.0 - rho2[m]) ** 3
        return out

    def gradients(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        d = pts - np.array(self.center)
        rho2 = (d**2).sum(axis=1) / self.width**2
        out = np.zeros_like(pts)
        m = rho2 < 1.0
        out[m] = (-6.0 * self.amplitude / self.width**2
                  * (1.0 - rho2[m])[:, None] ** 2 * d[m])
        return out


@dataclass(frozen=True)
class SurfaceC1:
    """Map f: [0,1]^n -> R^(n+1) as plane embedding plus attached bumps.

    ``components`` lists (axis, bump) pairs; axis n is the height coordinate,
    axes < n perturb the horizontal part (making the inversion non-trivial).
    """

    plane: AffinePlane
    components: tuple = ()
    label: str = "surface"

    @property
    def dim(self) -> int:
        return self.plane.dim

    def value(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = self.plane.embed(pts)
        for axis, bump in self.components:
            out[:, axis] += bump.values(pts)
        return out

    def jacobian(self, pts: np.ndarray) -> np.ndarray:
        """(m, n+1, n) array of partial derivatives."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        m, n = pts.shape
        jac = np.zeros((m, n + 1, n))
        jac[:, :n, :] = np.eye(n)
        jac[:, n, :] = self.plane.gradient
        for axis, bump in self.components:
            jac[:, axis, :] += bump.gradients(pts)
        return jac

    def horizontal(self, pts: np.ndarray) -> np.ndarray:
        """First n coordinates of f (the part inverted during extraction)."""
        return self.value(pts)[:, : self.dim]


def reference_surface(n: int) -> SurfaceC1:
    """The flat embedding u -> (u, 0)."""
    plane = AffinePlane(index=1, gradient=np.zeros(n), offset=0.0,
                        anchor=np.full(n, 0.5))
    return SurfaceC1(plane=plane, label="reference")


@dataclass(frozen=True)
class C1Norm:
    value: float
    sup_map: float
    sup_partials: tuple
    declared_bound: Optional[float]


def _unit_lattice(n: int, per_axis: int) -> np.ndarray:
    axes = [np.linspace(0.0, 1.0, per_axis)] * n
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def c1_norm(f: SurfaceC1, probe_per_axis: int = 17) -> C1Norm:
    """Max of sup |f| and the sup of each partial, probed on a lattice.

    When all perturbations are declared bumps the closed-form maxima give a
    certified upper bound, returned alongside the lattice estimate.
    """
    n = f.dim
    pts = _unit_lattice(n, probe_per_axis)
    sup_map = float(np.linalg.norm(f.value(pts), axis=1).max())
    jac = f.jacobian(pts)
    sup_partials = tuple(
        float(np.linalg.norm(jac[:, :, j], axis=1).max()) for j in range(n))
    declared = _declared_c1_bound(f)
    return C1Norm(value=max(sup_map, *sup_partials), sup_map=sup_map,
                  sup_partials=sup_partials, declared_bound=declared)


def _declared_c1_bound(f: SurfaceC1) -> Optional[float]:
    n = f.dim
    corners = _unit_lattice(n, 2)
    sup_plane = float(np.linalg.norm(f.plane.embed(corners), axis=1).max())
    amp = sum(abs(b.amplitude) for _, b in f.components)
    sup_map = sup_plane + amp
    partial_bounds = []
    for j in range(n):
        base = math.sqrt(1.0 + float(f.plane.gradient[j]) ** 2)
        slope = sum(b.slope_max for _, b in f.components)
        partial_bounds.append(base + slope)
    return max(sup_map, *partial_bounds)


def reference_distance(f: SurfaceC1, probe_per_axis: int = 17
                       ) -> tuple[float, float]:
    """(lattice estimate, certified upper bound) of the C¹ distance to (u, 0).

    The certified bound uses corner values of the affine part plus the
    declared bump maxima; it is what extraction preconditions audit against.
    """
    n = f.dim
    pts = _unit_lattice(n, probe_per_axis)
    dev = f.value(pts)
    dev[:, :n] -= pts
    sup_map = float(np.linalg.norm(dev, axis=1).max())
    jac = f.jacobian(pts)
    jac[:, :n, :] -= np.eye(n)
    sup_partial = max(
        float(np.linalg.norm(jac[:, :, j], axis=1).max()) for j in range(n))
    probe = max(sup_map, sup_partial)

    corners = _unit_lattice(n, 2)
    heights = np.abs(f.plane.heights(corners)).max()
    amp = sum(abs(b.amplitude) for _, b in f.components)
    slope = sum(b.slope_max for _, b in f.components)
    plane_slope = f.plane.slope
    certified = max(float(heights) + amp, plane_slope + slope)
    return probe, certified


@dataclass(frozen=True)
class GraphPatch:
    """A graph {(x, g(x))} over the window ball, with provenance."""

    g: ScalarField
    source: str
    c1_bound: float

    @property
    def window(self) -> Ball:
        return self.g.domain

    def graph_points(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.hstack([pts, self.g.values(pts)[:, None]])


def _newton_invert(f: SurfaceC1, targets: np.ndarray, tol: float
                   ) -> np.ndarray:
    """Solve horizontal(u) = x rowwise with damped Newton, cap 50 steps."""
    n = f.dim
    u = targets.copy()
    res = f.horizontal(u) - targets
    norms = np.linalg.norm(res, axis=1)
    for _ in range(NEWTON_CAP):
        active = norms > tol
        if not active.any():
            break
        ua = u[active]
        jac = f.jacobian(ua)[:, :n, :]
        step = np.linalg.solve(jac, res[active][:, :, None])[:, :, 0]
        # damping: halve the step until the residual stops growing
        scale = np.ones(len(ua))
        for _ in range(20):
            trial = ua - scale[:, None] * step
            trial_res = np.linalg.norm(f.horizontal(trial) - targets[active],
                                       axis=1)
            worse = trial_res > norms[active]
            if not worse.any():
                break
            scale[worse] *= 0.5
        u[active] = ua - scale[:, None] * step
        res[active] = f.horizontal(u[active]) - targets[active]
        norms[active] = np.linalg.norm(res[active], axis=1)
    if (norms > tol).any():
        bad = int(np.argmax(norms))
        raise ExtractionError(
            f"inversion residual {norms[bad]:.3e} > tol {tol:g} at probe "
            f"{tuple(targets[bad])}", residual=float(norms[bad]),
            probe=targets[bad].copy())
    return u


def graph_extract(f: SurfaceC1, window: Ball, r_bound: float,
                  delta: Optional[float] = None, tol: float = NEWTON_TOL,
                  audit_per_axis: int = 9) -> GraphPatch:
    """Represent f over the window as a height field g via Newton inversion.

    Preconditions: the certified C¹ distance of f to the flat embedding is
    below ``delta`` (default r_bound/100).  The extracted field is audited
    to satisfy max(sup|g|, sup|grad g|) <= r_bound on a probe lattice.
    """
    if delta is None:
        delta = DELTA_SCALE * r_bound
    _, certified = reference_distance(f)
    if certified >= delta:
        raise PreconditionError(
            f"surface is {certified:.3e} from the reference in C¹, "
            f"needs < {delta:.3e}", distance=certified, delta=delta)
    n = f.dim

    def g_fn(pts: np.ndarray) -> np.ndarray:
        u = _newton_invert(f, np.atleast_2d(pts), tol)
        return f.value(u)[:, n]

    def g_grad(pts: np.ndarray) -> np.ndarray:
        u = _newton_invert(f, np.atleast_2d(pts), tol)
        jac = f.jacobian(u)
        # chain rule: grad g = (d horizontal/du)^{-T} . d height/du
        return np.linalg.solve(np.swapaxes(jac[:, :n, :], 1, 2),
                               jac[:, n, :, None])[:, :, 0]

    # near-identity inversion inflates the C¹ distance by at most ~2x
    bound = 2.0 * certified
    gfield = ScalarField(domain=window, fn=g_fn, grad_fn=g_grad,
                         grad_bound=bound, label=f"graph<{f.label}>")
    patch = GraphPatch(g=gfield, source=f.label, c1_bound=bound)

    probes = window.center + (window.radius / math.sqrt(n)) * (
        _unit_lattice(n, audit_per_axis) * 2.0 - 1.0)
    sup_g = float(np.abs(gfield.values(probes)).max())
    sup_dg = float(np.linalg.norm(gfield.gradients(probes), axis=1).max())
    if max(sup_g, sup_dg) > r_bound:
        raise ExtractionError(
            f"extracted field has probed C¹ size {max(sup_g, sup_dg):.3e} "
            f"> {r_bound:g}", sup_value=sup_g, sup_gradient=sup_dg)
    return patch


def graph_measure_in(patch: GraphPatch, target: Callable[[np.ndarray], np.ndarray],
                     budget: SamplingBudget, seed: int = 0,
                     key: Sequence = ()) -> MeasureEstimate:
    """Surface measure of the part of the graph landing in ``target``.

    Integrates the area element sqrt(1 + |grad g|^2) over base points whose
    lifted image satisfies the target predicate.
    """
    w = patch.window

    def integrand(pts: np.ndarray) -> np.ndarray:
        lifted = patch.graph_points(pts)
        inside = np.asarray(target(lifted), dtype=bool)
        jac = np.sqrt(1.0 + (patch.g.gradients(pts) ** 2).sum(axis=1))
        return np.where(inside, jac, 0.0)

    value, hw, count = stratified_ball_integral(
        integrand, w.center, w.radius, w.volume(), seed, budget,
        key=("graph-measure", *key))
    return MeasureEstimate(value=value, half_width=hw, method="monte_carlo",
                           sample_count=count)


@dataclass(frozen=True)
class MembershipVerdict:
    status: str              # member | non-member | indeterminate
    measure: MeasureEstimate
    alpha: float

    @property
    def margin(self) -> float:
        if self.status == "member":
            return self.measure.lower() - self.alpha
        if self.status == "non-member":
            return self.alpha - self.measure.upper()
        return 0.0


def sn_membership(patch: GraphPatch, target, alpha: float,
                  budget: SamplingBudget, seed: int = 0) -> MembershipVerdict:
    """Decide whether the graph meets the target in measure above alpha."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    est = graph_measure_in(patch, target, budget, seed, key=("membership",))
    if est.lower() > alpha:
        status = "member"
    elif est.upper() < alpha:
        status = "non-member"
    else:
        status = "indeterminate"
    return MembershipVerdict(status=status, measure=est, alpha=alpha)


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------

CORPUS_KINDS = ("plane", "bump", "multi-bump", "mollified-noise")


@dataclass(frozen=True)
class CorpusEntry:
    """One test field: the surface form and its direct graph restriction."""

    surface: SurfaceC1
    patch: GraphPatch
    kind: str
    index: int


def _plane_patch(plane: AffinePlane, window: Ball, bumps: Sequence[BumpSpec],
                 label: str) -> GraphPatch:
    bumps = tuple(bumps)

    def fn(pts: np.ndarray) -> np.ndarray:
        out = plane.heights(pts)
        for b in bumps:
            out = out + b.values(pts)
        return out

    def grad(pts: np.ndarray) -> np.ndarray:
        out = np.tile(plane.gradient, (len(np.atleast_2d(pts)), 1))
        for b in bumps:
            out = out + b.gradients(pts)
        return out

    slope = plane.slope + sum(b.slope_max for b in bumps)
    corners = _unit_lattice(window.dim, 2) * (2 * window.radius) \
        + (window.center - window.radius)
    sup = float(np.abs(plane.heights(corners)).max()) \
        + sum(abs(b.amplitude) for b in bumps)
    gfield = ScalarField(domain=window, fn=fn, grad_fn=grad,
                         grad_bound=slope, label=label)
    return GraphPatch(g=gfield, source=label, c1_bound=max(sup, slope))


def _entry(plane: AffinePlane, bumps: Sequence[BumpSpec], window: Ball,
           kind: str, index: int, label: str) -> CorpusEntry:
    surface = SurfaceC1(
        plane=plane,
        components=tuple((window.dim, b) for b in bumps),
        label=label)
    patch = _plane_patch(plane, window, bumps, label)
    return CorpusEntry(surface=surface, patch=patch, kind=kind, index=index)


def corpus_generate(kind: str, params: dict, seed: int,
                    window: Optional[Ball] = None) -> list[CorpusEntry]:
    """Deterministic corpus of test fields with certified C¹ bounds.

    params:
      plane           gradients: list of vectors; offsets: list of reals
      bump            count, amplitude: [lo, hi], width: [lo, hi]
      multi-bump      count, bumps, amplitude, width
      mollified-noise count, grains, grain_width, strength
    All kinds accept c1_ceiling (default 1/64); exceeding it is rejected.
    """
    if kind not in CORPUS_KINDS:
        raise ValueError(f"unknown corpus kind {kind!r}; "
                         f"expected one of {CORPUS_KINDS}")
    if window is None:
        window = Ball([0.5, 0.5, 0.5], 0.25)
    n = window.dim
    ceiling = float(params.get("c1_ceiling", 1.0 / 64.0))
    anchor = window.center
    out: list[CorpusEntry] = []

    if kind == "plane":
        gradients = [np.asarray(g, dtype=float) for g in params["gradients"]]
        offsets = [float(o) for o in params["offsets"]]
        idx = 0
        for off in offsets:
            for grad in gradients:
                plane = AffinePlane(index=idx + 1, gradient=grad, offset=off,
                                    anchor=anchor)
                label = f"plane[{idx}]"
                entry = _entry(plane, (), window, kind, idx, label)
                _check_ceiling(entry, ceiling)
                out.append(entry)
                idx += 1
        return out

    count = int(params["count"])
    zero = AffinePlane(index=1, gradient=np.zeros(n), offset=0.0,
                       anchor=anchor)
    for i in range(count):
        rng = substream(seed, "corpus", kind, i)
        if kind == "bump":
            amp = _draw(rng, params["amplitude"])
            width = _draw(rng, params["width"])
            center = window.center + rng.uniform(-0.5, 0.5, n) * window.radius
            bumps = [BumpSpec(tuple(center), amp, width)]
        elif kind == "multi-bump":
            k = int(params.get("bumps", 3))
            bumps = []
            for _ in range(k):
                amp = _draw(rng, params["amplitude"]) / k
                width = _draw(rng, params["width"])
                center = window.center + rng.uniform(-1, 1, n) * window.radius
                bumps.append(BumpSpec(tuple(center), amp, width))
        else:  # mollified-noise
            grains = int(params.get("grains", 24))
            gw = float(params.get("grain_width", 0.12))
            strength = float(params.get("strength", ceiling / 2))
            if strength > ceiling:
                raise ValueError(f"noise strength {strength:g} exceeds the "
                                 f"C¹ ceiling {ceiling:g}")
            raw = rng.uniform(-1.0, 1.0, grains)
            centers = (window.center
                       + rng.uniform(-1.2, 1.2, (grains, n)) * window.radius)
            # normalise so the certified bound (worst-case sums of per-grain
            # sup and slope maxima) equals the requested strength exactly
            cert = max(np.abs(raw).sum(), SLOPE_FACTOR * np.abs(raw).sum() / gw)
            scale = strength / cert
            bumps = [BumpSpec(tuple(centers[j]), float(raw[j] * scale), gw)
                     for j in range(grains)]
        label = f"{kind}[{i}]"
        entry = _entry(zero, bumps, window, kind, i, label)
        _check_ceiling(entry, ceiling)
        out.append(entry)
    return out


def _draw(rng: np.random.Generator, spec) -> float:
    lo, hi = float(spec[0]), float(spec[1])
    return float(rng.uniform(lo, hi))


def _check_ceiling(entry: CorpusEntry, ceiling: float) -> None:
    if entry.patch.c1_bound > ceiling * (1 + 1e-12):
        raise ValueError(
            f"{entry.patch.source}: certified C¹ bound "
            f"{entry.patch.c1_bound:.3e} exceeds ceiling {ceiling:.3e}")


def load_corpus_spec(path) -> list[dict]:
    """Corpus spec file: JSON list of {kind, params, seed}."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ParseError(f"{path}: expected a JSON list of corpus groups")
    for i, item in enumerate(doc):
        if not isinstance(item, dict):
            raise ParseError(f"{path}: entry {i} is not an object")
        missing = {"kind", "params", "seed"} - set(item)
        if missing:
            raise ParseError(f"{path}: entry {i} missing {sorted(missing)}")
        if item["kind"] not in CORPUS_KINDS:
            raise ParseError(f"{path}: entry {i} has unknown kind "
                             f"{item['kind']!r}")
    return doc


def generate_from_spec(spec: list[dict], window: Optional[Ball] = None
                       ) -> list[CorpusEntry]:
    out = []
    for item in spec:
        out.extend(corpus_generate(item["kind"], item["params"],
                                   int(item["seed"]), window=window))
    return out
