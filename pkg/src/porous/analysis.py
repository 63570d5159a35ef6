"""Smoothing toolkit and quantitative inequality checks.

The pieces here implement the analytic side of the audit: a compactly
supported smooth averaging kernel, discrete convolution against it, radial
cutoffs, two-field blending, and the measured forms of the embedding, area,
flattening, and smoothed-gradient estimates.

All discrete convolutions use a normalised product Gauss-Legendre rule: the
kernel weights are rescaled to unit discrete mass, so constants mollify to
themselves and affine fields are reproduced to machine precision, which the
audits rely on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import BlendPreconditionError, PreconditionError
from .geometry import AffinePlane, Ball, ScalarField, unit_ball_volume
from .sampling import (SamplingBudget, sample_shell, shell_edges,
                       stratified_ball_mean, substream)

DEFAULT_NODES_PER_AXIS = 9
_RADIAL_ORDER = 400


def _bump_profile(rho2: np.ndarray) -> np.ndarray:
    """exp(1 / (rho^2 - 1)) on rho < 1, identically zero outside."""
    out = np.zeros_like(rho2)
    inside = rho2 < 1.0
    with np.errstate(divide="ignore"):
        out[inside] = np.exp(1.0 / (rho2[inside] - 1.0))
    return out


@dataclass(frozen=True)
class Mollifier:
    """Normalised smooth kernel supported on the unit ball of R^n."""

    n: int
    kappa: float

    def density(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.kappa * _bump_profile((pts**2).sum(axis=1))

    def scaled_density(self, points: np.ndarray, eps: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.density(pts / eps) / eps**self.n


def make_mollifier(n: int, radial_order: int = _RADIAL_ORDER) -> Mollifier:
    """Kernel with unit mass; the normaliser comes from a radial quadrature."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    nodes, weights = np.polynomial.legendre.leggauss(radial_order)
    rho = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    radial = float((w * _bump_profile(rho**2) * rho ** (n - 1)).sum())
    sphere_area = n * unit_ball_volume(n)
    return Mollifier(n=n, kappa=1.0 / (sphere_area * radial))


def mollifier_mass(mollifier: Mollifier, eps: float,
                   radial_order: int = _RADIAL_ORDER) -> float:
    """Independent radial quadrature of the scaled kernel's total mass."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    nodes, weights = np.polynomial.legendre.leggauss(radial_order)
    rho = 0.5 * eps * (nodes + 1.0)
    w = 0.5 * eps * weights
    n = mollifier.n
    vals = mollifier.kappa * _bump_profile((rho / eps) ** 2) / eps**n
    sphere_area = n * unit_ball_volume(n)
    return float(sphere_area * (w * vals * rho ** (n - 1)).sum())


def convolution_nodes(n: int, nodes_per_axis: int = DEFAULT_NODES_PER_AXIS
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Offsets in the unit ball and unit-mass weights for discrete smoothing.

    Product Gauss-Legendre nodes on the cube are masked by the kernel (nodes
    outside the unit ball get zero weight), then the surviving weights are
    normalised to sum to one.
    """
    if nodes_per_axis < 3:
        raise ValueError("need at least 3 nodes per axis")
    nodes, weights = np.polynomial.legendre.leggauss(nodes_per_axis)
    grids = np.meshgrid(*([nodes] * n), indexing="ij")
    offsets = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*([weights] * n), indexing="ij")
    wprod = np.ones(offsets.shape[0])
    for wg in wgrids:
        wprod *= wg.ravel()
    kernel = _bump_profile((offsets**2).sum(axis=1))
    mass = wprod * kernel
    keep = mass > 0.0
    offsets, mass = offsets[keep], mass[keep]
    return offsets, mass / mass.sum()


def mollify(g: ScalarField, eps: float,
            nodes_per_axis: int = DEFAULT_NODES_PER_AXIS,
            label: Optional[str] = None) -> ScalarField:
    """Discrete smoothing of ``g`` at scale ``eps``.

    The result lives on the domain shrunk by ``eps``.  Because the rule has
    unit mass and nonnegative weights supported in the eps-ball, the sup
    distance to ``g`` is at most ``eps * g.grad_bound`` and the certified
    gradient bound carries over unchanged.
    """
    dom = g.domain
    if not (0 < eps < dom.radius):
        raise ValueError(f"need 0 < eps < domain radius, got eps={eps}")
    offsets, wts = convolution_nodes(dom.dim, nodes_per_axis)
    shifts = eps * offsets

    def fn(pts: np.ndarray) -> np.ndarray:
        acc = np.zeros(pts.shape[0])
        for q in range(shifts.shape[0]):
            acc += wts[q] * g.values(pts + shifts[q])
        return acc

    def grad_fn(pts: np.ndarray) -> np.ndarray:
        acc = np.zeros_like(pts)
        for q in range(shifts.shape[0]):
            acc += wts[q] * g.gradients(pts + shifts[q])
        return acc

    return ScalarField(domain=Ball(dom.center, dom.radius - eps),
                       fn=fn, grad_fn=grad_fn, grad_bound=g.grad_bound,
                       fd_step=g.fd_step,
                       label=label or f"{g.label}^({eps:g})")


def _bump_slope_sup() -> float:
    """sup over u of |d/du e*exp(1/(u^2-1))| by dense scan.

    The profile derivative is smooth with a single interior maximum, so a
    fine grid under-reports the sup only by a curvature-squared term; the
    safety factor covers it with orders of magnitude to spare.
    """
    u = np.linspace(1e-9, 1.0 - 1e-9, 200001)
    d = 2.0 * u / (u**2 - 1.0) ** 2 * np.exp(1.0 + 1.0 / (u**2 - 1.0))
    return float(d.max()) * (1.0 + 1e-9)


BUMP_SLOPE_SUP = _bump_slope_sup()


def bump_field(center: np.ndarray, radius: float, amplitude: float,
               label: str = "bump") -> ScalarField:
    """Radial C^inf bump: ``amplitude`` at the centre, zero outside.

    Normalised so the peak equals ``amplitude`` exactly; the certified
    gradient bound is ``|amplitude| * BUMP_SLOPE_SUP / radius``.  The domain
    is the support ball.
    """
    if radius <= 0:
        raise ValueError("bump radius must be positive")
    center = np.asarray(center, dtype=float)

    def fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        q = ((pts - center) ** 2).sum(axis=1) / radius**2
        out = np.zeros(pts.shape[0])
        inside = q < 1.0
        out[inside] = amplitude * np.exp(1.0 + 1.0 / (q[inside] - 1.0))
        return out

    def grad_fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        delta = pts - center
        q = (delta**2).sum(axis=1) / radius**2
        out = np.zeros_like(pts)
        inside = q < 1.0
        scale = np.zeros(pts.shape[0])
        scale[inside] = (-2.0 * amplitude / radius**2
                         * np.exp(1.0 + 1.0 / (q[inside] - 1.0))
                         / (q[inside] - 1.0) ** 2)
        out[inside] = scale[inside, None] * delta[inside]
        return out

    return ScalarField(domain=Ball(center, radius), fn=fn, grad_fn=grad_fn,
                       grad_bound=abs(amplitude) * BUMP_SLOPE_SUP / radius,
                       label=label)


# ---------------------------------------------------------------------------
# cutoffs and blending
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CutoffField:
    """Smoothed radial cutoff on a ball B(x, t).

    Identically 1 on B(x, t - 2*eps*t), identically 0 outside
    B(x, t - eps*t), with gradient certified below 3 / (eps * t).
    """

    ball: Ball
    eps: float
    field: ScalarField

    @property
    def plateau_radius(self) -> float:
        return self.ball.radius * (1.0 - 2.0 * self.eps)

    @property
    def support_radius(self) -> float:
        return self.ball.radius * (1.0 - self.eps)

    @property
    def slope_cap(self) -> float:
        return 3.0 / (self.eps * self.ball.radius)

    def values(self, pts: np.ndarray) -> np.ndarray:
        return self.field.values(pts)

    def gradients(self, pts: np.ndarray) -> np.ndarray:
        return self.field.gradients(pts)


def make_cutoff(ball: Ball, eps: float,
                nodes_per_axis: int = DEFAULT_NODES_PER_AXIS) -> CutoffField:
    """Radial ramp between t - 5*eps*t/3 and t - 4*eps*t/3, smoothed at eps*t/3.

    The ramp slope is exactly 3/(eps*t); smoothing by a unit-mass kernel of
    radius eps*t/3 pushes the plateau inward to t - 2*eps*t and the support
    inward to t - eps*t while preserving the slope cap.
    """
    if not (0 < eps < 0.5):
        raise ValueError("cutoff parameter must lie in (0, 1/2)")
    t = ball.radius
    hi = t - 5.0 * eps * t / 3.0
    lo = t - 4.0 * eps * t / 3.0
    if hi <= 0:
        raise ValueError("eps too large for this ball")
    slope = 3.0 / (eps * t)
    center = ball.center

    def ramp(pts: np.ndarray) -> np.ndarray:
        rho = np.linalg.norm(np.atleast_2d(pts) - center, axis=1)
        return np.clip((lo - rho) * slope, 0.0, 1.0)

    def ramp_grad(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        delta = pts - center
        rho = np.linalg.norm(delta, axis=1)
        out = np.zeros_like(pts)
        band = (rho > hi) & (rho < lo)
        if band.any():
            out[band] = -slope * delta[band] / rho[band, None]
        return out

    raw = ScalarField(domain=Ball(center, t), fn=ramp, grad_fn=ramp_grad,
                      grad_bound=slope, label="cutoff-ramp")
    smooth = mollify(raw, eps * t / 3.0, nodes_per_axis, label="cutoff")
    # kernel radius eps*t/3 bounds every quadrature shift, so the smoothed
    # ramp is exactly 1 inside t - 2*eps*t and exactly 0 outside t - eps*t;
    # only the band in between needs the convolution
    plateau = t - 2.0 * eps * t
    support = t - eps * t

    def fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.linalg.norm(pts - center, axis=1)
        out = np.zeros(pts.shape[0])
        out[rho <= plateau] = 1.0
        band = (rho > plateau) & (rho < support)
        if band.any():
            # convex combination of ramp values; clip float accumulation
            out[band] = np.clip(smooth.fn(pts[band]), 0.0, 1.0)
        return out

    def grad_fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        rho = np.linalg.norm(pts - center, axis=1)
        out = np.zeros_like(pts)
        band = (rho > plateau) & (rho < support)
        if band.any():
            out[band] = smooth.grad_fn(pts[band])
        return out

    field = ScalarField(domain=ball, fn=fn, grad_fn=grad_fn,
                        grad_bound=slope, label="cutoff")
    return CutoffField(ball=ball, eps=eps, field=field)


def blend(inner: ScalarField, outer: ScalarField, cutoff: CutoffField,
          check_budget: int = 512, seed: int = 0,
          match_tol: Optional[float] = None, label: str = "blend") -> ScalarField:
    """Interpolate two fields across the cutoff's transition band.

    Preconditions (audited on sampled annulus probes): the fields differ by
    at most ``eps^2 * t`` on the band where the cutoff varies.  The result
    carries the certified gradient bound
    ``max(inner.grad_bound, outer.grad_bound) + 3 * eps``.
    """
    ball, eps, t = cutoff.ball, cutoff.eps, cutoff.ball.radius
    if match_tol is None:
        match_tol = eps * eps * t
    rng = substream(seed, "blend-precheck")
    # probes on the closed annulus [t - 2 eps t, t - eps t]
    probes = sample_shell(rng, ball.center, cutoff.plateau_radius,
                          cutoff.support_radius, check_budget)
    gap = np.abs(inner.values(probes) - outer.values(probes))
    worst = int(np.argmax(gap))
    if gap[worst] > match_tol:
        raise BlendPreconditionError(
            f"fields differ by {gap[worst]:.3e} > {match_tol:.3e} on the "
            f"matching annulus at {tuple(probes[worst])}",
            gap=float(gap[worst]), tol=float(match_tol),
            point=probes[worst].copy())

    def fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        w = cutoff.values(pts)
        out = outer.values(pts)
        mask = w > 0.0
        if mask.any():
            out[mask] = (w[mask] * inner.values(pts[mask])
                         + (1.0 - w[mask]) * out[mask])
        return out

    def grad_fn(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        w = cutoff.values(pts)
        gout = outer.gradients(pts)
        mask = w > 0.0
        if mask.any():
            sub = pts[mask]
            gw = cutoff.gradients(sub)
            gin = inner.gradients(sub)
            vals_in = inner.values(sub)
            vals_out = outer.values(sub)
            gout[mask] = (w[mask, None] * gin + (1.0 - w[mask, None]) * gout[mask]
                          + (vals_in - vals_out)[:, None] * gw)
        return gout

    bound = max(inner.grad_bound, outer.grad_bound) + 3.0 * eps
    return ScalarField(domain=outer.domain, fn=fn, grad_fn=grad_fn,
                       grad_bound=bound, fd_step=min(inner.step, outer.step),
                       label=label)


# ---------------------------------------------------------------------------
# measured inequalities
# ---------------------------------------------------------------------------

ZERO_LEVEL_REL = 1e-9  # |g| below this times sup|g| counts as vanishing


@dataclass(frozen=True)
class SobolevCheck:
    exponent: float
    lp_norm: float
    energy: float
    ratio: float
    vanish_fraction: float
    sample_count: int


def sobolev_ratio(g: ScalarField, b: Ball, alpha: float, seed: int = 0,
                  budget: SamplingBudget = SamplingBudget(32, 512)) -> SobolevCheck:
    """Ratio of the critical-exponent norm to the gradient energy on a ball.

    Requires the field to vanish on at least an ``alpha`` fraction of the
    ball (sampled, with the relative zero tolerance).  Exponent is
    2n/(n-2) for a base dimension n > 2.
    """
    n = b.dim
    if n <= 2:
        raise ValueError("embedding exponent needs dimension > 2")
    if not (0 < alpha <= 1):
        raise ValueError("alpha must lie in (0, 1]")
    p = 2.0 * n / (n - 2.0)

    sup = _sampled_sup(lambda pts: np.abs(g.values(pts)), b, seed, budget)
    level = ZERO_LEVEL_REL * sup if sup > 0 else 0.0
    frac, frac_hw, _ = stratified_ball_mean(
        lambda pts: (np.abs(g.values(pts)) <= level).astype(float),
        b.center, b.radius, seed, budget, key=("sobolev-vanish",))
    if frac < alpha:
        raise PreconditionError(
            f"field vanishes on {frac:.3f} < alpha={alpha} of the ball",
            fraction=frac, alpha=alpha)

    vol = b.volume()
    mean_p, _, count = stratified_ball_mean(
        lambda pts: np.abs(g.values(pts)) ** p,
        b.center, b.radius, seed, budget, key=("sobolev-lp",))
    mean_e, _, _ = stratified_ball_mean(
        lambda pts: (g.gradients(pts) ** 2).sum(axis=1),
        b.center, b.radius, seed, budget, key=("sobolev-energy",))
    lp = (mean_p * vol) ** (1.0 / p)
    energy = math.sqrt(max(mean_e, 0.0) * vol)
    ratio = 0.0 if lp == 0.0 else (math.inf if energy == 0.0 else lp / energy)
    return SobolevCheck(exponent=p, lp_norm=lp, energy=energy, ratio=ratio,
                        vanish_fraction=frac, sample_count=count)


@dataclass(frozen=True)
class AreaCheck:
    h: float
    lhs: float
    rhs: float
    rhs_half_width: float
    ratio: float
    low_fraction: float
    sample_count: int


def area_lower_bound_check(g: ScalarField, b: Ball, h: float, seed: int = 0,
                           budget: SamplingBudget = SamplingBudget(32, 512)
                           ) -> AreaCheck:
    """Measured form of the peak-area estimate.

    For a 1-Lipschitz field that stays below h/2 on half the ball yet
    reaches h somewhere, the h-ball volume is controlled by the gradient
    energy over the super-level set {g >= h/2}.  Reports lhs, rhs, and
    their ratio (the empirical constant).
    """
    if h <= 0:
        raise ValueError("h must be positive")
    if b.radius < h:
        raise PreconditionError(f"ball radius {b.radius} < h={h}")
    if g.grad_bound > 1.0 + 1e-12:
        raise PreconditionError(
            f"certified gradient bound {g.grad_bound} exceeds 1")

    low, low_hw, _ = stratified_ball_mean(
        lambda pts: (g.values(pts) <= h / 2.0).astype(float),
        b.center, b.radius, seed, budget, key=("area-low",))
    if low + low_hw < 0.5:
        raise PreconditionError(
            f"sub-level fraction {low:.3f} certifiably below 1/2")
    peak = max(_sampled_sup(g.values, b, seed, budget),
               float(g.values(b.center[None, :])[0]))
    if peak < h:
        raise PreconditionError(f"sampled peak {peak:.4f} never reaches h={h}")

    def energy_on_superlevel(pts: np.ndarray) -> np.ndarray:
        vals = g.values(pts)
        e = (g.gradients(pts) ** 2).sum(axis=1)
        return np.where(vals >= h / 2.0, e, 0.0)

    mean_e, hw_e, count = stratified_ball_mean(
        energy_on_superlevel, b.center, b.radius, seed, budget,
        key=("area-energy",))
    vol = b.volume()
    rhs = mean_e * vol
    lhs = unit_ball_volume(b.dim) * h ** b.dim
    ratio = math.inf if rhs == 0 else lhs / rhs
    return AreaCheck(h=h, lhs=lhs, rhs=rhs, rhs_half_width=hw_e * vol,
                     ratio=ratio, low_fraction=low, sample_count=count)


@dataclass(frozen=True)
class FlattenCheck:
    residual: float
    cross_term: float
    identity_gap: float
    bound_scale: float
    half_width: float
    sample_count: int


def flatten_residual(g: ScalarField, plane: AffinePlane, b: Ball, eps: float,
                     seed: int = 0,
                     budget: SamplingBudget = SamplingBudget(32, 512)
                     ) -> FlattenCheck:
    """Energy splitting against a constant-slope reference.

    residual = integral of |grad g|^2 - |grad a|^2 - |grad (g-a)|^2, which
    algebraically equals the cross term 2 * integral <grad a, grad(g-a)>.
    When |g - a| <= eps * t, both are bounded by a constant times
    eps * vol(b); ``bound_scale`` reports |residual| / (eps * vol(b)).
    """
    t = b.radius
    ga = plane.gradient

    sup_gap = _sampled_sup(
        lambda pts: np.abs(g.values(pts) - plane.heights(pts)), b, seed, budget)
    if sup_gap > eps * t * (1 + 1e-9):
        raise PreconditionError(
            f"sup |g - a| = {sup_gap:.3e} exceeds eps*t = {eps * t:.3e}")

    def residual_integrand(pts: np.ndarray) -> np.ndarray:
        gg = g.gradients(pts)
        return ((gg**2).sum(axis=1) - float(ga @ ga)
                - ((gg - ga) ** 2).sum(axis=1))

    def cross_integrand(pts: np.ndarray) -> np.ndarray:
        gg = g.gradients(pts)
        return 2.0 * (gg - ga) @ ga

    vol = b.volume()
    mean_r, hw_r, count = stratified_ball_mean(
        residual_integrand, b.center, b.radius, seed, budget, key=("flatten",))
    mean_c, _, _ = stratified_ball_mean(
        cross_integrand, b.center, b.radius, seed, budget, key=("flatten",))
    residual = mean_r * vol
    cross = mean_c * vol
    scale = abs(residual) / (eps * vol) if eps > 0 else math.inf
    return FlattenCheck(residual=residual, cross_term=cross,
                        identity_gap=abs(residual - cross),
                        bound_scale=scale, half_width=hw_r * vol,
                        sample_count=count)


def boundary_cross_term(g: ScalarField, plane: AffinePlane, b: Ball,
                        theta_nodes: int = 64, phi_nodes: int = 128) -> float:
    """Divergence-theorem form of the cross term, for 3-dimensional balls.

    2 * integral over the sphere of (g - a) <grad a, nu>; serves as the
    independent check of the volume quadrature.
    """
    if b.dim != 3:
        raise ValueError("boundary quadrature implemented for n = 3")
    nodes, weights = np.polynomial.legendre.leggauss(theta_nodes)
    cos_t = nodes
    sin_t = np.sqrt(1.0 - cos_t**2)
    phi = 2.0 * math.pi * (np.arange(phi_nodes) + 0.5) / phi_nodes
    w_phi = 2.0 * math.pi / phi_nodes
    total = 0.0
    ga = plane.gradient
    for i in range(theta_nodes):
        nu = np.stack([sin_t[i] * np.cos(phi), sin_t[i] * np.sin(phi),
                       np.full(phi_nodes, cos_t[i])], axis=1)
        pts = b.center + b.radius * nu
        integrand = (g.values(pts) - plane.heights(pts)) * (nu @ ga)
        total += weights[i] * w_phi * integrand.sum()
    return 2.0 * b.radius**2 * total


@dataclass(frozen=True)
class SmoothedGradientCheck:
    eps: float
    sup_gap: float
    sup_gradient: float
    gradient_over_eps: float
    probe_count: int


def smoothed_gradient_check(g: ScalarField, eps: float, seed: int = 0,
                            nodes_per_axis: int = 25,
                            budget: SamplingBudget = SamplingBudget(24, 256)
                            ) -> SmoothedGradientCheck:
    """Gradient collapse under smoothing of a capped field.

    For |g| <= eps^2 * t with gradient bound 1, smoothing at scale eps * t
    leaves a gradient of size O(eps) on the shrunk ball.  Reports the
    sampled sup of |grad g_smoothed| and its ratio to eps.
    """
    b = g.domain
    t = b.radius
    cap = eps * eps * t
    sup_gap = _sampled_sup(lambda pts: np.abs(g.values(pts)), b, seed, budget)
    if sup_gap > cap * (1 + 1e-9):
        raise PreconditionError(
            f"sampled sup |g| = {sup_gap:.3e} exceeds eps^2*t = {cap:.3e}")
    if g.grad_bound > 1.0 + 1e-12:
        raise PreconditionError("certified gradient bound exceeds 1")
    smooth = mollify(g, eps * t, nodes_per_axis)
    inner = Ball(b.center, t - eps * t)
    sup_grad = _sampled_sup(
        lambda pts: np.linalg.norm(smooth.gradients(pts), axis=1),
        inner, seed, budget)
    return SmoothedGradientCheck(eps=eps, sup_gap=sup_gap,
                                 sup_gradient=sup_grad,
                                 gradient_over_eps=sup_grad / eps,
                                 probe_count=budget.total)


def _sampled_sup(fn, b: Ball, seed: int, budget: SamplingBudget) -> float:
    """Deterministic stratified probe of a sup, including the centre point."""
    best = float(np.max(fn(b.center[None, :])))
    edges = shell_edges(b.radius, budget.strata, b.dim)
    for j in range(budget.strata):
        rng = substream(seed, "sup", j)
        pts = sample_shell(rng, b.center, edges[j], edges[j + 1],
                           budget.per_stratum)
        best = max(best, float(np.max(fn(pts))))
    return best
