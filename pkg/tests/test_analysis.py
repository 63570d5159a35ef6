import math

import numpy as np
import pytest
from scipy import integrate

from porous import (AffinePlane, Ball, BlendPreconditionError,
                    PreconditionError, SamplingBudget, ScalarField,
                    area_lower_bound_check, blend, boundary_cross_term,
                    bump_field, flatten_residual, make_cutoff, make_mollifier,
                    mollifier_mass, mollify, smoothed_gradient_check,
                    sobolev_ratio, substream, unit_ball_volume)
from porous.analysis import BUMP_SLOPE_SUP, convolution_nodes
from porous.sampling import sample_shell

CENTER = np.array([0.5, 0.5, 0.5])


def _fd_gradients(fn, pts, step=1e-7):
    out = np.zeros_like(pts)
    for j in range(pts.shape[1]):
        shift = np.zeros(pts.shape[1])
        shift[j] = step
        out[:, j] = (fn(pts + shift) - fn(pts - shift)) / (2.0 * step)
    return out


# ---------------------------------------------------------------------------
# mollifier
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("eps", [1.0, 0.1])
def test_mollifier_mass_is_one(eps):
    for n in (3, 4):
        moll = make_mollifier(n)
        # adaptive quadrature of the radial mass, independent of the
        # Legendre rule used to normalise the kernel
        area = n * unit_ball_volume(n)

        def radial(rho):
            u = rho / eps
            return (moll.kappa * math.exp(1.0 / (u * u - 1.0)) / eps**n
                    * rho ** (n - 1))

        val, err = integrate.quad(radial, 0.0, eps * (1.0 - 1e-12),
                                  epsabs=1e-13, epsrel=1e-13, limit=200)
        assert err < 1e-9
        assert abs(area * val - 1.0) <= 1e-6
        assert abs(mollifier_mass(moll, eps) - 1.0) <= 1e-6


def test_mollifier_density_supported_on_unit_ball():
    moll = make_mollifier(3)
    pts = np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0], [0.999, 0, 0],
                    [1.0, 0.0, 0.0], [1.5, 0.0, 0.0]])
    dens = moll.density(pts)
    assert dens[0] > dens[1] > dens[2] > 0
    assert dens[3] == 0.0 and dens[4] == 0.0


def test_scaled_density_integrates_like_unscaled():
    moll = make_mollifier(3)
    pts = np.array([[0.05, 0.0, 0.0]])
    assert moll.scaled_density(pts, 0.1) == pytest.approx(
        moll.density(pts / 0.1)[0] / 0.1**3)


def test_convolution_nodes_unit_mass_inside_ball():
    for npa in (5, 9, 13):
        offsets, weights = convolution_nodes(3, npa)
        assert np.all((offsets**2).sum(axis=1) < 1.0)
        assert np.all(weights > 0)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValueError):
        convolution_nodes(3, 2)


# ---------------------------------------------------------------------------
# smoothing
# ---------------------------------------------------------------------------

def _affine_field(gradient, offset, ball):
    g = np.asarray(gradient, dtype=float)
    return ScalarField(
        domain=ball,
        fn=lambda pts: np.atleast_2d(pts) @ g + offset,
        grad_fn=lambda pts: np.broadcast_to(g, np.atleast_2d(pts).shape).copy(),
        grad_bound=float(np.linalg.norm(g)))


def test_mollify_fixes_affine_fields():
    ball = Ball(CENTER, 1.0)
    aff = _affine_field([0.3, -0.2, 0.1], 0.7, ball)
    smooth = mollify(aff, 0.2)
    pts = sample_shell(substream(0, "affine"), CENTER, 0.0, 0.7, 512)
    assert np.max(np.abs(smooth.values(pts) - aff.values(pts))) <= 1e-8
    assert smooth.domain.radius == pytest.approx(0.8)


def test_mollify_drift_bounded_by_eps_times_slope():
    # oscillatory field rescaled to a unit gradient bound
    ball = Ball(CENTER, 1.0)
    raw_slope = 2.0 * 20.0 * 1.0   # sup |d/drho sin(20 rho^2)| * sup rho
    scale = 1.0 / raw_slope

    def fn(pts):
        rho2 = ((np.atleast_2d(pts) - CENTER) ** 2).sum(axis=1)
        return scale * np.sin(20.0 * rho2)

    g = ScalarField(domain=ball, fn=fn, grad_bound=1.0)
    eps = 0.05
    smooth = mollify(g, eps)
    probes = sample_shell(substream(1, "drift"), CENTER, 0.0, 0.9, 1000)
    drift = np.abs(smooth.values(probes) - g.values(probes))
    assert float(drift.max()) <= eps

    # higher-order rule as the oracle: same bound, close agreement
    fine = mollify(g, eps, nodes_per_axis=17)
    drift_fine = np.abs(fine.values(probes) - g.values(probes))
    assert float(drift_fine.max()) <= eps
    assert float(np.abs(fine.values(probes)
                        - smooth.values(probes)).max()) <= 1e-3


def test_mollify_rejects_eps_outside_domain():
    ball = Ball(CENTER, 0.1)
    g = _affine_field([1.0, 0.0, 0.0], 0.0, ball)
    with pytest.raises(ValueError):
        mollify(g, 0.1)
    with pytest.raises(ValueError):
        mollify(g, 0.0)


# ---------------------------------------------------------------------------
# bump fields
# ---------------------------------------------------------------------------

def test_bump_field_peak_and_support():
    bump = bump_field(CENTER, 0.25, 0.01)
    assert bump.values(CENTER[None, :])[0] == pytest.approx(0.01, rel=1e-12)
    edge = CENTER + np.array([0.25, 0.0, 0.0])
    assert bump.values(edge[None, :])[0] == 0.0
    assert bump.values((CENTER + [0.3, 0, 0])[None, :])[0] == 0.0


def test_bump_field_gradient_analytic_vs_fd():
    bump = bump_field(CENTER, 0.25, 0.01)
    pts = sample_shell(substream(2, "bump"), CENTER, 0.0, 0.24, 256)
    fd = _fd_gradients(bump.values, pts)
    assert np.allclose(bump.gradients(pts), fd, atol=1e-5)


def test_bump_field_certified_slope_is_sharp():
    bump = bump_field(CENTER, 0.25, 0.01)
    rho = np.linspace(1e-6, 0.25 - 1e-6, 20001)
    pts = CENTER + rho[:, None] * np.array([1.0, 0.0, 0.0])
    slopes = np.linalg.norm(bump.gradients(pts), axis=1)
    observed = float(slopes.max())
    cert = bump.grad_bound
    assert observed <= cert
    assert observed >= 0.999 * cert    # certified bound is not slack
    assert cert == pytest.approx(0.01 * BUMP_SLOPE_SUP / 0.25)


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

def test_cutoff_exact_plateau_and_support():
    t, eps = 0.2, 0.25
    cut = make_cutoff(Ball(CENTER, t), eps)
    rng = substream(3, "cutoff")
    inner = sample_shell(rng, CENTER, 0.0, t * (1 - 2 * eps), 512)
    outer = sample_shell(rng, CENTER, t * (1 - eps), t, 512)
    assert np.all(cut.values(inner) == 1.0)
    assert np.all(cut.values(outer) == 0.0)
    band = sample_shell(rng, CENTER, t * (1 - 2 * eps), t * (1 - eps), 512)
    vals = cut.values(band)
    assert np.all((vals >= 0.0) & (vals <= 1.0))


def test_cutoff_gradient_bounded_on_ring_probes():
    t, eps = 0.2, 0.25
    cut = make_cutoff(Ball(CENTER, t), eps)
    cap = 3.0 / (eps * t)
    assert cut.slope_cap == pytest.approx(cap)
    probes = sample_shell(substream(4, "ring"), CENTER,
                          t * (1 - 2 * eps), t * (1 - eps), 10_000)
    grads = np.linalg.norm(cut.gradients(probes), axis=1)
    assert float(grads.max()) <= cap * (1.0 + 1e-9)
    # finite differences as the oracle on a subsample
    fd = _fd_gradients(cut.values, probes[:500], step=1e-8)
    assert np.allclose(np.linalg.norm(fd, axis=1), grads[:500],
                       rtol=1e-4, atol=1e-3)


def test_cutoff_band_matches_unshortcut_convolution():
    # the radial short-circuit must be a pure speedup: band values agree
    # with mollifying the raw ramp and evaluating it everywhere
    t, eps = 0.2, 0.25
    ball = Ball(CENTER, t)
    cut = make_cutoff(ball, eps)
    hi = t - 5.0 * eps * t / 3.0
    lo = t - 4.0 * eps * t / 3.0
    slope = 3.0 / (eps * t)
    raw = ScalarField(
        domain=ball,
        fn=lambda pts: np.clip(
            (lo - np.linalg.norm(np.atleast_2d(pts) - CENTER, axis=1))
            * slope, 0.0, 1.0),
        grad_bound=slope)
    full = mollify(raw, eps * t / 3.0)
    pts = sample_shell(substream(5, "band"), CENTER, hi * 0.5,
                       t * (1 - eps) * 0.999, 2000)
    assert np.max(np.abs(cut.values(pts) - full.values(pts))) <= 1e-12


def test_cutoff_rejects_bad_eps():
    with pytest.raises(ValueError):
        make_cutoff(Ball(CENTER, 0.2), 0.5)
    with pytest.raises(ValueError):
        make_cutoff(Ball(CENTER, 0.2), 0.0)


# ---------------------------------------------------------------------------
# blending
# ---------------------------------------------------------------------------

def test_blend_gradient_bound_on_annulus():
    t, eps = 0.2, 0.1
    ball = Ball(CENTER, t)
    outer_dom = Ball(CENTER, 0.5)
    cut = make_cutoff(ball, eps)
    # fields agreeing to eps^2 * t across the matching annulus
    aff = _affine_field([0.02, 0.0, 0.0], 0.01, outer_dom)
    wobble = bump_field(CENTER, 2.0 * t, 0.8 * eps * eps * t)

    def inner_fn(pts):
        return aff.values(pts) + wobble.values(pts)

    def inner_grad(pts):
        return aff.gradients(pts) + wobble.gradients(pts)

    inner = ScalarField(domain=outer_dom, fn=inner_fn, grad_fn=inner_grad,
                        grad_bound=aff.grad_bound + wobble.grad_bound)
    v = blend(inner, aff, cut)
    bound = max(inner.grad_bound, aff.grad_bound) + 3.0 * eps
    assert v.grad_bound == pytest.approx(bound)
    probes = sample_shell(substream(6, "blend"), CENTER,
                          cut.plateau_radius, cut.support_radius, 4000)
    fd = _fd_gradients(v.values, probes, step=1e-8)
    assert float(np.linalg.norm(fd, axis=1).max()) <= bound * (1 + 1e-6)


def test_blend_interpolates_between_fields():
    t, eps = 0.2, 0.1
    cut = make_cutoff(Ball(CENTER, t), eps)
    outer_dom = Ball(CENTER, 0.5)
    inner = _affine_field([0.0, 0.0, 0.0], 5e-4, outer_dom)
    outer = _affine_field([0.0, 0.0, 0.0], 0.0, outer_dom)
    v = blend(inner, outer, cut, match_tol=1e-3)
    deep = sample_shell(substream(7, "deep"), CENTER, 0.0,
                        cut.plateau_radius, 128)
    far = sample_shell(substream(7, "far"), CENTER, cut.support_radius,
                       0.45, 128)
    assert np.allclose(v.values(deep), 5e-4)
    assert np.allclose(v.values(far), 0.0)


def test_blend_rejects_mismatched_fields():
    t, eps = 0.2, 0.1
    cut = make_cutoff(Ball(CENTER, t), eps)
    outer_dom = Ball(CENTER, 0.5)
    inner = _affine_field([0.0, 0.0, 0.0], 1.0, outer_dom)   # gap 1 >> tol
    outer = _affine_field([0.0, 0.0, 0.0], 0.0, outer_dom)
    with pytest.raises(BlendPreconditionError):
        blend(inner, outer, cut)


# ---------------------------------------------------------------------------
# embedding-type ratio
# ---------------------------------------------------------------------------

def test_sobolev_ratio_on_compact_bump():
    b = Ball(CENTER, 0.25)
    g = bump_field(CENTER, 0.2, 0.2 / BUMP_SLOPE_SUP)   # unit slope
    check = sobolev_ratio(g, b, alpha=0.4)
    assert check.exponent == pytest.approx(6.0)
    assert math.isfinite(check.ratio) and check.ratio > 0
    assert check.vanish_fraction >= 0.4


def test_sobolev_ratio_stable_under_resolution_doubling():
    b = Ball(CENTER, 0.25)
    g = bump_field(CENTER, 0.2, 0.2 / BUMP_SLOPE_SUP)
    coarse = sobolev_ratio(g, b, alpha=0.4, budget=SamplingBudget(32, 512))
    fine = sobolev_ratio(g, b, alpha=0.4, budget=SamplingBudget(32, 1024))
    assert abs(fine.ratio - coarse.ratio) <= 0.05 * coarse.ratio


def test_sobolev_ratio_requires_vanishing_fraction():
    b = Ball(CENTER, 0.25)
    g = bump_field(CENTER, 0.3, 0.3 / BUMP_SLOPE_SUP)   # supported past b
    with pytest.raises(PreconditionError):
        sobolev_ratio(g, b, alpha=0.9)
    with pytest.raises(ValueError):
        sobolev_ratio(g, b, alpha=0.0)


# ---------------------------------------------------------------------------
# peak-area estimate
# ---------------------------------------------------------------------------

def _cone_field(h, ball):
    """Radial ramp peaking at h with unit gradient, vanishing past rho=h."""

    def fn(pts):
        rho = np.linalg.norm(np.atleast_2d(pts) - ball.center, axis=1)
        return np.maximum(h - rho, 0.0)

    def grad(pts):
        pts = np.atleast_2d(pts)
        delta = pts - ball.center
        rho = np.linalg.norm(delta, axis=1)
        out = np.zeros_like(pts)
        live = (rho > 1e-300) & (rho < h)
        out[live] = -delta[live] / rho[live, None]
        return out

    return ScalarField(domain=ball, fn=fn, grad_fn=grad, grad_bound=1.0)


def test_area_check_matches_cone_closed_form():
    h = 0.1
    b = Ball(CENTER, 4.0 * h)
    g = _cone_field(h, b)
    check = area_lower_bound_check(g, b, h, budget=SamplingBudget(32, 2048))
    # superlevel {g >= h/2} is the rho <= h/2 ball with |grad| = 1 on it
    exact_rhs = unit_ball_volume(3) * (h / 2.0) ** 3
    assert check.lhs == pytest.approx(unit_ball_volume(3) * h**3, rel=1e-12)
    assert abs(check.rhs - exact_rhs) <= check.rhs_half_width + 1e-5
    assert check.ratio == pytest.approx(8.0, rel=0.25)


def test_area_check_ratio_stable_across_h_dilation():
    ratios = []
    for seed, h in enumerate((0.1, 0.05, 0.025)):
        b = Ball(CENTER, 4.0 * h)
        g = _cone_field(h, b)
        check = area_lower_bound_check(g, b, h, seed=seed,
                                       budget=SamplingBudget(32, 2048))
        ratios.append(check.ratio)
    mid = sorted(ratios)[1]
    assert all(abs(r - mid) <= 0.2 * mid for r in ratios)


def test_area_check_preconditions():
    h = 0.1
    b = Ball(CENTER, 4.0 * h)
    with pytest.raises(ValueError):
        area_lower_bound_check(_cone_field(h, b), b, 0.0)
    with pytest.raises(PreconditionError):
        area_lower_bound_check(_cone_field(h, b), b, 0.5)   # never reaches h
    steep = ScalarField(domain=b, fn=lambda pts: np.zeros(len(pts)),
                        grad_bound=2.0)
    with pytest.raises(PreconditionError):
        area_lower_bound_check(steep, b, h)


# ---------------------------------------------------------------------------
# energy splitting against a reference slope
# ---------------------------------------------------------------------------

def test_flatten_residual_identity_and_shape():
    b = Ball(CENTER, 0.2)
    plane = AffinePlane(index=1, gradient=np.array([0.5, 0.0, 0.0]),
                        offset=0.0, anchor=CENTER)
    eps = 0.02
    wobble = bump_field(CENTER, 0.8 * b.radius, 0.9 * eps * b.radius)

    def fn(pts):
        return plane.heights(pts) + wobble.values(pts)

    def grad(pts):
        g = np.broadcast_to(plane.gradient, np.atleast_2d(pts).shape).copy()
        return g + wobble.gradients(pts)

    g = ScalarField(domain=b, fn=fn, grad_fn=grad,
                    grad_bound=plane.slope + wobble.grad_bound)
    check = flatten_residual(g, plane, b, eps)
    assert check.identity_gap <= 1e-6
    assert abs(check.residual) <= check.bound_scale * eps * b.volume() * 1.001

    # divergence-theorem form as the independent oracle for the cross term
    boundary = boundary_cross_term(g, plane, b)
    assert abs(check.cross_term - boundary) <= check.half_width + 1e-9


def test_flatten_residual_rejects_wide_gap():
    b = Ball(CENTER, 0.2)
    plane = AffinePlane(index=1, gradient=np.zeros(3), offset=0.0,
                        anchor=CENTER)
    tall = bump_field(CENTER, 0.8 * b.radius, 0.1)
    with pytest.raises(PreconditionError):
        flatten_residual(tall, plane, b, eps=0.001)


def test_boundary_cross_term_needs_three_dimensions():
    b = Ball(np.zeros(4), 0.2)
    plane = AffinePlane(index=1, gradient=np.zeros(4), offset=0.0,
                        anchor=np.zeros(4))
    g = ScalarField(domain=b, fn=lambda pts: np.zeros(len(np.atleast_2d(pts))),
                    grad_bound=0.0)
    with pytest.raises(ValueError):
        boundary_cross_term(g, plane, b)


# ---------------------------------------------------------------------------
# gradient collapse under smoothing
# ---------------------------------------------------------------------------

def test_smoothed_gradient_check_reports_small_constant():
    eps, t = 0.2, 0.25
    cap = eps * eps * t
    g = bump_field(CENTER, t, cap)
    assert g.grad_bound <= 1.0
    check = smoothed_gradient_check(g, eps)
    assert check.sup_gap <= cap * (1 + 1e-9)
    assert check.sup_gradient <= check.gradient_over_eps * eps * (1 + 1e-12)
    # doubled node count as the oracle: the reported constant is stable
    fine = smoothed_gradient_check(g, eps, nodes_per_axis=49)
    assert abs(fine.gradient_over_eps - check.gradient_over_eps) \
        <= 0.05 * max(check.gradient_over_eps, 1e-12)


def test_smoothed_gradient_check_rejects_uncapped_field():
    eps, t = 0.2, 0.25
    g = bump_field(CENTER, t, 10.0 * eps * eps * t)
    with pytest.raises(PreconditionError):
        smoothed_gradient_check(g, eps)
