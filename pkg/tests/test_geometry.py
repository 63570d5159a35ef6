import math

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from porous import (AffinePlane, Ball, BallIndex, MeasureEstimate,
                    PorosityWitness, SamplingBudget, ScalarField,
                    ball_index_query, complement_measure, cross_section_area,
                    enlarge, pullback_porosity_witness, substream,
                    union_measure, unit_ball_volume)
from porous.geometry import contains_any, linear_scan_query
from porous.sampling import sample_shell


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------

def test_unit_ball_volume_closed_forms():
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)
    assert unit_ball_volume(4) == pytest.approx(math.pi**2 / 2.0)


def test_ball_volume_and_open_membership():
    b = Ball([0.0, 0.0, 0.0], 2.0)
    assert b.volume() == pytest.approx(unit_ball_volume(3) * 8.0)
    pts = np.array([[0, 0, 0], [1.999, 0, 0], [2.0, 0, 0], [2.1, 0, 0]],
                   dtype=float)
    assert b.contains(pts).tolist() == [True, True, False, False]


def test_ball_rejects_nonpositive_radius():
    with pytest.raises(ValueError):
        Ball([0.0, 0.0, 0.0], 0.0)


def test_ball_equality_and_hash():
    a = Ball([0.5, 0.5, 0.5], 0.25)
    b = Ball([0.5, 0.5, 0.5], 0.25)
    c = Ball([0.5, 0.5, 0.5], 0.5)
    assert a == b and hash(a) == hash(b)
    assert a != c


def test_enlarge_scales_in_place():
    b = Ball([1.0, 2.0, 3.0], 0.5)
    big = enlarge(b, 3.0)
    assert big.radius == pytest.approx(1.5)
    assert np.array_equal(big.center, b.center)
    with pytest.raises(ValueError):
        enlarge(b, 0.9)


def test_cross_section_area_is_base_content():
    b = Ball(np.zeros(4), 0.1)
    assert cross_section_area(b, 3) == pytest.approx(
        unit_ball_volume(3) * 1e-3)
    with pytest.raises(ValueError):
        cross_section_area(b, 2)


# ---------------------------------------------------------------------------
# planes and fields
# ---------------------------------------------------------------------------

def test_affine_plane_heights_and_embedding():
    plane = AffinePlane(index=1, gradient=np.array([0.5, 0.0, 0.0]),
                        offset=0.25, anchor=np.zeros(3))
    pts = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    assert plane.heights(pts) == pytest.approx([0.25, 0.75])
    emb = plane.embed(pts)
    assert emb.shape == (2, 4)
    assert np.allclose(emb[:, :3], pts)
    assert emb[:, 3] == pytest.approx([0.25, 0.75])
    assert plane.slope == pytest.approx(0.5)


def test_affine_plane_index_validation():
    with pytest.raises(ValueError):
        AffinePlane(index=0, gradient=np.zeros(3), offset=0.0,
                    anchor=np.zeros(3))


def test_scalar_field_fd_gradient_matches_analytic():
    b = Ball(np.zeros(3), 1.0)
    fn = lambda pts: (pts**2).sum(axis=1)
    with_grad = ScalarField(domain=b, fn=fn, grad_bound=2.0,
                            grad_fn=lambda pts: 2.0 * np.atleast_2d(pts))
    fd_only = ScalarField(domain=b, fn=fn, grad_bound=2.0)
    pts = sample_shell(substream(0, "fd"), np.zeros(3), 0.0, 0.9, 64)
    assert np.allclose(fd_only.gradients(pts), with_grad.gradients(pts),
                       atol=1e-6)


def test_measure_estimate_interval_and_exactness():
    est = MeasureEstimate(1.0, 0.1, "monte_carlo", 100)
    assert est.lower() == pytest.approx(0.9)
    assert est.upper() == pytest.approx(1.1)
    exact = MeasureEstimate(1.0, 0.0, "exact", 0)
    assert exact.lower() == exact.upper() == 1.0
    with pytest.raises(ValueError):
        MeasureEstimate(1.0, 0.1, "exact", 0)


# ---------------------------------------------------------------------------
# union membership and measure
# ---------------------------------------------------------------------------

@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=10_000))
def test_contains_any_matches_per_ball_or(seed):
    rng = substream(seed, "contains-any")
    centers = rng.uniform(-1.0, 1.0, size=(17, 3))
    radii = rng.uniform(0.05, 0.6, size=17)
    pts = rng.uniform(-1.5, 1.5, size=(89, 3))
    naive = np.zeros(len(pts), dtype=bool)
    for c, r in zip(centers, radii):
        naive |= ((pts - c) ** 2).sum(axis=1) < r**2
    assert np.array_equal(contains_any(pts, centers, radii), naive)


def test_contains_any_blocking_invariance():
    rng = substream(1, "blocking")
    centers = rng.uniform(0.0, 1.0, size=(5, 3))
    radii = rng.uniform(0.1, 0.3, size=5)
    pts = rng.uniform(0.0, 1.0, size=(1000, 3))
    full = contains_any(pts, centers, radii)
    small = contains_any(pts, centers, radii, block=7)
    assert np.array_equal(full, small)


def _grid_union_oracle(balls, region, res=256):
    """Counting oracle on a res^3 grid over the region's bounding cube.

    Returns (estimate, error bound); the error bound counts the cells the
    union-or-region boundary can straddle, via the signed distance being
    within half a cell diagonal of zero.
    """
    lo = region.center - region.radius
    h = 2.0 * region.radius / res
    steps = h * (np.arange(res) + 0.5)
    half_diag = h * math.sqrt(3.0) / 2.0
    X, Y = np.meshgrid(lo[0] + steps, lo[1] + steps, indexing="ij")
    flat = np.stack([X.ravel(), Y.ravel()], axis=1)
    inside = straddle = 0
    for z in lo[2] + steps:
        pts = np.concatenate([flat, np.full((len(flat), 1), z)], axis=1)
        signed = np.full(len(pts), np.inf)
        for b in balls:
            d = np.linalg.norm(pts - b.center, axis=1) - b.radius
            np.minimum(signed, d, out=signed)
        # intersect with the region ball: inside iff both signs negative
        signed = np.maximum(
            signed, np.linalg.norm(pts - region.center, axis=1) - region.radius)
        inside += int((signed < 0.0).sum())
        straddle += int((np.abs(signed) < half_diag).sum())
    cell = h**3
    return inside * cell, straddle * cell


def test_union_measure_exact_for_disjoint_family():
    region = Ball([0.0, 0.0, 0.0], 2.0)
    balls = [Ball([0.8, 0.0, 0.0], 0.3), Ball([-0.8, 0.0, 0.0], 0.3),
             Ball([0.0, 0.9, 0.0], 0.25)]
    est = union_measure(balls, region, SamplingBudget(8, 64))
    assert est.method == "exact"
    assert est.value == pytest.approx(sum(b.volume() for b in balls),
                                      rel=1e-12)


def test_union_measure_dedupes_exact_duplicates():
    region = Ball([0.0, 0.0, 0.0], 2.0)
    big = Ball([0.0, 0.0, 0.0], 0.5)
    est = union_measure([big, big, big], region, SamplingBudget(8, 64))
    assert est.method == "exact"
    assert est.value == pytest.approx(big.volume(), rel=1e-12)


def test_union_measure_nested_ball_falls_back_to_sampling():
    region = Ball([0.0, 0.0, 0.0], 2.0)
    big = Ball([0.0, 0.0, 0.0], 0.5)
    nested = Ball([0.1, 0.0, 0.0], 0.2)
    est = union_measure([big, nested], region, SamplingBudget(32, 512))
    assert est.method == "monte_carlo"
    assert abs(est.value - big.volume()) <= est.half_width


def test_union_measure_monte_carlo_on_overlap():
    region = Ball([0.0, 0.0, 0.0], 1.5)
    balls = [Ball([0.15, 0.0, 0.0], 0.5), Ball([-0.15, 0.0, 0.0], 0.5)]
    est = union_measure(balls, region, SamplingBudget(32, 512))
    assert est.method == "monte_carlo"
    oracle, err = _grid_union_oracle(balls, region, res=128)
    assert abs(est.value - oracle) <= est.half_width + err


def test_union_measure_against_dense_grid_fifty_balls():
    rng = substream(42, "fifty")
    region = Ball([0.5, 0.5, 0.5], 0.9)
    balls = [Ball(rng.uniform(0.2, 0.8, 3), rng.uniform(0.02, 0.12))
             for _ in range(50)]
    est = union_measure(balls, region, SamplingBudget(64, 1024))
    oracle, err = _grid_union_oracle(balls, region, res=256)
    assert abs(est.value - oracle) <= est.half_width + err


def test_complement_measure_is_region_minus_union():
    region = Ball([0.0, 0.0, 0.0], 1.0)
    balls = [Ball([0.0, 0.0, 0.0], 0.5)]
    comp = complement_measure(balls, region, SamplingBudget(8, 64))
    assert comp.value == pytest.approx(region.volume() - 0.5**3
                                       * unit_ball_volume(3), rel=1e-12)


# ---------------------------------------------------------------------------
# spatial index
# ---------------------------------------------------------------------------

def _random_family(seed, count, spread=10.0):
    rng = substream(seed, "family")
    centers = rng.uniform(-spread, spread, size=(count, 3))
    # radii spanning several octaves exercises the per-octave grids
    radii = np.exp(rng.uniform(math.log(0.01), math.log(2.0), size=count))
    return centers, radii


def test_ball_index_matches_linear_scan_on_probes():
    centers, radii = _random_family(3, 400)
    index = BallIndex(centers, radii)
    rng = substream(4, "probes")
    probes = rng.uniform(-11.0, 11.0, size=(10_000, 3))
    for p in probes[:200]:
        assert np.array_equal(ball_index_query(index, p),
                              linear_scan_query(centers, radii, p))
    any_idx = index.query_any(probes)
    any_scan = contains_any(probes, centers, radii)
    assert np.array_equal(any_idx, any_scan)


def test_ball_index_boundary_points_are_outside():
    centers = np.array([[0.0, 0.0, 0.0]])
    radii = np.array([1.0])
    index = BallIndex(centers, radii)
    assert index.query(np.array([1.0, 0.0, 0.0])).size == 0
    assert index.query(np.array([0.999, 0.0, 0.0])).tolist() == [0]


def test_ball_index_empty_family():
    index = BallIndex(np.zeros((0, 3)), np.zeros(0))
    assert index.query(np.zeros(3)).size == 0
    assert not index.query_any(np.zeros((4, 3))).any()


# ---------------------------------------------------------------------------
# porosity witnesses
# ---------------------------------------------------------------------------

def test_witness_requires_unit_direction_and_positive_radius():
    with pytest.raises(ValueError):
        PorosityWitness(direction=np.array([1.0, 1.0, 0.0, 0.0]), step=1.0,
                        radius=0.5)
    with pytest.raises(ValueError):
        PorosityWitness(direction=np.array([1.0, 0.0, 0.0, 0.0]), step=1.0,
                        radius=0.0)


def test_witness_hole_center():
    w = PorosityWitness(direction=np.array([0.0, 1.0, 0.0, 0.0]), step=2.0,
                        radius=0.5)
    assert w.hole_center(np.zeros(4)) == pytest.approx([0.0, 2.0, 0.0, 0.0])


def test_pullback_witness_maps_hole_into_hole():
    # a surjection of R^6 onto R^4; probes of the pulled-back hole must
    # land in the original hole under the forward map
    rng = substream(9, "pullback")
    mat = rng.normal(size=(4, 6))
    direction = np.array([1.0, 0.0, 0.0, 0.0])
    wit = PorosityWitness(direction=direction, step=1.0, radius=0.25)
    back = pullback_porosity_witness(mat, None, wit)
    assert math.isclose(np.linalg.norm(back.direction), 1.0, abs_tol=1e-9)

    base = rng.normal(size=6)
    target = mat @ base + wit.step * wit.direction   # original hole centre
    pulled_center = back.hole_center(base)
    probes = pulled_center + back.radius * 0.999 * _unit_vectors(rng, 1000, 6)
    images = probes @ mat.T
    dist = np.linalg.norm(images - target, axis=1)
    assert np.all(dist < wit.radius + 1e-9)


def _unit_vectors(rng, count, dim):
    v = rng.normal(size=(count, dim))
    return v * (rng.uniform(0.0, 1.0, count) ** (1.0 / dim)
                / np.linalg.norm(v, axis=1))[:, None]


def test_pullback_rejects_rank_deficient_and_square():
    wit = PorosityWitness(direction=np.array([1.0, 0.0, 0.0, 0.0]), step=1.0,
                          radius=0.25)
    with pytest.raises(ValueError):
        pullback_porosity_witness(np.eye(4), None, wit)
    degenerate = np.zeros((4, 6))
    degenerate[0, 0] = 1.0
    with pytest.raises(ValueError):
        pullback_porosity_witness(degenerate, None, wit)
