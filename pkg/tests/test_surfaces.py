import math

import numpy as np
import pytest

from porous import (AffinePlane, Ball, BumpSpec, ParseError,
                    PreconditionError, SamplingBudget, SurfaceC1, c1_norm,
                    corpus_generate, graph_extract, graph_measure_in,
                    load_corpus_spec, reference_distance, reference_surface,
                    sn_membership, substream)
from porous.surfaces import SLOPE_FACTOR
from porous.sampling import sample_shell

WINDOW = Ball([0.5, 0.5, 0.5], 0.25)


# ---------------------------------------------------------------------------
# bump specs
# ---------------------------------------------------------------------------

def test_bump_spec_peak_support_and_slope_constant():
    b = BumpSpec((0.5, 0.5, 0.5), 0.01, 0.25)
    assert b.values(np.array([[0.5, 0.5, 0.5]]))[0] == pytest.approx(0.01)
    assert b.values(np.array([[0.75, 0.5, 0.5]]))[0] == 0.0   # closed edge
    assert b.values(np.array([[0.8, 0.5, 0.5]]))[0] == 0.0
    assert SLOPE_FACTOR == pytest.approx(96.0 / (25.0 * math.sqrt(5.0)))
    assert b.slope_max == pytest.approx(SLOPE_FACTOR * 0.01 / 0.25)


def test_bump_spec_slope_max_is_attained_radially():
    # closed form: |d/du (1-u^2)^3| peaks at u = 1/sqrt(5)
    b = BumpSpec((0.0, 0.0, 0.0), 0.01, 0.2)
    rho = np.linspace(1e-6, 0.2 - 1e-6, 50001)
    pts = np.zeros((len(rho), 3))
    pts[:, 0] = rho
    slopes = np.linalg.norm(b.gradients(pts), axis=1)
    assert float(slopes.max()) == pytest.approx(b.slope_max, rel=1e-8)
    arg = rho[np.argmax(slopes)] / 0.2
    assert arg == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-3)


def test_bump_spec_gradient_matches_finite_differences():
    b = BumpSpec((0.5, 0.4, 0.6), 0.02, 0.3)
    pts = sample_shell(substream(0, "bump-fd"), np.array([0.5, 0.4, 0.6]),
                       0.0, 0.29, 200)
    step = 1e-7
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        fd = (b.values(pts + e) - b.values(pts - e)) / (2 * step)
        assert np.allclose(b.gradients(pts)[:, j], fd, atol=1e-5)


def test_bump_spec_rejects_bad_width():
    with pytest.raises(ValueError):
        BumpSpec((0.0, 0.0, 0.0), 0.1, 0.0)


# ---------------------------------------------------------------------------
# surfaces
# ---------------------------------------------------------------------------

def test_reference_surface_is_flat_embedding():
    f = reference_surface(3)
    pts = np.array([[0.1, 0.2, 0.3], [0.9, 0.8, 0.7]])
    vals = f.value(pts)
    assert np.allclose(vals[:, :3], pts)
    assert np.allclose(vals[:, 3], 0.0)


def test_surface_height_components_add_to_plane():
    plane = AffinePlane(index=1, gradient=np.array([0.01, 0.0, 0.0]),
                        offset=0.002, anchor=np.full(3, 0.5))
    bump = BumpSpec((0.5, 0.5, 0.5), 0.005, 0.2)
    f = SurfaceC1(plane=plane, components=((3, bump),))
    pts = sample_shell(substream(1, "surf"), np.full(3, 0.5), 0.0, 0.2, 64)
    vals = f.value(pts)
    assert np.allclose(vals[:, :3], pts)
    assert np.allclose(vals[:, 3], plane.heights(pts) + bump.values(pts))


def test_surface_horizontal_components_shift_base():
    plane = AffinePlane(index=1, gradient=np.zeros(3), offset=0.0,
                        anchor=np.full(3, 0.5))
    bump = BumpSpec((0.5, 0.5, 0.5), 0.003, 0.2)
    f = SurfaceC1(plane=plane, components=((0, bump),))
    pts = np.array([[0.5, 0.5, 0.5]])
    vals = f.value(pts)
    assert vals[0, 0] == pytest.approx(0.5 + 0.003)
    assert vals[0, 3] == pytest.approx(0.0)


def test_surface_jacobian_matches_finite_differences():
    plane = AffinePlane(index=1, gradient=np.array([0.01, -0.02, 0.0]),
                        offset=0.0, anchor=np.full(3, 0.5))
    f = SurfaceC1(plane=plane, components=(
        (3, BumpSpec((0.5, 0.5, 0.5), 0.004, 0.25)),
        (1, BumpSpec((0.45, 0.55, 0.5), 0.002, 0.2))))
    pts = sample_shell(substream(2, "jac"), np.full(3, 0.5), 0.0, 0.2, 32)
    jac = f.jacobian(pts)
    step = 1e-7
    for j in range(3):
        e = np.zeros(3)
        e[j] = step
        fd = (f.value(pts + e) - f.value(pts - e)) / (2 * step)
        assert np.allclose(jac[:, :, j], fd, atol=1e-5)


# ---------------------------------------------------------------------------
# norms and distances
# ---------------------------------------------------------------------------

def test_c1_norm_probe_close_to_declared_on_bump_corpus():
    rng = substream(3, "norm-corpus")
    for i in range(10):
        amp = float(rng.uniform(0.002, 0.01))
        width = float(rng.uniform(0.15, 0.3))
        center = tuple(rng.uniform(0.3, 0.7, 3))
        plane = AffinePlane(index=1, gradient=np.zeros(3), offset=0.0,
                            anchor=np.full(3, 0.5))
        f = SurfaceC1(plane=plane, components=((3, BumpSpec(center, amp,
                                                            width)),))
        norm = c1_norm(f, probe_per_axis=33)
        assert norm.declared_bound is not None
        assert norm.value <= norm.declared_bound
        assert norm.declared_bound <= 1.01 * norm.value


def test_reference_distance_flat_surface_is_zero():
    probe, certified = reference_distance(reference_surface(3))
    assert probe == pytest.approx(0.0, abs=1e-12)
    assert certified == pytest.approx(0.0, abs=1e-12)


def test_reference_distance_certified_dominates_probe():
    plane = AffinePlane(index=1, gradient=np.array([0.004, 0.0, 0.0]),
                        offset=0.001, anchor=np.full(3, 0.5))
    f = SurfaceC1(plane=plane, components=(
        (3, BumpSpec((0.5, 0.5, 0.5), 0.002, 0.2)),))
    probe, certified = reference_distance(f)
    assert probe <= certified
    assert certified <= (abs(0.001) + 0.004 * math.sqrt(3) * 0.5 + 0.002
                         + plane.slope + SLOPE_FACTOR * 0.002 / 0.2) + 1e-12


# ---------------------------------------------------------------------------
# graph extraction
# ---------------------------------------------------------------------------

def test_graph_extract_affine_recovers_plane_heights():
    grad = np.array([0.004, -0.003, 0.0])
    plane = AffinePlane(index=1, gradient=grad, offset=0.001,
                        anchor=np.full(3, 0.5))
    f = SurfaceC1(plane=plane)
    patch = graph_extract(f, WINDOW, r_bound=1.0)
    pts = sample_shell(substream(4, "affine-extract"), WINDOW.center, 0.0,
                       WINDOW.radius * 0.9, 500)
    assert np.max(np.abs(patch.g.values(pts) - plane.heights(pts))) <= 1e-10
    assert np.max(np.abs(patch.g.gradients(pts) - grad)) <= 1e-8


def test_graph_extract_round_trip_with_horizontal_bump():
    # horizontal perturbation makes the inversion non-trivial; forward
    # evaluation of the surface is the oracle for the recovered heights
    plane = AffinePlane(index=1, gradient=np.array([0.001, 0.0, 0.0]),
                        offset=0.0, anchor=np.full(3, 0.5))
    f = SurfaceC1(plane=plane, components=(
        (0, BumpSpec((0.5, 0.5, 0.5), 0.0006, 0.3)),
        (3, BumpSpec((0.55, 0.45, 0.5), 0.0006, 0.3))))
    patch = graph_extract(f, WINDOW, r_bound=1.0)
    u = sample_shell(substream(5, "roundtrip"), WINDOW.center, 0.0,
                     WINDOW.radius * 0.8, 1000)
    image = f.value(u)
    heights = patch.g.values(image[:, :3])
    assert np.max(np.abs(heights - image[:, 3])) <= 1e-10


def test_graph_extract_rejects_distant_surface():
    plane = AffinePlane(index=1, gradient=np.array([0.5, 0.0, 0.0]),
                        offset=0.3, anchor=np.full(3, 0.5))
    with pytest.raises(PreconditionError):
        graph_extract(SurfaceC1(plane=plane), WINDOW, r_bound=1.0 / 64.0)


def test_graph_measure_of_flat_patch_is_window_volume():
    patch = graph_extract(reference_surface(3), WINDOW, r_bound=1.0)
    est = graph_measure_in(patch, lambda pts: np.ones(len(pts), dtype=bool),
                           SamplingBudget(8, 64))
    assert est.value == pytest.approx(WINDOW.volume(), rel=1e-9)


def test_sn_membership_verdicts():
    patch = graph_extract(reference_surface(3), WINDOW, r_bound=1.0)
    everything = lambda pts: np.ones(len(pts), dtype=bool)
    nothing = lambda pts: np.zeros(len(pts), dtype=bool)
    budget = SamplingBudget(8, 64)
    member = sn_membership(patch, everything, WINDOW.volume() / 2, budget)
    assert member.status == "member"
    assert member.margin > 0
    non = sn_membership(patch, nothing, 0.01, budget)
    assert non.status == "non-member"
    exact_line = sn_membership(patch, everything, WINDOW.volume(), budget)
    assert exact_line.status == "indeterminate"
    with pytest.raises(ValueError):
        sn_membership(patch, everything, -1.0, budget)


# ---------------------------------------------------------------------------
# corpus generation
# ---------------------------------------------------------------------------

def test_plane_corpus_is_the_full_grid():
    params = {"gradients": [[0.01, 0.0, 0.0], [0.0, 0.01, 0.0]],
              "offsets": [0.005, 0.006, 0.007]}
    entries = corpus_generate("plane", params, seed=0)
    assert len(entries) == 6
    assert all(e.kind == "plane" for e in entries)
    assert [e.index for e in entries] == list(range(6))


def test_corpus_generation_is_deterministic():
    params = {"count": 5, "amplitude": [1e-4, 3e-4], "width": [0.1, 0.2]}
    a = corpus_generate("bump", params, seed=11)
    b = corpus_generate("bump", params, seed=11)
    for ea, eb in zip(a, b):
        pts = sample_shell(substream(6, "det"), WINDOW.center, 0.0, 0.2, 64)
        assert np.array_equal(ea.patch.g.values(pts), eb.patch.g.values(pts))
        assert ea.patch.c1_bound == eb.patch.c1_bound
    c = corpus_generate("bump", params, seed=12)
    assert any(a[i].patch.c1_bound != c[i].patch.c1_bound for i in range(5))


def test_corpus_ceiling_is_enforced():
    params = {"count": 1, "amplitude": [0.5, 0.5], "width": [0.1, 0.1]}
    with pytest.raises(ValueError):
        corpus_generate("bump", params, seed=0)
    params["c1_ceiling"] = 20.0
    assert len(corpus_generate("bump", params, seed=0)) == 1


def test_corpus_rejects_unknown_kind():
    with pytest.raises(ValueError):
        corpus_generate("spline", {}, seed=0)


def test_noise_corpus_certified_exactly_at_strength():
    params = {"count": 3, "grains": 12, "grain_width": 0.12,
              "strength": 0.004, "c1_ceiling": 0.005}
    entries = corpus_generate("mollified-noise", params, seed=7)
    for e in entries:
        assert e.patch.c1_bound == pytest.approx(0.004, rel=1e-12)


def test_corpus_patches_declare_valid_c1_bounds(corpus_entries):
    rng = substream(8, "corpus-c1")
    pts = rng.uniform(0.3, 0.7, size=(256, 3))
    for e in corpus_entries:
        sup_val = float(np.abs(e.patch.g.values(pts)).max())
        sup_grad = float(np.linalg.norm(e.patch.g.gradients(pts),
                                        axis=1).max())
        assert max(sup_val, sup_grad) <= e.patch.c1_bound * (1 + 1e-9)
        assert e.patch.c1_bound <= 1.0 / 64.0 + 1e-12


def test_demo_corpus_composition(corpus_entries):
    kinds = {}
    for e in corpus_entries:
        kinds[e.kind] = kinds.get(e.kind, 0) + 1
    assert len(corpus_entries) == 50
    assert kinds == {"plane": 16, "bump": 12, "multi-bump": 12,
                     "mollified-noise": 10}


def test_load_corpus_spec_validation(tmp_path):
    bad_json = tmp_path / "bad.json"
    bad_json.write_text("{not json")
    with pytest.raises(ParseError):
        load_corpus_spec(bad_json)
    not_list = tmp_path / "obj.json"
    not_list.write_text('{"kind": "plane"}')
    with pytest.raises(ParseError):
        load_corpus_spec(not_list)
    missing = tmp_path / "missing.json"
    missing.write_text('[{"kind": "plane"}]')
    with pytest.raises(ParseError):
        load_corpus_spec(missing)
