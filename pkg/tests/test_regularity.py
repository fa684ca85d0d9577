"""Chamber meshes, image graphs, Whitney ratios, lifts, envelopes."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from chevalley.errors import UsageError
from chevalley.probe import fiber_value_interval, sample_fiber
from chevalley.regularity import (
    build_chamber_mesh,
    build_image_graph,
    envelope_at,
    envelope_functions,
    image_pair_ratio,
    lift_derivatives,
    whitney_ratio,
    whitney_study,
)


def test_mesh_vertices_respect_chamber_and_ball(rs_cache):
    rs = rs_cache("B2")
    mesh = build_chamber_mesh(rs, 2.0, 0.1)
    v = mesh.vertices
    assert np.all(v[:, 0] >= v[:, 1] - 1e-12)
    assert np.all(v[:, 1] >= -1e-12)
    assert np.all(np.linalg.norm(v, axis=1) <= 2.0 + 1e-9)


def test_mesh_vertex_count_tracks_chamber_volume(rs_cache):
    """Count ~ ball volume / (group order * h^n), within a factor of two."""
    rs = rs_cache("B2")
    a, h = 2.0, 0.1
    mesh = build_chamber_mesh(rs, a, h)
    predicted = math.pi * a ** 2 / 8 / h ** 2  # |W| = 8
    assert predicted / 2 <= mesh.size <= 2 * predicted


def test_mesh_pitch_precondition(rs_cache):
    with pytest.raises(UsageError):
        build_chamber_mesh(rs_cache("B2"), 1.0, 0.5)


def test_mesh_rank_one_interval(rs_cache):
    rs = rs_cache("A1")
    mesh = build_chamber_mesh(rs, 1.0, 0.05)
    assert np.all(mesh.vertices >= -1e-12) and np.all(mesh.vertices <= 1 + 1e-12)
    assert mesh.size == 21


def test_a1_ratio_is_one(basis_cache, rs_cache):
    """The image of [0, a] under x -> x^2 is an interval: ratio exactly 1."""
    b, rs = basis_cache("A1"), rs_cache("A1")
    mesh = build_chamber_mesh(rs, 1.0, 0.02)
    g = build_image_graph(b, rs, mesh)
    rep = whitney_ratio(g, pairs=500, seed=2)
    assert abs(rep.max_ratio - 1.0) <= 1e-3
    assert rep.min_ratio >= 1.0 - 1e-6


def test_b2_boundary_pair_arc_length(basis_cache, rs_cache):
    """Pair (0,0)-(2,1) in image coordinates: the geodesic hugs the boundary
    parabola p2 = p1^2/4; ratio = arc length / chord, via quadrature."""
    b, rs = basis_cache("B2"), rs_cache("B2")
    mesh = build_chamber_mesh(rs, 1.5, 0.02)
    g = build_image_graph(b, rs, mesh)
    ratio = image_pair_ratio(g, [0.0, 0.0], [1.0, 1.0])
    arc, _ = quad(lambda p: math.sqrt(1 + p * p / 4), 0.0, 2.0)
    expected = arc / math.sqrt(5.0)
    assert abs(expected - 1.0266) < 1e-3  # the closed form itself
    assert abs(ratio - expected) <= 0.01


def test_ratios_at_least_one(basis_cache, rs_cache):
    """Graph paths cannot beat the straight image segment."""
    for name in ("B2", "G2"):
        b, rs = basis_cache(name), rs_cache(name)
        mesh = build_chamber_mesh(rs, 1.0, 0.04)
        g = build_image_graph(b, rs, mesh)
        rep = whitney_ratio(g, pairs=1500, seed=8)
        assert rep.min_ratio >= 1.0 - 1e-6


def test_refinement_stability(basis_cache, rs_cache):
    for name, h in (("B2", 0.05), ("B3", 0.06)):
        st = whitney_study(basis_cache(name), rs_cache(name), 1.0, h,
                           pairs=1500, seed=5)
        change = st.refinement[-1]["max_ratio_rel_change"]
        assert change <= 0.05, st.to_dict()


def test_rescaled_radius_consistency(basis_cache, rs_cache):
    """Re-meshing at twice the radius (same pitch) leaves the ratios of the
    original pairs essentially unchanged: the added outer region offers no
    shortcuts."""
    from chevalley.regularity import _admit_pairs, _ratio_stats_for_pairs, _sample_pair_positions, _snap_indices

    b, rs = basis_cache("B2"), rs_cache("B2")
    mesh1 = build_chamber_mesh(rs, 1.0, 0.04)
    g1 = build_image_graph(b, rs, mesh1)
    src, tgt = _sample_pair_positions(g1, 800, 3, 0.5, 20)
    si, ti = _snap_indices(g1, src, tgt)
    mask = _admit_pairs(g1, si, ti, 6.0)
    # keep endpoints clear of the outer sphere: its snapped vertices exist
    # only in the radius-1 mesh
    inner = np.linalg.norm(src, axis=1) <= 1.0 - 2 * 0.04
    mask &= inner[:, None]
    mask &= np.linalg.norm(tgt, axis=-1) <= 1.0 - 2 * 0.04
    rep1 = _ratio_stats_for_pairs(g1, src, tgt, mask)
    mesh2 = build_chamber_mesh(rs, 2.0, 0.04)
    g2 = build_image_graph(b, rs, mesh2)
    rep2 = _ratio_stats_for_pairs(g2, src, tgt, mask)
    assert abs(rep2.max_ratio - rep1.max_ratio) / rep1.max_ratio <= 0.01


def test_lift_derivatives_b2_walls(basis_cache, rs_cache, strata_cache):
    b, rs = basis_cache("B2"), rs_cache("B2")
    strata = strata_cache("B2")
    # wall x2 = 0: image curve p2 = 0, so dp2/dp1 = 0
    flat = next(s for s in strata if s.dim == 1 and 1 in s.walls)
    X, grads = lift_derivatives(b, rs, flat, samples=25, radius=2.0, seed=3)
    assert np.max(np.abs(grads)) < 1e-12
    # wall x1 = x2: p2 = p1^2/4, so dp2/dp1 = p1/2, equal to 1 at p1 = 2
    diag = next(s for s in strata if s.dim == 1 and 0 in s.walls)
    X, grads = lift_derivatives(b, rs, diag, samples=25, radius=2.0, seed=3)
    p1 = np.sum(X ** 2, axis=1)
    assert np.max(np.abs(grads[:, 0] - p1 / 2)) < 1e-8
    at2 = lift_derivatives(b, rs, diag, points=np.array([[1.0, 1.0]]))[1]
    assert abs(at2[0, 0] - 1.0) < 1e-12


def test_lift_derivatives_bounded_to_origin(basis_cache, rs_cache, strata_cache):
    """Values at |x| = 1e-3 and 1e-6 follow the homogeneous scaling toward
    the continuous extension at the origin, to 1e-4."""
    b, rs = basis_cache("B3"), rs_cache("B3")
    for s in strata_cache("B3"):
        if s.dim != 2:
            continue
        base = s.anchor
        for scale_a, scale_b in ((1e-3, 1e-6),):
            Xa = base[None, :] * scale_a
            Xb = base[None, :] * scale_b
            ga = lift_derivatives(b, rs, s, points=Xa)[1][0]
            gb = lift_derivatives(b, rs, s, points=Xb)[1][0]
            # degrees of p3 minus degrees of p1, p2 are 4 and 2: both positive,
            # so the gradient tends to 0 at the origin
            assert np.all(np.abs(ga) < 1e-4) and np.all(np.abs(gb) < 1e-4)
            # homogeneous prediction: component j scales by t^(deg3 - degj)
            t = scale_b / scale_a
            pred = ga * np.array([t ** (6 - 2), t ** (6 - 4)])
            assert np.max(np.abs(gb - pred)) < 1e-4


def test_lift_derivative_gradients_bounded_on_ball(basis_cache, rs_cache, strata_cache):
    b, rs = basis_cache("H3"), rs_cache("H3")
    for s in strata_cache("H3"):
        if s.dim < 1 or s.dim >= 3:
            continue
        X, grads = lift_derivatives(b, rs, s, samples=60, radius=1.0, seed=5)
        assert np.all(np.isfinite(grads))
        assert np.max(np.abs(grads)) < 1e3


def test_envelopes_b2_closed_form(basis_cache, rs_cache):
    """Envelope over p1 in [0, a^2]: min = 0, max = p1^2/4; the Lipschitz
    constant of the max envelope up to p1 <= 4 is about 2."""
    b, rs = basis_cache("B2"), rs_cache("B2")
    env = envelope_functions(b, rs, 1, a=2.0, h=0.05, cells=50)
    assert env.containment_violations == 0
    centers = 0.5 * (env.cell_edges[0][1:] + env.cell_edges[0][:-1])
    rights = env.cell_edges[0][1:]
    pop = env.counts > 0
    assert np.all(np.abs(env.env_min[pop]) < 5e-3)
    # the cell max lives at the right edge of the cell
    assert np.all(env.env_max[pop] <= rights[pop] ** 2 / 4 + 5e-3)
    assert np.all(env.env_max[pop] >= centers[pop] ** 2 / 4 - 5e-3)
    assert 1.8 <= env.lipschitz_max <= 2.05
    assert env.lipschitz_min < 0.01


def test_envelope_at_matches_fiber_interval(basis_cache, rs_cache):
    for name, k, m in (("B2", 1, [1.0]), ("B3", 1, [1.0]), ("B3", 2, [1.0, 0.25])):
        b, rs = basis_cache(name), rs_cache(name)
        lo_e, hi_e, per = envelope_at(b, rs, k, m)
        fs = sample_fiber(b, rs, k, m, n_points=1500, seed=6)
        lo_f, hi_f, _ = fiber_value_interval(fs, b, k)
        rng_v = hi_f - lo_f
        assert abs(lo_e - lo_f) <= 1e-3 * rng_v
        assert abs(hi_e - hi_f) <= 1e-3 * rng_v


def test_envelope_prism_containment(basis_cache, rs_cache):
    """Every image mesh point sits between the envelopes of its cell."""
    for name in ("B2", "B3"):
        b, rs = basis_cache(name), rs_cache(name)
        env = envelope_functions(b, rs, 1, a=1.0, h=0.06, cells=30)
        assert env.containment_violations == 0
        assert env.empty_interior_cells == 0
