"""Fiber sampling, connectivity, value intervals, Lagrange critical points."""

import numpy as np
import pytest

from chevalley.errors import ConvergenceError, UsageError
from chevalley.probe import (
    FiberSample,
    critical_points,
    fiber_connectivity,
    fiber_value_interval,
    isotropy_components,
    random_regular_target,
    sample_fiber,
    solve_fiber_point,
)


def test_solve_fiber_point_b2_circle(basis_cache, rs_cache):
    b, rs = basis_cache("B2"), rs_cache("B2")
    x = solve_fiber_point(b, rs, 1, [1.0], [0.9, 0.1])
    assert abs(np.linalg.norm(x) - 1.0) < 1e-12
    assert rs.chamber_contains(x, tol=1e-12)
    # k = 2: the target (1, 1/4) pins the diagonal point
    x = solve_fiber_point(b, rs, 2, [1.0, 0.25], [0.6, 0.8])
    assert np.allclose(x, [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-5)


def test_solve_fiber_point_norm_constraint(basis_cache, rs_cache, rng):
    """For p1 = |x|^2 any solution satisfies |x| = sqrt(m1)."""
    for name in ("B3", "H3"):
        b, rs = basis_cache(name), rs_cache(name)
        for m1 in (0.5, 2.0):
            x = solve_fiber_point(b, rs, 1, [m1], rng.normal(size=rs.n))
            assert abs(np.linalg.norm(x) - np.sqrt(m1)) < 1e-10


def test_solve_fiber_point_convergence_error(basis_cache, rs_cache):
    with pytest.raises(ConvergenceError):
        solve_fiber_point(basis_cache("B2"), rs_cache("B2"), 1, [-1.0], [0.5, 0.1])


def test_b2_arc_sample_against_parameterization(basis_cache, rs_cache):
    """The chamber fiber {p1=1} of B2 is the arc angle in [0, pi/4]."""
    b, rs = basis_cache("B2"), rs_cache("B2")
    fs = sample_fiber(b, rs, 1, [1.0], n_points=800, seed=12)
    assert len(fs.points) > 300
    angles = np.arctan2(fs.points[:, 1], fs.points[:, 0])
    assert np.all(angles >= -1e-9) and np.all(angles <= np.pi / 4 + 1e-9)
    assert np.all(np.abs(np.linalg.norm(fs.points, axis=1) - 1.0) < 1e-9)
    # the arc is filled: largest angular gap shrinks well below the arc length
    gaps = np.diff(np.sort(angles))
    assert np.max(gaps, initial=0.0) < 0.05 * (np.pi / 4)
    # endpoints reached (wall points are the extreme values)
    assert np.min(angles) < 1e-3 and np.max(angles) > np.pi / 4 - 1e-3


def test_empty_fiber_for_unreachable_target(basis_cache, rs_cache):
    fs = sample_fiber(basis_cache("B2"), rs_cache("B2"), 1, [-1.0], n_points=50, seed=1)
    assert fs.empty


def test_sample_fiber_reproducible_bytes(basis_cache, rs_cache):
    b, rs = basis_cache("B3"), rs_cache("B3")
    one = sample_fiber(b, rs, 2, [1.0, 0.2], n_points=300, seed=9)
    two = sample_fiber(b, rs, 2, [1.0, 0.2], n_points=300, seed=9)
    assert one.points.tobytes() == two.points.tobytes()
    three = sample_fiber(b, rs, 2, [1.0, 0.2], n_points=300, seed=10)
    assert three.points.tobytes() != one.points.tobytes()


def test_connectivity_single_point_and_clusters(basis_cache):
    b = basis_cache("B2")
    one = FiberSample("B2", 1, np.array([1.0]), np.array([[1.0, 0.0]]), 0, 0.0)
    assert fiber_connectivity(one) == 1
    # two artificial clusters separated by a void
    rng = np.random.default_rng(3)
    a = rng.normal(size=(40, 2)) * 0.01
    c = rng.normal(size=(40, 2)) * 0.01 + 10.0
    two = FiberSample("B2", 1, np.array([1.0]), np.concatenate([a, c]), 0, 0.0)
    assert fiber_connectivity(two, radius=1.0) == 2
    empty = FiberSample("B2", 1, np.array([1.0]), np.zeros((0, 2)), 0, 0.0)
    with pytest.raises(UsageError):
        fiber_connectivity(empty)


def test_b2_arc_connectivity(basis_cache, rs_cache):
    fs = sample_fiber(basis_cache("B2"), rs_cache("B2"), 1, [1.0], n_points=500, seed=4)
    assert fiber_connectivity(fs) == 1


def test_b2_critical_points_closed_form(basis_cache, rs_cache, strata_cache):
    """Exactly two critical points on {p1 = 1}: the wall points, with values
    0 and 1/4, multiplier 1/2 at the maximum, and definite projected
    Hessians (+2 and -2)."""
    b, rs = basis_cache("B2"), rs_cache("B2")
    cps = critical_points(b, rs, 1, [1.0], seed=3, strata=strata_cache("B2"))
    assert len(cps) == 2
    lo, hi = cps
    assert abs(lo.value - 0.0) < 1e-10 and abs(hi.value - 0.25) < 1e-10
    assert np.allclose(lo.x, [1.0, 0.0], atol=1e-8)
    assert np.allclose(hi.x, [np.sqrt(0.5), np.sqrt(0.5)], atol=1e-8)
    assert abs(hi.multipliers[0] - 0.5) < 1e-8
    assert abs(lo.multipliers[0]) < 1e-8
    for cp in cps:
        assert cp.stratum_dim == 1 and not cp.anomaly
        assert cp.residual <= 1e-9
        assert np.min(np.abs(cp.hessian_eigs)) > 1e-6
        assert cp.bordering_minor_max <= 1e-8
    assert abs(lo.hessian_eigs[0] - 2.0) < 1e-6
    assert abs(hi.hessian_eigs[0] + 2.0) < 1e-6


def test_b2_critical_values_bracket_fiber(basis_cache, rs_cache):
    b, rs = basis_cache("B2"), rs_cache("B2")
    fs = sample_fiber(b, rs, 1, [1.0], n_points=1500, seed=5)
    lo, hi, gap = fiber_value_interval(fs, b, 1)
    assert abs(lo - 0.0) < 1e-6 and abs(hi - 0.25) < 1e-6
    assert gap < 0.05


def test_newton_family_critical_points_on_walls(basis_cache, rs_cache, strata_cache):
    """S3 Newton: critical points of p2 on {p1 = c} lie on the diagonal
    walls x_i = x_j (brute-force check over the fiber segment)."""
    b, rs = basis_cache("A3"), rs_cache("A3")
    cps = critical_points(b, rs, 1, [0.9], seed=8, strata=strata_cache("A3"))
    assert cps
    for cp in cps:
        x = cp.x
        gaps = [abs(x[0] - x[1]), abs(x[1] - x[2]), abs(x[0] - x[2])]
        assert min(gaps) < 1e-7
        assert not cp.anomaly
    # brute force on the fiber: where the constrained gradient vanishes
    # p2 on {sum x = c} along directions orthogonal to (1,1,1)
    vals = [cp.value for cp in cps]
    t = np.linspace(-2, 2, 4001)
    u = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    base = np.array([0.3, 0.3, 0.3])
    curve = base[None, :] + t[:, None] * u[None, :]
    p2 = np.sum(curve ** 2, axis=1)
    assert abs(np.min(p2) - min(vals)) < 1e-3


def test_fiber_interval_gap_refines(basis_cache, rs_cache):
    b, rs = basis_cache("B3"), rs_cache("B3")
    m = [1.0, 0.25]
    gaps = []
    for n in (400, 800, 1600):
        fs = sample_fiber(b, rs, 2, m, n_points=n, seed=21)
        _, _, gap = fiber_value_interval(fs, b, 2)
        gaps.append(gap)
    assert gaps[-1] <= gaps[0]
    assert gaps[-1] < 0.05


def test_regular_target_margins(basis_cache, rs_cache):
    b, rs = basis_cache("H3"), rs_cache("H3")
    for seed in range(5):
        m, x = random_regular_target(b, rs, 2, seed)
        assert np.min(rs.wall_distances(x)) >= 0.05 * np.linalg.norm(x)
        assert np.allclose(b.compiled.P(x[None, :], 2)[0], m)


def test_critical_point_bordering_minors_vanish(basis_cache, rs_cache, strata_cache):
    for name, k in (("B3", 1), ("B3", 2), ("A4", 2)):
        b, rs = basis_cache(name), rs_cache(name)
        m, _ = random_regular_target(b, rs, k, seed=31)
        cps = critical_points(b, rs, k, m, seed=6, strata=strata_cache(name))
        assert cps, f"no critical points found for {name} k={k}"
        for cp in cps:
            assert cp.bordering_minor_max <= 1e-8
            assert not cp.anomaly, cp.anomaly_reason


def test_hessian_block_structure(basis_cache, rs_cache, strata_cache):
    """At a critical point the projected Hessian decomposes over the
    isotropy components, each block definite."""
    b, rs = basis_cache("B3"), rs_cache("B3")
    strata = strata_cache("B3")
    cps = critical_points(b, rs, 1, [1.0], seed=13, strata=strata)
    assert cps
    for cp in cps:
        st = next(s for s in strata if s.stratum_id == cp.stratum_id)
        comps = isotropy_components(rs, st)
        assert comps
        H = b.compiled.hessians(cp.x[None, :], 2)[0]
        Hl = H[1] - cp.multipliers[0] * H[0]
        for V in comps:
            block = V.T @ Hl @ V
            eigs = np.linalg.eigvalsh(block)
            assert np.all(eigs > 1e-6) or np.all(eigs < -1e-6)
        # cross blocks vanish
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                cross = comps[i].T @ Hl @ comps[j]
                assert np.max(np.abs(cross)) < 1e-8


def test_fiber_sample_invariants(basis_cache, rs_cache):
    """Every stored point is inside the chamber with a small residual."""
    b, rs = basis_cache("A4"), rs_cache("A4")
    m, hint = random_regular_target(b, rs, 2, seed=3)
    fs = sample_fiber(b, rs, 2, m, n_points=500, seed=3, x_hint=hint)
    assert not fs.empty
    assert fs.residual_max <= 1e-9 * (1 + np.max(np.abs(m)))
    assert np.all(rs.chamber_contains_many(fs.points, tol=1e-8))


@pytest.mark.parametrize("name,k,m", [
    ("B3", 1, [1.0]),
    ("B3", 2, [1.0, 0.3]),
    ("A3", 2, [0.5, 1.0]),
    ("A4", 2, [0.5, 1.0]),
])
def test_critical_values_bracket_fiber_interval(name, k, m, basis_cache, rs_cache,
                                                strata_cache):
    """The sampled value interval endpoints match the extreme critical
    values to 1e-6."""
    b, rs = basis_cache(name), rs_cache(name)
    cps = critical_points(b, rs, k, m, multistarts=192, seed=40,
                          strata=strata_cache(name))
    assert cps
    values = [cp.value for cp in cps]
    fs = sample_fiber(b, rs, k, m, n_points=1500, seed=41)
    lo, hi, _ = fiber_value_interval(fs, b, k)
    assert abs(lo - min(values)) < 1e-6
    assert abs(hi - max(values)) < 1e-6
