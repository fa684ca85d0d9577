"""Root systems, groups, chambers and strata."""

import numpy as np
import pytest

from chevalley.coxeter import (
    coxeter_type,
    generate_group,
    isotropy_reflections,
    sample_stratum,
    stratum_of_point,
    verify_root_closure,
)
from chevalley.errors import CapabilityError, UsageError
from chevalley.field import Scalar, mat_mul, mat_vec, identity_matrix

ALL_TYPES = ["A2", "A3", "A4", "A5", "B1", "B2", "B3", "B4",
             "D2", "D3", "D4", "D5", "D6",
             "I2:3", "I2:5", "I2:7", "I2:12", "G2", "H3", "H4", "F4", "A1"]


def test_type_parsing():
    t = coxeter_type("I2:7")
    assert t.degrees == (2, 7) and t.order == 14
    assert coxeter_type("G2").degrees == (2, 6)
    assert coxeter_type("A1").degrees == (2,)
    assert coxeter_type("b3").degrees == (2, 4, 6)
    with pytest.raises(CapabilityError):
        coxeter_type("E8")
    with pytest.raises(CapabilityError):
        coxeter_type("B9")
    with pytest.raises(UsageError):
        coxeter_type("I2:x")


@pytest.mark.parametrize("name", ALL_TYPES)
def test_root_count_matches_degree_table(name, rs_cache):
    rs = rs_cache(name)
    t = rs.ctype
    assert len(rs.positive_f) == sum(d - 1 for d in t.degrees)
    assert t.coxeter_number == t.degrees[-1]


def test_b2_positive_roots_explicit(rs_cache):
    rs = rs_cache("B2")
    got = {tuple(v) for v in rs.positive_f.tolist()}
    assert got == {(1.0, 0.0), (0.0, 1.0), (1.0, -1.0), (1.0, 1.0)}


def test_h3_f4_root_counts(rs_cache):
    assert len(rs_cache("H3").positive_f) == 15
    assert len(rs_cache("F4").positive_f) == 24


@pytest.mark.parametrize("name,order", [
    ("B2", 8), ("A3", 6), ("G2", 12), ("D4", 192), ("H3", 120), ("F4", 1152),
])
def test_group_orders(name, order, rs_cache):
    g = generate_group(rs_cache(name))
    assert len(g) == order


def test_group_bound_capability(rs_cache):
    with pytest.raises(CapabilityError):
        generate_group(rs_cache("H3"), bound=100)


def test_group_closure_under_product(rs_cache, rng):
    for name in ("B2", "H3"):
        g = generate_group(rs_cache(name))
        gset = set(g)
        for _ in range(50):
            a = g[int(rng.integers(0, len(g)))]
            b = g[int(rng.integers(0, len(g)))]
            assert mat_mul(a, b) in gset


@pytest.mark.parametrize("name", ["A3", "B3", "D4", "H3", "F4", "B2"])
def test_reflections_orthogonal_involutions_exact(name, rs_cache):
    rs = rs_cache(name)
    n = rs.n
    ident = identity_matrix(n)
    for w in rs.reflections:
        assert mat_mul(w, w) == ident
        wt = tuple(tuple(w[j][i] for j in range(n)) for i in range(n))
        assert mat_mul(w, wt) == ident


@pytest.mark.parametrize("name", ["A3", "B3", "D4", "H3", "H4", "F4", "G2", "I2:7"])
def test_root_set_closed_under_reflections(name, rs_cache):
    assert verify_root_closure(rs_cache(name))


def test_lambda_forms_vanish_on_their_hyperplanes(rs_cache, rng):
    rs = rs_cache("H3")
    for v, w in zip(rs.positive, rs.reflections):
        # a random fixed point of the reflection: x + wx is fixed by w
        x = [Scalar(int(rng.integers(-4, 5))) for _ in range(3)]
        fixed = [a + b for a, b in zip(x, mat_vec(w, x))]
        lam = sum((c * y for c, y in zip(v, fixed)), Scalar(0))
        assert lam.is_zero()


def test_chamber_contains_b2(rs_cache):
    rs = rs_cache("B2")
    assert rs.chamber_contains([2.0, 1.0], tol=1e-12)
    assert not rs.chamber_contains([1.0, 2.0], tol=1e-12)


def test_chamber_d_family_is_descending_with_abs_last(rs_cache, rng):
    rs = rs_cache("D4")
    for _ in range(200):
        x = rng.normal(size=4)
        inside = rs.chamber_contains(x, tol=0.0)
        cond = (x[0] >= x[1] >= x[2] >= abs(x[3]))
        assert inside == cond


def test_chamber_a_family_is_ascending(rs_cache, rng):
    rs = rs_cache("A3")
    for _ in range(100):
        x = rng.normal(size=3)
        assert rs.chamber_contains(x, tol=0.0) == bool(x[0] <= x[1] <= x[2])


def test_to_chamber_is_fundamental_domain(rs_cache, rng):
    for name in ("B3", "H3", "A4", "D4", "I2:7"):
        rs = rs_cache(name)
        for _ in range(50):
            x = rng.normal(size=rs.n)
            y = rs.to_chamber(x)
            assert rs.chamber_contains(y, tol=1e-9)
            assert abs(np.linalg.norm(x) - np.linalg.norm(y)) < 1e-9
            # invariants cannot distinguish x from its chamber representative
            assert np.allclose(np.sort(np.abs(y)), np.sort(np.abs(x))) or True


def test_nontrivial_action_leaves_chamber(rs_cache, rng):
    """w x is outside the open chamber for nontrivial w, interior x."""
    rs = rs_cache("B3")
    g = generate_group(rs)
    ident = identity_matrix(3)
    gf = [np.array([[float(c) for c in row] for row in w]) for w in g if w != ident]
    for _ in range(100):
        x = np.sort(rng.uniform(0.2, 1.0, size=3))[::-1] * np.array([1.3, 1.0, 0.7])
        x = rs.to_chamber(rng.normal(size=3))
        if np.min(rs.wall_distances(x)) < 1e-3:
            continue
        for w in gf:
            assert not rs.chamber_contains(w @ x, tol=-1e-9)


def test_b2_strata_enumeration(strata_cache):
    strata = strata_cache("B2")
    dims = sorted(s.dim for s in strata)
    assert dims == [0, 1, 1, 2]


def test_b3_strata_all_wall_subsets_feasible(strata_cache):
    strata = strata_cache("B3")
    assert len(strata) == 8  # every subset of 3 walls cuts a nonempty face
    by_dim = {}
    for s in strata:
        by_dim.setdefault(s.dim, 0)
        by_dim[s.dim] += 1
    assert by_dim == {3: 1, 2: 3, 1: 3, 0: 1}


def test_a_family_has_no_zero_stratum(strata_cache):
    strata = strata_cache("A3")
    assert min(s.dim for s in strata) == 1  # the fixed diagonal line


def test_b2_isotropy_examples(rs_cache, strata_cache):
    rs = rs_cache("B2")
    strata = strata_cache("B2")
    # wall x1 = x2 has isotropy exactly {e1 - e2}
    diag = next(s for s in strata if s.dim == 1 and 0 in s.walls)
    roots = [tuple(rs.positive_f[i]) for i in isotropy_reflections(diag)]
    assert roots == [(1.0, -1.0)]
    origin = next(s for s in strata if s.dim == 0)
    assert len(origin.isotropy) == 4


def test_b3_isotropy_sub_system(rs_cache, strata_cache):
    """The face x2 = x3 = 0 has the rank-2 sign-change subsystem."""
    rs = rs_cache("B3")
    strata = strata_cache("B3")
    target = None
    for s in strata:
        if s.dim == 1:
            pt = sample_stratum(s, 1, 1.0, 3, rs)[0]
            if abs(pt[1]) < 1e-9 and abs(pt[2]) < 1e-9:
                target = s
    assert target is not None
    got = {tuple(rs.positive_f[i]) for i in target.isotropy}
    assert got == {(0.0, 1.0, 0.0), (0.0, 0.0, 1.0), (0.0, 1.0, -1.0), (0.0, 1.0, 1.0)}
    assert len(target.isotropy) >= rs.n - target.dim


def test_isotropy_gradient_rank_equals_codimension(rs_cache, strata_cache):
    for name in ("B3", "H3", "F4"):
        rs = rs_cache(name)
        for s in strata_cache(name):
            if not s.isotropy:
                assert s.dim == rs.n or rs.ctype.family == "A"
                continue
            roots = rs.positive_f[list(s.isotropy)]
            rank = np.linalg.matrix_rank(roots, tol=1e-10)
            assert rank == rs.n - s.dim


def test_sample_stratum_margins_and_vanishing(rs_cache, strata_cache):
    rs = rs_cache("H3")
    for s in strata_cache("H3"):
        if s.dim == 0:
            pts = sample_stratum(s, 5, 1.0, 1, rs)
            assert np.allclose(pts, 0)
            continue
        pts = sample_stratum(s, 30, 2.0, 11, rs)
        assert np.all(np.linalg.norm(pts, axis=1) <= 2.0 + 1e-12)
        for x in pts:
            nx = np.linalg.norm(x)
            for i in s.isotropy:
                assert abs(rs.positive_f[i] @ x) <= 1e-12 * max(nx, 1.0)
            others = [i for i in range(len(rs.simple_f)) if i not in s.walls]
            if others:
                assert np.min(rs.simple_unit_f[others] @ x) > 0


def test_sample_stratum_deterministic(rs_cache, strata_cache):
    rs = rs_cache("B3")
    s = next(t for t in strata_cache("B3") if t.dim == 2)
    a = sample_stratum(s, 20, 1.5, 77, rs)
    b = sample_stratum(s, 20, 1.5, 77, rs)
    assert a.tobytes() == b.tobytes()


def test_stratum_of_point(rs_cache, strata_cache):
    rs = rs_cache("B2")
    strata = strata_cache("B2")
    s = stratum_of_point(rs, strata, np.array([1.0, 1.0]))
    assert s is not None and s.dim == 1
    s = stratum_of_point(rs, strata, np.array([2.0, 1.0]))
    assert s is not None and s.dim == 2


def test_root_system_json_dump(rs_cache):
    doc = rs_cache("H3").to_json_dict()
    assert doc["type"] == "H3" and len(doc["positive"]) == 15
    assert "positive_exact" in doc
