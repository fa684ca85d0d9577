"""Root systems, reflection groups, fundamental chambers and their strata.

Supported families and their realizations:

  A(n), 2<=n<=6   symmetric group S_n permuting coordinates of R^n (the
                  Newton setting; reducible: the diagonal line is fixed).
                  The chamber is the ascending cone x_1 <= ... <= x_n, so
                  every wall form x_j - x_i (i<j) is nonnegative on it.
  B(n), 1<=n<=4   signed permutations; chamber x_1 >= ... >= x_n >= 0.
  D(n), 2<=n<=6   even signed permutations; chamber
                  x_1 >= ... >= x_{n-1} >= |x_n|.
  I2(p), 3<=p<=12 dihedral group of the regular p-gon acting on R^2; the
                  chamber is the sector 0 <= theta <= pi/p.  G2 is I2(6),
                  A1 is accepted as an alias for the rank-1 sign group B(1).
  H3, H4          icosahedral groups with exact Q(sqrt5) root data.
  F4              the 24-cell symmetry group, rational root data.

Root data is exact wherever the ambient field allows it.  For I2(p) with
p != 4 no orthogonal 2x2 realization has all entries in Q(sqrt5) (a rotation
by pi/3 already needs sqrt3), so those roots and matrices are stored as
floats; the dihedral invariants themselves stay exact over Q.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations, product

import numpy as np

from .errors import CapabilityError, CheckFailure, ConvergenceError, UsageError
from .field import (
    HALF,
    ONE,
    PHI,
    PSI,
    ZERO,
    Scalar,
    identity_matrix,
    in_span,
    mat_mul,
    mat_vec,
    solve_linear,
    vec_dot,
)

M_ONE = -ONE

_FAMILY_BOUNDS = {"A": (2, 6), "B": (1, 4), "D": (2, 6)}
_I2_BOUNDS = (3, 12)

GROUP_ORDER_BOUND_DEFAULT = 200_000


@dataclass(frozen=True)
class CoxeterType:
    """A supported reflection-group type with its degree table."""

    family: str                # "A" | "B" | "D" | "I2" | "H3" | "H4" | "F4"
    dim: int                   # ambient dimension
    p: int | None              # dihedral parameter for I2
    name: str                  # display name as parsed ("G2", "A1" keep their alias)
    degrees: tuple[int, ...]

    @property
    def coxeter_number(self) -> int:
        return self.degrees[-1]

    @property
    def order(self) -> int:
        out = 1
        for d in self.degrees:
            out *= d
        return out

    @property
    def n_positive_roots(self) -> int:
        return sum(d - 1 for d in self.degrees)

    @property
    def reducible(self) -> bool:
        # the Newton realization of A(n) fixes the diagonal line
        return self.family == "A"

    @property
    def canonical_key(self) -> str:
        if self.family == "I2":
            return f"I2_{self.p}"
        if self.family in ("A", "B", "D"):
            return f"{self.family}{self.dim}"
        return self.family


def _degrees_for(family: str, dim: int, p: int | None) -> tuple[int, ...]:
    if family == "A":
        return tuple(range(1, dim + 1))
    if family == "B":
        return tuple(2 * i for i in range(1, dim + 1))
    if family == "D":
        degs = [2 * i for i in range(1, dim)] + [dim]
        return tuple(sorted(degs))
    if family == "I2":
        return (2, p)
    if family == "H3":
        return (2, 6, 10)
    if family == "H4":
        return (2, 12, 20, 30)
    if family == "F4":
        return (2, 6, 8, 12)
    raise CapabilityError(f"unsupported family {family!r}")


def coxeter_type(spec: str) -> CoxeterType:
    """Parse a type specifier: A3, B4, D6, I2:7, G2, H3, H4, F4.

    "A1" is accepted as the rank-1 sign-change group (same realization as
    B1: single root e_1, invariant x^2).
    """
    s = spec.strip()
    if s.upper() == "A1":
        return CoxeterType("B", 1, None, "A1", _degrees_for("B", 1, None))
    if s.upper() == "G2":
        return CoxeterType("I2", 2, 6, "G2", _degrees_for("I2", 2, 6))
    if s.upper() in ("H3", "H4", "F4"):
        fam = s.upper()
        dim = int(fam[1])
        return CoxeterType(fam, dim, None, fam, _degrees_for(fam, dim, None))
    if s.upper().startswith("I2"):
        sep = s[2:].lstrip(":").strip() if len(s) > 2 else ""
        if not sep.isdigit():
            raise UsageError(f"bad dihedral specifier {spec!r}; expected I2:p")
        p = int(sep)
        lo, hi = _I2_BOUNDS
        if not lo <= p <= hi:
            raise CapabilityError(f"I2(p) supported for {lo}<=p<={hi}, got {p}")
        return CoxeterType("I2", 2, p, f"I2:{p}", _degrees_for("I2", 2, p))
    fam = s[:1].upper()
    if fam in _FAMILY_BOUNDS and s[1:].isdigit():
        n = int(s[1:])
        lo, hi = _FAMILY_BOUNDS[fam]
        if not lo <= n <= hi:
            raise CapabilityError(f"{fam}(n) supported for {lo}<=n<={hi}, got {n}")
        return CoxeterType(fam, n, None, f"{fam}{n}", _degrees_for(fam, n, None))
    raise CapabilityError(f"unsupported type specifier {spec!r}")


# ---------------------------------------------------------------------------
# root systems
# ---------------------------------------------------------------------------


def _unit(i: int, n: int) -> tuple[Scalar, ...]:
    return tuple(ONE if j == i else ZERO for j in range(n))


def _neg(v):
    return tuple(-x for x in v)


def _reflection_exact(v):
    """Orthogonal reflection across the hyperplane normal to v, exact."""
    n = len(v)
    norm = vec_dot(v, v)
    inv = norm.inverse()
    two = Scalar(2)
    return tuple(
        tuple(
            (ONE if i == j else ZERO) - two * v[i] * v[j] * inv
            for j in range(n)
        )
        for i in range(n)
    )


def _float_vec(v) -> np.ndarray:
    return np.array([float(x) for x in v], dtype=float)


def _float_mat(m) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in m], dtype=float)


class RootSystem:
    """Positive roots, simple roots and per-root reflection data for a type.

    Float mirrors of every exact object are precomputed since almost all
    downstream numerics run on them.  `exact` is False only for I2(p) with
    p != 4; in that case the exact fields are None.
    """

    def __init__(self, ctype: CoxeterType, simple_exact, positive_exact,
                 simple_f, positive_f, exact: bool):
        self.ctype = ctype
        self.n = ctype.dim
        self.exact = exact
        self.simple = simple_exact
        self.positive = positive_exact
        self.simple_f = np.asarray(simple_f, dtype=float)
        self.positive_f = np.asarray(positive_f, dtype=float)
        if exact:
            self.reflections = [_reflection_exact(v) for v in positive_exact]
            self.reflections_f = np.array([_float_mat(m) for m in self.reflections])
            self.simple_reflections = [
                _reflection_exact(v) for v in simple_exact
            ]
        else:
            self.reflections = None
            self.reflections_f = np.array(
                [self._float_reflection(v) for v in self.positive_f]
            )
            self.simple_reflections = None
        self.simple_reflections_f = np.array(
            [self._float_reflection(v) for v in self.simple_f]
        )
        # unit simple roots for chamber distance computations
        self.simple_unit_f = self.simple_f / np.linalg.norm(
            self.simple_f, axis=1, keepdims=True
        )

    @staticmethod
    def _float_reflection(v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.eye(len(v)) - 2.0 * np.outer(v, v) / (v @ v)

    # -- chamber --------------------------------------------------------------

    def chamber_contains(self, x, tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise UsageError("point has wrong dimension")
        return bool(np.all(self.simple_f @ x >= -tol))

    def chamber_contains_many(self, xs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        return np.all(xs @ self.simple_f.T >= -tol, axis=-1)

    def wall_distances(self, x) -> np.ndarray:
        """Signed distances of x to the chamber walls (unit normals)."""
        return self.simple_unit_f @ np.asarray(x, dtype=float)

    def to_chamber(self, x) -> np.ndarray:
        """Reflect x into the closed fundamental chamber.

        Each step reflects across the most violated wall; this terminates in
        at most (number of positive roots) steps for any finite reflection
        group, but a generous safety bound is kept for float round-off.
        """
        y = np.asarray(x, dtype=float).copy()
        max_iter = 10 * max(len(self.positive_f), 1) + 50
        scale = max(np.linalg.norm(y), 1.0)
        for _ in range(max_iter):
            dots = self.simple_f @ y
            i = int(np.argmin(dots))
            if dots[i] >= -1e-14 * scale:
                return y
            y = self.simple_reflections_f[i] @ y
        raise ConvergenceError("chamber reduction did not terminate")

    # -- serialization ----------------------------------------------------------

    def to_json_dict(self) -> dict:
        d = {
            "type": self.ctype.name,
            "dim": self.n,
            "degrees": list(self.ctype.degrees),
            "exact": self.exact,
            "simple": [list(map(float, v)) for v in self.simple_f],
            "positive": [list(map(float, v)) for v in self.positive_f],
        }
        if self.exact:
            d["simple_exact"] = [
                [list(x.to_strings()) for x in v] for v in self.simple
            ]
            d["positive_exact"] = [
                [list(x.to_strings()) for x in v] for v in self.positive
            ]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2)


def _simple_roots_by_extreme_rays(positive_f: np.ndarray) -> list[int]:
    """Indices of the extreme rays of the cone spanned by the positive roots.

    For a reflection group the positive cone is simplicial and its extreme
    rays are exactly the simple roots.  Nonnegative least squares decides
    membership of each root in the cone of the others.
    """
    from scipy.optimize import nnls

    d, _ = positive_f.shape
    out = []
    for i in range(d):
        others = np.delete(positive_f, i, axis=0).T
        _, resid = nnls(others, positive_f[i])
        if resid > 1e-8:
            out.append(i)
    return out


def _certify_simple_system(simple, positive) -> None:
    """Exact check: every positive root is a nonnegative combination of the
    claimed simple roots.  Raises on failure."""
    n = len(simple[0])
    cols = [[simple[j][i] for j in range(len(simple))] for i in range(n)]
    if len(simple) != n:
        raise CheckFailure("simple system has wrong size")
    a = [[simple[j][i] for j in range(n)] for i in range(n)]  # columns = simples
    for v in positive:
        coeff = solve_linear(a, list(v))
        if coeff is None or any(c.sign() < 0 for c in coeff):
            raise CheckFailure(f"root {v} is not a nonnegative combination of simples")
    _ = cols  # columns retained for clarity only


def build_root_system(ctype: CoxeterType | str) -> RootSystem:
    """Construct the root system of a supported type.

    Positive-root count always equals sum(degree - 1); this is asserted.
    """
    if isinstance(ctype, str):
        ctype = coxeter_type(ctype)
    n = ctype.dim
    fam = ctype.family

    if fam == "A":
        simple = [tuple(
            ONE if j == i + 1 else (M_ONE if j == i else ZERO) for j in range(n)
        ) for i in range(n - 1)]  # e_{i+1} - e_i, ascending chamber
        positive = []
        for i in range(n):
            for j in range(i + 1, n):
                v = [ZERO] * n
                v[j] = ONE
                v[i] = M_ONE
                positive.append(tuple(v))
        exact = True
    elif fam == "B":
        simple = [tuple(
            ONE if j == i else (M_ONE if j == i + 1 else ZERO) for j in range(n)
        ) for i in range(n - 1)] + [_unit(n - 1, n)]
        positive = (
            [_diff_root(i, j, n) for i in range(n) for j in range(i + 1, n)]
            + [_sum_root(i, j, n) for i in range(n) for j in range(i + 1, n)]
            + [_unit(i, n) for i in range(n)]
        )
        exact = True
    elif fam == "D":
        simple = [tuple(
            ONE if j == i else (M_ONE if j == i + 1 else ZERO) for j in range(n)
        ) for i in range(n - 1)] + [
            tuple(ONE if j >= n - 2 else ZERO for j in range(n))
        ]
        positive = (
            [_diff_root(i, j, n) for i in range(n) for j in range(i + 1, n)]
            + [_sum_root(i, j, n) for i in range(n) for j in range(i + 1, n)]
        )
        exact = True
    elif fam == "F4":
        e = lambda i: _unit(i, 4)
        simple = [
            _diff_root(1, 2, 4),
            _diff_root(2, 3, 4),
            e(3),
            (HALF, -HALF, -HALF, -HALF),
        ]
        halves = [
            tuple(Scalar(Fraction(s, 2)) for s in (1, s2, s3, s4))
            for s2 in (1, -1) for s3 in (1, -1) for s4 in (1, -1)
        ]
        positive = (
            [_diff_root(i, j, 4) for i in range(4) for j in range(i + 1, 4)]
            + [_sum_root(i, j, 4) for i in range(4) for j in range(i + 1, 4)]
            + [e(i) for i in range(4)]
            + halves
        )
        exact = True
    elif fam in ("H3", "H4"):
        allroots = _icosahedral_roots(fam)
        positive, simple = _positives_and_simples(allroots)
        exact = True
    elif fam == "I2":
        return _build_dihedral(ctype)
    else:
        raise CapabilityError(f"unsupported family {fam!r}")

    expected = ctype.n_positive_roots
    if len(positive) != expected:
        raise CheckFailure(
            f"{ctype.name}: built {len(positive)} positive roots, expected {expected}"
        )
    if fam not in ("H3", "H4"):
        _certify_simple_system_padded(simple, positive, ctype)
    rs = RootSystem(
        ctype,
        simple,
        positive,
        [_float_vec(v) for v in simple],
        [_float_vec(v) for v in positive],
        exact,
    )
    return rs


def _diff_root(i, j, n):
    v = [ZERO] * n
    v[i] = ONE
    v[j] = M_ONE
    return tuple(v)


def _sum_root(i, j, n):
    v = [ZERO] * n
    v[i] = ONE
    v[j] = ONE
    return tuple(v)


def _certify_simple_system_padded(simple, positive, ctype) -> None:
    """Nonnegativity certificate that also handles the reducible A family,
    where the simple roots span only the hyperplane sum(x)=0."""
    n = ctype.dim
    if len(simple) == n:
        _certify_simple_system(simple, positive)
        return
    # pad with the invariant diagonal direction; its coefficient must be 0
    diag = tuple(ONE for _ in range(n))
    a = [[row[i] for row in list(simple) + [diag]] for i in range(n)]
    for v in positive:
        coeff = solve_linear(a, list(v))
        if coeff is None or any(c.sign() < 0 for c in coeff[:-1]) or not coeff[-1].is_zero():
            raise CheckFailure(f"root {v} is not a nonnegative combination of simples")


def _icosahedral_roots(fam: str) -> list[tuple[Scalar, ...]]:
    """Full (+/-) root sets of H3 and H4, unit length, over Q(sqrt5)."""
    if fam == "H3":
        out = set()
        for i in range(3):
            for s in (ONE, M_ONE):
                v = [ZERO, ZERO, ZERO]
                v[i] = s
                out.add(tuple(v))
        base = (HALF, PHI * HALF, PSI * HALF)
        for rot in range(3):
            pat = base[rot:] + base[:rot]
            for signs in product((ONE, M_ONE), repeat=3):
                out.add(tuple(s * x for s, x in zip(signs, pat)))
        roots = sorted(out, key=lambda v: tuple(float(x) for x in v))
        assert len(roots) == 30
        return roots
    # H4: vertices of the 600-cell
    out = set()
    for i in range(4):
        for s in (ONE, M_ONE):
            v = [ZERO] * 4
            v[i] = s
            out.add(tuple(v))
    for signs in product((HALF, -HALF), repeat=4):
        out.add(tuple(signs))
    even_perms = [p for p in permutations(range(4)) if _perm_sign(p) == 1]
    base = (ZERO, ONE, PSI, PHI)  # pattern (0, 1, 1/phi, phi) / 2 after scaling
    base = tuple(x * HALF for x in base)
    for perm in even_perms:
        pat = tuple(base[perm[i]] for i in range(4))
        nz = [i for i in range(4) if not pat[i].is_zero()]
        for signs in product((ONE, M_ONE), repeat=3):
            v = list(pat)
            for s, i in zip(signs, nz):
                v[i] = s * v[i]
            out.add(tuple(v))
    roots = sorted(out, key=lambda v: tuple(float(x) for x in v))
    assert len(roots) == 120
    return roots


def _perm_sign(p) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, clen = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


def _positives_and_simples(allroots):
    """Split a full root set into positives w.r.t. a generic functional and
    extract the simple system (extreme rays), with an exact certificate."""
    n = len(allroots[0])
    floats = np.array([[float(x) for x in v] for v in allroots])
    rng = np.random.default_rng(2)
    for _ in range(64):
        t = rng.normal(size=n)
        dots = floats @ t
        if np.min(np.abs(dots)) > 1e-6:
            break
    else:
        raise CheckFailure("could not find a generic positivity functional")
    pos_idx = [i for i in range(len(allroots)) if dots[i] > 0]
    positive = [allroots[i] for i in pos_idx]
    pos_f = floats[pos_idx]
    simple_local = _simple_roots_by_extreme_rays(pos_f)
    if len(simple_local) != n:
        raise CheckFailure(
            f"extreme-ray search found {len(simple_local)} simple roots, expected {n}"
        )
    simple = [positive[i] for i in simple_local]
    _certify_simple_system(simple, positive)
    order = sorted(range(len(positive)), key=lambda i: tuple(pos_f[i]))
    return [positive[i] for i in order], simple


def _build_dihedral(ctype: CoxeterType) -> RootSystem:
    """I2(p): chamber is the sector 0 <= theta <= pi/p.

    Wall forms are (sin g, -cos g) for line angles g = j*pi/p, j=1..p; all of
    them are nonnegative on the sector.  Entries are exact only for p = 4.
    """
    p = ctype.p
    angles = [j * math.pi / p for j in range(1, p + 1)]
    positive_f = np.array([[math.sin(g), -math.cos(g)] for g in angles])
    simple_f = np.array([positive_f[0], positive_f[-1]])  # walls theta=pi/p, theta=0
    if p == 4:
        positive = [
            (ONE, M_ONE),
            (ONE, ZERO),
            (ONE, ONE),
            (ZERO, ONE),
        ]
        simple = [positive[0], positive[3]]
        positive_f = np.array([[float(x) for x in v] for v in positive])
        simple_f = np.array([[float(x) for x in v] for v in simple])
        return RootSystem(ctype, simple, positive, simple_f, positive_f, True)
    return RootSystem(ctype, None, None, simple_f, positive_f, False)


# ---------------------------------------------------------------------------
# group generation
# ---------------------------------------------------------------------------


def generate_group(rs: RootSystem, bound: int = GROUP_ORDER_BOUND_DEFAULT):
    """All group elements as matrices (exact where the root data is exact).

    The permutation families are enumerated directly; H3/H4/F4 are closed
    under multiplication starting from the simple reflections.  The result
    always has size prod(degrees).
    """
    ctype = rs.ctype
    expected = ctype.order
    if expected > bound:
        raise CapabilityError(
            f"group order {expected} exceeds bound {bound} for {ctype.name}"
        )
    fam = ctype.family
    n = ctype.dim
    if fam == "A":
        elems = [_perm_matrix(perm) for perm in permutations(range(n))]
    elif fam == "B":
        elems = [
            _signed_perm_matrix(perm, signs)
            for perm in permutations(range(n))
            for signs in product((1, -1), repeat=n)
        ]
    elif fam == "D":
        elems = [
            _signed_perm_matrix(perm, signs)
            for perm in permutations(range(n))
            for signs in product((1, -1), repeat=n)
            if signs.count(-1) % 2 == 0
        ]
    elif fam == "I2":
        return _dihedral_group(ctype)
    else:
        elems = _closure_via_root_action(rs, expected)
    if len(elems) != expected:
        raise CheckFailure(
            f"{ctype.name}: generated {len(elems)} elements, expected {expected}"
        )
    return elems


def _perm_matrix(perm):
    n = len(perm)
    return tuple(
        tuple(ONE if perm[i] == j else ZERO for j in range(n)) for i in range(n)
    )


def _signed_perm_matrix(perm, signs):
    n = len(perm)
    return tuple(
        tuple(
            (ONE if signs[i] > 0 else M_ONE) if perm[i] == j else ZERO
            for j in range(n)
        )
        for i in range(n)
    )


def _dihedral_group(ctype: CoxeterType):
    p = ctype.p
    if p == 4:
        rs = _build_dihedral(ctype)
        return _closure([_reflection_exact(v) for v in rs.simple], 8)
    out = []
    for k in range(p):
        c, s = math.cos(2 * math.pi * k / p), math.sin(2 * math.pi * k / p)
        out.append(np.array([[c, -s], [s, c]]))
    for j in range(p):
        g = j * math.pi / p
        c, s = math.cos(2 * g), math.sin(2 * g)
        out.append(np.array([[c, s], [s, -c]]))
    return out


def _closure(generators, expected: int):
    if not generators:
        raise UsageError("cannot close an empty generator set")
    n = len(generators[0])
    ident = identity_matrix(n)
    seen = {ident}
    frontier = [ident]
    while frontier:
        new = []
        for m in frontier:
            for g in generators:
                prod = mat_mul(m, g)
                if prod not in seen:
                    seen.add(prod)
                    new.append(prod)
        frontier = new
        if len(seen) > expected:
            raise CheckFailure(
                f"closure exceeded expected order {expected}; generator data is wrong"
            )
    return list(seen)


def _closure_via_root_action(rs: RootSystem, expected: int):
    """Exact closure with deduplication on the root permutation.

    The group acts faithfully on the (full, signed) root set since the roots
    span.  Composing 120-entry index tuples is far cheaper than hashing
    matrices of field elements, and each new element costs exactly one exact
    matrix product along its discovery edge.
    """
    allroots = list(rs.positive) + [_neg(v) for v in rs.positive]
    index = {v: i for i, v in enumerate(allroots)}
    n = rs.n

    def perm_of(matrix):
        return tuple(index[tuple(mat_vec(matrix, v))] for v in allroots)

    gens = [(perm_of(g), g) for g in rs.simple_reflections]
    ident = identity_matrix(n)
    ident_perm = tuple(range(len(allroots)))
    seen = {ident_perm: ident}
    frontier = [(ident_perm, ident)]
    while frontier:
        new = []
        for pm, m in frontier:
            for pg, g in gens:
                perm = tuple(pm[j] for j in pg)
                if perm not in seen:
                    prod = mat_mul(m, g)
                    seen[perm] = prod
                    new.append((perm, prod))
        frontier = new
        if len(seen) > expected:
            raise CheckFailure(
                f"closure exceeded expected order {expected}; generator data is wrong"
            )
    return list(seen.values())


# ---------------------------------------------------------------------------
# strata of the closed chamber
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Stratum:
    """A face of the closed chamber: wall subset, span basis, isotropy set."""

    walls: tuple[int, ...]          # indices into the simple roots
    dim: int
    basis: np.ndarray               # (n, dim), orthonormal columns spanning span(S)
    isotropy: tuple[int, ...]       # positive-root indices vanishing on span(S)
    anchor: np.ndarray              # unit interior direction of the face
    stratum_id: str

    def __repr__(self):
        return f"Stratum({self.stratum_id}, isotropy={len(self.isotropy)})"


def enumerate_strata(rs: RootSystem) -> list[Stratum]:
    """One stratum per wall subset with a nonempty relative interior.

    Simple roots are linearly independent, so each subset cuts a face of the
    expected dimension; feasibility of the sign conditions is still verified
    through an interior-point construction (least-squares anchor) backed by
    random sampling, and infeasible subsets would be dropped.
    """
    n = rs.n
    n_walls = len(rs.simple_f)
    out = []
    for size in range(n_walls + 1):
        for walls in combinations(range(n_walls), size):
            st = _make_stratum(rs, walls)
            if st is not None:
                out.append(st)
    return out


def _make_stratum(rs: RootSystem, walls) -> Stratum | None:
    n = rs.n
    a_walls = rs.simple_f[list(walls)] if walls else np.zeros((0, n))
    others = [i for i in range(len(rs.simple_f)) if i not in walls]
    # span(S) = null space of the wall normals
    if len(walls):
        _, sv, vt = np.linalg.svd(a_walls)
        rank = int(np.sum(sv > 1e-10 * max(sv[0], 1)))
        if rank != len(walls):
            return None  # dependent walls force extra dimension loss; drop
        basis = vt[rank:].T
    else:
        basis = np.eye(n)
    dim = basis.shape[1]

    anchor = _interior_anchor(rs, walls, others, basis)
    if dim > 0 and anchor is None:
        return None
    if dim == 0:
        anchor = np.zeros(n)

    iso = _isotropy_indices(rs, walls)
    wall_str = ",".join(str(w) for w in walls) if walls else "-"
    sid = f"d{dim}:w{wall_str}"
    return Stratum(tuple(walls), dim, basis, tuple(iso), anchor, sid)


def _interior_anchor(rs, walls, others, basis) -> np.ndarray | None:
    """Unit direction in span(S) with all non-wall forms strictly positive."""
    n = rs.n
    if basis.shape[1] == 0:
        return np.zeros(n)
    if not others:
        v = basis[:, 0]
        return v / np.linalg.norm(v)
    a_on_span = rs.simple_f[others] @ basis  # (|others|, dim)
    # least-squares point with every non-wall form equal to 1
    y, *_ = np.linalg.lstsq(a_on_span, np.ones(len(others)), rcond=None)
    x = basis @ y
    if np.all(rs.simple_f[others] @ x > 1e-9) and (
        not walls or np.max(np.abs(rs.simple_f[list(walls)] @ x)) < 1e-9
    ):
        return x / np.linalg.norm(x)
    # sign-condition sampling fallback
    rng = np.random.default_rng(11)
    for _ in range(1000):
        y = rng.normal(size=basis.shape[1])
        x = basis @ y
        if np.all(rs.simple_f[others] @ x > 1e-9 * np.linalg.norm(x)):
            return x / np.linalg.norm(x)
    return None


def _isotropy_indices(rs: RootSystem, walls) -> list[int]:
    """Positive roots whose form vanishes identically on the stratum span,
    i.e. roots lying in the span of the wall normals."""
    if not walls:
        return []
    out = []
    if rs.exact:
        wall_roots = [list(rs.simple[w]) for w in walls]
        for t, v in enumerate(rs.positive):
            if in_span(list(v), wall_roots):
                out.append(t)
        return out
    a = rs.simple_f[list(walls)]
    for t, v in enumerate(rs.positive_f):
        coef, res, *_ = np.linalg.lstsq(a.T, v, rcond=None)
        resid = np.linalg.norm(a.T @ coef - v)
        if resid < 1e-10 * max(np.linalg.norm(v), 1):
            out.append(t)
    return out


def isotropy_reflections(s: Stratum) -> list[int]:
    return list(s.isotropy)


def sample_stratum(
    s: Stratum,
    count: int,
    radius: float,
    seed: int,
    rs: RootSystem,
    margin: float = 0.02,
) -> np.ndarray:
    """Points in the relative interior of s intersected with the radius ball.

    All isotropy forms vanish to float precision (points are built inside the
    span) and every non-isotropy wall form stays above `margin` per unit
    norm.  Deterministic in (seed, index).
    """
    if s.dim == 0:
        return np.zeros((1, rs.n))
    if radius <= 0 or count <= 0:
        raise UsageError("radius and count must be positive")
    rng = np.random.Generator(np.random.Philox(key=seed))
    others = [i for i in range(len(rs.simple_f)) if i not in s.walls]
    a_others = rs.simple_unit_f[others] if others else np.zeros((0, rs.n))
    out = np.empty((count, rs.n))
    for idx in range(count):
        jitter = 0.45
        for _attempt in range(60):
            g = rng.normal(size=s.dim)
            x = s.anchor + jitter * (s.basis @ g)
            nx = np.linalg.norm(x)
            if nx < 1e-12:
                continue
            x = x / nx
            if others and np.min(a_others @ x) < margin:
                jitter *= 0.7
                continue
            r = radius * float(rng.uniform(0.15, 1.0) ** (1.0 / s.dim))
            out[idx] = x * r
            break
        else:
            raise CapabilityError(
                f"could not sample interior of stratum {s.stratum_id}"
            )
    return out


def stratum_of_point(rs: RootSystem, strata: list[Stratum], x, rel_tol: float = 1e-7):
    """The stratum whose wall set matches the near-zero wall forms of x."""
    x = np.asarray(x, dtype=float)
    scale = max(np.linalg.norm(x), 1e-30)
    dots = rs.simple_unit_f @ x
    active = tuple(i for i, d in enumerate(dots) if abs(d) <= rel_tol * scale)
    for s in strata:
        if s.walls == active:
            return s
    return None


def verify_root_closure(rs: RootSystem) -> bool:
    """Each reflection permutes the positive roots up to sign (exact systems)."""
    if not rs.exact:
        refs = rs.reflections_f
        roots = rs.positive_f
        for w in refs:
            for v in roots:
                img = w @ v
                ok = np.any(np.all(np.abs(roots - img) < 1e-9, axis=1)) or np.any(
                    np.all(np.abs(roots + img) < 1e-9, axis=1)
                )
                if not ok:
                    return False
        return True
    rootset = set(rs.positive) | {_neg(v) for v in rs.positive}
    for w in rs.reflections:
        for v in rs.positive:
            if tuple(mat_vec(w, v)) not in rootset:
                return False
    return True
