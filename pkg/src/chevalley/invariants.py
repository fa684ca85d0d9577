"""Basic invariant systems and the polynomial map they define.

Closed forms are used wherever they exist:

  A(n)   Newton power sums sum x_i^k, k = 1..n
  B(n)   elementary symmetric polynomials in the squares
  D(n)   elementary symmetric in squares (degrees 2..2(n-1)) plus prod x_i,
         placed in nondecreasing degree order; at a degree tie the product
         invariant goes after the elementary one (both orders can be built
         for the tie study)
  I2(p)  x^2 + y^2 and Re((x+iy)^p), exact over Q for every p

H3 and F4 are built once as group averages of power monomials, realized as
power sums over a root orbit (the average of x_1^k over the group equals,
up to a positive factor, sum_{v in orbit(e_1)} <v,x>^k, and e_1 lies in a
root orbit for these realizations).  Results are cached as JSON with a
content hash.  H4 (degree 30) is never built at runtime: it is loaded from
a shipped data file produced by the offline job in tools/.
"""

from __future__ import annotations

import hashlib
import json
import os
from collections import Counter
from itertools import combinations
from pathlib import Path

import numpy as np

from .coxeter import CoxeterType, RootSystem, build_root_system, coxeter_type, generate_group
from .errors import CapabilityError, CheckFailure, IntegrityError, UsageError
from .field import ONE, Scalar, vec_dot
from .poly import CompiledPoly, PolyMatrix, SparsePoly, expand_linear_power

SCHEMA_VERSION = 1
CACHE_ENV_VAR = "CHEVALLEY_CACHE_DIR"
_PACKAGE_DATA = Path(__file__).parent / "data"

# types whose invariants come from averaging (and are therefore cached)
_CACHED_TYPES = {"H3", "F4", "H4"}


def degrees(t: CoxeterType | str) -> tuple[int, ...]:
    if isinstance(t, str):
        t = coxeter_type(t)
    return t.degrees


def coxeter_number(t: CoxeterType | str) -> int:
    if isinstance(t, str):
        t = coxeter_type(t)
    return t.coxeter_number


class InvariantBasis:
    """An ordered system of basic invariants for one type."""

    def __init__(self, ctype: CoxeterType, polys: list[SparsePoly], provenance: str):
        if len(polys) != ctype.dim:
            raise UsageError("basis size must match the ambient dimension")
        degs = tuple(p.degree() for p in polys)
        if degs != ctype.degrees:
            raise CheckFailure(
                f"{ctype.name}: basis degrees {degs} do not match table {ctype.degrees}"
            )
        self.ctype = ctype
        self.polys = list(polys)
        self.degrees = degs
        self.provenance = provenance
        self._compiled: CompiledBasis | None = None

    @property
    def nvars(self) -> int:
        return self.ctype.dim

    @property
    def compiled(self) -> "CompiledBasis":
        if self._compiled is None:
            self._compiled = CompiledBasis(self)
        return self._compiled

    def eval_exact(self, xs: list[Scalar], k: int | None = None) -> list[Scalar]:
        k = len(self.polys) if k is None else k
        return [p.eval_exact(xs) for p in self.polys[:k]]

    def __repr__(self):
        return f"InvariantBasis({self.ctype.name}, degrees={self.degrees})"


class CompiledBasis:
    """Batched float evaluation of the invariants, their gradients and
    Hessians.  This is the hot path for fiber sampling and mesh imaging."""

    def __init__(self, basis: InvariantBasis):
        self.basis = basis
        self.n = basis.nvars
        self.k = len(basis.polys)
        self._p = [p.compiled() for p in basis.polys]
        self._grad_polys = [
            [p.diff(j) for j in range(self.n)] for p in basis.polys
        ]
        self._g = [[q.compiled() for q in row] for row in self._grad_polys]
        self._h: list[list[list[CompiledPoly]]] | None = None

    def P(self, X: np.ndarray, k: int | None = None) -> np.ndarray:
        """Invariant values; X of shape (..., n) -> (..., k)."""
        k = self.k if k is None else k
        X = np.asarray(X, dtype=float)
        return np.stack([c(X) for c in self._p[:k]], axis=-1)

    def J(self, X: np.ndarray, k: int | None = None) -> np.ndarray:
        """Jacobian rows for the first k invariants; (..., n) -> (..., k, n)."""
        k = self.k if k is None else k
        X = np.asarray(X, dtype=float)
        rows = [
            np.stack([self._g[i][j](X) for j in range(self.n)], axis=-1)
            for i in range(k)
        ]
        return np.stack(rows, axis=-2)

    def _ensure_hessians(self):
        if self._h is None:
            self._h = [
                [
                    [
                        self._grad_polys[i][j].diff(l).compiled()
                        for l in range(self.n)
                    ]
                    for j in range(self.n)
                ]
                for i in range(self.k)
            ]

    def hessians(self, X: np.ndarray, k: int | None = None) -> np.ndarray:
        """Hessians of the first k invariants; (..., n) -> (..., k, n, n)."""
        k = self.k if k is None else k
        self._ensure_hessians()
        X = np.asarray(X, dtype=float)
        out = np.empty(X.shape[:-1] + (k, self.n, self.n))
        for i in range(k):
            for j in range(self.n):
                for l in range(j, self.n):
                    v = self._h[i][j][l](X)
                    out[..., i, j, l] = v
                    out[..., i, l, j] = v
        return out


def chevalley_eval(basis: InvariantBasis, x, k: int | None = None) -> np.ndarray:
    """P_k(x) = (p_1(x), ..., p_k(x)) as floats."""
    k = len(basis.polys) if k is None else k
    if not 1 <= k <= len(basis.polys):
        raise UsageError(f"k must be in 1..{len(basis.polys)}")
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.nvars,):
        raise UsageError("point has wrong dimension")
    return basis.compiled.P(x[None, :], k)[0]


# ---------------------------------------------------------------------------
# closed-form constructions
# ---------------------------------------------------------------------------


def _power_sums(n: int) -> list[SparsePoly]:
    out = []
    for k in range(1, n + 1):
        terms = {}
        for i in range(n):
            e = [0] * n
            e[i] = k
            terms[tuple(e)] = ONE
        out.append(SparsePoly(n, terms))
    return out


def _elementary_in_squares(n: int, k: int) -> SparsePoly:
    terms = {}
    for subset in combinations(range(n), k):
        e = [0] * n
        for i in subset:
            e[i] = 2
        terms[tuple(e)] = ONE
    return SparsePoly(n, terms)


def _coordinate_product(n: int) -> SparsePoly:
    return SparsePoly(n, {(1,) * n: ONE})


def _d_family_polys(n: int, product_first: bool = False) -> list[SparsePoly]:
    tagged = [(2 * k, 1, _elementary_in_squares(n, k)) for k in range(1, n)]
    tagged.append((n, 0 if product_first else 2, _coordinate_product(n)))
    tagged.sort(key=lambda t: (t[0], t[1]))
    return [p for _, _, p in tagged]


def _dihedral_polys(p: int) -> list[SparsePoly]:
    n = 2
    p1 = SparsePoly(n, {(2, 0): ONE, (0, 2): ONE})
    # Re((x+iy)^p) = sum_{j even} C(p,j) (-1)^{j/2} x^{p-j} y^j
    terms = {}
    from math import comb

    for j in range(0, p + 1, 2):
        c = Scalar(comb(p, j) * (-1) ** (j // 2))
        terms[(p - j, j)] = c
    return [p1, SparsePoly(n, terms)]


def sum_of_squares(n: int) -> SparsePoly:
    return SparsePoly(n, {tuple(2 if j == i else 0 for j in range(n)): ONE for i in range(n)})


# ---------------------------------------------------------------------------
# averaged constructions (H3, F4; H4 offline)
# ---------------------------------------------------------------------------


def reynolds_average(monomial: tuple[int, ...], group) -> SparsePoly:
    """Group average of a monomial: (1/|W|) sum_w (x^e) о w.

    Requires exact group matrices.  Monomials concentrated on one variable
    go through the multiset of matrix rows, which collapses the sum to one
    expansion per distinct row.
    """
    if not group:
        raise UsageError("reynolds_average needs a nonempty group")
    if isinstance(group[0], np.ndarray):
        raise UsageError("reynolds_average requires exact group matrices")
    n = len(group[0])
    if len(monomial) != n:
        raise UsageError("monomial length must match matrix size")
    live = [i for i, e in enumerate(monomial) if e]
    inv_order = Scalar(1) / Scalar(len(group))
    if len(live) == 1:
        i, k = live[0], monomial[live[0]]
        rows = Counter(w[i] for w in group)
        acc = SparsePoly.zero(n)
        for row, mult in rows.items():
            acc = acc + expand_linear_power(row, k).scale(Scalar(mult))
        return acc.scale(inv_order)
    acc = SparsePoly.zero(n)
    row_power_cache: dict[tuple, SparsePoly] = {}
    for w in group:
        term = SparsePoly.const(n, 1)
        for i in live:
            key = (w[i], monomial[i])
            piece = row_power_cache.get(key)
            if piece is None:
                piece = expand_linear_power(w[i], monomial[i])
                row_power_cache[key] = piece
            term = term * piece
        acc = acc + term
    return acc.scale(inv_order)


def orbit_power_sum(positive_roots, k: int) -> SparsePoly:
    """sum over the full (+/-) root class of <v, x>^k, for even k.

    Equals 2 * sum over the positive representatives.  This is the Reynolds
    average of x_1^k up to a positive rational factor whenever e_1 belongs
    to the class orbit.
    """
    if k % 2:
        raise UsageError("orbit power sums are used with even degrees only")
    n = len(positive_roots[0])
    acc = SparsePoly.zero(n)
    for v in positive_roots:
        acc = acc + expand_linear_power(v, k)
    return acc.scale(Scalar(2))


def _root_classes(rs: RootSystem) -> list[list[tuple[Scalar, ...]]]:
    """Positive roots grouped by exact squared length (one class per orbit
    for the types built here), shortest class first."""
    by_norm: dict = {}
    for v in rs.positive:
        by_norm.setdefault(vec_dot(v, v), []).append(v)
    return [by_norm[key] for key in sorted(by_norm, key=float)]


def _gradient_rows(polys: list[SparsePoly]) -> list[list[SparsePoly]]:
    n = polys[0].nvars
    return [[p.diff(j) for j in range(n)] for p in polys]


def _exact_rank_advances(polys: list[SparsePoly], candidate: SparsePoly) -> bool:
    """True iff the Jacobian of polys + [candidate] has full row rank as a
    polynomial matrix (checked by finding one nonvanishing minor)."""
    rows = _gradient_rows(polys + [candidate])
    j = len(rows)
    n = polys[0].nvars if polys else candidate.nvars
    for cols in combinations(range(n), j):
        sub = PolyMatrix([[rows[r][c] for c in cols] for r in range(j)])
        if not sub.det().is_zero():
            return True
    return False


def _normalize_leading(p: SparsePoly) -> SparsePoly:
    """Positive leading sign, then an exact power-of-two rescale that puts
    the gradient of the polynomial at unit scale on the unit sphere.

    The reduced orbit sums of the larger groups are numerically tiny on the
    sphere (their monomial coefficients cancel); without this rescale the
    float Jacobian of H4 looks rank-deficient even though the exact one is
    not.  The scale is measured on a fixed set of seeded unit points, so the
    construction stays deterministic, and the factor is an exact power of
    two, so nothing is lost.
    """
    from fractions import Fraction
    import math

    _, lead = p.leading()
    q = p if lead.sign() > 0 else -p
    n = q.nvars
    rng = np.random.default_rng(424242)
    pts = rng.normal(size=(64, n))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    grads = np.stack([q.diff(j).compiled()(pts) for j in range(n)], axis=-1)
    scale = float(np.max(np.linalg.norm(grads, axis=1)))
    if scale <= 0 or not np.isfinite(scale):
        return q
    s = math.floor(math.log2(scale))
    if s > 0:
        q = q.scale(Scalar(Fraction(1, 2 ** s)))
    elif s < 0:
        q = q.scale(Scalar(2 ** (-s)))
    return q


def _degree_products(polys: list[SparsePoly], degs: list[int], target: int):
    """All products of the given invariants with total degree == target."""
    out = []

    def rec(i, remaining, acc):
        if remaining == 0:
            out.append(acc)
            return
        if i == len(polys):
            return
        rec(i + 1, remaining, acc)
        if degs[i] <= remaining:
            rec(i, remaining - degs[i], acc * polys[i])

    rec(0, target, SparsePoly.const(polys[0].nvars if polys else 1, 1))
    return [p for p in out if p.degree() == target]


def _reduce_mod_products(q: SparsePoly, products: list[SparsePoly]) -> SparsePoly:
    """Exact reduction of q modulo the linear span of the given polynomials.

    The products are triangularized by graded-lex leading monomial and q is
    reduced against each pivot.  The orbit power sums of highly symmetric
    root sets are numerically dominated by products of lower invariants
    (the 600-cell case most of all); stripping that span leaves the part
    that actually advances the basis, at O(1) relative magnitude.
    """
    pivots: list[tuple[tuple, SparsePoly]] = []
    for p in products:
        r = p
        for mono, piv in pivots:
            c = r.terms.get(mono)
            if c is not None:
                r = r - piv.scale(c / piv.terms[mono])
        if not r.is_zero():
            pivots.append((r.leading()[0], r))
    for mono, piv in pivots:
        c = q.terms.get(mono)
        if c is not None:
            q = q - piv.scale(c / piv.terms[mono])
    return q


def _build_averaged_basis(ctype: CoxeterType) -> InvariantBasis:
    """H3 / F4 / H4 construction: first invariant is sum x_i^2 exactly;
    each higher degree takes a root-class power sum, exactly reduced modulo
    products of the accepted invariants, with a full group-average fallback
    if every class degenerates."""
    rs = build_root_system(ctype)
    n = ctype.dim
    polys = [sum_of_squares(n)]
    classes = _root_classes(rs)
    group = None

    def reduce_and_check(q):
        q = _reduce_mod_products(
            q, _degree_products(polys, [p.degree() for p in polys], q.degree())
        )
        if q.is_zero() or not _exact_rank_advances(polys, q):
            return None
        return _normalize_leading(q)

    for k in ctype.degrees[1:]:
        candidate = None
        for cls in classes:
            q = orbit_power_sum(cls, k)
            if not q.is_zero():
                candidate = reduce_and_check(q)
                if candidate is not None:
                    break
        if candidate is None:
            # fall back to averaging low monomials over the full group
            if group is None:
                group = generate_group(rs)
            for mono in _monomials_of_degree(n, k):
                q = reynolds_average(mono, group)
                if not q.is_zero():
                    candidate = reduce_and_check(q)
                    if candidate is not None:
                        break
        if candidate is None:
            raise CheckFailure(f"{ctype.name}: no independent invariant of degree {k}")
        polys.append(candidate)
    return InvariantBasis(ctype, polys, "orbit-sums")


def _monomials_of_degree(n: int, k: int):
    """Graded-lex order, heaviest on the first variable first."""
    def rec(prefix, remaining, pos):
        if pos == n - 1:
            yield tuple(prefix + [remaining])
            return
        for take in range(remaining, -1, -1):
            yield from rec(prefix + [take], remaining - take, pos + 1)

    yield from rec([], k, 0)


# ---------------------------------------------------------------------------
# cache files
# ---------------------------------------------------------------------------


def _basis_payload(ctype_name: str, degs, polys) -> dict:
    return {
        "type": ctype_name,
        "degrees": list(degs),
        "polys": [p.to_json_dict() for p in polys],
    }


def basis_content_hash(ctype_name: str, degs, polys) -> str:
    payload = _basis_payload(ctype_name, degs, polys)
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def save_basis(basis: InvariantBasis, path: Path) -> None:
    doc = {
        "schema_version": SCHEMA_VERSION,
        **_basis_payload(basis.ctype.canonical_key, basis.degrees, basis.polys),
        "provenance": basis.provenance,
        "sha256": basis_content_hash(
            basis.ctype.canonical_key, basis.degrees, basis.polys
        ),
    }
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1))


def load_basis(path: Path, ctype: CoxeterType) -> InvariantBasis:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise IntegrityError(f"cannot read invariant cache {path}: {exc}") from exc
    polys = [SparsePoly.from_json_dict(d) for d in doc.get("polys", [])]
    expected = basis_content_hash(doc.get("type", ""), doc.get("degrees", []), polys)
    if doc.get("sha256") != expected:
        raise IntegrityError(f"invariant cache {path} failed its hash check")
    if doc.get("type") != ctype.canonical_key:
        raise IntegrityError(
            f"invariant cache {path} is for {doc.get('type')}, wanted {ctype.canonical_key}"
        )
    return InvariantBasis(ctype, polys, f"file:{doc['sha256'][:12]}")


def _cache_candidates(ctype: CoxeterType, cache_dir) -> list[Path]:
    names = [f"{ctype.canonical_key}.json"]
    out = []
    if cache_dir:
        out += [Path(cache_dir) / nm for nm in names]
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        out += [Path(env) / nm for nm in names]
    out += [_PACKAGE_DATA / nm for nm in names]
    return out


# ---------------------------------------------------------------------------
# entry points
# ---------------------------------------------------------------------------


def basic_invariants(
    t: CoxeterType | str,
    cache_dir: str | Path | None = None,
    allow_build: bool = True,
) -> InvariantBasis:
    """The invariant system for a type; averaged types go through the cache."""
    ctype = coxeter_type(t) if isinstance(t, str) else t
    fam = ctype.family
    if fam == "A":
        return InvariantBasis(ctype, _power_sums(ctype.dim), "closed-form")
    if fam == "B":
        polys = [_elementary_in_squares(ctype.dim, k) for k in range(1, ctype.dim + 1)]
        return InvariantBasis(ctype, polys, "closed-form")
    if fam == "D":
        return InvariantBasis(ctype, _d_family_polys(ctype.dim), "closed-form")
    if fam == "I2":
        return InvariantBasis(ctype, _dihedral_polys(ctype.p), "closed-form")

    # averaged types: resolve through cache
    for path in _cache_candidates(ctype, cache_dir):
        if path.exists():
            return load_basis(path, ctype)
    if ctype.family == "H4":
        raise CapabilityError(
            "H4 invariants require the shipped coefficient file "
            "(see tools/build_h4_invariants.py); none was found"
        )
    if not allow_build:
        raise CapabilityError(f"no cached invariants for {ctype.name}")
    basis = _build_averaged_basis(ctype)
    target = None
    if cache_dir:
        target = Path(cache_dir) / f"{ctype.canonical_key}.json"
    elif os.environ.get(CACHE_ENV_VAR):
        target = Path(os.environ[CACHE_ENV_VAR]) / f"{ctype.canonical_key}.json"
    if target is not None:
        save_basis(basis, target)
    return basis


def d_family_orderings(t: CoxeterType | str) -> list[InvariantBasis]:
    """Both placements of the degree-n product invariant at a degree tie
    (D(2k) only); single basis otherwise."""
    ctype = coxeter_type(t) if isinstance(t, str) else t
    if ctype.family != "D":
        raise UsageError("tie orderings only exist for the D family")
    first = InvariantBasis(ctype, _d_family_polys(ctype.dim), "closed-form")
    if ctype.dim % 2:
        return [first]
    variant = InvariantBasis(
        ctype, _d_family_polys(ctype.dim, product_first=True), "closed-form"
    )
    return [first, variant]


def verify_invariance(basis: InvariantBasis, generators) -> bool:
    """Exact invariance p o w == p for exact generator matrices; float
    generators are checked numerically at seeded random points."""
    if not generators:
        raise UsageError("no generators given")
    if isinstance(generators[0], np.ndarray):
        rng = np.random.default_rng(7)
        pts = rng.normal(size=(24, basis.nvars))
        vals = basis.compiled.P(pts)
        for w in generators:
            moved = basis.compiled.P(pts @ np.asarray(w).T)
            if not np.allclose(moved, vals, rtol=1e-9, atol=1e-9):
                return False
        return True
    for w in generators:
        for p in basis.polys:
            if p.substitute_linear(w) != p:
                return False
    return True


def numeric_jacobian_rank(basis: InvariantBasis, x=None, seed: int = 5) -> int:
    """Rank of the Jacobian at a generic unit-sphere point.

    The system is homogeneous, so the rank is scale-invariant; evaluating on
    the sphere keeps rows of very different degrees comparable."""
    if x is None:
        rng = np.random.default_rng(seed)
        x = rng.normal(size=basis.nvars) + 0.1
    x = np.asarray(x, dtype=float)
    x = x / max(np.linalg.norm(x), 1e-300)
    j = basis.compiled.J(x[None, :])[0]
    sv = np.linalg.svd(j, compute_uv=False)
    return int(np.sum(sv > 1e-8 * max(sv[0], 1e-300)))
