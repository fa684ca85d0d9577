"""Jacobian of the invariant map: symbolic determinant factorization,
minor evaluation, and the rank-k property on chamber strata.

The determinant of the Jacobian of a basic invariant system equals a nonzero
constant times the product of the linear forms of all reflection
hyperplanes.  For exact root systems this identity is verified symbolically;
the constant depends on the normalization of the invariants and the forms,
so it is reported rather than asserted (the spot values c=6 for the Newton
S3 system and c=4 for B2 are fixed by the closed-form bases used here).

For I2(p) with float roots the exact product of the wall forms is still a
rational polynomial: conjugate wall pairs multiply to rational quadratics
and the full product is Im((x+iy)^p) up to a constant.  The symbolic check
runs against that closed form, and the per-root float product is tied to it
numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .coxeter import RootSystem, Stratum, sample_stratum
from .errors import CheckFailure, UsageError
from .field import Scalar
from .invariants import InvariantBasis
from .poly import PolyMatrix, SparsePoly

DET_EXACT_RANK_LIMIT = 6
NUMERIC_RANK_REL_TOL = 1e-8  # singular values below this fraction of the top one


def jacobian_matrix(basis: InvariantBasis) -> PolyMatrix:
    """Entry (i, j) = d p_i / d x_j, exact."""
    n = basis.nvars
    return PolyMatrix([[p.diff(j) for j in range(n)] for p in basis.polys])


def wall_form_product(rs: RootSystem) -> SparsePoly:
    """Exact product of the positive-root linear forms.

    For inexact dihedral systems the closed form Im((x+iy)^p) is returned;
    it equals the product of the wall forms in the normalization where
    conjugate wall pairs are merged into rational quadratics.
    """
    if rs.exact:
        n = rs.n
        out = SparsePoly.const(n, 1)
        for v in rs.positive:
            form = SparsePoly(
                n,
                {
                    tuple(1 if j == i else 0 for j in range(n)): c
                    for i, c in enumerate(v)
                    if not c.is_zero()
                },
            )
            out = out * form
        return out
    return _dihedral_skew(rs.ctype.p)


def _dihedral_skew(p: int) -> SparsePoly:
    # Im((x+iy)^p) = sum_{j odd} C(p,j) (-1)^{(j-1)/2} x^{p-j} y^j
    terms = {}
    for j in range(1, p + 1, 2):
        terms[(p - j, j)] = Scalar(math.comb(p, j) * (-1) ** ((j - 1) // 2))
    return SparsePoly(2, terms)


@dataclass
class FactorizationReport:
    type_name: str
    exact: bool
    c: float                      # constant as a float, for reporting
    c_exact: Scalar | None        # exact constant on the symbolic path
    det_degree: int
    n_forms: int
    residual: float               # 0.0 on the exact path; max rel. deviation numeric
    float_product_ratio_spread: float = 0.0  # inexact roots: per-root vs closed form

    def to_dict(self) -> dict:
        d = {
            "type": self.type_name,
            "exact": self.exact,
            "c": self.c,
            "det_degree": self.det_degree,
            "n_forms": self.n_forms,
            "residual": self.residual,
        }
        if self.c_exact is not None:
            a, b = self.c_exact.to_strings()
            d["c_exact"] = {"a": a, "b": b}
        if self.float_product_ratio_spread:
            d["float_product_ratio_spread"] = self.float_product_ratio_spread
        return d


def verify_det_factorization(
    basis: InvariantBasis, rs: RootSystem, seed: int = 3, numeric_points: int = 100
) -> FactorizationReport:
    """Check det J == c * prod(wall forms) and return the constant.

    Exact path for rank <= 6 (symbolic determinant and product); numeric
    ratio test at random regular points otherwise.  A zero or non-constant
    ratio raises CheckFailure: it flags an invariant-construction bug.
    """
    n = basis.nvars
    d_expected = rs.ctype.n_positive_roots
    if n <= DET_EXACT_RANK_LIMIT:
        det = jacobian_matrix(basis).det()
        if det.is_zero():
            raise CheckFailure(f"{rs.ctype.name}: Jacobian determinant is zero")
        if det.degree() != d_expected:
            raise CheckFailure(
                f"{rs.ctype.name}: det degree {det.degree()} != reflection count {d_expected}"
            )
        prod = wall_form_product(rs)
        lead_det = det.leading()
        lead_prod = prod.leading()
        if lead_det[0] != lead_prod[0]:
            raise CheckFailure(
                f"{rs.ctype.name}: det and wall product have different leading monomials"
            )
        c = lead_det[1] / lead_prod[1]
        if (det - prod.scale(c)).is_zero():
            spread = 0.0
            if not rs.exact:
                spread = _float_product_spread(rs, prod, seed)
            return FactorizationReport(
                rs.ctype.name, True, float(c), c, det.degree(), d_expected, 0.0, spread
            )
        raise CheckFailure(
            f"{rs.ctype.name}: det J - c * prod(wall forms) is not identically zero"
        )
    return _numeric_factorization(basis, rs, seed, numeric_points)


def _float_product_spread(rs: RootSystem, closed_form: SparsePoly, seed: int) -> float:
    """Max relative spread of prod(<root,x>) / closed_form(x) over random
    regular points; ties the float per-root forms to the exact product."""
    rng = np.random.default_rng(seed)
    ratios = []
    while len(ratios) < 50:
        x = rng.normal(size=rs.n)
        lam = rs.positive_f @ x
        if np.min(np.abs(lam)) < 1e-3:
            continue
        ratios.append(float(np.prod(lam)) / closed_form.eval_float(x))
    ratios = np.array(ratios)
    mid = np.median(ratios)
    return float(np.max(np.abs(ratios - mid) / abs(mid)))


def _numeric_factorization(
    basis: InvariantBasis, rs: RootSystem, seed: int, numeric_points: int
) -> FactorizationReport:
    rng = np.random.default_rng(seed)
    cb = basis.compiled
    ratios = []
    while len(ratios) < numeric_points:
        x = rng.normal(size=rs.n)
        lam = rs.positive_f @ x
        if np.min(np.abs(lam)) < 1e-3 * np.linalg.norm(x):
            continue
        det = float(np.linalg.det(cb.J(x[None, :])[0]))
        ratios.append(det / float(np.prod(lam)))
    ratios = np.array(ratios)
    mid = float(np.median(ratios))
    if mid == 0.0:
        raise CheckFailure(f"{rs.ctype.name}: numeric det/product ratio is zero")
    spread = float(np.max(np.abs(ratios - mid) / abs(mid)))
    if spread > 1e-8:
        raise CheckFailure(
            f"{rs.ctype.name}: det/product ratio varies by {spread:.2e} (> 1e-8)",
            witness={"ratios": ratios.tolist()},
        )
    d = sum(k - 1 for k in basis.degrees)
    return FactorizationReport(rs.ctype.name, False, mid, None, d, d, spread)


# ---------------------------------------------------------------------------
# minors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinorSpec:
    rows: tuple[int, ...]   # invariant indices
    cols: tuple[int, ...]   # variable indices

    def __post_init__(self):
        if len(self.rows) != len(self.cols):
            raise UsageError("minor must be square")
        if len(set(self.rows)) != len(self.rows) or len(set(self.cols)) != len(self.cols):
            raise UsageError("minor indices must be distinct")


def minor_eval(jm: PolyMatrix, spec: MinorSpec, x) -> float:
    """Determinant of the selected Jacobian submatrix at a float point."""
    if max(spec.rows, default=-1) >= jm.rows or max(spec.cols, default=-1) >= jm.cols:
        raise UsageError("minor indices out of range")
    x = np.asarray(x, dtype=float)
    sub = np.array(
        [[jm[i, j].eval_float(x) for j in spec.cols] for i in spec.rows]
    )
    return float(np.linalg.det(sub))


def _batched_minor_max(J: np.ndarray, rows, size: int) -> np.ndarray:
    """Max |minor| over all column subsets, per sample.

    J has shape (S, r, n); rows selects which Jacobian rows participate.
    """
    S, _, n = J.shape
    sub = J[:, rows, :]
    best = np.zeros(S)
    for cols in combinations(range(n), size):
        vals = np.abs(np.linalg.det(sub[:, :, cols]))
        best = np.maximum(best, vals)
    return best


def numeric_rank(J: np.ndarray) -> np.ndarray:
    """Singular-value rank per sample with a scale-free threshold."""
    sv = np.linalg.svd(J, compute_uv=False)
    top = np.maximum(sv[..., 0], 1e-300)
    return np.sum(sv > NUMERIC_RANK_REL_TOL * top[..., None], axis=-1)


@dataclass
class StratumRankReport:
    stratum_id: str
    samples: int
    k: int
    min_leading_minor: float      # min over samples of max normalized k-minor
    max_bordering_minor: float    # max normalized (k+1)-minor, first k+1 degrees
    max_any_minor: float          # same but over every row subset of size k+1
    leading_degenerate: bool      # every admissible leading block has an
                                  # identically-zero row on this stratum
    degenerate_rows: list[int]
    ranks: list[int] = field(default_factory=list)
    passed: bool = False
    witness: list[float] | None = None

    def to_dict(self) -> dict:
        return {
            "stratum": self.stratum_id,
            "samples": self.samples,
            "k": self.k,
            "min_leading_minor": self.min_leading_minor,
            "max_bordering_minor": self.max_bordering_minor,
            "max_any_minor": self.max_any_minor,
            "leading_degenerate": self.leading_degenerate,
            "degenerate_rows": self.degenerate_rows,
            "rank_counts": {str(r): self.ranks.count(r) for r in sorted(set(self.ranks))},
            "pass": self.passed,
            **({"witness": self.witness} if self.witness else {}),
        }


def _gradient_scales(basis: InvariantBasis) -> np.ndarray:
    """Per-invariant gradient magnitude on the unit sphere (fixed seeded
    sample); used to normalize minors into scale-free quantities."""
    rng = np.random.default_rng(97531)
    pts = rng.normal(size=(64, basis.nvars))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    J = basis.compiled.J(pts)
    return np.max(np.linalg.norm(J, axis=2), axis=0)


def _degree_row_options(degs, size: int):
    """Row subsets whose degree multiset equals the first `size` degrees.

    Equal degrees make the basis order ambiguous there; the rank statement
    allows any representative of the tied block (the row-exchange freedom
    for the D family), so every such subset is admissible.
    """
    target = sorted(degs[:size])
    out = []
    for rows in combinations(range(len(degs)), size):
        if sorted(degs[r] for r in rows) == target:
            out.append(list(rows))
    return out


def verify_stratum_rank(
    basis: InvariantBasis,
    rs: RootSystem,
    stratum: Stratum,
    samples: int = 100,
    seed: int = 7,
    tol: float = 1e-9,
) -> StratumRankReport:
    """Rank-k certificate on a dimension-k stratum.

    At unit-sphere samples of the stratum, with minors normalized by the
    product of per-invariant gradient scales:

      (a) some k x k minor of a leading block (first k degrees, tied rows
          interchangeable) exceeds tol;
      (b) every (k+1) x (k+1) minor over the first k+1 degrees is below tol;
      (c) the singular-value rank of the full Jacobian is exactly k;
      (d) in fact every (k+1)-row minor, any rows and columns, is below tol.

    When the first k degrees force a row that vanishes identically on the
    stratum (the D(2m) product invariant on faces where two coordinates are
    pinned to zero), part (a) is vacuous: no generic fiber of the first k
    invariants meets such a stratum.  The report flags this instead of
    failing, with the degenerate rows recorded.
    """
    k = stratum.dim
    if k < 1:
        raise UsageError("rank verification needs a stratum of dimension >= 1")
    n = basis.nvars
    X = sample_stratum(stratum, samples, 1.0, seed, rs)
    X = X / np.linalg.norm(X, axis=1, keepdims=True)
    J = basis.compiled.J(X)  # (S, n_invariants, n)
    scales = _gradient_scales(basis)
    degs = list(basis.degrees)

    row_norms = np.max(np.linalg.norm(J, axis=2), axis=0)  # max over samples
    dead_rows = [i for i in range(n) if row_norms[i] <= 1e-10 * scales[i]]

    lead = np.zeros(samples)
    degenerate = True
    for rows in _degree_row_options(degs, k):
        if any(r in dead_rows for r in rows):
            continue
        degenerate = False
        vals = _batched_minor_max(J, rows, k) / float(np.prod(scales[rows]))
        lead = np.maximum(lead, vals)
    leading_ok = bool(np.all(lead > tol)) and not degenerate

    if k < n:
        border = np.zeros(samples)
        for rows in _degree_row_options(degs, k + 1):
            vals = _batched_minor_max(J, rows, k + 1) / float(np.prod(scales[rows]))
            border = np.maximum(border, vals)
        any_minor = np.zeros(samples)
        for rows in combinations(range(J.shape[1]), k + 1):
            vals = _batched_minor_max(J, list(rows), k + 1)
            any_minor = np.maximum(any_minor, vals / float(np.prod(scales[list(rows)])))
    else:
        border = np.zeros(samples)
        any_minor = np.zeros(samples)
    ranks = numeric_rank(J)

    checks = (border <= tol) & (ranks == k) & (any_minor <= tol)
    if not degenerate:
        checks &= lead > tol
    passed = bool(np.all(checks))
    witness = None
    if not passed:
        bad = int(np.argmin(checks))
        witness = X[bad].tolist()
    return StratumRankReport(
        stratum_id=stratum.stratum_id,
        samples=samples,
        k=k,
        min_leading_minor=float(np.min(lead)),
        max_bordering_minor=float(np.max(border)) if k < n else 0.0,
        max_any_minor=float(np.max(any_minor)) if k < n else 0.0,
        leading_degenerate=degenerate,
        degenerate_rows=dead_rows,
        ranks=[int(r) for r in ranks],
        passed=passed,
        witness=witness,
    )


def det_vanishing_calibration(
    basis: InvariantBasis, rs: RootSystem, n_points: int = 10_000, seed: int = 13
) -> dict:
    """Two-sided check that det J vanishes exactly on the union of the
    reflection hyperplanes.

    Everything is evaluated at unit-sphere points with unit wall normals, so
    every wall form satisfies |form| <= 1 and the factorization gives clean
    bounds in both directions:

      * |det| / prod|forms| is one constant c (checked to 1e-8 relative);
      * near a wall (min form <= eps): |det| <= c * eps;
      * det small (|det| <= delta): min form <= (delta / c)^(1/d), since the
        minimum is below the geometric mean.

    The sample mixes random directions with points constructed next to the
    walls (offsets down to 1e-8), because random directions alone never come
    close enough to exercise the bounds.
    """
    rng = np.random.default_rng(seed)
    n = rs.n
    X = rng.normal(size=(n_points, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    unit_roots = rs.positive_f / np.linalg.norm(rs.positive_f, axis=1, keepdims=True)
    # constructed near-wall points: project onto a wall, offset by eps
    built = []
    for eps in (1e-8, 1e-7, 1e-6):
        for t in range(len(unit_roots)):
            y = rng.normal(size=n)
            y = y - (y @ unit_roots[t]) * unit_roots[t] + eps * unit_roots[t]
            ny = np.linalg.norm(y)
            if ny > 1e-6:
                built.append(y / ny)
    X = np.concatenate([X, np.array(built)], axis=0)

    det = np.abs(np.linalg.det(basis.compiled.J(X)))
    forms = np.abs(X @ unit_roots.T)
    min_form = np.min(forms, axis=1)
    prod_form = np.prod(forms, axis=1)

    # the constant is measured away from the walls, where the determinant is
    # far above float noise; near-wall points feed the bound checks below
    usable = min_form >= 1e-3
    ratio = det[usable] / prod_form[usable]
    c_med = float(np.median(ratio))
    ratio_spread = float(np.max(np.abs(ratio - c_med)) / c_med)

    d = len(unit_roots)
    near_wall = min_form <= 1e-6
    det_near_wall_max = float(np.max(det[near_wall], initial=0.0))
    small_det = det <= 1e-10
    form_bound = (det[small_det] / (0.5 * c_med)) ** (1.0 / d)
    small_det_ok = bool(np.all(min_form[small_det] <= form_bound + 1e-12))
    return {
        "n": int(len(X)),
        "c_median": c_med,
        "ratio_spread": ratio_spread,
        "n_near_wall": int(np.sum(near_wall)),
        "det_near_wall_max": det_near_wall_max,
        "det_near_wall_bound": 1.1 * c_med * 1e-6,
        "n_det_small": int(np.sum(small_det)),
        "small_det_form_ok": small_det_ok,
    }
