"""Sparse multivariate polynomials over Q(sqrt5).

A polynomial is a map from exponent tuples to nonzero `Scalar` coefficients.
All arithmetic is exact; canonical term order is graded lexicographic
(total degree first, then exponent tuple, leading term first) so that
serialization and hashing are reproducible.

Float evaluation comes in two flavors: a direct per-point monomial sum, and a
`CompiledPoly` that freezes (exponent matrix, coefficient vector) into numpy
arrays for batched evaluation on many points at once.  The compiled path is
what the fiber samplers and mesh builders run on.
"""

from __future__ import annotations

import json
import math
from itertools import combinations
from typing import Mapping, Sequence

import numpy as np

from .errors import CapabilityError, UsageError
from .field import ONE, Scalar, ZERO

Exponent = tuple[int, ...]

DET_SIZE_LIMIT = 6  # cofactor expansion budget; larger sizes go numeric


class SparsePoly:
    """Immutable sparse polynomial in `nvars` variables over Q(sqrt5)."""

    __slots__ = ("nvars", "terms")

    def __init__(self, nvars: int, terms: Mapping[Exponent, Scalar] | None = None):
        clean: dict[Exponent, Scalar] = {}
        if terms:
            for e, c in terms.items():
                if not isinstance(c, Scalar):
                    c = Scalar(c)
                if c.is_zero():
                    continue
                if len(e) != nvars or any(x < 0 for x in e):
                    raise UsageError(f"bad exponent {e} for nvars={nvars}")
                clean[tuple(e)] = c
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("SparsePoly is immutable")

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "SparsePoly":
        return SparsePoly(nvars)

    @staticmethod
    def const(nvars: int, c) -> "SparsePoly":
        return SparsePoly(nvars, {(0,) * nvars: c if isinstance(c, Scalar) else Scalar(c)})

    @staticmethod
    def variable(nvars: int, i: int) -> "SparsePoly":
        if not 0 <= i < nvars:
            raise UsageError(f"variable index {i} out of range for nvars={nvars}")
        e = [0] * nvars
        e[i] = 1
        return SparsePoly(nvars, {tuple(e): ONE})

    @staticmethod
    def monomial(nvars: int, e: Sequence[int], c=1) -> "SparsePoly":
        return SparsePoly(nvars, {tuple(e): c if isinstance(c, Scalar) else Scalar(c)})

    # -- structure -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(e) for e in self.terms), default=-1)

    def canonical_terms(self) -> list[tuple[Exponent, Scalar]]:
        """Terms in graded-lex order, leading term first."""
        return sorted(self.terms.items(), key=lambda t: (sum(t[0]), t[0]), reverse=True)

    def leading(self) -> tuple[Exponent, Scalar]:
        if not self.terms:
            raise UsageError("zero polynomial has no leading term")
        return self.canonical_terms()[0]

    def __eq__(self, other):
        if not isinstance(other, SparsePoly):
            return NotImplemented
        return self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self):
        return hash((self.nvars, tuple(self.canonical_terms())))

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.canonical_terms()[:8]:
            mono = "*".join(
                f"x{i}^{p}" if p > 1 else f"x{i}" for i, p in enumerate(e) if p
            )
            parts.append(f"({float(c):.6g}){'*' + mono if mono else ''}")
        tail = " + ..." if len(self.terms) > 8 else ""
        return " + ".join(parts) + tail

    # -- arithmetic ------------------------------------------------------------

    def _check_same_vars(self, other: "SparsePoly"):
        if self.nvars != other.nvars:
            raise UsageError(
                f"nvars mismatch: {self.nvars} vs {other.nvars}"
            )

    def __add__(self, other: "SparsePoly") -> "SparsePoly":
        self._check_same_vars(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e)
            s = c if s is None else s + c
            if s.is_zero():
                out.pop(e, None)
            else:
                out[e] = s
        return _raw(self.nvars, out)

    def __neg__(self) -> "SparsePoly":
        return _raw(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "SparsePoly") -> "SparsePoly":
        return self + (-other)

    def __mul__(self, other) -> "SparsePoly":
        if isinstance(other, (int, Scalar)):
            return self.scale(other)
        self._check_same_vars(other)
        out: dict[Exponent, Scalar] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                c = c1 * c2
                s = out.get(e)
                s = c if s is None else s + c
                if s.is_zero():
                    out.pop(e, None)
                else:
                    out[e] = s
        return _raw(self.nvars, out)

    __rmul__ = __mul__

    def scale(self, c) -> "SparsePoly":
        c = c if isinstance(c, Scalar) else Scalar(c)
        if c.is_zero():
            return SparsePoly(self.nvars)
        return _raw(self.nvars, {e: c * v for e, v in self.terms.items()})

    def __pow__(self, k: int) -> "SparsePoly":
        if k < 0:
            raise UsageError("negative polynomial power")
        out = SparsePoly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def diff(self, i: int) -> "SparsePoly":
        """Exact partial derivative with respect to variable i."""
        if not 0 <= i < self.nvars:
            raise UsageError(f"diff index {i} out of range for nvars={self.nvars}")
        out: dict[Exponent, Scalar] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            ne = list(e)
            ne[i] -= 1
            out[tuple(ne)] = c * Scalar(e[i])
        return _raw(self.nvars, out)

    # -- evaluation --------------------------------------------------------------

    def eval_exact(self, xs: Sequence[Scalar]) -> Scalar:
        if len(xs) != self.nvars:
            raise UsageError("evaluation point has wrong length")
        total = ZERO
        for e, c in self.terms.items():
            term = c
            for x, p in zip(xs, e):
                if p:
                    term = term * (x ** p)
            total = total + term
        return total

    def eval_float(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.nvars,):
            raise UsageError("evaluation point has wrong length")
        total = 0.0
        for e, c in self.terms.items():
            term = float(c)
            for xi, p in zip(x, e):
                if p:
                    term *= xi ** p
            total += term
        return total

    def __call__(self, x):
        if len(x) and isinstance(x[0], Scalar):
            return self.eval_exact(x)
        return self.eval_float(x)

    # -- composition with a linear map -------------------------------------------

    def substitute_linear(self, m: Sequence[Sequence[Scalar]]) -> "SparsePoly":
        """Exact composition p(M x): variable i is replaced by sum_j M[i][j] x_j."""
        n = self.nvars
        if len(m) != n or any(len(row) != n for row in m):
            raise UsageError("substitution matrix must be square of size nvars")
        rows = [
            _raw(n, {tuple(1 if k == j else 0 for k in range(n)): c
                     for j, c in enumerate(row) if not _as_scalar(c).is_zero()})
            for row in [[_as_scalar(c) for c in r] for r in m]
        ]
        # cache powers of each row form up to the max exponent used
        maxexp = [0] * n
        for e in self.terms:
            for i, p in enumerate(e):
                maxexp[i] = max(maxexp[i], p)
        pows: list[list[SparsePoly]] = []
        for i in range(n):
            cur = [SparsePoly.const(n, 1)]
            for _ in range(maxexp[i]):
                cur.append(cur[-1] * rows[i])
            pows.append(cur)
        out = SparsePoly.zero(n)
        for e, c in self.terms.items():
            term = SparsePoly.const(n, c)
            for i, p in enumerate(e):
                if p:
                    term = term * pows[i][p]
            out = out + term
        return out

    # -- serialization ------------------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "nvars": self.nvars,
            "terms": [
                {"e": list(e), "a": c.to_strings()[0], "b": c.to_strings()[1]}
                for e, c in self.canonical_terms()
            ],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "SparsePoly":
        terms = {
            tuple(t["e"]): Scalar.from_strings(t["a"], t["b"]) for t in d["terms"]
        }
        return SparsePoly(d["nvars"], terms)

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), separators=(",", ":"))

    @staticmethod
    def loads(s: str) -> "SparsePoly":
        return SparsePoly.from_json_dict(json.loads(s))

    def compiled(self) -> "CompiledPoly":
        return CompiledPoly(self)


def _raw(nvars: int, terms: dict[Exponent, Scalar]) -> SparsePoly:
    """Internal constructor that trusts `terms` to be clean."""
    p = SparsePoly.__new__(SparsePoly)
    object.__setattr__(p, "nvars", nvars)
    object.__setattr__(p, "terms", terms)
    return p


def _as_scalar(c) -> Scalar:
    return c if isinstance(c, Scalar) else Scalar(c)


def poly_arith(p: SparsePoly, q: SparsePoly, op: str) -> SparsePoly:
    """Dispatch form of +, -, *; kept for config-driven callers."""
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * q
    raise UsageError(f"unknown op {op!r}")


def expand_linear_power(coeffs: Sequence[Scalar], k: int) -> SparsePoly:
    """Exact expansion of (c_0 x_0 + ... + c_{n-1} x_{n-1})^k.

    Goes through the multinomial theorem with cached coefficient powers, which
    is much faster than repeated polynomial multiplication for the degree-30
    orbit sums.
    """
    n = len(coeffs)
    coeffs = [_as_scalar(c) for c in coeffs]
    live = [i for i, c in enumerate(coeffs) if not c.is_zero()]
    if not live:
        return SparsePoly.zero(n) if k > 0 else SparsePoly.const(n, 1)
    pows = {i: [ONE] for i in live}
    for i in live:
        for _ in range(k):
            pows[i].append(pows[i][-1] * coeffs[i])
    fact = [math.factorial(j) for j in range(k + 1)]
    out: dict[Exponent, Scalar] = {}

    def rec(pos: int, remaining: int, exp: list[int], coeff_mult: int, prod: Scalar):
        if pos == len(live) - 1:
            i = live[pos]
            e = exp.copy()
            e[i] = remaining
            c = prod * pows[i][remaining] * Scalar(coeff_mult // fact[remaining])
            key = tuple(e)
            s = out.get(key)
            s = c if s is None else s + c
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
            return
        i = live[pos]
        for take in range(remaining + 1):
            exp[i] = take
            rec(pos + 1, remaining - take, exp, coeff_mult // fact[take], prod * pows[i][take])
        exp[i] = 0

    rec(0, k, [0] * n, fact[k], ONE)
    return _raw(n, out)


class PolyMatrix:
    """Rectangular matrix of SparsePoly entries sharing one variable count."""

    __slots__ = ("rows", "cols", "nvars", "entries")

    def __init__(self, entries: Sequence[Sequence[SparsePoly]]):
        if not entries or not entries[0]:
            raise UsageError("PolyMatrix cannot be empty")
        cols = len(entries[0])
        nvars = entries[0][0].nvars
        for row in entries:
            if len(row) != cols:
                raise UsageError("PolyMatrix rows must have equal length")
            for p in row:
                if p.nvars != nvars:
                    raise UsageError("PolyMatrix entries must share nvars")
        object.__setattr__(self, "rows", len(entries))
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "entries", tuple(tuple(row) for row in entries))

    def __setattr__(self, name, value):
        raise AttributeError("PolyMatrix is immutable")

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i][j]

    def submatrix(self, row_idx: Sequence[int], col_idx: Sequence[int]) -> "PolyMatrix":
        return PolyMatrix([[self.entries[i][j] for j in col_idx] for i in row_idx])

    def det(self) -> SparsePoly:
        """Exact determinant by Laplace expansion with memoized minors.

        Minors over column subsets are shared across rows, which keeps the
        rank-4 cases (F4, H3 padded) in the low millions of coefficient
        multiplications.
        """
        if self.rows != self.cols:
            raise UsageError("determinant of a non-square PolyMatrix")
        n = self.rows
        if n > DET_SIZE_LIMIT:
            raise CapabilityError(
                f"symbolic determinant limited to size {DET_SIZE_LIMIT}; "
                "use the numeric rank path instead"
            )
        # minors[S] = det of the submatrix on the last len(S) rows and columns S
        minors: dict[tuple[int, ...], SparsePoly] = {
            (j,): self.entries[n - 1][j] for j in range(n)
        }
        for size in range(2, n + 1):
            row = n - size
            nxt: dict[tuple[int, ...], SparsePoly] = {}
            for cols in combinations(range(n), size):
                acc = SparsePoly.zero(self.nvars)
                for t, j in enumerate(cols):
                    entry = self.entries[row][j]
                    if entry.is_zero():
                        continue
                    rest = cols[:t] + cols[t + 1:]
                    piece = entry * minors[rest]
                    acc = acc + piece if t % 2 == 0 else acc - piece
                nxt[cols] = acc
            minors = nxt
        return minors[tuple(range(n))]

    def eval_float(self, x) -> np.ndarray:
        return np.array(
            [[p.eval_float(x) for p in row] for row in self.entries], dtype=float
        )


def poly_det(m: PolyMatrix) -> SparsePoly:
    return m.det()


class CompiledPoly:
    """Frozen (exponents, coefficients) arrays for batched float evaluation."""

    __slots__ = ("nvars", "expo", "coef")

    def __init__(self, p: SparsePoly):
        terms = p.canonical_terms()
        self.nvars = p.nvars
        if terms:
            self.expo = np.array([e for e, _ in terms], dtype=np.int64)
            self.coef = np.array([float(c) for _, c in terms], dtype=float)
        else:
            self.expo = np.zeros((0, p.nvars), dtype=np.int64)
            self.coef = np.zeros(0, dtype=float)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at x of shape (..., nvars); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.nvars:
            raise UsageError("evaluation point has wrong length")
        if self.coef.size == 0:
            return np.zeros(x.shape[:-1])
        mono = np.prod(x[..., None, :] ** self.expo, axis=-1)
        return mono @ self.coef
