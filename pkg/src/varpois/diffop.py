"""Scalar, matrix, and pseudodifferential operators, and differential linear
algebra over the coefficient field: majorants, leading matrices, row echelon
form, majorant-preserving reduction, Dieudonne determinants, and a
rational-ansatz solver for linear differential systems.

Operators are sums a_n d^n with coefficients in V (differential polynomials),
F (quasiconstants), the fraction field of V, or linear forms in unknown
functions; composition follows d o a = a d + a'.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Sequence

from .diffalg import (DiffAlgebra, DiffPoly, DiffRat, format_diff_poly)
from .field import FieldElem, format_field_elem
from .linform import LinForm
from .linsolve import det as _dense_det
from .linsolve import gauss_solve


class ShapeMismatch(Exception):
    pass


class DegenerateShape(Exception):
    """Majorant of an all-zero matrix or column is undefined."""


class NotAMajorant(Exception):
    pass


class DegenerateLeadingMatrix(Exception):
    pass


class NotSkewadjoint(Exception):
    pass


class TruncationExceeded(Exception):
    """A pseudodifferential coefficient below the tracked depth was read."""


class NoRationalSolution(Exception):
    pass


class Incomplete(Exception):
    """The rational ansatz was exhausted without an answer."""


INFINITE = math.inf


def _is_scalar_kind(c) -> bool:
    return isinstance(c, (FieldElem, DiffPoly, DiffRat, LinForm))


class ScalarDiffOp:
    """Sum of c_n d^n; coefficients c_n support +, -, *, derive, is_zero."""

    __slots__ = ("alg", "coeffs")

    def __init__(self, alg: DiffAlgebra, coeffs: dict):
        self.alg = alg
        self.coeffs = {n: c for n, c in coeffs.items() if not c.is_zero()}

    # -- constructors --------------------------------------------------------

    @classmethod
    def zero(cls, alg: DiffAlgebra) -> "ScalarDiffOp":
        return cls(alg, {})

    @classmethod
    def identity(cls, alg: DiffAlgebra) -> "ScalarDiffOp":
        return cls(alg, {0: alg.one})

    @classmethod
    def d(cls, alg: DiffAlgebra, n: int = 1) -> "ScalarDiffOp":
        return cls(alg, {n: alg.one})

    @classmethod
    def mul_by(cls, f) -> "ScalarDiffOp":
        """Multiplication operator by a differential polynomial."""
        return cls(f.alg, {0: f})

    # -- structure ------------------------------------------------------------

    def order(self) -> Optional[int]:
        """Largest n with nonzero coefficient; None for the zero operator."""
        return max(self.coeffs) if self.coeffs else None

    def leading_coefficient(self):
        n = self.order()
        return self.alg.zero if n is None else self.coeffs[n]

    def coeff(self, n: int):
        return self.coeffs.get(n, self.alg.zero)

    def is_zero(self) -> bool:
        return not self.coeffs

    def is_quasiconstant(self) -> bool:
        return all(isinstance(c, FieldElem)
                   or (isinstance(c, DiffPoly) and c.is_quasiconstant())
                   for c in self.coeffs.values())

    def field_coeffs(self) -> dict:
        """Coefficients as FieldElem; requires quasiconstantness."""
        out = {}
        for n, c in self.coeffs.items():
            if isinstance(c, FieldElem):
                out[n] = c
            elif isinstance(c, DiffPoly) and c.is_quasiconstant():
                out[n] = c.quasiconstant_part()
            else:
                raise ValueError("operator is not quasiconstant")
        return out

    # -- ring structure ---------------------------------------------------------

    def __add__(self, other: "ScalarDiffOp") -> "ScalarDiffOp":
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            s = out.get(n)
            c = c if s is None else s + c
            if c.is_zero():
                out.pop(n, None)
            else:
                out[n] = c
        return ScalarDiffOp(self.alg, out)

    def __sub__(self, other: "ScalarDiffOp") -> "ScalarDiffOp":
        return self + (-other)

    def __neg__(self) -> "ScalarDiffOp":
        return ScalarDiffOp(self.alg, {n: -c for n, c in self.coeffs.items()})

    def scale(self, c) -> "ScalarDiffOp":
        return ScalarDiffOp(self.alg, {n: v * c for n, v in self.coeffs.items()})

    def compose(self, other: "ScalarDiffOp") -> "ScalarDiffOp":
        """(self o other): d^m o c = sum_j C(m, j) c^(j) d^(m-j)."""
        out: dict = {}
        for m, a in self.coeffs.items():
            for n, b in other.coeffs.items():
                bded = b
                for j in range(m + 1):
                    coef = math.comb(m, j)
                    term = a * bded if coef == 1 else a * bded * Fraction(coef)
                    key = m + n - j
                    s = out.get(key)
                    term = term if s is None else s + term
                    if term.is_zero():
                        out.pop(key, None)
                    else:
                        out[key] = term
                    if j < m:
                        bded = bded.derive()
        return ScalarDiffOp(self.alg, out)

    def __mul__(self, other):
        if isinstance(other, ScalarDiffOp):
            return self.compose(other)
        return self.scale(other)

    def adjoint(self) -> "ScalarDiffOp":
        """(sum c_n d^n)* = sum (-d)^n o c_n (coefficientwise; matrix
        transposition happens at the matrix level)."""
        out: dict = {}
        for n, c in self.coeffs.items():
            cd = c
            for j in range(n + 1):
                coef = math.comb(n, j) * (-1) ** n
                term = cd * Fraction(coef)
                key = n - j
                s = out.get(key)
                term = term if s is None else s + term
                if term.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = term
                if j < n:
                    cd = cd.derive()
        return ScalarDiffOp(self.alg, out)

    def apply(self, f: DiffPoly) -> DiffPoly:
        out = self.alg.zero
        for n, c in self.coeffs.items():
            g = f
            for _ in range(n):
                g = g.derive()
            out = out + c * g
        return out

    def apply_scalar(self, v: FieldElem) -> FieldElem:
        """Apply a quasiconstant operator to a field element."""
        out = self.alg.field.zero
        for n, c in self.field_coeffs().items():
            g = v
            for _ in range(n):
                g = g.derive()
            out = out + c * g
        return out

    def symbol(self, k: int = 1, slot: int = 0):
        """The operator symbol sum c_n lam_slot^n as a LambdaPoly."""
        from .lambdapoly import LambdaPoly
        terms = {}
        for n, c in self.coeffs.items():
            e = [0] * k
            e[slot] = n
            p = c if isinstance(c, DiffPoly) else self.alg.from_scalar(c)
            terms[tuple(e)] = p
        return LambdaPoly(self.alg, k, terms)

    @classmethod
    def from_symbol(cls, L) -> "ScalarDiffOp":
        if L.k != 1:
            raise ValueError("operator symbols have one lambda variable")
        return cls(L.alg, {e[0]: p for e, p in L.terms.items()})

    def map_coeffs(self, fn) -> "ScalarDiffOp":
        return ScalarDiffOp(self.alg, {n: fn(c) for n, c in self.coeffs.items()})

    def __eq__(self, other):
        if not isinstance(other, ScalarDiffOp):
            return NotImplemented
        return self.alg == other.alg and (self - other).is_zero()

    def __repr__(self):
        return f"ScalarDiffOp({format_scalar_op(self)})"

    # -- canonical forms ---------------------------------------------------------

    def right_coefficient_form(self) -> dict:
        """Coefficients b_n of the rewriting sum d^n o b_n."""
        res = dict(self.coeffs)
        b: dict = {}
        n = self.order()
        if n is None:
            return {}
        for m in range(n, -1, -1):
            c = res.get(m)
            if c is None or c.is_zero():
                continue
            b[m] = c
            expanded = ScalarDiffOp.d(self.alg, m).compose(
                ScalarDiffOp(self.alg, {0: c}))
            for key, v in expanded.coeffs.items():
                s = res.get(key, None)
                w = (-v) if s is None else s - v
                if w.is_zero():
                    res.pop(key, None)
                else:
                    res[key] = w
        assert all(v.is_zero() for v in res.values())
        return b

    def split_form(self) -> tuple:
        """Coefficients ({c_m}, {d_n}) of
        sum d^(m+1) o c_m d^m + sum d^n o d_n d^n."""
        rem = self
        cs: dict = {}
        ds: dict = {}
        while not rem.is_zero():
            o = rem.order()
            lead = rem.leading_coefficient()
            if o % 2 == 1:
                m = (o - 1) // 2
                cs[m] = lead
                t = ScalarDiffOp.d(self.alg, m + 1).compose(
                    ScalarDiffOp(self.alg, {m: lead}))
            else:
                n = o // 2
                ds[n] = lead
                t = ScalarDiffOp.d(self.alg, n).compose(
                    ScalarDiffOp(self.alg, {n: lead}))
            rem = rem - t
        return cs, ds

    @classmethod
    def from_right_form(cls, alg: DiffAlgebra, b: dict) -> "ScalarDiffOp":
        out = cls.zero(alg)
        for n, c in b.items():
            out = out + cls.d(alg, n).compose(cls(alg, {0: c}))
        return out

    @classmethod
    def from_split_form(cls, alg: DiffAlgebra, cs: dict, ds: dict) -> "ScalarDiffOp":
        out = cls.zero(alg)
        for m, c in cs.items():
            out = out + cls.d(alg, m + 1).compose(cls(alg, {m: c}))
        for n, c in ds.items():
            out = out + cls.d(alg, n).compose(cls(alg, {n: c}))
        return out


def canonical_forms(P: ScalarDiffOp) -> dict:
    """The three canonical writings of a scalar operator."""
    cs, ds = P.split_form()
    return {"left": dict(P.coeffs), "right": P.right_coefficient_form(),
            "split": (cs, ds)}


def format_scalar_op(op: ScalarDiffOp) -> str:
    if op.is_zero():
        return "0"
    bits = []
    for n in sorted(op.coeffs, reverse=True):
        c = op.coeffs[n]
        cs = format_diff_poly(c) if isinstance(c, DiffPoly) else (
            format_field_elem(c) if isinstance(c, FieldElem) else str(c))
        if n == 0:
            bits.append(cs if " " not in cs else f"({cs})")
            continue
        dpart = "d" if n == 1 else f"d^{n}"
        if cs == "1":
            bits.append(dpart)
        elif cs == "-1":
            bits.append(f"-{dpart}")
        else:
            if " " in cs or "/" in cs:
                cs = f"({cs})"
            bits.append(f"{cs}*{dpart}")
    return " + ".join(bits)


class MatDiffOp:
    """Rectangular matrix of scalar differential operators."""

    __slots__ = ("alg", "rows", "m", "n")

    def __init__(self, alg: DiffAlgebra, rows: Sequence[Sequence[ScalarDiffOp]]):
        self.alg = alg
        self.rows = [list(r) for r in rows]
        self.m = len(self.rows)
        self.n = len(self.rows[0]) if self.rows else 0
        if any(len(r) != self.n for r in self.rows):
            raise ShapeMismatch("ragged matrix")

    @classmethod
    def identity(cls, alg: DiffAlgebra, size: int) -> "MatDiffOp":
        return cls(alg, [[ScalarDiffOp.identity(alg) if i == j
                          else ScalarDiffOp.zero(alg)
                          for j in range(size)] for i in range(size)])

    @classmethod
    def zero(cls, alg: DiffAlgebra, m: int, n: int) -> "MatDiffOp":
        return cls(alg, [[ScalarDiffOp.zero(alg) for _ in range(n)]
                         for _ in range(m)])

    @classmethod
    def scalar(cls, op: ScalarDiffOp) -> "MatDiffOp":
        return cls(op.alg, [[op]])

    @classmethod
    def from_constant(cls, alg: DiffAlgebra, mat: Sequence[Sequence]) -> "MatDiffOp":
        return cls(alg, [[ScalarDiffOp(alg, {0: alg.from_scalar(
            alg.field.coerce(v))}) for v in row] for row in mat])

    def entry(self, i: int, j: int) -> ScalarDiffOp:
        return self.rows[i][j]

    def is_square(self) -> bool:
        return self.m == self.n

    def is_zero(self) -> bool:
        return all(e.is_zero() for r in self.rows for e in r)

    def is_quasiconstant(self) -> bool:
        return all(e.is_quasiconstant() for r in self.rows for e in r)

    def __add__(self, other: "MatDiffOp") -> "MatDiffOp":
        self._shape_eq(other)
        return MatDiffOp(self.alg, [[a + b for a, b in zip(ra, rb)]
                                    for ra, rb in zip(self.rows, other.rows)])

    def __sub__(self, other: "MatDiffOp") -> "MatDiffOp":
        self._shape_eq(other)
        return MatDiffOp(self.alg, [[a - b for a, b in zip(ra, rb)]
                                    for ra, rb in zip(self.rows, other.rows)])

    def __neg__(self) -> "MatDiffOp":
        return MatDiffOp(self.alg, [[-a for a in r] for r in self.rows])

    def _shape_eq(self, other: "MatDiffOp"):
        if (self.m, self.n) != (other.m, other.n):
            raise ShapeMismatch(f"{self.m}x{self.n} vs {other.m}x{other.n}")

    def compose(self, other: "MatDiffOp") -> "MatDiffOp":
        if self.n != other.m:
            raise ShapeMismatch(f"{self.m}x{self.n} o {other.m}x{other.n}")
        out = []
        for i in range(self.m):
            row = []
            for j in range(other.n):
                acc = ScalarDiffOp.zero(self.alg)
                for t in range(self.n):
                    acc = acc + self.rows[i][t].compose(other.rows[t][j])
                row.append(acc)
            out.append(row)
        return MatDiffOp(self.alg, out)

    __mul__ = compose

    def adjoint(self) -> "MatDiffOp":
        """Transpose of entrywise adjoints: (A*)_{ij} = (A_{ji})*."""
        return MatDiffOp(self.alg, [[self.rows[j][i].adjoint()
                                     for j in range(self.m)]
                                    for i in range(self.n)])

    def apply(self, vec: Sequence[DiffPoly]) -> list:
        if len(vec) != self.n:
            raise ShapeMismatch("vector length mismatch")
        return [sum((self.rows[i][j].apply(vec[j]) for j in range(self.n)),
                    self.alg.zero) for i in range(self.m)]

    def scale(self, c) -> "MatDiffOp":
        return MatDiffOp(self.alg, [[e.scale(c) for e in r] for r in self.rows])

    def order(self) -> Optional[int]:
        orders = [e.order() for r in self.rows for e in r if not e.is_zero()]
        return max(orders) if orders else None

    def leading_coefficient_matrix(self) -> list:
        """Coefficient matrix of d^N where N is the overall order."""
        N = self.order()
        if N is None:
            raise DegenerateShape("zero matrix has no leading coefficient")
        return [[e.coeff(N) for e in r] for r in self.rows]

    def map_entries(self, fn) -> "MatDiffOp":
        return MatDiffOp(self.alg, [[fn(e) for e in r] for r in self.rows])

    def __eq__(self, other):
        if not isinstance(other, MatDiffOp):
            return NotImplemented
        return (self.m, self.n) == (other.m, other.n) and (self - other).is_zero()

    def __repr__(self):
        body = ",".join("[" + ", ".join(format_scalar_op(e) for e in r) + "]"
                        for r in self.rows)
        return f"MatDiffOp([{body}])"


# -- pseudodifferential operators ------------------------------------------------


class PseudoDiffOp:
    """Quasiconstant pseudodifferential operator: finitely many tracked
    coefficients, orders bounded above; ``floor`` is the lowest order whose
    coefficient is trusted (None = all stored coefficients are exact and the
    rest vanish)."""

    __slots__ = ("field", "coeffs", "floor")

    def __init__(self, field, coeffs: dict, floor: Optional[int] = None):
        if floor is not None:
            coeffs = {n: c for n, c in coeffs.items() if n >= floor}
        self.field = field
        self.coeffs = {n: c for n, c in coeffs.items() if not c.is_zero()}
        self.floor = floor

    @classmethod
    def from_scalar_op(cls, op: ScalarDiffOp) -> "PseudoDiffOp":
        return cls(op.alg.field, op.field_coeffs(), None)

    @classmethod
    def zero(cls, field) -> "PseudoDiffOp":
        return cls(field, {}, None)

    @classmethod
    def identity(cls, field) -> "PseudoDiffOp":
        return cls(field, {0: field.one}, None)

    def order(self) -> Optional[int]:
        if self.coeffs:
            return max(self.coeffs)
        if self.floor is not None:
            return None  # zero up to truncation
        return None

    def is_zero(self) -> bool:
        return not self.coeffs

    def leading_coefficient(self) -> FieldElem:
        n = self.order()
        return self.field.zero if n is None else self.coeffs[n]

    def coeff(self, n: int) -> FieldElem:
        if self.floor is not None and n < self.floor:
            raise TruncationExceeded(f"coefficient of order {n} is below the "
                                     f"tracked depth {self.floor}")
        return self.coeffs.get(n, self.field.zero)

    def __add__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        floor = _floor_max(self.floor, other.floor)
        out = dict(self.coeffs)
        for n, c in other.coeffs.items():
            s = out.get(n)
            c = c if s is None else s + c
            if c.is_zero():
                out.pop(n, None)
            else:
                out[n] = c
        return PseudoDiffOp(self.field, out, floor)

    def __sub__(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        return self + (-other)

    def __neg__(self) -> "PseudoDiffOp":
        return PseudoDiffOp(self.field, {n: -c for n, c in self.coeffs.items()},
                            self.floor)

    def scale(self, c: FieldElem) -> "PseudoDiffOp":
        return PseudoDiffOp(self.field,
                            {n: v * c for n, v in self.coeffs.items()},
                            self.floor)

    def compose(self, other: "PseudoDiffOp") -> "PseudoDiffOp":
        """d^m o c expands by the binomial series (infinite for m < 0);
        the result floor accounts for both inputs' floors and the tail."""
        sa, sb = self.order(), other.order()
        floor = None
        if self.floor is not None and sb is not None:
            floor = _floor_max(floor, self.floor + sb)
        if other.floor is not None and sa is not None:
            floor = _floor_max(floor, other.floor + sa)
        if self.floor is not None and sb is None:
            floor = _floor_max(floor, self.floor)
        if other.floor is not None and sa is None:
            floor = _floor_max(floor, other.floor)
        has_negative = any(n < 0 for n in self.coeffs)
        needs_tail = has_negative and any(not c.derive().is_zero()
                                          for c in other.coeffs.values())
        if floor is None and needs_tail:
            top = (sa or 0) + (sb or 0)
            floor = top - _DEFAULT_PSEUDO_DEPTH
        out: dict = {}
        for m, a in self.coeffs.items():
            for n, b in other.coeffs.items():
                j = 0
                bded = b
                while True:
                    key = m + n - j
                    if floor is not None and key < floor:
                        break
                    coef = math.comb(m, j) if m >= 0 else _neg_binom(m, j)
                    if coef:
                        term = a * bded * Fraction(coef)
                        s = out.get(key)
                        term = term if s is None else s + term
                        if term.is_zero():
                            out.pop(key, None)
                        else:
                            out[key] = term
                    j += 1
                    if m >= 0 and j > m:
                        break
                    bded = bded.derive()
                    if bded.is_zero():
                        break
        return PseudoDiffOp(self.field, out, floor)

    def inverse(self, depth: int = 0) -> "PseudoDiffOp":
        """Right inverse to the given depth: self o result = 1 + O(d^(N-depth))."""
        N = self.order()
        if N is None:
            raise ZeroDivisionError("inverse of (truncation of) zero")
        depth = max(depth, _DEFAULT_PSEUDO_DEPTH)
        lead = self.coeffs[N]
        inv = PseudoDiffOp(self.field, {-N: self.field.one / lead},
                           -N - depth)
        one = PseudoDiffOp.identity(self.field)
        for _ in range(depth + 1):
            r = one - self.compose(inv)
            ro = r.order()
            if ro is None or (inv.floor is not None and ro - N < inv.floor):
                break
            corr = PseudoDiffOp(self.field,
                                {ro - N: r.coeffs[ro] / lead}, inv.floor)
            inv = inv + corr
        return inv

    def __repr__(self):
        bits = [f"{format_field_elem(c)}*d^{n}"
                for n, c in sorted(self.coeffs.items(), reverse=True)]
        tail = f" + O(d^{self.floor - 1})" if self.floor is not None else ""
        return "PseudoDiffOp(" + (" + ".join(bits) or "0") + tail + ")"


_DEFAULT_PSEUDO_DEPTH = 12


def _floor_max(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return max(a, b)


def _neg_binom(m: int, j: int) -> int:
    # C(m, j) for negative m: m(m-1)...(m-j+1)/j!
    num = 1
    for t in range(j):
        num *= (m - t)
    return num // math.factorial(j)


class MatPseudoOp:
    """Square-or-rectangular matrix of pseudodifferential operators."""

    __slots__ = ("field", "rows", "m", "n")

    def __init__(self, field, rows):
        self.field = field
        self.rows = [list(r) for r in rows]
        self.m = len(self.rows)
        self.n = len(self.rows[0]) if self.rows else 0

    @classmethod
    def from_mat_diff_op(cls, M: MatDiffOp) -> "MatPseudoOp":
        return cls(M.alg.field,
                   [[PseudoDiffOp.from_scalar_op(e) for e in r]
                    for r in M.rows])

    def entry(self, i, j):
        return self.rows[i][j]


# -- majorants and leading matrices ------------------------------------------------


class Majorant:
    """Column bounds N_j and row gains h_i with ord(L_ij) <= N_j - h_i."""

    __slots__ = ("N", "h")

    def __init__(self, N: Sequence[int], h: Sequence[int]):
        self.N = tuple(N)
        self.h = tuple(h)

    def __eq__(self, other):
        return isinstance(other, Majorant) and (self.N, self.h) == (other.N, other.h)

    def __repr__(self):
        return f"Majorant(N={list(self.N)}, h={list(self.h)})"


def _order_matrix(M) -> list:
    """Orders of the entries; None for zero entries."""
    return [[e.order() for e in row] for row in M.rows]


def majorant(M) -> Majorant:
    """The minimal majorant N_j = max_i ord(L_ij), h_i = min_j (N_j - n_ij),
    skipping zero entries; an all-zero column (or matrix) has no majorant."""
    orders = _order_matrix(M)
    m = len(orders)
    ncols = len(orders[0]) if orders else 0
    N = []
    for j in range(ncols):
        col = [orders[i][j] for i in range(m) if orders[i][j] is not None]
        if not col:
            raise DegenerateShape(f"column {j + 1} is identically zero")
        N.append(max(col))
    h = []
    for i in range(m):
        vals = [N[j] - orders[i][j] for j in range(ncols)
                if orders[i][j] is not None]
        h.append(min(vals) if vals else min(N))
    return Majorant(N, h)


class LeadingMatrix:
    """Monomial matrix a_{ij} xi^{N_j - h_i} extracted at a majorant."""

    __slots__ = ("entries", "maj")

    def __init__(self, entries: list, maj: Majorant):
        self.entries = entries  # (coefficient, power) pairs
        self.maj = maj

    def coefficient_matrix(self) -> list:
        return [[c for (c, _) in row] for row in self.entries]

    def is_nondegenerate(self, alg_or_field) -> bool:
        mat = self.coefficient_matrix()
        if len(mat) != len(mat[0]):
            raise ShapeMismatch("nondegeneracy is for square matrices")
        fld = _field_adapter_for(mat, alg_or_field)
        mat = [[fld.coerce(c) for c in row] for row in mat]
        return not _dense_det(mat, fld).is_zero()

    def __repr__(self):
        body = ",".join(
            "[" + ", ".join(f"({c!r})*xi^{p}" for c, p in row) + "]"
            for row in self.entries)
        return f"LeadingMatrix([{body}])"


def leading_matrix(M, maj: Majorant) -> LeadingMatrix:
    orders = _order_matrix(M)
    m, ncols = len(orders), len(orders[0])
    if len(maj.N) != ncols or len(maj.h) != m:
        raise NotAMajorant("majorant shape mismatch")
    for i in range(m):
        for j in range(ncols):
            if orders[i][j] is not None and orders[i][j] > maj.N[j] - maj.h[i]:
                raise NotAMajorant(
                    f"entry ({i + 1},{j + 1}) has order {orders[i][j]} "
                    f"> N_j - h_i = {maj.N[j] - maj.h[i]}")
    rows = []
    for i in range(m):
        row = []
        for j in range(ncols):
            p = maj.N[j] - maj.h[i]
            row.append((M.rows[i][j].coeff(p), p))
        rows.append(row)
    return LeadingMatrix(rows, maj)


# -- coefficient-field adapters ---------------------------------------------------


class _DiffRatField:
    def __init__(self, alg: DiffAlgebra):
        self.alg = alg
        self.one = DiffRat(alg.one)
        self.zero = DiffRat(alg.zero)

    def coerce(self, v):
        return DiffRat.of(v, self.alg)


class _FieldElemField:
    def __init__(self, field):
        self.field = field
        self.one = field.one
        self.zero = field.zero

    def coerce(self, v):
        if isinstance(v, FieldElem):
            return v
        if isinstance(v, DiffPoly):
            if not v.is_quasiconstant():
                raise ValueError("not quasiconstant")
            return v.quasiconstant_part()
        return self.field.coerce(v)


def _field_adapter_for(mat_entries, alg_or_field):
    if isinstance(alg_or_field, DiffAlgebra):
        alg = alg_or_field
        quasi = True
        for row in mat_entries:
            for c in row:
                if isinstance(c, DiffPoly) and not c.is_quasiconstant():
                    quasi = False
                elif isinstance(c, DiffRat):
                    quasi = False
        return _FieldElemField(alg.field) if quasi else _DiffRatField(alg)
    return _FieldElemField(alg_or_field)


# -- row echelon form ----------------------------------------------------------------


def _to_field_entries(M: MatDiffOp):
    """Rewrite entries over a coefficient *field*: FieldElem when the matrix
    is quasiconstant, the fraction field of V otherwise."""
    alg = M.alg
    if M.is_quasiconstant():
        conv = _FieldElemField(alg.field).coerce
    else:
        conv = lambda c: DiffRat.of(c, alg)  # noqa: E731
    return M.map_entries(lambda e: e.map_coeffs(conv))


def _op_monomial(alg: DiffAlgebra, c, n: int) -> ScalarDiffOp:
    return ScalarDiffOp(alg, {n: c})


def row_echelon(M: MatDiffOp):
    """Bring M to row echelon form by elementary row operations (recorded).

    Each op is ("swap", i, j) or ("sub", i, j, P) meaning row_j -= P o row_i.
    Zero rows sink to the bottom.  Entries are moved into the coefficient
    field (fraction field of V if entries are not quasiconstant).
    """
    W = _to_field_entries(M)
    alg = W.alg
    rows = [list(r) for r in W.rows]
    m, n = W.m, W.n
    ops: list = []

    def swap(i, j):
        rows[i], rows[j] = rows[j], rows[i]
        ops.append(("swap", i, j))

    def sub(i, j, P: ScalarDiffOp):
        rows[j] = [rows[j][t] - P.compose(rows[i][t]) for t in range(n)]
        ops.append(("sub", i, j, P))

    r = 0
    for col in range(n):
        if r >= m:
            break
        touched = False
        while True:
            live = [i for i in range(r, m) if not rows[i][col].is_zero()]
            if not live:
                break
            touched = True
            piv = min(live, key=lambda i: rows[i][col].order())
            if piv != r:
                swap(r, piv)
            rest = [i for i in range(r + 1, m) if not rows[i][col].is_zero()]
            if not rest:
                break
            for i in rest:
                entry = rows[i][col]
                p, q = entry.order(), rows[r][col].order()
                c = entry.leading_coefficient()
                lc = rows[r][col].leading_coefficient()
                sub(r, i, _op_monomial(alg, c / lc, p - q))
        if touched:
            r += 1
    return MatDiffOp(alg, rows), ops


def apply_row_ops(M: MatDiffOp, ops) -> MatDiffOp:
    """Replay recorded elementary row operations on (a field-entry copy of) M."""
    W = _to_field_entries(M)
    rows = [list(r) for r in W.rows]
    for op in ops:
        if op[0] == "swap":
            _, i, j = op
            rows[i], rows[j] = rows[j], rows[i]
        else:
            _, i, j, P = op
            rows[j] = [rows[j][t] - P.compose(rows[i][t])
                       for t in range(len(rows[j]))]
    return MatDiffOp(W.alg, rows)


# -- majorant preserving reduction ------------------------------------------------


def majorant_preserving_reduce(M, maj: Majorant):
    """Reduce a square matrix with nondegenerate leading matrix by majorant
    preserving row operations (and column permutations).

    Differential input (MatDiffOp): diagonal orders become exactly N_j - h_j
    and below-diagonal orders strictly smaller.  Pseudodifferential input
    (MatPseudoOp): upper triangular.  Returns (reduced, column permutation,
    row permutation).
    """
    pseudo = isinstance(M, MatPseudoOp)
    if pseudo:
        size = M.m
        rows = [list(r) for r in M.rows]
        fld = _FieldElemField(M.field)
        alg = None
    else:
        if not M.is_square():
            raise ShapeMismatch("reduction is defined for square matrices")
        size = M.m
        W = _to_field_entries(M)
        alg = W.alg
        rows = [list(r) for r in W.rows]
        fld = _field_adapter_for([[e.leading_coefficient() for e in r]
                                  for r in rows], alg)
    if not leading_matrix(M, maj).is_nondegenerate(
            M.alg if not pseudo else M.field):
        raise DegenerateLeadingMatrix("leading matrix is degenerate")

    rowperm = sorted(range(size), key=lambda i: -maj.h[i])
    rows = [rows[i] for i in rowperm]
    h = [maj.h[i] for i in rowperm]
    N = list(maj.N)
    colperm = list(range(size))

    def op_mono(c, k):
        if pseudo:
            return PseudoDiffOp(M.field, {k: c})
        return _op_monomial(alg, c, k)

    def subtract(t, i, P):
        rows[i] = [rows[i][s] - P.compose(rows[t][s]) for s in range(size)]

    for m in range(size):
        # clear row m below the pivots of rows 0..m-1, in rounds of
        # decreasing operator order (keeps every entry within the majorant)
        if m > 0:
            max_step = max(h[t] - h[m] for t in range(m))
            for step in range(max_step + 1):
                for t in range(m):
                    d = h[t] - h[m] - step
                    if d < 0:
                        continue
                    target = N[t] - h[m] - step
                    c = rows[m][t].coeff(target)
                    if c.is_zero():
                        continue
                    lc = rows[t][t].coeff(N[t] - h[t])
                    subtract(t, m, op_mono(c / lc, d))
        # establish the pivot of row m (column swap if needed)
        want = None
        for k in range(m, size):
            c = rows[m][k].coeff(N[k] - h[m])
            if not c.is_zero():
                want = k
                break
        if want is None:
            raise DegenerateLeadingMatrix(
                f"no pivot available in row {m + 1}")
        if want != m:
            for r_ in rows:
                r_[m], r_[want] = r_[want], r_[m]
            N[m], N[want] = N[want], N[m]
            colperm[m], colperm[want] = colperm[want], colperm[m]
    if pseudo:
        # kill below-diagonal entries entirely with negative-order operations
        for j in range(size):
            for i in range(j + 1, size):
                e = rows[i][j]
                if e.is_zero():
                    continue
                P = e.compose(rows[j][j].inverse())
                subtract(j, i, P)
                rows[i][j] = PseudoDiffOp(M.field, {}, rows[i][j].floor)
        reduced = MatPseudoOp(M.field, rows)
    else:
        reduced = MatDiffOp(alg, rows)
    return reduced, colperm, rowperm


# -- Dieudonne determinant ---------------------------------------------------------


class DetValue:
    """Dieudonne determinant c xi^d; None coefficient encodes the zero det."""

    __slots__ = ("c", "d")

    def __init__(self, c, d: Optional[int]):
        self.c = c
        self.d = d

    @property
    def is_zero(self) -> bool:
        return self.c is None

    def __eq__(self, other):
        if not isinstance(other, DetValue):
            return NotImplemented
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        return self.d == other.d and _values_equal(self.c, other.c)

    def __repr__(self):
        if self.is_zero:
            return "DetValue(0)"
        return f"DetValue(({self.c!r})*xi^{self.d})"


def _values_equal(a, b) -> bool:
    try:
        return bool(a == b)
    except (TypeError, ValueError):
        return False


DET_ZERO = DetValue(None, None)


def dieudonne_det(M) -> DetValue:
    """Multiplicative determinant of a square matrix (pseudo)differential
    operator: (leading coefficient class, xi-degree), or zero.

    When a nondegenerate leading matrix exists the value is read off from it;
    otherwise echelon reduction (Dieudonne-invariant) is used.
    """
    if isinstance(M, MatPseudoOp):
        size = M.m
        if size != M.n:
            raise ShapeMismatch("determinant of a non-square matrix")
        try:
            maj = majorant(M)
            lm = leading_matrix(M, maj)
            fld = _FieldElemField(M.field)
            mat = [[fld.coerce(c) for c, _ in row] for row in lm.entries]
            c = _dense_det(mat, fld)
            if not c.is_zero():
                return DetValue(c, sum(maj.N) - sum(maj.h))
        except DegenerateShape:
            return DET_ZERO
        return _pseudo_det_by_elimination(M)
    if not M.is_square():
        raise ShapeMismatch("determinant of a non-square matrix")
    if M.is_zero():
        return DET_ZERO
    try:
        maj = majorant(M)
        lm = leading_matrix(M, maj)
        fld = _field_adapter_for(lm.coefficient_matrix(), M.alg)
        mat = [[fld.coerce(c) for c, _ in row] for row in lm.entries]
        c = _dense_det(mat, fld)
        if not c.is_zero():
            return DetValue(_simplify_coeff(c), sum(maj.N) - sum(maj.h))
    except DegenerateShape:
        pass
    # echelon fallback (works whenever the determinant is defined)
    ech, ops = row_echelon(M)
    sign = 1
    for op in ops:
        if op[0] == "swap":
            sign = -sign
    fld = _field_adapter_for([[e.leading_coefficient() for e in r]
                              for r in ech.rows], M.alg)
    c = fld.one if sign == 1 else -fld.one
    d = 0
    for i in range(ech.m):
        e = ech.rows[i][i]
        if e.is_zero():
            return DET_ZERO
        c = c * fld.coerce(e.leading_coefficient())
        d += e.order()
    return DetValue(_simplify_coeff(c), d)


def _simplify_coeff(c):
    if isinstance(c, DiffRat) and c.den == c.alg.one and c.num.is_quasiconstant():
        return c.num.quasiconstant_part()
    return c


def _pseudo_det_by_elimination(M: MatPseudoOp) -> DetValue:
    """Gauss elimination in the pseudodifferential skewfield; exact kills via
    truncated inverses keep the diagonal leading data exact."""
    size = M.m
    rows = [list(r) for r in M.rows]
    sign = 1
    for col in range(size):
        piv = next((i for i in range(col, size)
                    if rows[i][col].order() is not None), None)
        if piv is None:
            return DET_ZERO
        if piv != col:
            rows[col], rows[piv] = rows[piv], rows[col]
            sign = -sign
        inv = rows[col][col].inverse()
        for i in range(col + 1, size):
            if rows[i][col].order() is None:
                continue
            P = rows[i][col].compose(inv)
            rows[i] = [rows[i][t] - P.compose(rows[col][t])
                       for t in range(size)]
            rows[i][col] = PseudoDiffOp(M.field, {}, rows[i][col].floor)
    c = M.field.one if sign == 1 else -M.field.one
    d = 0
    for i in range(size):
        e = rows[i][i]
        if e.order() is None:
            return DET_ZERO
        c = c * e.leading_coefficient()
        d += e.order()
    return DetValue(c, d)


def kernel_dim_bound(M: MatDiffOp):
    """deg_xi det(M) when the determinant is nonzero; infinite otherwise."""
    dv = dieudonne_det(M)
    if dv.is_zero:
        return INFINITE
    return dv.d


# -- rational solutions of linear differential systems ------------------------------


class SolutionSet:
    """Affine solution set over the constants: particular + span(homogeneous)."""

    __slots__ = ("particular", "homogeneous", "degree_bound")

    def __init__(self, particular, homogeneous, degree_bound):
        self.particular = particular
        self.homogeneous = homogeneous
        self.degree_bound = degree_bound

    @property
    def dim(self) -> int:
        return len(self.homogeneous)

    def __repr__(self):
        return (f"SolutionSet(dim={self.dim}, "
                f"particular={'yes' if self.particular is not None else 'no'})")


def default_degree_bound(M: MatDiffOp) -> int:
    """Heuristic ansatz degree: twice the xi-degree of the determinant plus
    four; falls back to the total order for singular or non-square systems."""
    d = None
    if M.is_square():
        dv = dieudonne_det(M)
        if not dv.is_zero:
            d = dv.d
    if d is None:
        d = sum(max((e.order() or 0) for e in col if e is not None)
                for col in zip(*M.rows)) if M.rows else 0
    return 2 * d + 4


def solve_rational(M: MatDiffOp, b: Optional[Sequence[FieldElem]] = None,
                   degree_bound: Optional[int] = None) -> SolutionSet:
    """Rational solutions of M(d) u = b for quasiconstant M.

    Homogeneous solutions come from a polynomial-in-x ansatz up to the degree
    bound; particular solutions additionally use denominators present in b.
    A scalar equation c d^m u = b is decided exactly through iterated
    antiderivatives (Hermite reduction), raising NoRationalSolution when a
    logarithmic term obstructs; otherwise an inconsistent ansatz raises
    Incomplete.
    """
    if not M.is_quasiconstant():
        raise ValueError("solve_rational needs quasiconstant coefficients")
    field = M.alg.field
    if b is None:
        b = [field.zero] * M.m
    b = [field.coerce(v) for v in b]
    if len(b) != M.m:
        raise ShapeMismatch("right-hand side length mismatch")
    if degree_bound is None:
        degree_bound = default_degree_bound(M)

    # exact scalar path: c * d^m
    if M.m == M.n == 1:
        coeffs = M.rows[0][0].field_coeffs()
        if len(coeffs) == 1:
            (m0,), (c0,) = zip(*coeffs.items())
            return _solve_scalar_monomial(field, m0, c0, b[0], degree_bound)

    return _solve_by_ansatz(M, b, degree_bound)


def _solve_scalar_monomial(field, m0: int, c0: FieldElem, rhs: FieldElem,
                           degree_bound: int) -> SolutionSet:
    from .field import rational_antiderivative
    part = rhs / c0
    for _ in range(m0):
        nxt = rational_antiderivative(part)
        if nxt is None:
            raise NoRationalSolution(
                "antiderivative leaves a logarithmic term")
        part = nxt
    hom = [[field.x ** t] for t in range(m0)]
    return SolutionSet([part], hom, degree_bound)


def _solve_by_ansatz(M: MatDiffOp, b, degree_bound: int) -> SolutionSet:
    field = M.alg.field
    x = field.x
    homogeneous_rhs = all(v.is_zero() for v in b)
    # denominator from b (x-part only)
    den = field.one
    if not homogeneous_rhs:
        den_ring = None
        for v in b:
            if v.is_zero():
                continue
            d = v.f.denom
            den_ring = d if den_ring is None else _poly_lcm(den_ring, d)
        if den_ring is not None:
            den = FieldElem(field, field._field.field_new(den_ring))
    ncols_basis = degree_bound + 1
    unknowns = [(j, t) for j in range(M.n) for t in range(ncols_basis)]
    col_index = {u: i for i, u in enumerate(unknowns)}
    # image of each basis function under M
    images = []
    for (j, t) in unknowns:
        basis = x ** t / den
        vec = [M.rows[i][j].apply_scalar(basis) for i in range(M.m)]
        images.append(vec)
    rows, rhs_out = [], []
    for i in range(M.m):
        entries = [images[c][i] for c in range(len(unknowns))]
        r_rows, r_rhs = _match_x_coefficients(field, entries, b[i])
        for rr, rv in zip(r_rows, r_rhs):
            rows.append(rr)
            rhs_out.append(rv)
    particular_vec, null_vecs = gauss_solve(rows, rhs_out, len(unknowns),
                                            field)
    if particular_vec is None and not homogeneous_rhs:
        raise Incomplete(
            f"no rational solution found with ansatz degree {degree_bound}")

    def assemble(vec):
        out = []
        for j in range(M.n):
            acc = field.zero
            for t in range(ncols_basis):
                c = vec[col_index[(j, t)]]
                if not c.is_zero():
                    acc = acc + c * x ** t / den
            out.append(acc)
        return out

    particular = assemble(particular_vec) if particular_vec is not None else None
    if homogeneous_rhs:
        particular = None
    basis = [assemble(v) for v in null_vecs]
    basis = [v for v in basis if any(not c.is_zero() for c in v)]
    return SolutionSet(particular, basis, degree_bound)


def _poly_lcm(p, q):
    g = p.gcd(q)
    quot, rem = p.div(g)
    assert not rem
    return quot * q


def _match_x_coefficients(field, entries, rhs):
    """Turn sum_c gamma_c * entries[c] = rhs (FieldElem identity in x) into
    scalar rows over C by clearing denominators and matching powers of x."""
    den = None
    for v in list(entries) + [rhs]:
        if v.is_zero():
            continue
        d = v.f.denom
        den = d if den is None else _poly_lcm(den, d)
    if den is None:
        return [], []
    cleared = []
    for v in entries + [rhs]:
        if v.is_zero():
            cleared.append(None)
            continue
        mult, rem = den.div(v.f.denom)
        assert not rem
        cleared.append(v.f.numer * mult)
    # collect x-degrees present
    degrees = set()
    for p in cleared:
        if p is not None:
            degrees.update(m[0] for m in p.monoms())
    degrees = sorted(degrees)
    rows = {d: {} for d in degrees}
    rhs_rows = {d: field.zero for d in degrees}
    for c, p in enumerate(cleared):
        if p is None:
            continue
        target_rhs = (c == len(entries))
        buckets: dict = {}
        for mono, coeff in p.terms():
            key = mono[0]
            rest = p.ring.term_new((0,) + mono[1:], coeff)
            buckets[key] = buckets.get(key, p.ring.zero) + rest
        for dkey, poly in buckets.items():
            val = FieldElem(field, field._field.field_new(poly))
            if val.is_zero():
                continue
            if target_rhs:
                rhs_rows[dkey] = val
            else:
                rows[dkey][c] = val
    out_rows = [rows[d] for d in degrees]
    out_rhs = [rhs_rows[d] for d in degrees]
    return out_rows, out_rhs


# -- skewadjoint/selfadjoint canonical decomposition --------------------------------


def skewadjoint_decompose(S, selfadjoint: bool = False):
    """Write S = sum_m d^m o (d o a_m + a_m d) d^m + sum_m d^m o b_m d^m with
    a_m* = a_m and b_m* = -b_m (signs swapped for the selfadjoint variant).
    Accepts a ScalarDiffOp or a square MatDiffOp; returns ({m: a_m}, {m: b_m})
    with matrix values for matrix input."""
    scalar = isinstance(S, ScalarDiffOp)
    mat = MatDiffOp.scalar(S) if scalar else S
    alg = mat.alg
    if not mat.is_square():
        raise ShapeMismatch("decomposition needs a square operator")
    want = mat.adjoint() if selfadjoint else -mat.adjoint()
    if not (mat - want).is_zero():
        raise NotSkewadjoint(
            "operator is not " + ("selfadjoint" if selfadjoint else "skewadjoint"))
    size = mat.m
    rem = mat
    a_out: dict = {}
    b_out: dict = {}
    dd = ScalarDiffOp.d(alg, 1)

    def entry_coeff(i, j, n):
        return rem.rows[i][j].coeff(n)

    while not rem.is_zero():
        o = rem.order()
        lead = [[entry_coeff(i, j, o) for j in range(size)] for i in range(size)]
        if o % 2 == 1:
            m = (o - 1) // 2
            a = [[lead[i][j] * Fraction(1, 2) for j in range(size)]
                 for i in range(size)]
            a_out[m] = a
            block = MatDiffOp(alg, [[
                ScalarDiffOp.d(alg, m).compose(
                    (dd.compose(_as_op(alg, a[i][j])) +
                     _as_op(alg, a[i][j]).compose(dd))
                ).compose(ScalarDiffOp.d(alg, m))
                for j in range(size)] for i in range(size)])
        else:
            m = o // 2
            b_out[m] = lead
            block = MatDiffOp(alg, [[
                ScalarDiffOp.d(alg, m).compose(
                    _as_op(alg, lead[i][j])).compose(ScalarDiffOp.d(alg, m))
                for j in range(size)] for i in range(size)])
        rem = rem - block
    if scalar:
        a_out = {m: v[0][0] for m, v in a_out.items()}
        b_out = {m: v[0][0] for m, v in b_out.items()}
    return a_out, b_out


def _as_op(alg: DiffAlgebra, c) -> ScalarDiffOp:
    return ScalarDiffOp(alg, {0: c})


# -- spaces of operators with (self)adjoint products ---------------------------------


def selfadjoint_product_space(K: MatDiffOp,
                              degree_bound: Optional[int] = None) -> list:
    """Basis over C of {P : ord(P) <= ord(K) - 1, K o P selfadjoint},
    found by the rational ansatz.  K must be quasiconstant with invertible
    leading coefficient."""
    alg = K.alg
    field = alg.field
    if not K.is_quasiconstant():
        raise ValueError("K must be quasiconstant")
    N = K.order()
    size = K.m
    atoms = [(q, i, j) for q in range(N) for i in range(size)
             for j in range(size)]
    P = MatDiffOp(alg, [[
        ScalarDiffOp(alg, {q: alg.from_scalar(LinForm.atom(field, (q, i, j)))
                           for q in range(N)})
        for j in range(size)] for i in range(size)])
    # LinForm coefficients live inside DiffPoly constant terms
    T = K.compose(P)
    R = T - T.adjoint()
    Mrows, order_atoms = _linform_system(alg, _matrix_op_linforms(R), atoms)
    M = MatDiffOp(alg, Mrows)
    sols = solve_rational(M, None, degree_bound)
    out = []
    for vec in sols.homogeneous:
        by_atom = dict(zip(order_atoms, vec))
        out.append(MatDiffOp(alg, [[
            ScalarDiffOp(alg, {q: alg.from_scalar(by_atom[(q, i, j)])
                               for q in range(N)})
            for j in range(size)] for i in range(size)]))
    return out


def _matrix_op_linforms(R: MatDiffOp) -> list:
    """All LinForm-valued scalar equations encoded by a matrix operator with
    LinForm-in-DiffPoly coefficients (each operator-order coefficient of each
    entry must vanish)."""
    eqs = []
    for row in R.rows:
        for e in row:
            for n in sorted(e.coeffs):
                c = e.coeffs[n]
                lf = c.quasiconstant_part() if isinstance(c, DiffPoly) else c
                if isinstance(lf, LinForm):
                    eqs.append(lf)
                elif not lf.is_zero():
                    raise ArithmeticError("inhomogeneous term in a linear system")
    return eqs


def _linform_system(alg: DiffAlgebra, eqs: list, atoms: list):
    """Rows of a MatDiffOp expressing LinForm equations = 0 in the unknowns."""
    index = {a: j for j, a in enumerate(atoms)}
    rows = []
    for lf in eqs:
        row = [ScalarDiffOp.zero(alg) for _ in atoms]
        for a, ders in lf.by_atom().items():
            row[index[a]] = ScalarDiffOp(
                alg, {r: alg.from_scalar(c) for r, c in ders.items()})
        rows.append(row)
    return rows, atoms
