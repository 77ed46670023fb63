"""Polynomials in formal variables lam_1..lam_k with DiffPoly coefficients.

These are the entries of skewsymmetric arrays and of polydifferential
operators.  The variables commute with everything; the total derivative
enters only through explicit affine substitutions like (lam_1 + d)^m, which
expand binomially with d acting on the coefficients.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional

from .diffalg import DiffAlgebra, DiffPoly, format_diff_poly
from .field import FieldElem


class LambdaPoly:
    """Sparse polynomial: dict from exponent tuples (length k) to DiffPoly."""

    __slots__ = ("alg", "k", "terms")

    def __init__(self, alg: DiffAlgebra, k: int, terms: dict):
        self.alg = alg
        self.k = k
        self.terms = terms

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, alg: DiffAlgebra, k: int) -> "LambdaPoly":
        return cls(alg, k, {})

    @classmethod
    def const(cls, alg: DiffAlgebra, k: int, p) -> "LambdaPoly":
        if isinstance(p, (int, Fraction, FieldElem)):
            p = alg.from_scalar(alg.field.coerce(p))
        if p.is_zero():
            return cls.zero(alg, k)
        return cls(alg, k, {(0,) * k: p})

    @classmethod
    def monomial(cls, alg: DiffAlgebra, k: int, exp: tuple, p) -> "LambdaPoly":
        if isinstance(p, (int, Fraction, FieldElem)):
            p = alg.from_scalar(alg.field.coerce(p))
        if p.is_zero():
            return cls.zero(alg, k)
        assert len(exp) == k
        return cls(alg, k, {tuple(exp): p})

    @classmethod
    def variable(cls, alg: DiffAlgebra, k: int, slot: int) -> "LambdaPoly":
        e = [0] * k
        e[slot] = 1
        return cls(alg, k, {tuple(e): alg.one})

    # -- ring operations ----------------------------------------------------

    def _check(self, other: "LambdaPoly"):
        if self.alg != other.alg or self.k != other.k:
            raise ValueError("incompatible lambda-polynomials")

    def __add__(self, other: "LambdaPoly") -> "LambdaPoly":
        self._check(other)
        out = dict(self.terms)
        for e, p in other.terms.items():
            s = out.get(e)
            q = p if s is None else s + p
            if q.is_zero():
                out.pop(e, None)
            else:
                out[e] = q
        return LambdaPoly(self.alg, self.k, out)

    def __sub__(self, other: "LambdaPoly") -> "LambdaPoly":
        return self + (-other)

    def __neg__(self) -> "LambdaPoly":
        return LambdaPoly(self.alg, self.k, {e: -p for e, p in self.terms.items()})

    def __mul__(self, other) -> "LambdaPoly":
        if isinstance(other, LambdaPoly):
            self._check(other)
            out: dict = {}
            for ea, pa in self.terms.items():
                for eb, pb in other.terms.items():
                    e = tuple(x + y for x, y in zip(ea, eb))
                    p = pa * pb
                    s = out.get(e)
                    p = p if s is None else s + p
                    if p.is_zero():
                        out.pop(e, None)
                    else:
                        out[e] = p
            return LambdaPoly(self.alg, self.k, out)
        return self.scale(other)

    __rmul__ = __mul__

    def scale(self, c) -> "LambdaPoly":
        out = {}
        for e, p in self.terms.items():
            q = p * c
            if not q.is_zero():
                out[e] = q
        return LambdaPoly(self.alg, self.k, out)

    def __eq__(self, other):
        if not isinstance(other, LambdaPoly):
            return NotImplemented
        return self.alg == other.alg and self.k == other.k and self.terms == other.terms

    def is_zero(self) -> bool:
        return not self.terms

    def coefficient(self, exp: tuple) -> DiffPoly:
        return self.terms.get(tuple(exp), self.alg.zero)

    def degree_in(self, slot: int) -> int:
        return max((e[slot] for e in self.terms), default=0)

    def map_coeff(self, fn: Callable[[DiffPoly], DiffPoly]) -> "LambdaPoly":
        out = {}
        for e, p in self.terms.items():
            q = fn(p)
            if not q.is_zero():
                out[e] = q
        return LambdaPoly(self.alg, self.k, out)

    def dcoeff(self) -> "LambdaPoly":
        """Total derivative applied to every coefficient."""
        return self.map_coeff(lambda p: p.derive())

    def shift_exp(self, slot: int, by: int = 1) -> "LambdaPoly":
        """Multiply by lam_slot^by."""
        out = {}
        for e, p in self.terms.items():
            ee = list(e)
            ee[slot] += by
            out[tuple(ee)] = p
        return LambdaPoly(self.alg, self.k, out)

    def compose_vars(self, sigma: tuple) -> "LambdaPoly":
        """Result(lam_1..lam_k) = self(lam_sigma(1), ..., lam_sigma(k)),
        sigma given 0-based as a tuple of images."""
        out = {}
        for e, p in self.terms.items():
            ee = [0] * self.k
            for j, exp in enumerate(e):
                ee[sigma[j]] += exp
            key = tuple(ee)
            s = out.get(key)
            q = p if s is None else s + p
            if q.is_zero():
                out.pop(key, None)
            else:
                out[key] = q
        return LambdaPoly(self.alg, self.k, out)

    def insert_slot(self, pos: int) -> "LambdaPoly":
        """View in arity k+1 with a fresh variable (exponent 0) at pos."""
        out = {}
        for e, p in self.terms.items():
            out[e[:pos] + (0,) + e[pos:]] = p
        return LambdaPoly(self.alg, self.k + 1, out)

    def drop_slot(self, pos: int) -> "LambdaPoly":
        """Inverse of insert_slot; requires exponent zero at pos."""
        out = {}
        for e, p in self.terms.items():
            if e[pos] != 0:
                raise ValueError("cannot drop a slot with nonzero exponent")
            out[e[:pos] + e[pos + 1:]] = p
        return LambdaPoly(self.alg, self.k - 1, out)

    def as_diffpoly(self) -> DiffPoly:
        if self.k != 0:
            raise ValueError("not an arity-0 lambda-polynomial")
        return self.terms.get((), self.alg.zero)

    def sorted_terms(self):
        return sorted(self.terms.items())

    def __repr__(self):
        return f"LambdaPoly({format_lambda_poly(self)})"


def format_lambda_poly(P: LambdaPoly, names: Optional[list] = None) -> str:
    if P.is_zero():
        return "0"
    if names is None:
        names = [f"l{j + 1}" for j in range(P.k)]
    parts = []
    for e, p in P.sorted_terms():
        mono = "*".join(f"{names[j]}^{x}" if x > 1 else names[j]
                        for j, x in enumerate(e) if x)
        ps = format_diff_poly(p)
        if mono:
            if ps == "1":
                parts.append(mono)
            elif ps == "-1":
                parts.append(f"-{mono}")
            else:
                if " " in ps or "/" in ps:
                    ps = f"({ps})"
                parts.append(f"{ps}*{mono}")
        else:
            parts.append(ps if " " not in ps else f"({ps})")
    return " + ".join(parts)


# -- affine substitution machinery -------------------------------------------


def affine_apply_once(lin: dict, dsign: int, X: LambdaPoly) -> LambdaPoly:
    """(sum_s lin[s] lam_s + dsign*d) X, with d the total derivative acting
    on the coefficients of X.  dsign may be 0 (pure commutative shift)."""
    out = LambdaPoly.zero(X.alg, X.k)
    for s, c in lin.items():
        if c:
            out = out + X.shift_exp(s).scale(Fraction(c))
    if dsign:
        out = out + (X.dcoeff() if dsign > 0 else -X.dcoeff())
    return out


def affine_pow_on(lin: dict, dsign: int, m: int, X: LambdaPoly) -> LambdaPoly:
    """(sum_s lin[s] lam_s + dsign*d)^m X."""
    for _ in range(m):
        X = affine_apply_once(lin, dsign, X)
    return X


def affine_pow_apply(alg: DiffAlgebra, lin: dict, dsign: int, m: int,
                     f, k: Optional[int] = None) -> LambdaPoly:
    """(sum_s lin[s] lam_s + dsign*d)^m applied to a DiffPoly f, producing a
    LambdaPoly of arity k (default: 1 + max slot used)."""
    if k is None:
        k = (max(lin) + 1) if lin else 1
    X = LambdaPoly.const(alg, k, f)
    return affine_pow_on(lin, dsign, m, X)


def symbol_act(P: LambdaPoly, lin: dict, dsign: int, X: LambdaPoly) -> LambdaPoly:
    """P(sum lin[s] lam_s + dsign*d)_-> X for an arity-1 symbol P: each term
    c*mu^m of P contributes c * (L + dsign*d)^m X, the coefficient c passing
    to the left of the derivative action."""
    if P.k != 1:
        raise ValueError("symbol_act expects an arity-1 symbol")
    out = LambdaPoly.zero(X.alg, X.k)
    for (m,), c in P.terms.items():
        out = out + affine_pow_on(lin, dsign, m, X).scale(c)
    return out


def subst_slot_neg(X: LambdaPoly, slot: int, into: tuple,
                   drop: bool) -> LambdaPoly:
    """Replace lam_slot by -(sum of lam_s for s in into) - d, with d acting
    leftward on the coefficients (i.e. differentiating them).  When slot is
    itself in `into` the substituted power re-feeds the same slot.  With
    drop=True the slot is removed from the arity."""
    alg, k = X.alg, X.k
    lin = {s: -1 for s in into}
    out = LambdaPoly.zero(alg, k)
    for e, p in X.terms.items():
        m = e[slot]
        rest = list(e)
        rest[slot] = 0
        base = LambdaPoly(alg, k, {tuple(rest): p})
        out = out + affine_pow_on(lin, -1, m, base)
    if drop:
        return out.drop_slot(slot)
    return out
