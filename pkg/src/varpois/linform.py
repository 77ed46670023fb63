"""Linear forms in unknown functions of x, with FieldElem coefficients.

A LinForm is sum c_{a,r} * D^r(p_a) over atoms a and derivative orders r,
where the p_a are unknown elements of the coefficient field.  They flow
through all F-linear machinery (differential polynomials, lambda-polynomials,
operator composition) in place of FieldElem coefficients, so a symbolic
computation applied to unknowns yields the linear differential system the
unknowns must satisfy.
"""

from __future__ import annotations

from fractions import Fraction

from .field import CoefficientField, FieldElem


class LinForm:
    __slots__ = ("field", "terms")

    def __init__(self, field: CoefficientField, terms: dict):
        self.field = field
        self.terms = terms

    @classmethod
    def atom(cls, field: CoefficientField, a, der: int = 0) -> "LinForm":
        return cls(field, {(a, der): field.one})

    @classmethod
    def zero(cls, field: CoefficientField) -> "LinForm":
        return cls(field, {})

    def _coerce_coeff(self, c):
        if isinstance(c, FieldElem):
            return c
        if isinstance(c, (int, Fraction)):
            return self.field.coerce(c)
        return None

    def __add__(self, other):
        if not isinstance(other, LinForm):
            if isinstance(other, (int, Fraction)) and other == 0:
                return self
            return NotImplemented
        out = dict(self.terms)
        for k, c in other.terms.items():
            s = out.get(k)
            c = c if s is None else s + c
            if c.is_zero():
                out.pop(k, None)
            else:
                out[k] = c
        return LinForm(self.field, out)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return LinForm(self.field, {k: -c for k, c in self.terms.items()})

    def __mul__(self, other):
        c = self._coerce_coeff(other)
        if c is None:
            raise TypeError("LinForm can only be scaled by field elements "
                            "(nonlinear product of unknowns)")
        if c.is_zero():
            return LinForm.zero(self.field)
        return LinForm(self.field, {k: v * c for k, v in self.terms.items()})

    __rmul__ = __mul__

    def derive(self) -> "LinForm":
        out: dict = {}

        def acc(k, c):
            if c.is_zero():
                return
            s = out.get(k)
            c = c if s is None else s + c
            if c.is_zero():
                out.pop(k, None)
            else:
                out[k] = c

        for (a, r), c in self.terms.items():
            acc((a, r), c.derive())
            acc((a, r + 1), c)
        return LinForm(self.field, out)

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other):
        if isinstance(other, LinForm):
            return self.field == other.field and self.terms == other.terms
        if isinstance(other, (int, Fraction)) and other == 0:
            return self.is_zero()
        return NotImplemented

    def __hash__(self):
        return hash((self.field, tuple(sorted(self.terms.items(),
                                              key=lambda kv: repr(kv[0])))))

    def atoms(self) -> set:
        return {a for (a, _) in self.terms}

    def by_atom(self) -> dict:
        """atom -> {derivative order -> coefficient}."""
        out: dict = {}
        for (a, r), c in self.terms.items():
            out.setdefault(a, {})[r] = c
        return out

    def __repr__(self):
        if not self.terms:
            return "LinForm(0)"
        bits = []
        for (a, r), c in sorted(self.terms.items(), key=lambda kv: repr(kv[0])):
            bits.append(f"({c!r})*D^{r}[{a}]")
        return "LinForm(" + " + ".join(bits) + ")"
