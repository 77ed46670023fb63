"""Lambda-brackets on the differential polynomial algebra, Hamiltonian
structure verification, evolutionary vector fields, and functional brackets.

A bracket structure is an l x l matrix differential operator H with entries
H_ij(d) = {u_j _d u_i}_->.  The bracket of arbitrary elements expands through
the master formula

    {f_lam g} = sum_{i,j,m,n} dg/du_j^(n) (lam+d)^n {u_i _(lam+d) u_j}_->
                (-lam-d)^m df/du_i^(m),

and Jacobi / compatibility checks reduce to generator triples.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .diffalg import (DiffAlgebra, DiffPoly, LocalFunctional, frechet,
                      variational_derivative)
from .diffop import MatDiffOp, NotSkewadjoint, ScalarDiffOp
from .lambdapoly import (LambdaPoly, affine_pow_apply, affine_pow_on,
                         subst_slot_neg, symbol_act)


class NotPoisson(Exception):
    pass


class LambdaBracketStruct:
    """Bracket structure determined by its operator H (DiffPoly entries)."""

    __slots__ = ("op",)

    def __init__(self, op: MatDiffOp):
        if not op.is_square():
            raise ValueError("bracket operators are square")
        self.op = op

    @property
    def alg(self) -> DiffAlgebra:
        return self.op.alg

    @property
    def nvars(self) -> int:
        return self.op.m

    @classmethod
    def from_scalar_op(cls, op: ScalarDiffOp) -> "LambdaBracketStruct":
        return cls(MatDiffOp.scalar(op))

    def generator_bracket(self, i: int, j: int) -> LambdaPoly:
        """{u_i _lam u_j} as an arity-1 lambda-polynomial (= symbol of H_ji)."""
        return self.op.rows[j - 1][i - 1].symbol()

    def __repr__(self):
        return f"LambdaBracketStruct({self.op!r})"


def lambda_bracket(f: DiffPoly, g: DiffPoly,
                   H: LambdaBracketStruct) -> LambdaPoly:
    """{f_lam g} by the master formula; arity-1 result in lam."""
    alg = H.alg
    out = LambdaPoly.zero(alg, 1)
    for i in range(1, H.nvars + 1):
        a_i = LambdaPoly.zero(alg, 1)
        for (n, jj) in sorted(f.jet_support()):
            if jj != i:
                continue
            a_i = a_i + affine_pow_apply(alg, {0: -1}, -1, n,
                                         f.jet_partial(i, n))
        if a_i.is_zero():
            continue
        for j in range(1, H.nvars + 1):
            sym = H.generator_bracket(i, j)
            if sym.is_zero():
                continue
            b = symbol_act(sym, {0: 1}, 1, a_i)
            for (n, jj) in sorted(g.jet_support()):
                if jj != j:
                    continue
                part = g.jet_partial(j, n)
                out = out + affine_pow_on({0: 1}, 1, n, b).scale(part)
    return out


def _bracket_into_poly(G: LambdaPoly, H: LambdaBracketStruct,
                       f: DiffPoly) -> LambdaPoly:
    """{f_lam G} for G with formal variables of its own: bracket each
    coefficient, result arity 1 + G.k with lam in slot 0."""
    alg = H.alg
    out = LambdaPoly.zero(alg, 1 + G.k)
    for e, coeff in G.terms.items():
        br = lambda_bracket(f, coeff, H)
        lifted = LambdaPoly(alg, 1 + G.k,
                            {(ee[0],) + e: p for ee, p in br.terms.items()})
        out = out + lifted
    return out


def _expand_slot_to_sum(L: LambdaPoly, slots: tuple, k: int) -> LambdaPoly:
    """Commutative substitution of L's single variable by a sum of variables:
    L(nu) -> L(lam_{slots[0]} + lam_{slots[1]} + ...), result arity k."""
    alg = L.alg
    out = LambdaPoly.zero(alg, k)
    lin = {s: 1 for s in slots}
    for (s,), coeff in L.terms.items():
        out = out + affine_pow_apply(alg, lin, 0, s, coeff, k=k)
    return out


def jacobi_residual(H: LambdaBracketStruct, f: DiffPoly, g: DiffPoly,
                    h: DiffPoly) -> LambdaPoly:
    """{f_lam {g_mu h}} - {g_mu {f_lam h}} - {{f_lam g}_(lam+mu) h},
    as an arity-2 polynomial (lam = slot 0, mu = slot 1)."""
    alg = H.alg
    t1 = _bracket_into_poly(lambda_bracket(g, h, H), H, f)
    t2 = _bracket_into_poly(lambda_bracket(f, h, H), H, g)
    t2 = t2.compose_vars((1, 0))  # result had (mu, lam); swap into (lam, mu)
    q = lambda_bracket(f, g, H)
    t3 = LambdaPoly.zero(alg, 2)
    for (t,), coeff in q.terms.items():
        r = lambda_bracket(coeff, h, H)
        r2 = _expand_slot_to_sum(r, (0, 1), 2)
        t3 = t3 + r2.shift_exp(0, t)
    return t1 - t2 - t3


def compatibility_residual(H: LambdaBracketStruct, K: LambdaBracketStruct,
                           f: DiffPoly, g: DiffPoly,
                           h: DiffPoly) -> LambdaPoly:
    """The six-term mixed Jacobi expression whose vanishing on generators
    makes H + K a Poisson structure when H and K are."""
    alg = H.alg
    out = LambdaPoly.zero(alg, 2)
    for first, second in ((H, K), (K, H)):
        inner_gh = lambda_bracket(g, h, first)
        t1 = _bracket_into_poly(inner_gh, second, f)
        inner_fh = lambda_bracket(f, h, first)
        t2 = _bracket_into_poly(inner_fh, second, g).compose_vars((1, 0))
        q = lambda_bracket(f, g, first)
        t3 = LambdaPoly.zero(alg, 2)
        for (t,), coeff in q.terms.items():
            r = lambda_bracket(coeff, h, second)
            t3 = t3 + _expand_slot_to_sum(r, (0, 1), 2).shift_exp(0, t)
        out = out + t3 - t1 + t2
    return out


def check_skewadjoint(H: LambdaBracketStruct) -> bool:
    return (H.op.adjoint() + H.op).is_zero()


def check_jacobi(H: LambdaBracketStruct, require_skew: bool = True):
    """True iff the Jacobi identity holds on all generator triples.

    Returns (ok, witness); witness is None or (triple, residual).
    """
    if require_skew and not check_skewadjoint(H):
        raise NotSkewadjoint("bracket operator is not skewadjoint")
    alg = H.alg
    for a in range(1, H.nvars + 1):
        for b in range(1, H.nvars + 1):
            for c in range(1, H.nvars + 1):
                res = jacobi_residual(H, alg.jet(a), alg.jet(b), alg.jet(c))
                if not res.is_zero():
                    return False, ((a, b, c), res)
    return True, None


def check_compatible(H: LambdaBracketStruct, K: LambdaBracketStruct):
    """True iff the mixed triple expression vanishes on all generator
    triples; returns (ok, witness)."""
    alg = H.alg
    for a in range(1, H.nvars + 1):
        for b in range(1, H.nvars + 1):
            for c in range(1, H.nvars + 1):
                res = compatibility_residual(H, K, alg.jet(a), alg.jet(b),
                                             alg.jet(c))
                if not res.is_zero():
                    return False, ((a, b, c), res)
    return True, None


def skewsymmetry_residual(H: LambdaBracketStruct, f: DiffPoly,
                          g: DiffPoly) -> LambdaPoly:
    """{g_lam f} + {f_(-lam-d) g}; vanishes when H* = -H."""
    lhs = lambda_bracket(g, f, H)
    rhs = subst_slot_neg(lambda_bracket(f, g, H), 0, (0,), drop=False)
    return lhs + rhs


# -- evolutionary vector fields -----------------------------------------------


class EvVectorField:
    """Evolutionary vector field X_P = sum (d^n P_i) d/du_i^(n), stored by
    its characteristic P."""

    __slots__ = ("alg", "P")

    def __init__(self, characteristic: Sequence[DiffPoly]):
        self.P = list(characteristic)
        self.alg = self.P[0].alg
        if len(self.P) != self.alg.nvars:
            raise ValueError("characteristic length must equal nvars")

    def __call__(self, f: DiffPoly) -> DiffPoly:
        return ev_apply(self, f)

    def __eq__(self, other):
        if not isinstance(other, EvVectorField):
            return NotImplemented
        return all(a == b for a, b in zip(self.P, other.P))

    def is_zero(self) -> bool:
        return all(p.is_zero() for p in self.P)

    def __repr__(self):
        return f"EvVectorField({self.P!r})"


def ev_apply(X: EvVectorField, f: DiffPoly) -> DiffPoly:
    out = f.alg.zero
    derived = {}
    for (n, i) in sorted(f.jet_support()):
        if (n, i) not in derived:
            g = X.P[i - 1]
            for _ in range(n):
                g = g.derive()
            derived[(n, i)] = g
        out = out + derived[(n, i)] * f.jet_partial(i, n)
    return out


def ev_commutator(X: EvVectorField, Y: EvVectorField) -> EvVectorField:
    return EvVectorField([ev_apply(X, q) - ev_apply(Y, p)
                          for p, q in zip(X.P, Y.P)])


def ad_field_on_operator(X: EvVectorField,
                         H: LambdaBracketStruct) -> MatDiffOp:
    """Action of an evolutionary field on a bracket operator:
    X_P(H) - H o D_P* - D_P o H."""
    xh = H.op.map_entries(lambda e: e.map_coeffs(
        lambda c: ev_apply(X, c) if isinstance(c, DiffPoly) else
        X.alg.zero))
    dp = frechet(X.P)
    return xh - H.op.compose(dp.adjoint()) - dp.compose(H.op)


def hamiltonian_vf(h, H: LambdaBracketStruct) -> EvVectorField:
    """Characteristic H(d) (delta h / delta u)."""
    rep = h.representative if isinstance(h, LocalFunctional) else h
    grad = list(variational_derivative(rep))
    return EvVectorField(H.op.apply(grad))


def poisson_bracket(f, g, H: LambdaBracketStruct) -> LocalFunctional:
    """{int f, int g} = int (delta g/delta u) . H(d) (delta f/delta u)."""
    fr = f.representative if isinstance(f, LocalFunctional) else f
    gr = g.representative if isinstance(g, LocalFunctional) else g
    gf = list(variational_derivative(fr))
    gg = list(variational_derivative(gr))
    hf = H.op.apply(gf)
    out = H.alg.zero
    for a, b in zip(gg, hf):
        out = out + a * b
    return LocalFunctional(out)


# -- convenient standard structures ---------------------------------------------


def gfz_structure(alg: DiffAlgebra) -> LambdaBracketStruct:
    """The structure with {u_lam u} = lam on one variable (H = d); for
    several variables, d times the identity matrix."""
    size = alg.nvars
    return LambdaBracketStruct(MatDiffOp(alg, [
        [ScalarDiffOp.d(alg) if i == j else ScalarDiffOp.zero(alg)
         for j in range(size)] for i in range(size)]))


def magri_structure(alg: DiffAlgebra,
                    c: Optional[object] = None) -> LambdaBracketStruct:
    """{u_lam u} = (d + 2 lam) u + c lam^3 on one variable:
    H = u' + 2u d + c d^3."""
    if alg.nvars != 1:
        raise ValueError("this structure is for one dependent variable")
    if c is None:
        c = alg.field.param("c") if "c" in alg.field.params else alg.field.one
    u = alg.jet(1, 0)
    op = ScalarDiffOp(alg, {0: u.derive(), 1: u * 2,
                            3: alg.from_scalar(alg.field.coerce(c))})
    return LambdaBracketStruct.from_scalar_op(op)
