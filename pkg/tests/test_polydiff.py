import itertools
import math
import random
from fractions import Fraction

import pytest

from varpois import (BadSupport, DiffAlgebra, KDiffOp, LambdaPoly, MatDiffOp,
                     NotInSigma, ScalarDiffOp, chi_representative, coeff_b,
                     coeff_c, expand_monomial, frechet, functional_eq,
                     is_skewsymmetric, is_totally_skewsymmetric,
                     module_action, pairing, sigma_action, sigma_space,
                     skew_product, solve_skew_equation, total_skewsymmetrize)
from varpois.complexes import QuotientArray, delta_k
from varpois.diffalg import LocalFunctional
from varpois.polydiff import (_B_TABLE, _C_TABLE,
                              total_skewsymmetrize_shortcut)

from helpers import rnd_diffpoly

ALG = DiffAlgebra(1, [])
ALG2 = DiffAlgebra(2)


def rnd_kdiffop(rng, alg, k, max_deg=2):
    P = KDiffOp(alg, k)
    for idx in itertools.product(range(1, alg.nvars + 1), repeat=k + 1):
        terms = {}
        for e in itertools.product(range(max_deg), repeat=k):
            v = rng.randint(-2, 2)
            if v:
                coeff = alg.field.rational(v) + alg.field.x * rng.randint(0, 1)
                terms[e] = alg.from_scalar(coeff)
        if terms:
            P.entries[idx] = LambdaPoly(alg, k, terms)
    return P


# -- S_{k+1} action --------------------------------------------------------------


def test_identity_action():
    rng = random.Random(40)
    P = rnd_kdiffop(rng, ALG2, 2)
    assert sigma_action(P, (0, 1, 2)) == P


def test_transposition_is_adjoint_at_arity_one():
    x = ALG.field.x
    op = ScalarDiffOp(ALG, {1: ALG.from_scalar(x)})
    P = KDiffOp.from_mat_diff_op(MatDiffOp(ALG, [[op]]))
    Pt = sigma_action(P, (1, 0))
    assert Pt.to_mat_diff_op() == MatDiffOp(ALG, [[op.adjoint()]])
    # double transposition returns the operator
    assert sigma_action(Pt, (1, 0)) == P


def test_group_action_axiom():
    rng = random.Random(41)
    P = rnd_kdiffop(rng, ALG2, 2, max_deg=2)
    for sigma in itertools.permutations(range(3)):
        for tau in itertools.permutations(range(3)):
            comp = tuple(tau[sigma[a]] for a in range(3))
            assert sigma_action(sigma_action(P, sigma), tau) == \
                sigma_action(P, comp)


def test_pairing_covariance():
    """int F^0 . P(F^1..F^k) is S_{k+1}-covariant."""
    rng = random.Random(42)
    P = rnd_kdiffop(rng, ALG2, 1, max_deg=2)
    fs = [[rnd_diffpoly(rng, ALG2, terms=2) for _ in range(2)]
          for _ in range(2)]
    base = pairing(fs[0], P, [fs[1]])
    for sigma in itertools.permutations(range(2)):
        Ps = sigma_action(P, sigma)
        lhs = pairing(fs[sigma[0]], Ps, [fs[sigma[1]]])
        assert functional_eq(lhs, base)


def test_total_skewsymmetrize():
    rng = random.Random(43)
    P = rnd_kdiffop(rng, ALG2, 2)
    TS = total_skewsymmetrize(P)
    assert total_skewsymmetrize(TS) == TS
    assert is_totally_skewsymmetric(TS)
    assert total_skewsymmetrize_shortcut(TS) == TS
    # multiplication operators average to zero at arity one
    x = ALG.field.x
    Pa = KDiffOp(ALG, 1, {(1, 1): LambdaPoly.const(ALG, 1,
                                                   ALG.from_scalar(x))})
    assert total_skewsymmetrize(Pa).is_zero()


def test_module_action():
    rng = random.Random(44)
    P = rnd_kdiffop(rng, ALG2, 2)
    assert module_action(MatDiffOp.identity(ALG2, 2), P) == P
    z = ScalarDiffOp.zero(ALG2)
    K1 = MatDiffOp(ALG2, [[ScalarDiffOp.d(ALG2), z],
                          [ScalarDiffOp.identity(ALG2), ScalarDiffOp.d(ALG2, 2)]])
    K2 = MatDiffOp(ALG2, [[ScalarDiffOp.identity(ALG2), ScalarDiffOp.d(ALG2)],
                          [z, ScalarDiffOp.identity(ALG2)]])
    assert module_action(K1, module_action(K2, P)) == \
        module_action(K1.compose(K2), P)
    # k=1, K=d, P = multiplication by a: (lam + d) a
    x = ALG.field.x
    Pa = KDiffOp(ALG, 1, {(1, 1): LambdaPoly.const(ALG, 1,
                                                   ALG.from_scalar(x))})
    out = module_action(MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]]), Pa)
    want = LambdaPoly(ALG, 1, {(1,): ALG.from_scalar(x), (0,): ALG.one})
    assert out.entry((1, 1)) == want


def test_module_action_preserves_skewsymmetry():
    rng = random.Random(45)
    P = total_skewsymmetrize(rnd_kdiffop(rng, ALG2, 2))
    z = ScalarDiffOp.zero(ALG2)
    K = MatDiffOp(ALG2, [[ScalarDiffOp.d(ALG2, 2), z],
                         [z, ScalarDiffOp.d(ALG2, 2)]])
    assert is_skewsymmetric(module_action(K, P))


def test_skew_pairing_alternating_form():
    """The unnormalized skewsymmetrization of K o P matches the alternating
    sum over removed slots for skewsymmetric P."""
    rng = random.Random(46)
    P = total_skewsymmetrize(rnd_kdiffop(rng, ALG, 1))
    K = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]])
    lhs = skew_product(K, P)
    KP = module_action(K, P)
    from varpois.polydiff import _tau_action
    rhs = KP - _tau_action(KP, 1)
    assert lhs == rhs


# -- coefficient tables -----------------------------------------------------------


def test_c_base_and_remark_values():
    for p in range(4):
        for m in range(5):
            assert coeff_c((p, p), (m + 1, m)) == (-1 if m == p else 0)
    for p in range(1, 5):
        for q in range(p):
            for m in range(q, (p + q) // 2 + 1):
                want = (-1) ** (m + p + 1) * math.comb(p - m, m - q)
                assert coeff_c((p, q), (m + 1, m)) == want


def test_c_bad_support():
    with pytest.raises(BadSupport):
        coeff_c((2, 0), (2, 0))


def test_b_base_and_example():
    assert coeff_b((1, 0), (1, 0)) == 1
    assert coeff_b((2, 0), (1, 1)) == -1
    assert coeff_b((2, 0), (1, 0)) == -1
    with pytest.raises(BadSupport):
        coeff_b((2, 0), (3, 0))


def _expand_commutative(n, terms):
    """Evaluate sum c * lam^m * d^dpow minus lam^n, with
    lam_0 = -(lam_1 + ... + lam_k + d), in Q[lam_1..lam_k, d^(+-1)]."""
    k1 = len(n)
    k = k1 - 1

    def lam0_pow(p):
        out = {}
        for combo in itertools.product(range(k1), repeat=p):
            key = [0] * k
            dp = 0
            for c in combo:
                if c < k:
                    key[c] += 1
                else:
                    dp += 1
            kk = tuple(key) + (dp,)
            out[kk] = out.get(kk, 0) + (-1) ** p
        return out

    def mono(m, dpow):
        out = {}
        for key, c in lam0_pow(m[0]).items():
            kk = tuple(key[t] + m[1 + t] for t in range(k)) + \
                (key[k] + dpow,)
            out[kk] = out.get(kk, 0) + c
        return out

    lhs = mono(n, 0)
    rhs = {}
    for c, m, dp in terms:
        for key, v in mono(m, dp).items():
            rhs[key] = rhs.get(key, 0) + c * v
    return all(lhs.get(kk, 0) == rhs.get(kk, 0)
               for kk in set(lhs) | set(rhs))


def test_monomial_expansion_identity():
    for k in (1, 2):
        for n in itertools.product(range(4), repeat=k + 1):
            assert _expand_commutative(n, expand_monomial(n)), n


def test_b_expansion_identity():
    for k in (1, 2):
        for n in itertools.product(range(4), repeat=k + 1):
            assert _expand_commutative(n, _B_TABLE.expansion(n)), n


def test_c_table_properties_exhaustive():
    """Support and symmetry properties of the c coefficients, entries <= 4."""
    for k in (1, 2):
        for n in itertools.product(range(5), repeat=k + 1):
            nu = sorted(n, reverse=True)
            support = _C_TABLE.expansion(n)
            values = {m: c for c, m, _ in support}
            for c, m, _ in support:
                mu = sorted(m, reverse=True)
                # (iv) bound on the top target exponent
                assert mu[0] <= nu[0] + 1
                # (v) strict bound when the source top is isolated
                if nu[0] > nu[1]:
                    assert mu[0] <= nu[0]
                # (vi) slots holding the maximal source exponent
                for a in range(k + 1):
                    if n[a] == nu[0]:
                        assert m[a] >= max(mu[1], nu[1])
                # (vii) lower bound on the small slots
                for b in range(k + 1):
                    if n[b] <= nu[1]:
                        assert m[b] >= n[b]
            # (i) base case
            if nu[0] - nu[1] == 1:
                assert values == {n: 1}
            # (ii) simultaneous permutation symmetry
            for sigma in itertools.permutations(range(k + 1)):
                ns = tuple(n[sigma[a]] for a in range(k + 1))
                for c, m, _ in support:
                    ms = tuple(m[sigma[a]] for a in range(k + 1))
                    assert coeff_c(ns, ms) == c
            # (iii) recurrences
            for c, m, _ in support:
                total = 0
                for a in range(k + 1):
                    bumped = n[:a] + (n[a] + 1,) + n[a + 1:]
                    total += _C_TABLE._c(bumped, m)
                assert c == -total
                for a in range(k + 1):
                    if n[a] == 0:
                        continue
                    acc = _C_TABLE._c(n[:a] + (n[a] - 1,) + n[a + 1:], m)
                    for b in range(k + 1):
                        if b == a:
                            continue
                        shifted = list(n)
                        shifted[b] += 1
                        shifted[a] -= 1
                        acc += _C_TABLE._c(tuple(shifted), m)
                    assert c == -acc


# -- solvability spaces -----------------------------------------------------------


def test_sigma_space_examples():
    Kd = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]])
    basis, expected, flagged = sigma_space(Kd, 0)
    assert (len(basis), expected, flagged) == (1, 1, False)
    basis, expected, flagged = sigma_space(Kd, 1)
    assert (len(basis), expected, flagged) == (0, 0, False)
    Kd2 = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG, 2)]])
    basis, expected, flagged = sigma_space(Kd2, 1)
    assert (len(basis), expected, flagged) == (1, 1, False)
    P = basis[0]
    assert P.entry((1, 1)).degree_in(0) == 0


def test_sigma_space_flagged_nonrational():
    K = MatDiffOp(ALG, [[ScalarDiffOp(ALG, {1: ALG.one, 0: ALG.one})]])
    basis, expected, flagged = sigma_space(K, 0)
    assert len(basis) == 0 and expected == 1 and flagged


def test_chi_representatives():
    Kd = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]])
    P0 = KDiffOp(ALG, 0, {(1,): LambdaPoly.const(ALG, 0, ALG.one)})
    rep = chi_representative(P0, Kd)
    u = ALG.jet(1)
    assert rep.entries[()].as_diffpoly() == u
    # delta h / delta u = 1 and K*(d) 1 = 0
    from varpois import variational_derivative
    assert variational_derivative(u)[0] == ALG.one
    assert chi_representative(KDiffOp(ALG, 1), Kd).is_zero()
    with pytest.raises(NotInSigma):
        bad = KDiffOp(ALG, 0, {(1,): LambdaPoly.const(
            ALG, 0, ALG.from_scalar(ALG.field.x))})
        chi_representative(bad, Kd)


def test_chi_frechet_is_adjoint():
    Kd2 = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG, 2)]])
    basis, _, _ = sigma_space(Kd2, 1)
    P = basis[0]
    rep = chi_representative(P, Kd2)
    F = QuotientArray(rep).as_one_form()
    assert frechet(F) == P.to_mat_diff_op().adjoint()
    assert QuotientArray(delta_k(rep, Kd2)).is_zero()


def test_solve_skew_closed_forms():
    Kd = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]])
    K1 = MatDiffOp.identity(ALG, 1)
    Sop = ScalarDiffOp(ALG, {1: ALG.one * 2})
    S = KDiffOp.from_mat_diff_op(MatDiffOp(ALG, [[Sop]]))
    P = solve_skew_equation(K1, S)
    assert P == S.scale(Fraction(1, 2))
    assert skew_product(K1, P) == S
    P2 = solve_skew_equation(Kd, S)
    assert skew_product(Kd, P2) == S
    assert solve_skew_equation(Kd, KDiffOp(ALG, 1)).is_zero()


def test_solve_skew_antiderivative_closed_form():
    """For K = d, the skewadjoint operator whose canonical coefficients are
    antiderivatives of those of S is a solution."""
    from varpois import skewadjoint_decompose
    Kd = MatDiffOp(ALG, [[ScalarDiffOp.d(ALG)]])
    x = ALG.field.x
    Sop = ScalarDiffOp(ALG, {1: ALG.from_scalar(x),
                             0: ALG.from_scalar(ALG.field.rational(1, 2))})
    S = KDiffOp.from_mat_diff_op(MatDiffOp(ALG, [[Sop]]))
    assert is_totally_skewsymmetric(S)
    a, b = skewadjoint_decompose(Sop)
    d1 = ScalarDiffOp.d(ALG)
    closed_form = ScalarDiffOp.zero(ALG)
    from varpois import rational_antiderivative
    for m, am in a.items():
        anti = ALG.from_scalar(
            rational_antiderivative(am.quasiconstant_part()))
        inner = d1.compose(ScalarDiffOp(ALG, {0: anti})) + \
            ScalarDiffOp(ALG, {0: anti}).compose(d1)
        closed_form = closed_form + ScalarDiffOp.d(ALG, m).compose(
            inner).compose(ScalarDiffOp.d(ALG, m))
    closed_k = KDiffOp.from_mat_diff_op(MatDiffOp(ALG, [[closed_form]]))
    assert skew_product(Kd, closed_k) == S
    solved = solve_skew_equation(Kd, S)
    assert skew_product(Kd, solved) == S
