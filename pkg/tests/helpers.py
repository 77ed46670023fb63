"""Shared builders and seeded random generators for the test suite."""

import random
from fractions import Fraction

from varpois import (DiffAlgebra, LambdaPoly, MatDiffOp, ScalarDiffOp,
                     SkewArray)


def rnd_rational(rng: random.Random) -> Fraction:
    num = rng.randint(-4, 4)
    den = rng.choice([1, 1, 2, 3])
    return Fraction(num, den)


def rnd_field_elem(rng: random.Random, field, with_x=True):
    v = field.rational(rnd_rational(rng))
    if with_x and rng.random() < 0.5:
        v = v + field.x * rng.randint(-2, 2)
    return v


def rnd_diffpoly(rng: random.Random, alg: DiffAlgebra, max_order=2,
                 max_degree=2, terms=3, with_x=False):
    out = alg.zero
    for _ in range(terms):
        t = alg.from_scalar(rnd_field_elem(rng, alg.field, with_x))
        for _ in range(rng.randint(0, max_degree)):
            i = rng.randint(1, alg.nvars)
            n = rng.randint(0, max_order)
            t = t * alg.jet(i, n)
        out = out + t
    return out


def rnd_scalar_op(rng: random.Random, alg: DiffAlgebra, max_order=2,
                  quasiconstant=False):
    coeffs = {}
    for n in range(max_order + 1):
        if rng.random() < 0.7:
            if quasiconstant:
                c = alg.from_scalar(rnd_field_elem(rng, alg.field))
            else:
                c = rnd_diffpoly(rng, alg, max_order=1, max_degree=1, terms=2)
            if not c.is_zero():
                coeffs[n] = c
    return ScalarDiffOp(alg, coeffs)


def rnd_mat_op(rng: random.Random, alg: DiffAlgebra, size=2, max_order=2,
               quasiconstant=True):
    return MatDiffOp(alg, [[rnd_scalar_op(rng, alg, max_order, quasiconstant)
                            for _ in range(size)] for _ in range(size)])


def rnd_lambda_poly(rng: random.Random, alg: DiffAlgebra, k: int,
                    max_deg=2, max_order=2):
    import itertools
    L = LambdaPoly.zero(alg, k)
    for e in itertools.product(range(max_deg + 1), repeat=k):
        if rng.random() < 0.4:
            p = rnd_diffpoly(rng, alg, max_order=max_order, max_degree=2,
                             terms=2)
            L = L + LambdaPoly.monomial(alg, k, e, p)
    return L


def rnd_skew_array(rng: random.Random, alg: DiffAlgebra, k: int,
                   max_deg=2, max_order=2) -> SkewArray:
    import itertools
    out = SkewArray(alg, k)
    for idx in itertools.combinations_with_replacement(
            range(1, alg.nvars + 1), k):
        L = rnd_lambda_poly(rng, alg, k, max_deg, max_order)
        out.set_entry(idx, L)
    return out


def skewadjoint_op(rng: random.Random, alg: DiffAlgebra, max_order=3,
                   quasiconstant=True):
    """A random skewadjoint scalar operator, via S - S*."""
    S = rnd_scalar_op(rng, alg, max_order, quasiconstant)
    return S - S.adjoint()
