"""Polydifferential operators on F^l: the symmetric-group action, total
skewsymmetrization, the module action of matrix differential operators,
integer coefficient tables for rewriting lambda-monomials modulo
lam_0 + ... + lam_k + d, the solvability spaces Sigma_k, and representatives
of variational Poisson cohomology classes.

A k-differential operator is an array over (k+1)-tuples of indices whose
entries are polynomials in lam_1..lam_k with quasiconstant coefficients; no
skewsymmetry is imposed by the storage.
"""

from __future__ import annotations

import itertools
import math
import threading
from fractions import Fraction
from typing import Optional, Sequence

from .diffalg import DiffAlgebra, DiffPoly, LocalFunctional
from .diffop import (Incomplete, MatDiffOp, ScalarDiffOp, solve_rational)
from .field import FieldElem
from .lambdapoly import LambdaPoly, subst_slot_neg, symbol_act
from .linform import LinForm
from .linsolve import matrix_inverse


class BadSupport(Exception):
    pass


class NotInSigma(Exception):
    pass


class KDiffOp:
    """Array of lambda-polynomials indexed by (k+1)-tuples of 1..nvars."""

    __slots__ = ("alg", "k", "entries")

    def __init__(self, alg: DiffAlgebra, k: int, entries: Optional[dict] = None):
        self.alg = alg
        self.k = k
        self.entries = {}
        if entries:
            for idx, L in entries.items():
                if not L.is_zero():
                    self.entries[tuple(idx)] = L

    def entry(self, idx: tuple) -> LambdaPoly:
        return self.entries.get(tuple(idx), LambdaPoly.zero(self.alg, self.k))

    def all_keys(self):
        return itertools.product(range(1, self.alg.nvars + 1),
                                 repeat=self.k + 1)

    def set_entry(self, idx: tuple, L: LambdaPoly):
        if L.is_zero():
            self.entries.pop(tuple(idx), None)
        else:
            self.entries[tuple(idx)] = L

    def __add__(self, other: "KDiffOp") -> "KDiffOp":
        out = KDiffOp(self.alg, self.k)
        for idx in set(self.entries) | set(other.entries):
            v = self.entry(idx) + other.entry(idx)
            if not v.is_zero():
                out.entries[idx] = v
        return out

    def __sub__(self, other: "KDiffOp") -> "KDiffOp":
        return self + (-other)

    def __neg__(self) -> "KDiffOp":
        out = KDiffOp(self.alg, self.k)
        out.entries = {idx: -v for idx, v in self.entries.items()}
        return out

    def scale(self, c) -> "KDiffOp":
        out = KDiffOp(self.alg, self.k)
        for idx, v in self.entries.items():
            w = v.scale(c)
            if not w.is_zero():
                out.entries[idx] = w
        return out

    def is_zero(self) -> bool:
        return not self.entries

    def __eq__(self, other):
        if not isinstance(other, KDiffOp):
            return NotImplemented
        return self.k == other.k and (self - other).is_zero()

    def map_entries(self, fn) -> "KDiffOp":
        out = KDiffOp(self.alg, self.k)
        for idx, v in self.entries.items():
            w = fn(v)
            if not w.is_zero():
                out.entries[idx] = w
        return out

    def __repr__(self):
        from .lambdapoly import format_lambda_poly
        body = ", ".join(f"{idx}: {format_lambda_poly(v)}"
                         for idx, v in sorted(self.entries.items()))
        return f"KDiffOp(k={self.k}, {{{body}}})"

    @classmethod
    def from_mat_diff_op(cls, M: MatDiffOp) -> "KDiffOp":
        """Arity-1 operators are matrix differential operators (lam = d)."""
        out = cls(M.alg, 1)
        for i in range(M.m):
            for j in range(M.n):
                sym = M.rows[i][j].symbol()
                if not sym.is_zero():
                    out.entries[(i + 1, j + 1)] = sym
        return out

    def to_mat_diff_op(self) -> MatDiffOp:
        if self.k != 1:
            raise ValueError("only arity-1 operators are matrices")
        size = self.alg.nvars
        rows = []
        for i in range(1, size + 1):
            row = []
            for j in range(1, size + 1):
                row.append(ScalarDiffOp.from_symbol(self.entry((i, j))))
            rows.append(row)
        return MatDiffOp(self.alg, rows)


# -- symmetric group action ---------------------------------------------------------


def _sk_action(P: KDiffOp, sigma: Sequence[int]) -> KDiffOp:
    """Action of sigma in S_k = Perm(1..k) (given 0-based on {0..k} fixing 0):
    simultaneous permutation of trailing indices and variables."""
    k = P.k
    inv = [0] * (k + 1)
    for a, b in enumerate(sigma):
        inv[b] = a
    out = KDiffOp(P.alg, k)
    for idx, L in P.entries.items():
        new_idx = (idx[0],) + tuple(idx[inv[a]] for a in range(1, k + 1))
        var_map = tuple(inv[a + 1] - 1 for a in range(k))
        out.entries[tuple(new_idx)] = out.entry(new_idx) + L.compose_vars(var_map)
    clean = KDiffOp(P.alg, k)
    for idx, L in out.entries.items():
        if not L.is_zero():
            clean.entries[idx] = L
    return clean


def _tau_action(P: KDiffOp, alpha: int) -> KDiffOp:
    """Transposition of positions 0 and alpha (1-based alpha):
    swap the indices and substitute the alpha-th variable by
    -(lam_1 + ... + lam_k) - d (differentiating the coefficients)."""
    k = P.k
    out = KDiffOp(P.alg, k)
    for idx, L in P.entries.items():
        new_idx = list(idx)
        new_idx[0], new_idx[alpha] = new_idx[alpha], new_idx[0]
        subst = subst_slot_neg(L, alpha - 1, tuple(range(k)), drop=False)
        prev = out.entry(tuple(new_idx))
        val = prev + subst
        if val.is_zero():
            out.entries.pop(tuple(new_idx), None)
        else:
            out.entries[tuple(new_idx)] = val
    return out


def sigma_action(P: KDiffOp, sigma: Sequence[int]) -> KDiffOp:
    """Action of sigma in S_{k+1} = Perm(0..k) on a k-differential operator,
    extending the simultaneous index/variable permutations by the adjoint-like
    transpositions with position 0.  Satisfies (P^sigma)^tau = P^(tau sigma)."""
    sigma = tuple(sigma)
    if len(sigma) != P.k + 1:
        raise ValueError("permutation arity mismatch")
    if sigma[0] == 0:
        if all(sigma[a] == a for a in range(P.k + 1)):
            return P
        return _sk_action(P, sigma)
    beta = sigma[0]
    tau = list(range(P.k + 1))
    tau[0], tau[beta] = beta, 0
    sigma_rest = tuple(tau[sigma[a]] for a in range(P.k + 1))
    return _tau_action(sigma_action(P, sigma_rest), beta)


def _perm_sign(perm: Sequence[int]) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def is_skewsymmetric(P: KDiffOp) -> bool:
    """Antisymmetry under the S_k sub-action (position 0 fixed)."""
    k = P.k
    for t in range(1, k):
        sigma = list(range(k + 1))
        sigma[t], sigma[t + 1] = sigma[t + 1], sigma[t]
        if not (sigma_action(P, sigma) + P).is_zero():
            return False
    return True


def is_totally_skewsymmetric(P: KDiffOp) -> bool:
    if not is_skewsymmetric(P):
        return False
    if P.k >= 1 and not (_tau_action(P, 1) + P).is_zero():
        return False
    return True


def total_skewsymmetrize(P: KDiffOp) -> KDiffOp:
    """<P>^- = (1/(k+1)!) sum_sigma sign(sigma) P^sigma."""
    k = P.k
    out = KDiffOp(P.alg, k)
    for sigma in itertools.permutations(range(k + 1)):
        t = sigma_action(P, sigma)
        out = out + (t if _perm_sign(sigma) > 0 else -t)
    return out.scale(Fraction(1, math.factorial(k + 1)))


def total_skewsymmetrize_shortcut(P: KDiffOp) -> KDiffOp:
    """For P already skewsymmetric: <P>^- = (P - sum_alpha P^tau_alpha)/(k+1)."""
    out = P
    for alpha in range(1, P.k + 1):
        out = out - _tau_action(P, alpha)
    return out.scale(Fraction(1, P.k + 1))


def module_action(K: MatDiffOp, P: KDiffOp) -> KDiffOp:
    """(K o P)_{i0,...} = sum_j K_{i0 j}(lam_1 + ... + lam_k + d) P_{j,...};
    preserves skewsymmetry."""
    alg = P.alg
    k = P.k
    lin = {s: 1 for s in range(k)}
    out = KDiffOp(alg, k)
    for idx in P.all_keys():
        total = LambdaPoly.zero(alg, k)
        for j in range(1, alg.nvars + 1):
            ent = P.entry((j,) + tuple(idx[1:]))
            if ent.is_zero():
                continue
            op = K.rows[idx[0] - 1][j - 1]
            if op.is_zero():
                continue
            total = total + symbol_act(op.symbol(), lin, 1, ent)
        if not total.is_zero():
            out.entries[tuple(idx)] = total
    return out


def apply_to_vectors(P: KDiffOp, fs: Sequence[Sequence[DiffPoly]]) -> list:
    """P(F^1,...,F^k) in V^nvars."""
    alg = P.alg
    if len(fs) != P.k:
        raise ValueError("need k argument vectors")
    out = [alg.zero for _ in range(alg.nvars)]
    for idx, L in P.entries.items():
        i0 = idx[0]
        for e, c in L.terms.items():
            term = c if isinstance(c, DiffPoly) else alg.from_scalar(c)
            for t in range(P.k):
                g = fs[t][idx[1 + t] - 1]
                for _ in range(e[t]):
                    g = g.derive()
                term = term * g
            out[i0 - 1] = out[i0 - 1] + term
    return out


def pairing(F0: Sequence[DiffPoly], P: KDiffOp,
            fs: Sequence[Sequence[DiffPoly]]) -> LocalFunctional:
    """int F^0 . P(F^1..F^k), the pairing underlying the S_{k+1} action."""
    alg = P.alg
    vec = apply_to_vectors(P, fs)
    acc = alg.zero
    for a, b in zip(F0, vec):
        acc = acc + a * b
    return LocalFunctional(acc)


# -- integer coefficient tables ------------------------------------------------------


def _sorted_desc(t: Sequence[int]) -> tuple:
    return tuple(sorted(t, reverse=True))


class CCoeffTable:
    """Coefficients rewriting lam_0^{n_0}..lam_k^{n_k} over monomials whose
    two largest exponents differ by exactly one (times powers of d,
    possibly negative), under lam_0 = -lam_1 - ... - lam_k - d.

    The memo is a shared cache; a reentrant lock keeps it safe to query
    from several threads."""

    def __init__(self):
        self.memo: dict = {}
        self._lock = threading.RLock()

    def get(self, n: tuple, m: tuple) -> int:
        n, m = tuple(n), tuple(m)
        mu = _sorted_desc(m)
        if len(mu) < 2 or mu[0] - mu[1] != 1:
            raise BadSupport("target tuple must have top exponents "
                             "differing by one")
        with self._lock:
            return self._c(n, m)

    def _c(self, n: tuple, m: tuple) -> int:
        key = (n, m)
        if key in self.memo:
            return self.memo[key]
        nu = _sorted_desc(n)
        if nu[0] - nu[1] == 1:
            val = 1 if n == m else 0
        elif nu[0] == nu[1]:
            val = 0
            for a in range(len(n)):
                bumped = n[:a] + (n[a] + 1,) + n[a + 1:]
                val -= self._c(bumped, m)
        else:
            a = max(range(len(n)), key=lambda t: n[t])
            val = -self._c(n[:a] + (n[a] - 1,) + n[a + 1:], m)
            for b in range(len(n)):
                if b == a:
                    continue
                shifted = list(n)
                shifted[b] += 1
                shifted[a] -= 1
                val -= self._c(tuple(shifted), m)
        self.memo[key] = val
        return val

    def expansion(self, n: tuple) -> list:
        """All (coefficient, m, dpow) with nonzero coefficient in the
        rewriting of lam^n; dpow = sum(n) - sum(m) may be negative."""
        k1 = len(n)
        nu0 = max(n)
        out = []
        with self._lock:
            for m in itertools.product(range(nu0 + 2), repeat=k1):
                mu = _sorted_desc(m)
                if mu[0] - mu[1] != 1:
                    continue
                c = self._c(tuple(n), tuple(m))
                if c:
                    out.append((c, m, sum(n) - sum(m)))
        return out


class BCoeffTable:
    """Coefficients rewriting lam^n over monomials whose top exponents differ
    by zero or one, with nonnegative powers of d.  Shares the locking
    discipline of the c-table."""

    def __init__(self):
        self.memo: dict = {}
        self._lock = threading.RLock()

    def get(self, n: tuple, m: tuple) -> int:
        n, m = tuple(n), tuple(m)
        mu = _sorted_desc(m)
        if len(mu) < 2 or mu[0] - mu[1] not in (0, 1):
            raise BadSupport("target tuple must have top exponents "
                             "differing by zero or one")
        with self._lock:
            return self._b(n, m)

    def _b(self, n: tuple, m: tuple) -> int:
        key = (n, m)
        if key in self.memo:
            return self.memo[key]
        nu = _sorted_desc(n)
        if nu[0] - nu[1] in (0, 1):
            val = 1 if n == m else 0
        else:
            a = max(range(len(n)), key=lambda t: n[t])
            val = -self._b(n[:a] + (n[a] - 1,) + n[a + 1:], m)
            for b in range(len(n)):
                if b == a:
                    continue
                shifted = list(n)
                shifted[b] += 1
                shifted[a] -= 1
                val -= self._b(tuple(shifted), m)
        self.memo[key] = val
        return val

    def expansion(self, n: tuple) -> list:
        k1 = len(n)
        nu0 = max(n)
        out = []
        with self._lock:
            for m in itertools.product(range(nu0 + 1), repeat=k1):
                mu = _sorted_desc(m)
                if mu[0] - mu[1] not in (0, 1):
                    continue
                if sum(n) - sum(m) < 0:
                    continue
                c = self._b(tuple(n), tuple(m))
                if c:
                    out.append((c, m, sum(n) - sum(m)))
        return out


_C_TABLE = CCoeffTable()
_B_TABLE = BCoeffTable()


def coeff_c(n: tuple, m: tuple) -> int:
    return _C_TABLE.get(n, m)


def coeff_b(n: tuple, m: tuple) -> int:
    return _B_TABLE.get(n, m)


def expand_monomial(n: tuple) -> list:
    """Rewriting of a full lambda-monomial as sum of allowed monomials times
    d-powers; substituting lam_0 = -lam_1 - ... - lam_k - d in both sides
    gives an identity of commutative (Laurent in d) polynomials."""
    return _C_TABLE.expansion(tuple(n))


# -- solvability spaces --------------------------------------------------------------


def _skew_atoms(alg: DiffAlgebra, k: int, ndeg: int) -> list:
    """Orbit representatives for skewsymmetric unknowns with lambda-exponents
    below ndeg: i0 free, the pairs ((n_t, i_t)) strictly decreasing
    (repeated pairs vanish)."""
    pair_choices = list(itertools.combinations(
        sorted(((n, i) for n in range(ndeg) for i in range(1, alg.nvars + 1)),
               reverse=True), k))
    atoms = []
    for i0 in range(1, alg.nvars + 1):
        for pairs in pair_choices:
            atoms.append((i0, pairs))
    return atoms


def _unknown_kdiffop(alg: DiffAlgebra, k: int, N: int, atoms: list) -> KDiffOp:
    """The generic skewsymmetric k-differential operator with LinForm
    coefficients over the atoms."""
    field = alg.field
    P = KDiffOp(alg, k)
    atom_set = set(atoms)
    for i0 in range(1, alg.nvars + 1):
        for rest in itertools.product(range(1, alg.nvars + 1), repeat=k):
            terms = {}
            for exps in itertools.product(range(N), repeat=k):
                pairs = tuple((exps[t], rest[t]) for t in range(k))
                if len(set(pairs)) < k:
                    continue
                perm = sorted(range(k), key=lambda t: pairs[t], reverse=True)
                canon = tuple(pairs[t] for t in perm)
                sign = _perm_sign(perm)
                atom = (i0, canon)
                if atom not in atom_set:
                    continue
                lf = LinForm.atom(field, atom)
                if sign < 0:
                    lf = -lf
                terms[tuple(exps)] = alg.from_scalar(lf)
            L = LambdaPoly(alg, k, terms)
            if not L.is_zero():
                P.entries[(i0,) + rest] = L
    return P


def _collect_equations(E: KDiffOp):
    """(linform, inhomogeneous FieldElem) rows from the vanishing of all
    lambda-coefficients of all entries."""
    eqs = []
    for idx in sorted(E.entries):
        L = E.entries[idx]
        for e, p in L.sorted_terms():
            for mono, c in sorted(p.terms.items()):
                eqs.append(((idx, e, mono), c))
    return eqs


def _solve_linform_system(alg: DiffAlgebra, lhs_rows: list, rhs_map: dict,
                          atoms: list, degree_bound: Optional[int]):
    from .diffop import SolutionSet
    field = alg.field
    index = {a: j for j, a in enumerate(atoms)}
    keys = sorted(set(k for k, _ in lhs_rows) | set(rhs_map),
                  key=repr)
    if not keys:
        basis = [[field.one if t == b else field.zero
                  for t in range(len(atoms))] for b in range(len(atoms))]
        return SolutionSet([field.zero] * len(atoms), basis, 0)
    lhs_by_key = {k: lf for k, lf in lhs_rows}
    rows, rhs = [], []
    for key in keys:
        lf = lhs_by_key.get(key)
        row = [ScalarDiffOp.zero(alg) for _ in atoms]
        if lf is not None:
            for a, ders in lf.by_atom().items():
                row[index[a]] = ScalarDiffOp(
                    alg, {r: alg.from_scalar(c) for r, c in ders.items()})
        rows.append(row)
        rhs.append(rhs_map.get(key, field.zero))
    M = MatDiffOp(alg, rows)
    return solve_rational(M, rhs, degree_bound)


def sigma_space(K: MatDiffOp, k: int,
                degree_bound: Optional[int] = None):
    """Basis over C of the skewsymmetric k-differential operators P of degree
    at most ord(K)-1 per variable with the total skewsymmetrization of
    K* o P vanishing.  Returns (basis, expected_dim, flagged)."""
    alg = K.alg
    field = alg.field
    N = K.order()
    _require_invertible_leading(K)
    expected = math.comb(N * alg.nvars, k + 1)
    atoms = _skew_atoms(alg, k, N)
    if not atoms:
        return [], expected, expected > 0
    if degree_bound is None:
        degree_bound = N * (k + 2) * alg.nvars + 4
    P = _unknown_kdiffop(alg, k, N, atoms)
    E = total_skewsymmetrize(module_action(K.adjoint(), P))
    eqs = []
    for key, c in _collect_equations(E):
        if isinstance(c, LinForm):
            eqs.append((key, c))
        elif not c.is_zero():
            raise ArithmeticError("unexpected inhomogeneous term")
    sols = _solve_linform_system(alg, eqs, {}, atoms, degree_bound)
    basis = [_substitute_atoms(alg, k, N, atoms, vec)
             for vec in sols.homogeneous]
    return basis, expected, len(basis) < expected


def _substitute_atoms(alg: DiffAlgebra, k: int, N: int, atoms: list,
                      vec: list) -> KDiffOp:
    values = dict(zip(atoms, vec))
    P = KDiffOp(alg, k)
    for i0 in range(1, alg.nvars + 1):
        for rest in itertools.product(range(1, alg.nvars + 1), repeat=k):
            terms = {}
            for exps in itertools.product(range(N), repeat=k):
                pairs = tuple((exps[t], rest[t]) for t in range(k))
                if len(set(pairs)) < k:
                    continue
                perm = sorted(range(k), key=lambda t: pairs[t], reverse=True)
                canon = tuple(pairs[t] for t in perm)
                atom = (i0, canon)
                if atom not in values:
                    continue
                c = values[atom]
                if _perm_sign(perm) < 0:
                    c = -c
                if not c.is_zero():
                    terms[tuple(exps)] = alg.from_scalar(c)
            L = LambdaPoly(alg, k, terms)
            if not L.is_zero():
                P.entries[(i0,) + rest] = L
    return P


def _require_invertible_leading(K: MatDiffOp):
    field = K.alg.field
    N = K.order()
    lead = []
    for row in K.rows:
        r = []
        for e in row:
            c = e.coeff(N)
            if isinstance(c, DiffPoly):
                if not c.is_quasiconstant():
                    raise ValueError("leading coefficient must be quasiconstant")
                c = c.quasiconstant_part()
            r.append(c)
        lead.append(r)
    if matrix_inverse(lead, field) is None:
        raise ValueError("leading coefficient is singular")


def solve_skew_equation(K: MatDiffOp, S: KDiffOp,
                        degree_bound: Optional[int] = None) -> KDiffOp:
    """Skewsymmetric P with sum_{sigma in S_{k+1}} sign(sigma) (K o P)^sigma
    / k! = S (the unnormalized total skewsymmetrization, matching the closed
    forms K=1 -> P = S/2 and K=d -> dP = S at arity one), for totally
    skewsymmetric S."""
    alg = K.alg
    field = alg.field
    k = S.k
    N = K.order()
    _require_invertible_leading(K)
    if not is_totally_skewsymmetric(S):
        raise ValueError("right-hand side must be totally skewsymmetric")
    if S.is_zero():
        return KDiffOp(alg, k)
    d_s = max(max((L.degree_in(a) for a in range(k)), default=0)
              for L in S.entries.values())
    lam_deg = max(N - 1, d_s)
    last_err = None
    for attempt in range(3):
        ndeg = lam_deg + 1 + attempt
        atoms = _skew_atoms(alg, k, ndeg)
        P = _unknown_kdiffop(alg, k, ndeg, atoms)
        E = total_skewsymmetrize(module_action(K, P)).scale(k + 1)
        lhs = []
        for key, c in _collect_equations(E):
            if isinstance(c, LinForm):
                lhs.append((key, c))
            elif not c.is_zero():
                raise ArithmeticError("unexpected inhomogeneous term")
        rhs_map = {}
        for key, c in _collect_equations(S):
            if isinstance(c, DiffPoly):
                c = c.quasiconstant_part()
            rhs_map[key] = field.coerce(c) if not isinstance(c, FieldElem) else c
        try:
            sols = _solve_linform_system(alg, lhs, rhs_map, atoms,
                                         degree_bound)
        except Incomplete as err:
            last_err = err
            continue
        if sols.particular is not None:
            return _substitute_atoms(alg, k, ndeg, atoms, sols.particular)
    raise last_err or Incomplete("rational ansatz exhausted")


def skew_product(K: MatDiffOp, P: KDiffOp) -> KDiffOp:
    """The unnormalized skewsymmetrization (k+1) <K o P>^- used by the
    skew-equation solver."""
    return total_skewsymmetrize(module_action(K, P)).scale(P.k + 1)


def chi_representative(P: KDiffOp, K: Optional[MatDiffOp] = None,
                       check: bool = True):
    """The array (sum_j P_{j,i1..ik}(lam) u_j): a closed representative of
    the cohomology class attached to P in Sigma_k(K*)."""
    from .complexes import SkewArray
    alg = P.alg
    if check and K is not None:
        if not total_skewsymmetrize(module_action(K.adjoint(), P)).is_zero():
            raise NotInSigma("operator does not solve the Sigma equation")
    out = SkewArray(alg, P.k)
    for rest in itertools.combinations_with_replacement(
            range(1, alg.nvars + 1), P.k):
        total = LambdaPoly.zero(alg, P.k)
        for j in range(1, alg.nvars + 1):
            L = P.entry((j,) + rest)
            if L.is_zero():
                continue
            uj = alg.jet(j, 0)
            total = total + L.map_coeff(lambda p: p * uj)
        out.set_entry(rest, total, project=False)
    return out
