"""Lenard-Magri recursion driver.

Given a compatible pair (H, K) and a seed density, repeatedly solve
K(d) (delta h_(n+1) / delta u) = H(d) (delta h_n / delta u): apply H to the
current gradient, invert K (supported for operators that constant row
operations bring to diagonal c d^m form), test exactness of the preimage via
the selfadjoint Frechet criterion, and rebuild the density.  Every accepted
step is certified symbolically; failures surface the obstruction class.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .diffalg import (DiffAlgebra, DiffPoly, LocalFunctional, NotExact,
                      antiderivative_in_v, is_exact_1form, reconstruct_density,
                      variational_derivative)
from .linsolve import matrix_inverse
from .pva import (LambdaBracketStruct, check_compatible, check_jacobi,
                  ev_commutator, hamiltonian_vf, poisson_bracket)


class NoPreimage(Exception):
    """The K-inversion obstruction: some component is not a total
    derivative (or fails under the triangularized K)."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class UnsupportedK(Exception):
    """K is outside the invertible class handled by the driver."""


class StepCertificate:
    """Recorded evidence for one accepted recursion step."""

    __slots__ = ("index", "recursion_exact", "kernel_note")

    def __init__(self, index: int, recursion_exact: bool, kernel_note: str):
        self.index = index
        self.recursion_exact = recursion_exact
        self.kernel_note = kernel_note

    def __repr__(self):
        return (f"StepCertificate(n={self.index}, "
                f"recursion_exact={self.recursion_exact})")


class HierarchyState:
    """Densities produced so far, with their certificates."""

    def __init__(self, H: LambdaBracketStruct, K: LambdaBracketStruct,
                 densities: Sequence[LocalFunctional],
                 certificates: Optional[list] = None):
        self.H = H
        self.K = K
        self.densities = list(densities)
        self.certificates = list(certificates or [])

    @property
    def alg(self) -> DiffAlgebra:
        return self.H.alg

    def __repr__(self):
        return f"HierarchyState({len(self.densities)} densities)"


def _diagonalize_k(K: LambdaBracketStruct):
    """Write K = A . diag(c_i d^(m_i)) up to constant row operations:
    returns (inverse row matrix B with B K = diag, diagonal data).  Raises
    UnsupportedK outside this class."""
    op = K.op
    alg = op.alg
    field = alg.field
    if not op.is_quasiconstant():
        raise UnsupportedK("only quasiconstant K is invertible here")
    size = op.m
    # extract scalar coefficients: entry (i,j) must be c_ij d^(m_j)?  We only
    # support entries that are single monomials in d with constant ratio, by
    # constant Gaussian elimination on the coefficient vectors per order.
    # The practical class: K = A o diag(c_j d^(m_j)) with A constant
    # invertible.  Detect per column: all entries in column j share order m_j.
    orders = []
    for j in range(size):
        col_orders = {op.rows[i][j].order() for i in range(size)
                      if not op.rows[i][j].is_zero()}
        if len(col_orders) != 1:
            raise UnsupportedK("column mixes operator orders")
        m = col_orders.pop()
        for i in range(size):
            e = op.rows[i][j]
            if not e.is_zero() and set(e.field_coeffs()) != {m}:
                raise UnsupportedK("entry is not a single d-power")
        orders.append(m)
    amat = []
    for i in range(size):
        row = []
        for j in range(size):
            e = op.rows[i][j]
            row.append(field.zero if e.is_zero()
                       else e.field_coeffs()[orders[j]])
        amat.append(row)
    binv = matrix_inverse(amat, field)
    if binv is None:
        raise UnsupportedK("constant factor is singular")
    return binv, orders


def _invert_k_on(K: LambdaBracketStruct, F: Sequence[DiffPoly]):
    """Solve K(d) G = F for G in V^l; integration constants are fixed to
    zero and the kernel ambiguity is reported in the certificate note."""
    alg = K.alg
    binv, orders = _diagonalize_k(K)
    # rotate F by the constant inverse: diag(c_j d^(m_j)) G = B F
    rotated = []
    for i in range(len(F)):
        acc = alg.zero
        for j, f in enumerate(F):
            acc = acc + f.scale(binv[i][j])
        rotated.append(acc)
    G = []
    for j, rhs in enumerate(rotated):
        g = rhs
        for step in range(orders[j]):
            try:
                g = antiderivative_in_v(g)
            except NotExact as err:
                raise NoPreimage(
                    f"component {j + 1} is not in the image of K "
                    f"(obstruction at derivative {step + 1} of {orders[j]}): "
                    f"{err}", witness=g) from err
        G.append(g)
    kernel_note = ("kernel of K: constants times d-kernel polynomials of "
                   "degrees " + str([m for m in orders]))
    return G, kernel_note


def lenard_step(state: HierarchyState) -> LocalFunctional:
    """One recursion step: from the last density h_n produce h_(n+1) with
    K(d) delta h_(n+1) = H(d) delta h_n, certified exactly.

    Raises NoPreimage when H delta h_n is not in the image of K, and
    NotExact when the preimage fails the selfadjointness criterion; both
    carry the residual witness.
    """
    alg = state.alg
    h_n = state.densities[-1]
    grad = list(variational_derivative(h_n.representative))
    F = state.H.op.apply(grad)
    G, kernel_note = _invert_k_on(state.K, F)
    if not is_exact_1form(G):
        from .diffalg import frechet
        d = frechet(G)
        err = NotExact("preimage is not a variational gradient")
        err.witness = d - d.adjoint()
        raise err
    h_next = LocalFunctional(reconstruct_density(G))
    # certify K delta h_(n+1) = H delta h_n exactly
    new_grad = list(variational_derivative(h_next.representative))
    lhs = state.K.op.apply(new_grad)
    ok = all((a - b).is_zero() for a, b in zip(lhs, F))
    state.densities.append(h_next)
    state.certificates.append(StepCertificate(len(state.densities) - 1, ok,
                                              kernel_note))
    if not ok:
        raise AssertionError("recursion identity failed after reconstruction")
    return h_next


def verify_involution(state: HierarchyState) -> list:
    """Pairwise {int h_m, int h_n} = 0 under both brackets; returns the
    matrix of booleans (True = vanishes under both)."""
    n = len(state.densities)
    out = [[None] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            pb_h = poisson_bracket(state.densities[a], state.densities[b],
                                   state.H)
            pb_k = poisson_bracket(state.densities[a], state.densities[b],
                                   state.K)
            out[a][b] = pb_h.is_zero() and pb_k.is_zero()
    return out


def commuting_flows(state: HierarchyState) -> bool:
    """Hamiltonian vector fields of the stored densities pairwise commute."""
    fields = [hamiltonian_vf(h, state.H) for h in state.densities]
    n = len(fields)
    for a in range(n):
        for b in range(a + 1, n):
            if not ev_commutator(fields[a], fields[b]).is_zero():
                return False
    return True


def run_hierarchy(H: LambdaBracketStruct, K: LambdaBracketStruct,
                  seed: LocalFunctional, steps: int,
                  verify_pair: bool = True) -> HierarchyState:
    """Run the recursion for `steps` new densities from the seed.

    With verify_pair the Hamiltonian/compatibility preconditions are checked
    first.  Obstructions propagate as NoPreimage / NotExact with the residual
    witness attached; densities accepted so far stay in the state.
    """
    if verify_pair:
        ok_h, wit = check_jacobi(H)
        if not ok_h:
            raise ValueError(f"H is not Poisson; witness triple {wit[0]}")
        ok_k, wit = check_jacobi(K)
        if not ok_k:
            raise ValueError(f"K is not Poisson; witness triple {wit[0]}")
        ok_c, wit = check_compatible(H, K)
        if not ok_c:
            raise ValueError(f"pair is not compatible; witness {wit[0]}")
    state = HierarchyState(H, K, [seed])
    for _ in range(steps):
        lenard_step(state)
    return state
