"""Exact Gaussian elimination over a coefficient field.

Rows are sparse dicts {column index: FieldElem}.  Used by the rational-ansatz
differential solver and the Horowitz reduction; column order is fixed by the
caller, which keeps results deterministic.
"""

from __future__ import annotations

from typing import Optional


def gauss_solve(rows: list, rhs: list, ncols: int, field):
    """Solve rows * gamma = rhs over the field.

    Returns (particular, nullspace): particular is a dense list of length
    ncols or None when the system is inconsistent; nullspace is a list of
    dense basis vectors of the homogeneous solution space.
    """
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    m = len(rows)
    pivot_row_of_col: dict = {}
    row = 0
    order = []
    for col in range(ncols):
        p = None
        for i in range(row, m):
            if col in rows[i] and not rows[i][col].is_zero():
                p = i
                break
        if p is None:
            continue
        rows[row], rows[p] = rows[p], rows[row]
        rhs[row], rhs[p] = rhs[p], rhs[row]
        inv = field.one / rows[row][col]
        rows[row] = {c: v * inv for c, v in rows[row].items() if not v.is_zero()}
        rhs[row] = rhs[row] * inv
        for i in range(m):
            if i != row and col in rows[i] and not rows[i][col].is_zero():
                f = rows[i][col]
                for c, v in rows[row].items():
                    w = rows[i].get(c, field.zero) - f * v
                    if w.is_zero():
                        rows[i].pop(c, None)
                    else:
                        rows[i][c] = w
                rhs[i] = rhs[i] - f * rhs[row]
        pivot_row_of_col[col] = row
        order.append(col)
        row += 1
    consistent = all(rhs[i].is_zero() for i in range(row, m))
    free_cols = [c for c in range(ncols) if c not in pivot_row_of_col]
    particular: Optional[list]
    if consistent:
        particular = [field.zero] * ncols
        for c, r in pivot_row_of_col.items():
            particular[c] = rhs[r]
    else:
        particular = None
    nullspace = []
    for fc in free_cols:
        vec = [field.zero] * ncols
        vec[fc] = field.one
        for c, r in pivot_row_of_col.items():
            coeff = rows[r].get(fc)
            if coeff is not None and not coeff.is_zero():
                vec[c] = -coeff
        nullspace.append(vec)
    return particular, nullspace


def matrix_inverse(mat: list, field) -> Optional[list]:
    """Inverse of a dense square matrix of field elements, or None."""
    n = len(mat)
    aug = [list(row) + [field.one if i == j else field.zero
                        for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        p = next((i for i in range(col, n) if not aug[i][col].is_zero()), None)
        if p is None:
            return None
        aug[col], aug[p] = aug[p], aug[col]
        inv = field.one / aug[col][col]
        aug[col] = [v * inv for v in aug[col]]
        for i in range(n):
            if i != col and not aug[i][col].is_zero():
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    return [row[n:] for row in aug]


def det(mat: list, field):
    """Determinant of a dense square matrix over the field."""
    n = len(mat)
    m = [list(r) for r in mat]
    sign = 1
    out = field.one
    for col in range(n):
        p = next((i for i in range(col, n) if not m[i][col].is_zero()), None)
        if p is None:
            return field.zero
        if p != col:
            m[col], m[p] = m[p], m[col]
            sign = -sign
        piv = m[col][col]
        out = out * piv
        inv = field.one / piv
        for i in range(col + 1, n):
            if not m[i][col].is_zero():
                f = m[i][col] * inv
                m[i] = [a - f * b for a, b in zip(m[i], m[col])]
    return out if sign == 1 else -out
