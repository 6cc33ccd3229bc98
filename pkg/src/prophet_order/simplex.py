"""A small dense two-phase simplex over exact rationals.

Intended for LPs with at most a few hundred columns.  Bland's rule
guarantees termination, and exact ``Fraction`` arithmetic makes the reported
optimum exact for rational inputs.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import LpError

Matrix = Sequence[Sequence[Fraction]]


@dataclass(frozen=True)
class LPResult:
    x: tuple
    value: Fraction


def _as_frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, float):
        return Fraction(str(v))
    return Fraction(v)


def _pivot(T: list, basis: list, row: int, col: int) -> None:
    pr = T[row]
    piv = pr[col]
    if piv != 1:
        T[row] = pr = [v / piv for v in pr]
    for r, tr in enumerate(T):
        if r != row:
            f = tr[col]
            if f != 0:
                T[r] = [a - f * b for a, b in zip(tr, pr)]
    basis[row] = col


def _run(T: list, basis: list, obj_row: int, allowed: int) -> None:
    """Minimize the objective stored in row ``obj_row`` (reduced costs) over columns < allowed."""
    m = len(basis)
    while True:
        obj = T[obj_row]
        col = next((j for j in range(allowed) if obj[j] < 0), None)
        if col is None:
            return
        best, row = None, None
        for r in range(m):
            a = T[r][col]
            if a > 0:
                ratio = T[r][-1] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[row]):
                    best, row = ratio, r
        if row is None:
            raise LpError("linear program is unbounded")
        _pivot(T, basis, row, col)


def solve(c: Sequence, A_ub: Optional[Matrix] = None, b_ub: Optional[Sequence] = None,
          A_eq: Optional[Matrix] = None, b_eq: Optional[Sequence] = None,
          maximize: bool = False) -> LPResult:
    """Optimize c.x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0."""
    c = [_as_frac(v) for v in c]
    n = len(c)
    rows = []  # (coeffs, rhs, slack sign or None)
    for a, b in zip(A_ub or [], b_ub or []):
        rows.append(([_as_frac(v) for v in a], _as_frac(b), 1))
    for a, b in zip(A_eq or [], b_eq or []):
        rows.append(([_as_frac(v) for v in a], _as_frac(b), None))
    n_slack = sum(1 for r in rows if r[2] is not None)
    m = len(rows)
    width = n + n_slack + m  # structural, slack, artificial
    T = []
    basis = []
    s = 0
    for r, (a, b, sl) in enumerate(rows):
        if len(a) != n:
            raise ValueError("constraint row has the wrong length")
        line = a + [Fraction(0)] * (n_slack + m) + [b]
        if sl is not None:
            line[n + s] = Fraction(1)
            s += 1
        if b < 0:
            line = [-v for v in line]
        line[n + n_slack + r] = Fraction(1)
        T.append(line)
        basis.append(n + n_slack + r)
    # phase one: minimize the sum of artificials
    phase1 = [Fraction(0)] * (width + 1)
    for line in T:
        phase1 = [p - v for p, v in zip(phase1, line)]
    for r in range(m):
        phase1[n + n_slack + r] = Fraction(0)
    T.append(phase1)
    _run(T, basis, m, n + n_slack)
    if T[m][-1] != 0:
        raise LpError("linear program is infeasible")
    # drive remaining artificials out of the basis
    for r in range(m):
        if basis[r] >= n + n_slack:
            col = next((j for j in range(n + n_slack) if T[r][j] != 0), None)
            if col is not None:
                _pivot(T, basis, r, col)
    T.pop()
    sign = Fraction(-1) if maximize else Fraction(1)
    obj = [sign * v for v in c] + [Fraction(0)] * (n_slack + m + 1)
    for r in range(m):
        f = obj[basis[r]]
        if f != 0:
            obj = [o - f * v for o, v in zip(obj, T[r])]
    T.append(obj)
    _run(T, basis, m, n + n_slack)
    x = [Fraction(0)] * n
    for r in range(m):
        if basis[r] < n:
            x[basis[r]] = T[r][-1]
    value = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    return LPResult(tuple(x), value)
