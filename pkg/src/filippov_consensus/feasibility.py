"""Box-constrained linear feasibility: find ``lam in [0, 1]^p`` with ``D @ lam = b``.

Rational inputs go through an exact phase-one simplex on Fractions (Bland's
rule, so it terminates); anything else goes through ``scipy.optimize.linprog``
minimizing the infinity-norm residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class BoxFeasibility:
    feasible: bool
    lam: tuple | None
    residual: float
    exact: bool


def _is_rational(v) -> bool:
    return type(v) is int or isinstance(v, Fraction)


def all_rational(*arrays) -> bool:
    for arr in arrays:
        for row in arr:
            if isinstance(row, (list, tuple)):
                if not all(_is_rational(v) for v in row):
                    return False
            elif not _is_rational(row):
                return False
    return True


def solve_box(D: Sequence[Sequence], b: Sequence, *, exact: bool | None = None, tol: float = 1e-9) -> BoxFeasibility:
    """Decide whether ``D lam = b`` has a solution with ``0 <= lam <= 1``.

    ``D`` is n x p given as nested sequences (entries int/Fraction/float).
    ``exact=None`` picks the exact path when every entry is rational.
    """
    D = [list(row) for row in D]
    b = list(b)
    if exact is None:
        exact = all_rational(D, b)
    if exact:
        return _solve_exact(D, b)
    return _solve_lp(D, b, tol)


def _solve_exact(D, b) -> BoxFeasibility:
    n = len(b)
    p = len(D[0]) if n else 0
    if p == 0:
        ok = all(Fraction(v) == 0 for v in b)
        return BoxFeasibility(ok, () if ok else None, 0.0 if ok else float(max(abs(Fraction(v)) for v in b)), True)
    # columns: lam (p) | slack (p) | artificial (n) | rhs
    ncol = 2 * p + n
    T = []
    basis = []
    for k in range(n):
        sgn = 1 if Fraction(b[k]) >= 0 else -1
        row = [Fraction(0)] * (ncol + 1)
        for j in range(p):
            row[j] = sgn * Fraction(D[k][j])
        row[2 * p + k] = Fraction(1)
        row[ncol] = sgn * Fraction(b[k])
        T.append(row)
        basis.append(2 * p + k)
    for j in range(p):
        row = [Fraction(0)] * (ncol + 1)
        row[j] = row[p + j] = Fraction(1)
        row[ncol] = Fraction(1)
        T.append(row)
        basis.append(p + j)
    # reduced costs for min sum(artificial); obj[ncol] holds -objective
    obj = [Fraction(0)] * (ncol + 1)
    for k in range(n):
        for j in range(ncol + 1):
            if not (2 * p <= j < ncol):
                obj[j] -= T[k][j]

    while True:
        enter = next((j for j in range(ncol) if obj[j] < 0), None)
        if enter is None:
            break
        leave, best = None, None
        for r, row in enumerate(T):
            a = row[enter]
            if a > 0:
                ratio = row[ncol] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    leave, best = r, ratio
        if leave is None:  # cannot happen: phase one is bounded below by 0
            break
        piv = T[leave][enter]
        T[leave] = [v / piv for v in T[leave]]
        for r in range(len(T)):
            if r != leave and T[r][enter] != 0:
                f = T[r][enter]
                T[r] = [v - f * w for v, w in zip(T[r], T[leave])]
        f = obj[enter]
        obj = [v - f * w for v, w in zip(obj, T[leave])]
        basis[leave] = enter

    if -obj[ncol] != 0:
        return BoxFeasibility(False, None, float(-obj[ncol]), True)
    lam = [Fraction(0)] * p
    for r, var in enumerate(basis):
        if var < p:
            lam[var] = T[r][ncol]
    for k in range(n):
        if sum(Fraction(D[k][j]) * lam[j] for j in range(p)) != Fraction(b[k]):
            raise AssertionError("exact simplex produced an invalid certificate")
    return BoxFeasibility(True, tuple(lam), 0.0, True)


def _solve_lp(D, b, tol) -> BoxFeasibility:
    from scipy.optimize import linprog

    Dm = np.array([[float(v) for v in row] for row in D], dtype=float).reshape(len(b), -1)
    bv = np.array([float(v) for v in b], dtype=float)
    n, p = Dm.shape
    scale = max(1.0, float(np.abs(bv).max(initial=0.0)), float(np.abs(Dm).max(initial=0.0)))
    if p == 0:
        res = float(np.abs(bv).max(initial=0.0))
        return BoxFeasibility(res <= tol * scale, () if res <= tol * scale else None, res, False)
    # variables: lam (p), t ; minimize t with |D lam - b| <= t
    c = np.zeros(p + 1)
    c[-1] = 1.0
    ones = np.ones((n, 1))
    A_ub = np.vstack([np.hstack([Dm, -ones]), np.hstack([-Dm, -ones])])
    b_ub = np.concatenate([bv, -bv])
    bounds = [(0.0, 1.0)] * p + [(0.0, None)]
    out = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if out.status != 0:
        raise RuntimeError(f"linprog failed: {out.message}")
    lam = np.clip(out.x[:p], 0.0, 1.0)
    res = float(np.abs(Dm @ lam - bv).max(initial=0.0))
    ok = res <= tol * scale
    return BoxFeasibility(ok, tuple(float(v) for v in lam) if ok else None, res, False)
