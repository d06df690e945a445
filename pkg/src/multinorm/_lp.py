"""Minimal sparse LP builder on top of scipy's HiGHS interface."""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

# HiGHS defaults are 1e-7; the lifting certificates need far tighter
HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-10,
    "dual_feasibility_tolerance": 1e-10,
    "presolve": True,
}


class LPError(RuntimeError):
    pass


class Infeasible(LPError):
    pass


class LinearProgram:
    """Accumulates variables and constraints, then solves ``min c.x``.

    Variables are allocated in blocks with ``add_vars``; constraints are given
    as (indices, coefficients) rows so large structured programs stay sparse.
    """

    def __init__(self):
        self.n = 0
        self.lb: list[float] = []
        self.ub: list[float] = []
        self._ub_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self._eq_rows: list[tuple[np.ndarray, np.ndarray, float]] = []
        self.c: dict[int, float] = {}

    def add_vars(self, count, lb=-np.inf, ub=np.inf):
        idx = np.arange(self.n, self.n + count)
        self.n += count
        self.lb.extend([lb] * count)
        self.ub.extend([ub] * count)
        return idx

    def add_le(self, idx, coef, rhs=0.0):
        self._ub_rows.append((np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(rhs)))

    def add_eq(self, idx, coef, rhs=0.0):
        self._eq_rows.append((np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), float(rhs)))

    def set_bounds(self, idx, lb=None, ub=None):
        for i in np.atleast_1d(idx):
            if lb is not None:
                self.lb[i] = lb
            if ub is not None:
                self.ub[i] = ub

    def minimize(self, idx, coef=None):
        idx = np.atleast_1d(idx)
        coef = np.ones(len(idx)) if coef is None else np.atleast_1d(coef)
        for i, a in zip(idx, coef):
            self.c[int(i)] = self.c.get(int(i), 0.0) + float(a)

    @staticmethod
    def _stack(rows, n):
        if not rows:
            return None, None
        data, ri, ci, rhs = [], [], [], []
        for r, (idx, coef, b) in enumerate(rows):
            data.append(coef)
            ci.append(idx)
            ri.append(np.full(len(idx), r))
            rhs.append(b)
        A = sparse.csr_matrix(
            (np.concatenate(data), (np.concatenate(ri), np.concatenate(ci))),
            shape=(len(rows), n),
        )
        return A, np.array(rhs)

    def solve(self):
        c = np.zeros(self.n)
        for i, a in self.c.items():
            c[i] = a
        A_ub, b_ub = self._stack(self._ub_rows, self.n)
        A_eq, b_eq = self._stack(self._eq_rows, self.n)
        res = linprog(
            c,
            A_ub=A_ub,
            b_ub=b_ub,
            A_eq=A_eq,
            b_eq=b_eq,
            bounds=list(zip(self.lb, self.ub)),
            method="highs",
            options=HIGHS_OPTIONS,
        )
        if res.status == 2:
            raise Infeasible(res.message)
        if res.status != 0:
            raise LPError(res.message)
        return res.fun, res.x
