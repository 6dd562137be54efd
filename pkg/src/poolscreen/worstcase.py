"""Worst-case correlation analysis.

How bad can the expected test count get when individual infections are
correlated but every person's marginal infection probability is pinned at
p?  The answer is a linear program over joint distributions: maximize the
expected test count subject to the marginal constraints.  Instances are
tiny (2^n variables, n+1 equality rows), so a self-contained dense
simplex is used; no external solver.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .core import InfectionVector, InputError, InternalError, NOISELESS, run_strategy
from .adaptive import IidPrior, SweepRow, expected_tests, make_strategy
from .parallel import pmap

GAMMA_N_CAP = 16


def build_gamma(strategy) -> list[int]:
    """Test count for every truth vector, indexed by integer encoding."""
    n = strategy.n
    if n > GAMMA_N_CAP:
        raise InputError(f"cost vector enumeration capped at n={GAMMA_N_CAP}")
    return [
        run_strategy(strategy, InfectionVector.from_int(code, n)).test_count
        for code in range(1 << n)
    ]


@dataclass(frozen=True)
class CorrelationLP:
    """max sum(gamma[i] * pi[i]) s.t. pi >= 0, sum(pi) = 1, marginals = p."""

    n: int
    p: float
    gamma: tuple[float, ...]

    def __post_init__(self):
        if len(self.gamma) != 1 << self.n:
            raise InputError(f"cost vector must have length 2^{self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise InputError(f"p={self.p} outside [0, 1]")

    def constraint_rows(self):
        """Row 0: total mass = 1; row k+1: marginal of person k = p."""
        size = 1 << self.n
        rows = [[1.0] * size]
        for k in range(self.n):
            rows.append([float((i >> k) & 1) for i in range(size)])
        rhs = [1.0] + [self.p] * self.n
        return rows, rhs


@dataclass(frozen=True)
class LPSolution:
    value: float
    pi: tuple[float, ...]
    basis: tuple[int, ...]

    def check_feasible(self, lp: CorrelationLP, tol: float = 1e-9) -> bool:
        if any(x < -tol for x in self.pi):
            return False
        if abs(sum(self.pi) - 1.0) > tol:
            return False
        for k in range(lp.n):
            marg = sum(x for i, x in enumerate(self.pi) if (i >> k) & 1)
            if abs(marg - lp.p) > tol:
                return False
        the_value = sum(g * x for g, x in zip(lp.gamma, self.pi))
        return abs(the_value - self.value) <= max(tol, tol * abs(self.value))


def _simplex_max(A, b, c, *, exact: bool):
    """Two-phase primal simplex with Bland's rule on a dense tableau.

    Maximizes c.x s.t. A.x = b, x >= 0, b >= 0.  `exact` switches every
    coefficient to Fraction arithmetic; otherwise floats with a fixed
    pivot tolerance.  Returns (value, x, basis).
    """
    m, nvar = len(A), len(A[0])
    if exact:
        conv = Fraction
        tol = Fraction(0)
    else:
        conv = float
        tol = 1e-10
    T = [[conv(A[i][j]) for j in range(nvar)] for i in range(m)]
    rhs = [conv(b[i]) for i in range(m)]
    # phase 1: artificial variable per row, drive their sum to zero
    total = nvar + m
    for i in range(m):
        for k in range(m):
            T[i].append(conv(1) if k == i else conv(0))
    basis = list(range(nvar, nvar + m))
    cost1 = [conv(0)] * nvar + [conv(-1)] * m

    def pivot(row, col):
        piv = T[row][col]
        inv = (conv(1) / piv) if exact else 1.0 / piv
        T[row] = [v * inv for v in T[row]]
        rhs[row] = rhs[row] * inv
        for r in range(m):
            if r == row:
                continue
            factor = T[r][col]
            if factor == 0:
                continue
            T[r] = [a - factor * bb for a, bb in zip(T[r], T[row])]
            rhs[r] = rhs[r] - factor * rhs[row]
        basis[row] = col

    def run_phase(cost, allowed):
        guard = 0
        while True:
            guard += 1
            if guard > 50000:
                raise InternalError("simplex failed to terminate")
            # reduced costs via basis multipliers
            y = [cost[basis[i]] for i in range(m)]
            entering = -1
            for j in range(allowed):
                if j in basis_set:
                    continue
                red = cost[j] - sum(y[i] * T[i][j] for i in range(m))
                if red > tol:
                    entering = j  # Bland: first improving index
                    break
            if entering < 0:
                return
            leaving, best = -1, None
            for i in range(m):
                if T[i][entering] > tol:
                    ratio = rhs[i] / T[i][entering]
                    if best is None or ratio < best or (
                        ratio == best and basis[i] < basis[leaving]
                    ):
                        best, leaving = ratio, i
            if leaving < 0:
                raise InternalError("unbounded linear program")
            basis_set.discard(basis[leaving])
            basis_set.add(entering)
            pivot(leaving, entering)

    basis_set = set(basis)
    run_phase(cost1, total)
    infeas = sum(rhs[i] for i in range(m) if basis[i] >= nvar)
    if (exact and infeas != 0) or (not exact and abs(infeas) > 1e-8):
        raise InternalError("phase 1 ended infeasible")
    # expel lingering artificials sitting on degenerate rows
    for i in range(m):
        if basis[i] >= nvar:
            for j in range(nvar):
                if j not in basis_set and T[i][j] != 0 and abs(T[i][j]) > (0 if exact else 1e-10):
                    basis_set.discard(basis[i])
                    basis_set.add(j)
                    pivot(i, j)
                    break
    cost2 = [conv(cj) for cj in c] + [conv(0)] * m
    run_phase(cost2, nvar)
    x = [conv(0)] * nvar
    for i in range(m):
        if basis[i] < nvar:
            x[basis[i]] = rhs[i]
    value = sum(cost2[j] * x[j] for j in range(nvar))
    if exact:
        x = [float(v) for v in x]
        value = float(value)
    return value, x, tuple(sorted(bi for bi in basis if bi < nvar))


def solve_worstcase(lp: CorrelationLP) -> LPSolution:
    """Vertex optimum of the correlation LP.

    p in {0, 1} pins the distribution outright and skips the solver.  The
    float path is verified against the feasibility/value tolerances and
    falls back to exact rational pivoting when the check fails.
    """
    size = 1 << lp.n
    if lp.p == 0.0 or lp.p == 1.0:
        idx = 0 if lp.p == 0.0 else size - 1
        pi = [0.0] * size
        pi[idx] = 1.0
        return LPSolution(float(lp.gamma[idx]), tuple(pi), (idx,))
    A, b = lp.constraint_rows()
    value, x, basis = _simplex_max(A, b, lp.gamma, exact=False)
    sol = LPSolution(value, tuple(x), basis)
    if sol.check_feasible(lp):
        return sol
    value, x, basis = _simplex_max(A, b, lp.gamma, exact=True)
    sol = LPSolution(value, tuple(x), basis)
    if not sol.check_feasible(lp, tol=1e-7):
        raise InternalError("exact simplex produced an infeasible point")
    return sol


def worstcase_value(kind: str, n: int, p: float) -> float:
    strategy = make_strategy(kind, n, p)
    gamma = build_gamma(strategy)
    return solve_worstcase(CorrelationLP(n, p, tuple(float(g) for g in gamma))).value


@dataclass(frozen=True)
class WorstcaseRow(SweepRow):
    worstcase: float = 0.0


WORSTCASE_HEADER = "strategy,n,p,tests_per_person,worstcase,method,seed,std_error"


def worstcase_sweep(
    kind: str, n: int, p_values: Sequence[float], threads: int = 1
) -> list[WorstcaseRow]:
    """Worst-case and independent per-person values side by side."""
    if not p_values:
        raise InputError("p grid must be nonempty")

    def eval_point(p: float) -> WorstcaseRow:
        strategy = make_strategy(kind, n, p)
        iid = expected_tests(strategy, IidPrior(p), NOISELESS, "exact")
        wc = worstcase_value(kind, n, p)
        return WorstcaseRow(
            strategy=kind, n=n, p=p,
            tests_per_person=iid.tests_per_person,
            method="exact", seed=None, std_error=None,
            worstcase=wc / n,
        )

    return pmap(eval_point, list(p_values), threads)


def format_worstcase_rows(rows: Sequence[WorstcaseRow]) -> str:
    lines = [WORSTCASE_HEADER]
    for r in rows:
        lines.append(
            f"{r.strategy},{r.n},{r.p:.10g},{r.tests_per_person:.10g},"
            f"{r.worstcase:.10g},{r.method},,"
        )
    return "\n".join(lines)
