"""Exact integer and rational linear programming over small systems.

Everything runs on exact arithmetic: Fraction-based simplex for the rational
relaxations and a Hermite-form lattice solve for equality systems, so parity
style infeasibility (2x - 2y = 1) is decided without search.  Branch and bound
only runs on the inequality residue and is guarded by a node budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor, gcd

from .core import ZVassError


class IlpBudgetExceeded(ZVassError):
    """Branch-and-bound ran past its node budget."""


EQ = "=="
LE = "<="
GE = ">="


@dataclass(frozen=True)
class Constraint:
    """Sparse linear constraint sum(coeff * var) rel rhs."""

    coeffs: tuple[tuple[int, int], ...]
    rel: str
    rhs: int

    def __post_init__(self) -> None:
        if self.rel not in (EQ, LE, GE):
            raise ValueError(f"unknown relation {self.rel!r}")


@dataclass(frozen=True)
class IntProgram:
    """Integer program: constraints plus optional per-variable bounds."""

    n_vars: int
    constraints: tuple[Constraint, ...]
    lower: tuple[int | None, ...]
    upper: tuple[int | None, ...]

    @staticmethod
    def build(
        n_vars: int,
        cons: list[tuple[dict[int, int], str, int]],
        lower: dict[int, int] | None = None,
        upper: dict[int, int] | None = None,
    ) -> "IntProgram":
        lo = tuple((lower or {}).get(i) for i in range(n_vars))
        hi = tuple((upper or {}).get(i) for i in range(n_vars))
        built = tuple(
            Constraint(tuple(sorted(c.items())), rel, rhs) for c, rel, rhs in cons
        )
        return IntProgram(n_vars, built, lo, hi)

    def with_bound(self, var: int, lo: int | None = None, hi: int | None = None) -> "IntProgram":
        """Copy with a tightened bound on one variable."""
        lower = list(self.lower)
        upper = list(self.upper)
        if lo is not None:
            lower[var] = lo if lower[var] is None else max(lower[var], lo)
        if hi is not None:
            upper[var] = hi if upper[var] is None else min(upper[var], hi)
        return IntProgram(self.n_vars, self.constraints, tuple(lower), tuple(upper))

    def with_constraint(self, coeffs: dict[int, int], rel: str, rhs: int) -> "IntProgram":
        con = Constraint(tuple(sorted(coeffs.items())), rel, rhs)
        return IntProgram(
            self.n_vars, self.constraints + (con,), self.lower, self.upper
        )


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    """Extended gcd: returns (g, s, t) with s*a + t*b == g >= 0."""
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def hnf_solve(
    rows: list[list[int]], rhs: list[int]
) -> tuple[list[int], list[list[int]]] | None:
    """Solve rows * x = rhs over the integers.

    Returns (particular solution, kernel lattice basis as column vectors) or
    None when no integer solution exists.
    """
    m = len(rows)
    n = len(rows[0]) if rows else 0
    mat = [list(r) for r in rows]
    uni = [[1 if i == j else 0 for j in range(n)] for i in range(n)]

    def colop(j0: int, j1: int, a: int, b: int, c: int, d: int) -> None:
        """Replace (col j0, col j1) by (a*j0 + b*j1, c*j0 + d*j1)."""
        for table in (mat, uni):
            for row in table:
                x, y = row[j0], row[j1]
                row[j0] = a * x + b * y
                row[j1] = c * x + d * y

    pivots: list[tuple[int, int]] = []
    col = 0
    for i in range(m):
        if col >= n:
            break
        j0 = next((j for j in range(col, n) if mat[i][j] != 0), None)
        if j0 is None:
            continue
        for j in range(j0 + 1, n):
            if mat[i][j] == 0:
                continue
            g, s, t = _xgcd(mat[i][j0], mat[i][j])
            p, q = mat[i][j0] // g, mat[i][j] // g
            colop(j0, j, s, t, -q, p)
        if j0 != col:
            colop(col, j0, 0, 1, 1, 0)
        if mat[i][col] < 0:
            for table in (mat, uni):
                for row in table:
                    row[col] = -row[col]
        pivots.append((i, col))
        col += 1

    y = [0] * n
    used_rows = {i for i, _ in pivots}
    for i, j in pivots:
        acc = rhs[i] - sum(mat[i][jj] * y[jj] for _, jj in pivots if jj < j)
        if acc % mat[i][j] != 0:
            return None
        y[j] = acc // mat[i][j]
    for i in range(m):
        if i in used_rows:
            continue
        if sum(mat[i][j] * y[j] for j in range(n)) != rhs[i]:
            return None
    x0 = [sum(uni[v][j] * y[j] for j in range(n)) for v in range(n)]
    free_cols = [j for j in range(n) if j not in {c for _, c in pivots}]
    kernel = [[uni[v][j] for v in range(n)] for j in free_cols]
    return x0, kernel


def _gram_schmidt(basis: list[list[int]]):
    """Exact Gram-Schmidt data (orthogonal vectors and mu coefficients)."""
    n = len(basis)
    star: list[list[Fraction]] = []
    mu = [[Fraction(0)] * n for _ in range(n)]
    for i in range(n):
        vec = [Fraction(x) for x in basis[i]]
        for j in range(i):
            denom = sum(x * x for x in star[j])
            mu[i][j] = sum(Fraction(a) * b for a, b in zip(basis[i], star[j])) / denom
            vec = [x - mu[i][j] * y for x, y in zip(vec, star[j])]
        star.append(vec)
    return star, mu


def lll_reduce(basis: list[list[int]]) -> list[list[int]]:
    """LLL-reduce a basis of linearly independent integer vectors.

    Returns a basis of the same lattice with well-conditioned entries, which
    keeps branch-and-bound on lattice coordinates from wandering along skewed
    directions.
    """
    b = [list(v) for v in basis]
    n = len(b)
    if n <= 1:
        return b
    delta = Fraction(3, 4)
    star, mu = _gram_schmidt(b)
    k = 1
    while k < n:
        for j in range(k - 1, -1, -1):
            q = round(mu[k][j])
            if q != 0:
                b[k] = [x - q * y for x, y in zip(b[k], b[j])]
        star, mu = _gram_schmidt(b)
        norm_k = sum(x * x for x in star[k])
        norm_prev = sum(x * x for x in star[k - 1])
        if norm_k >= (delta - mu[k][k - 1] ** 2) * norm_prev:
            k += 1
        else:
            b[k], b[k - 1] = b[k - 1], b[k]
            star, mu = _gram_schmidt(b)
            k = max(k - 1, 1)
    return b


def _babai_shift(point: list[int], basis: list[list[int]]) -> list[int]:
    """Subtract a nearby lattice vector from point (nearest-plane rounding)."""
    if not basis:
        return list(point)
    star, _ = _gram_schmidt(basis)
    out = [Fraction(x) for x in point]
    for i in range(len(basis) - 1, -1, -1):
        denom = sum(x * x for x in star[i])
        c = round(sum(a * b for a, b in zip(out, star[i])) / denom)
        if c != 0:
            out = [x - c * y for x, y in zip(out, basis[i])]
    return [int(x) for x in out]


class _Tableau:
    """Dense simplex tableau over Fractions with Bland's rule."""

    def __init__(self, rows: list[list[Fraction]], rhs: list[Fraction]):
        self.rows = rows
        self.rhs = rhs
        self.n = len(rows[0]) if rows else 0
        self.basis: list[int] = []

    def pivot(self, r: int, c: int) -> None:
        piv = self.rows[r][c]
        self.rows[r] = [v / piv for v in self.rows[r]]
        self.rhs[r] /= piv
        for i in range(len(self.rows)):
            if i == r:
                continue
            f = self.rows[i][c]
            if f:
                self.rows[i] = [a - f * b for a, b in zip(self.rows[i], self.rows[r])]
                self.rhs[i] -= f * self.rhs[r]
        self.basis[r] = c

    def solve_min(self, cost: list[Fraction]) -> tuple[str, Fraction | None]:
        """Minimize cost over the current basis; returns (status, objective)."""
        red = list(cost)
        shift = Fraction(0)
        for r, b in enumerate(self.basis):
            f = red[b]
            if f:
                red = [a - f * c for a, c in zip(red, self.rows[r])]
                shift += f * self.rhs[r]
        while True:
            enter = next((j for j in range(self.n) if red[j] < 0), None)
            if enter is None:
                return "optimal", shift
            best: tuple[Fraction, int, int] | None = None
            for r in range(len(self.rows)):
                a = self.rows[r][enter]
                if a > 0:
                    ratio = self.rhs[r] / a
                    key = (ratio, self.basis[r], r)
                    if best is None or key < (best[0], best[1], best[2]):
                        best = key
            if best is None:
                return "unbounded", None
            r = best[2]
            f = red[enter]
            self.pivot(r, enter)
            if f:
                red = [a - f * c for a, c in zip(red, self.rows[r])]
                shift += f * self.rhs[r]

    def solution(self) -> list[Fraction]:
        x = [Fraction(0)] * self.n
        for r, b in enumerate(self.basis):
            x[b] = self.rhs[r]
        return x


@dataclass
class _Standard:
    """Standard-form image of a program: Ax=b, x >= 0, with var back-maps."""

    rows: list[list[Fraction]]
    rhs: list[Fraction]
    n_std: int
    back: list[list[tuple[int, int]]]
    const: list[int]


def _to_standard(prog: IntProgram) -> _Standard:
    terms: list[list[tuple[int, int]]] = []
    const: list[int] = []
    n_std = 0
    extra: list[tuple[dict[int, int], str, int]] = []
    for i in range(prog.n_vars):
        lo, hi = prog.lower[i], prog.upper[i]
        if lo is not None:
            terms.append([(n_std, 1)])
            const.append(lo)
            n_std += 1
            if hi is not None:
                extra.append(({i: 1}, LE, hi))
        elif hi is not None:
            terms.append([(n_std, -1)])
            const.append(hi)
            n_std += 1
        else:
            terms.append([(n_std, 1), (n_std + 1, -1)])
            const.append(0)
            n_std += 2
    rows: list[list[Fraction]] = []
    rhs: list[Fraction] = []
    all_cons = [(dict(c.coeffs), c.rel, c.rhs) for c in prog.constraints] + extra
    slacks = sum(1 for _, rel, _ in all_cons if rel != EQ)
    width = n_std + slacks
    s_at = n_std
    for coeffs, rel, b in all_cons:
        row = [Fraction(0)] * width
        acc = Fraction(b)
        for var, coeff in coeffs.items():
            acc -= coeff * const[var]
            for idx, sign in terms[var]:
                row[idx] += coeff * sign
        if rel == LE:
            row[s_at] = Fraction(1)
            s_at += 1
        elif rel == GE:
            row[s_at] = Fraction(-1)
            s_at += 1
        rows.append(row)
        rhs.append(acc)
    return _Standard(rows, rhs, width, terms, const)


def _phase1(std: _Standard) -> _Tableau | None:
    m = len(std.rows)
    width = std.n_std + m
    rows = []
    rhs = []
    for i in range(m):
        neg = std.rhs[i] < 0
        base = [-v for v in std.rows[i]] if neg else list(std.rows[i])
        row = base + [Fraction(0)] * m
        row[std.n_std + i] = Fraction(1)
        rows.append(row)
        rhs.append(-std.rhs[i] if neg else std.rhs[i])
    tab = _Tableau(rows, rhs)
    tab.basis = [std.n_std + i for i in range(m)]
    cost = [Fraction(0)] * std.n_std + [Fraction(1)] * m
    status, val = tab.solve_min(cost)
    assert status == "optimal"
    if val != 0:
        return None
    for r in range(m):
        if tab.basis[r] >= std.n_std:
            c = next((j for j in range(std.n_std) if tab.rows[r][j] != 0), None)
            if c is not None:
                tab.pivot(r, c)
    keep = [r for r in range(m) if tab.basis[r] < std.n_std]
    tab.rows = [tab.rows[r][: std.n_std] for r in keep]
    tab.rhs = [tab.rhs[r] for r in keep]
    tab.basis = [tab.basis[r] for r in keep]
    tab.n = std.n_std
    return tab


def lp_solve(
    prog: IntProgram, objective: dict[int, int] | None = None, sense: str = "min"
) -> tuple[str, Fraction | None, list[Fraction] | None]:
    """Exact LP over the rational relaxation.

    Returns (status, objective value, solution), status in
    {"optimal", "infeasible", "unbounded"}; a pure feasibility call passes
    objective None.
    """
    std = _to_standard(prog)
    tab = _phase1(std)
    if tab is None:
        return "infeasible", None, None
    sign = 1 if sense == "min" else -1
    cost = [Fraction(0)] * std.n_std
    shift = Fraction(0)
    for var, coeff in (objective or {}).items():
        shift += coeff * std.const[var]
        for idx, s in std.back[var]:
            cost[idx] += sign * coeff * s
    status, val = tab.solve_min(cost)
    if status == "unbounded":
        return "unbounded", None, None
    x_std = tab.solution()
    x = [
        Fraction(std.const[v]) + sum(s * x_std[idx] for idx, s in std.back[v])
        for v in range(prog.n_vars)
    ]
    return "optimal", sign * val + shift, x


def lp_feasible(prog: IntProgram) -> bool:
    """True when the rational relaxation has a solution."""
    return lp_solve(prog)[0] != "infeasible"


def _strengthen(coeffs: dict[int, int], rel: str, rhs: int) -> tuple[dict[int, int], str, int] | None:
    """Divide an inequality by the gcd of its coefficients, rounding the rhs."""
    nonzero = [c for c in coeffs.values() if c != 0]
    if not nonzero:
        ok = rhs == 0 if rel == EQ else (rhs >= 0 if rel == LE else rhs <= 0)
        return None if ok else ({}, rel, rhs)
    g = 0
    for c in nonzero:
        g = gcd(g, abs(c))
    if g == 1:
        return {v: c for v, c in coeffs.items() if c}, rel, rhs
    div = {v: c // g for v, c in coeffs.items() if c}
    if rel == LE:
        return div, LE, floor(Fraction(rhs, g))
    if rel == GE:
        return div, GE, ceil(Fraction(rhs, g))
    if rhs % g != 0:
        return {}, EQ, 1
    return div, EQ, rhs // g


@dataclass
class _BnbState:
    budget: int
    used: int = 0


def _bnb_feasible(prog: IntProgram, state: _BnbState) -> list[int] | None:
    """Branch-and-bound integer feasibility on an inequality-only program."""
    stack = [prog]
    while stack:
        node = stack.pop()
        state.used += 1
        if state.used > state.budget:
            raise IlpBudgetExceeded(f"branch-and-bound exceeded {state.budget} nodes")
        status, _, x = lp_solve(node)
        if status == "infeasible":
            continue
        assert x is not None
        frac = next((i for i in range(node.n_vars) if x[i].denominator != 1), None)
        if frac is None:
            return [int(v) for v in x]
        fl = floor(x[frac])
        stack.append(node.with_bound(frac, lo=fl + 1))
        stack.append(node.with_bound(frac, hi=fl))
    return None


def _split(prog: IntProgram):
    """Separate equality rows from inequality rows (bounds stay as bounds)."""
    eq_rows: list[list[int]] = []
    eq_rhs: list[int] = []
    ineqs: list[tuple[dict[int, int], str, int]] = []
    for c in prog.constraints:
        coeffs = dict(c.coeffs)
        tightened = _strengthen(coeffs, c.rel, c.rhs)
        if tightened is None:
            continue
        coeffs, rel, rhs = tightened
        if not coeffs:
            return None
        if rel == EQ:
            row = [0] * prog.n_vars
            for v, a in coeffs.items():
                row[v] = a
            eq_rows.append(row)
            eq_rhs.append(rhs)
        else:
            ineqs.append((coeffs, rel, rhs))
    return eq_rows, eq_rhs, ineqs


def _reduce_to_lattice(prog: IntProgram):
    """Substitute the equality lattice: returns (t-program, x0, kernel) or None."""
    parts = _split(prog)
    if parts is None:
        return None
    eq_rows, eq_rhs, ineqs = parts
    if eq_rows:
        solved = hnf_solve(eq_rows, eq_rhs)
        if solved is None:
            return None
        x0, kernel = solved
        if kernel:
            kernel = lll_reduce(kernel)
            x0 = _babai_shift(x0, kernel)
    else:
        x0 = [0] * prog.n_vars
        kernel = [
            [1 if v == j else 0 for v in range(prog.n_vars)]
            for j in range(prog.n_vars)
        ]
    r = len(kernel)
    t_cons: list[tuple[dict[int, int], str, int]] = []

    def push(coeffs: dict[int, int], rel: str, rhs: int) -> bool:
        tightened = _strengthen(coeffs, rel, rhs)
        if tightened is None:
            return True
        coeffs, rel, rhs = tightened
        if not coeffs:
            return False
        t_cons.append((coeffs, rel, rhs))
        return True

    ok = True
    for coeffs, rel, rhs in ineqs:
        t_c: dict[int, int] = {}
        base = 0
        for v, a in coeffs.items():
            base += a * x0[v]
            for j in range(r):
                t_c[j] = t_c.get(j, 0) + a * kernel[j][v]
        ok = ok and push(t_c, rel, rhs - base)
    for v in range(prog.n_vars):
        for bound, rel in ((prog.lower[v], GE), (prog.upper[v], LE)):
            if bound is None:
                continue
            t_c = {j: kernel[j][v] for j in range(r) if kernel[j][v] != 0}
            ok = ok and push(t_c, rel, bound - x0[v])
    if not ok:
        return None
    t_prog = IntProgram.build(r, t_cons)
    return t_prog, x0, kernel


def ilp_feasible(
    prog: IntProgram, budget: int = 200_000
) -> list[int] | None:
    """Find an integer solution or prove none exists.

    Equalities are solved exactly on the integer lattice first; branch and
    bound only explores the leftover inequalities.
    """
    reduced = _reduce_to_lattice(prog)
    if reduced is None:
        return None
    t_prog, x0, kernel = reduced
    if t_prog.n_vars == 0:
        t_sol: list[int] | None = [] if not t_prog.constraints else None
        if t_prog.constraints:
            t_sol = [] if all(
                (c.rhs >= 0 if c.rel == LE else c.rhs <= 0 if c.rel == GE else c.rhs == 0)
                for c in t_prog.constraints
            ) else None
    else:
        t_sol = _bnb_feasible(t_prog, _BnbState(budget))
    if t_sol is None:
        return None
    return [
        x0[v] + sum(t_sol[j] * kernel[j][v] for j in range(len(kernel)))
        for v in range(prog.n_vars)
    ]


def _ray_program(prog: IntProgram, var: int, direction: int) -> IntProgram:
    """Recession-cone program with the chosen coordinate pushed past +-1."""
    cons: list[tuple[dict[int, int], str, int]] = []
    for c in prog.constraints:
        cons.append((dict(c.coeffs), c.rel, 0))
    for v in range(prog.n_vars):
        if prog.lower[v] is not None:
            cons.append(({v: 1}, GE, 0))
        if prog.upper[v] is not None:
            cons.append(({v: 1}, LE, 0))
    cons.append(({var: 1}, GE, 1) if direction > 0 else ({var: 1}, LE, -1))
    return IntProgram.build(prog.n_vars, cons)


def ilp_var_unbounded(prog: IntProgram, var: int, budget: int = 200_000) -> bool:
    """True when integer solutions take arbitrarily large values at var.

    Exact for rational data: unboundedness above is equivalent to integer
    feasibility plus a recession ray with a positive var coordinate.
    """
    if ilp_feasible(prog, budget) is None:
        return False
    return lp_feasible(_ray_program(prog, var, +1))


def ilp_bounded_values(
    prog: IntProgram, var: int, limit: int = 64, budget: int = 200_000
) -> list[int] | None:
    """All values var takes over integer solutions, or None when unbounded.

    Raises IlpBudgetExceeded when the rational range spans more than limit
    candidate integers.
    """
    if ilp_feasible(prog, budget) is None:
        return []
    if lp_feasible(_ray_program(prog, var, +1)) or lp_feasible(
        _ray_program(prog, var, -1)
    ):
        return None
    s_lo, lo_val, _ = lp_solve(prog, {var: 1}, sense="min")
    s_hi, hi_val, _ = lp_solve(prog, {var: 1}, sense="max")
    assert s_lo == "optimal" and s_hi == "optimal"
    lo, hi = ceil(lo_val), floor(hi_val)
    if hi - lo + 1 > limit:
        raise IlpBudgetExceeded(f"value range [{lo},{hi}] wider than {limit}")
    out = []
    for v in range(lo, hi + 1):
        pinned = prog.with_constraint({var: 1}, EQ, v)
        if ilp_feasible(pinned, budget) is not None:
            out.append(v)
    return out


def ilp_optimize(
    prog: IntProgram,
    objective: dict[int, int],
    sense: str = "min",
    budget: int = 200_000,
) -> tuple[str, int | None, list[int] | None]:
    """Optimize a linear objective over integer solutions.

    Returns (status, value, solution) with status in {"optimal",
    "infeasible", "unbounded"}.
    """
    base = ilp_feasible(prog, budget)
    if base is None:
        return "infeasible", None, None
    lp_status, _, _ = lp_solve(prog, objective, sense)
    if lp_status == "unbounded":
        return "unbounded", None, None
    sign = 1 if sense == "min" else -1

    def value(x: list[int]) -> int:
        return sum(objective.get(i, 0) * x[i] for i in range(prog.n_vars))

    best = base
    state = _BnbState(budget)
    stack = [prog]
    while stack:
        node = stack.pop()
        state.used += 1
        if state.used > state.budget:
            raise IlpBudgetExceeded(f"branch-and-bound exceeded {state.budget} nodes")
        status, bound, x = lp_solve(node, objective, sense)
        if status == "infeasible":
            continue
        assert status == "optimal" and x is not None and bound is not None
        if sign * bound >= sign * value(best):
            continue
        frac = next((i for i in range(node.n_vars) if x[i].denominator != 1), None)
        if frac is None:
            cand = [int(v) for v in x]
            if sign * value(cand) < sign * value(best):
                best = cand
            continue
        fl = floor(x[frac])
        stack.append(node.with_bound(frac, lo=fl + 1))
        stack.append(node.with_bound(frac, hi=fl))
    return "optimal", value(best), best
