"""The rationalizability linear program and an embedded dense simplex solver.

The program's variables are the 2n^2 payoff entries (normalized into [0, 1]),
one equalized payoff per observation and per player, and a common strictness
margin delta that the objective maximizes. Observed play is explainable as
strict Nash equilibria exactly when the optimum exceeds the strictness
threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (
    DEFAULT_TOL,
    DataSet,
    Game,
    NumericalFailure,
    Tolerances,
    is_strict_nash,
    support,
)

__all__ = [
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "LinearProgram",
    "LpSolution",
    "build_rationalization_lp",
    "lp_text",
    "solve_lp",
    "game_from_solution",
    "rationalize",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_RELATIONS = ("=", "<=")

# pivot eligibility / degeneracy threshold for the simplex tableau
_PIVOT_TOL = 1e-9
# residual budget an optimal solution must meet
_RESIDUAL_TOL = 1e-8


@dataclass
class LinearProgram:
    """max objective . x  subject to rows (coeffs, rel, rhs) with rel in {"=", "<="}
    and per-variable bounds (lo, hi), where lo may be -inf and hi may be +inf."""

    objective: np.ndarray
    constraints: list[tuple[np.ndarray, str, float]]
    bounds: list[tuple[float, float]]
    names: list[str] | None = None

    def __post_init__(self) -> None:
        self.objective = np.asarray(self.objective, dtype=float)
        nv = self.objective.size
        cleaned = []
        for row, rel, rhs in self.constraints:
            row = np.asarray(row, dtype=float)
            if row.size != nv:
                raise ValueError(f"constraint has {row.size} coefficients, expected {nv}")
            if rel not in _RELATIONS:
                raise ValueError(f"unknown relation {rel!r}")
            cleaned.append((row, rel, float(rhs)))
        self.constraints = cleaned
        if len(self.bounds) != nv:
            raise ValueError(f"{len(self.bounds)} bounds for {nv} variables")
        for lo, hi in self.bounds:
            if lo > hi:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")

    @property
    def num_variables(self) -> int:
        return self.objective.size


@dataclass
class LpSolution:
    status: str
    values: np.ndarray | None = None
    objective_value: float | None = None


def build_rationalization_lp(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> LinearProgram:
    """Assemble the strict-Nash feasibility program for a dataset.

    Variable layout: A row-major, then B row-major, then the per-observation
    payoffs of the row and column player, then delta (last).
    """
    n, m = d.n, d.m
    nsq = n * n
    num = 2 * nsq + 2 * m + 1
    delta = num - 1

    names = [f"A[{i},{j}]" for i in range(n) for j in range(n)]
    names += [f"B[{i},{j}]" for i in range(n) for j in range(n)]
    names += [f"pi[{k}]" for k in range(m)]
    names += [f"pi'[{k}]" for k in range(m)]
    names.append("delta")

    constraints: list[tuple[np.ndarray, str, float]] = []
    for k, obs in enumerate(d.observations):
        x = obs.row_strategy.probs
        y = obs.col_strategy.probs
        supp_x = support(obs.row_strategy, tol)
        supp_y = support(obs.col_strategy, tol)
        pi_k = 2 * nsq + k
        pi2_k = 2 * nsq + m + k
        for i in range(n):
            row = np.zeros(num)
            row[i * n : (i + 1) * n] = y  # (A y)_i
            row[pi_k] = -1.0
            if i in supp_x:
                constraints.append((row, "=", 0.0))
            else:
                row[delta] = 1.0
                constraints.append((row, "<=", 0.0))
        for j in range(n):
            row = np.zeros(num)
            row[nsq + np.arange(n) * n + j] = x  # (x^T B)_j
            row[pi2_k] = -1.0
            if j in supp_y:
                constraints.append((row, "=", 0.0))
            else:
                row[delta] = 1.0
                constraints.append((row, "<=", 0.0))

    inf = math.inf
    bounds = [(0.0, 1.0)] * (2 * nsq) + [(-inf, inf)] * (2 * m) + [(0.0, inf)]
    objective = np.zeros(num)
    objective[delta] = 1.0
    return LinearProgram(objective, constraints, bounds, names)


def lp_text(p: LinearProgram) -> str:
    """Plain-text listing of the program, one constraint per line."""
    names = p.names or [f"x{i}" for i in range(p.num_variables)]

    def terms(row: np.ndarray) -> str:
        parts = []
        for i in np.nonzero(row)[0]:
            coeff = row[i]
            sign = "-" if coeff < 0 else ("+" if parts else "")
            mag = abs(coeff)
            parts.append(f"{sign} {mag:g}*{names[i]}" if parts else f"{sign}{mag:g}*{names[i]}")
        return " ".join(parts) if parts else "0"

    lines = [f"maximize {terms(p.objective)}", "subject to"]
    for row, rel, rhs in p.constraints:
        lines.append(f"  {terms(row)} {rel} {rhs:g}")
    lines.append("bounds")
    for i, (lo, hi) in enumerate(p.bounds):
        if lo == -math.inf and hi == math.inf:
            lines.append(f"  {names[i]} free")
        elif hi == math.inf:
            lines.append(f"  {names[i]} >= {lo:g}")
        elif lo == -math.inf:
            lines.append(f"  {names[i]} <= {hi:g}")
        else:
            lines.append(f"  {lo:g} <= {names[i]} <= {hi:g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# dense two-phase simplex
# ---------------------------------------------------------------------------


@dataclass
class _StandardForm:
    """Equality-standard form max c.x, A x = b, x >= 0, b >= 0."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: np.ndarray
    art_start: int  # first artificial column; entering is restricted below it
    var_map: list[tuple]  # recipes to rebuild the original variables
    num_orig: int


def _standardize(p: LinearProgram) -> _StandardForm:
    inf = math.inf
    var_map: list[tuple] = []
    ncols = 0
    ub_rows: list[tuple[int, float]] = []
    for lo, hi in p.bounds:
        if lo == -inf and hi == inf:
            var_map.append(("split", ncols))
            ncols += 2
        elif lo != -inf:
            var_map.append(("shift", ncols, lo))
            if hi != inf:
                ub_rows.append((ncols, hi - lo))
            ncols += 1
        else:  # lo == -inf, hi finite: x = hi - u
            var_map.append(("mirror", ncols, hi))
            ncols += 1

    def transform(row: np.ndarray) -> tuple[np.ndarray, float]:
        out = np.zeros(ncols)
        shift = 0.0
        for i in np.nonzero(row)[0]:
            a = row[i]
            recipe = var_map[i]
            if recipe[0] == "split":
                out[recipe[1]] += a
                out[recipe[1] + 1] -= a
            elif recipe[0] == "shift":
                out[recipe[1]] += a
                shift += a * recipe[2]
            else:
                out[recipe[1]] -= a
                shift += a * recipe[2]
        return out, shift

    rows: list[tuple[np.ndarray, str, float]] = []
    for row, rel, rhs in p.constraints:
        out, shift = transform(row)
        rows.append((out, rel, rhs - shift))
    for col, ub in ub_rows:
        r = np.zeros(ncols)
        r[col] = 1.0
        rows.append((r, "<=", ub))

    R = len(rows)
    # classify rows after making all right-hand sides nonnegative
    needs_slack = []
    needs_art = []
    for idx, (out, rel, rhs) in enumerate(rows):
        flipped = rhs < 0
        if rel == "<=":
            needs_slack.append((idx, -1.0 if flipped else 1.0))
            if flipped:
                needs_art.append(idx)
        else:
            needs_art.append(idx)

    n_slack = len(needs_slack)
    n_art = len(needs_art)
    C = ncols + n_slack + n_art
    A = np.zeros((R, C))
    b = np.zeros(R)
    basis = np.full(R, -1, dtype=int)
    for idx, (out, rel, rhs) in enumerate(rows):
        if rhs < 0:
            out, rhs = -out, -rhs
        A[idx, :ncols] = out
        b[idx] = rhs
    for s, (idx, coeff) in enumerate(needs_slack):
        col = ncols + s
        A[idx, col] = coeff
        if coeff > 0:
            basis[idx] = col
    art_start = ncols + n_slack
    for a, idx in enumerate(needs_art):
        col = art_start + a
        A[idx, col] = 1.0
        basis[idx] = col

    c = np.zeros(C)
    obj_std, _ = transform(p.objective)
    c[:ncols] = obj_std
    return _StandardForm(A, b, c, basis, art_start, var_map, p.num_variables)


def _optimize(
    T: np.ndarray,
    basis: np.ndarray,
    c: np.ndarray,
    allowed: int,
    max_iter: int,
) -> tuple[str, float]:
    """Bland-rule simplex over the tableau T (rhs in the last column).

    Maximizes c over the current basic feasible solution; entering candidates
    are restricted to columns below `allowed`. Returns (status, objective).
    """
    R = basis.size
    C = T.shape[1] - 1
    cost = -c.copy()
    z = 0.0
    for r in range(R):
        cj = c[basis[r]]
        if cj != 0.0:
            cost += cj * T[r, :C]
            z += cj * T[r, C]

    for _ in range(max_iter):
        eligible = np.nonzero(cost[:allowed] < -_PIVOT_TOL)[0]
        if eligible.size == 0:
            return OPTIMAL, z
        j = int(eligible[0])  # Bland: smallest improving index
        col = T[:R, j]
        positive = np.nonzero(col > _PIVOT_TOL)[0]
        if positive.size == 0:
            return UNBOUNDED, z
        ratios = T[positive, C] / col[positive]
        rmin = ratios.min()
        tie = positive[ratios <= rmin + _PIVOT_TOL]
        r = int(tie[np.argmin(basis[tie])])  # Bland: smallest leaving basis index

        piv = T[r, j]
        T[r] /= piv
        factor = T[:R, j].copy()
        factor[r] = 0.0
        T[:R] -= np.outer(factor, T[r])
        T[:R, j] = 0.0
        T[r, j] = 1.0
        cj = cost[j]
        if cj != 0.0:
            cost -= cj * T[r, :C]
            z -= cj * T[r, C]
            cost[j] = 0.0
        basis[r] = j
    raise NumericalFailure("simplex iteration limit exceeded")


def _solve_standard(std: _StandardForm, max_iter: int) -> tuple[str, np.ndarray]:
    R, C = std.A.shape
    T = np.hstack([std.A.copy(), std.b.reshape(-1, 1)])
    basis = std.basis.copy()

    if std.art_start < C:
        c1 = np.zeros(C)
        c1[std.art_start :] = -1.0
        status, z1 = _optimize(T, basis, c1, allowed=C, max_iter=max_iter)
        if status == UNBOUNDED:
            raise NumericalFailure("phase-1 objective reported unbounded")
        if z1 < -1e-8:
            return INFEASIBLE, np.zeros(C)
        # drive artificials out of the basis where a real pivot exists
        for r in range(R):
            if basis[r] >= std.art_start:
                row = T[r, : std.art_start]
                nz = np.nonzero(np.abs(row) > _PIVOT_TOL)[0]
                if nz.size:
                    j = int(nz[0])
                    piv = T[r, j]
                    T[r] /= piv
                    factor = T[:R, j].copy()
                    factor[r] = 0.0
                    T[:R] -= np.outer(factor, T[r])
                    T[:R, j] = 0.0
                    T[r, j] = 1.0
                    basis[r] = j

    status, _ = _optimize(T, basis, std.c, allowed=std.art_start, max_iter=max_iter)
    if status != OPTIMAL:
        return status, np.zeros(C)

    x = np.zeros(C)
    x[basis] = T[:R, C]
    # refine the basic values against the unpivoted data to shed tableau drift
    try:
        xb = np.linalg.solve(std.A[:, basis], std.b)
        if np.all(np.isfinite(xb)):
            x = np.zeros(C)
            x[basis] = xb
    except np.linalg.LinAlgError:
        pass
    return OPTIMAL, x


def _recover(std: _StandardForm, x_std: np.ndarray) -> np.ndarray:
    x = np.zeros(std.num_orig)
    for i, recipe in enumerate(std.var_map):
        if recipe[0] == "split":
            x[i] = x_std[recipe[1]] - x_std[recipe[1] + 1]
        elif recipe[0] == "shift":
            x[i] = recipe[2] + x_std[recipe[1]]
        else:
            x[i] = recipe[2] - x_std[recipe[1]]
    return x


def max_residual(p: LinearProgram, x: np.ndarray) -> float:
    """Largest violation of the program's constraints and bounds at x."""
    worst = 0.0
    for row, rel, rhs in p.constraints:
        value = float(row @ x)
        worst = max(worst, abs(value - rhs) if rel == "=" else value - rhs)
    for i, (lo, hi) in enumerate(p.bounds):
        worst = max(worst, lo - x[i], x[i] - hi)
    return worst


def solve_lp(p: LinearProgram, max_iter: int | None = None) -> LpSolution:
    """Dense two-phase simplex with Bland's rule; returns a basic optimal
    solution, or flags the program infeasible or unbounded."""
    std = _standardize(p)
    if max_iter is None:
        max_iter = 100 * (std.A.shape[0] + std.A.shape[1]) + 1000
    status, x_std = _solve_standard(std, max_iter)
    if status != OPTIMAL:
        return LpSolution(status)
    x = _recover(std, x_std)
    residual = max_residual(p, x)
    if residual > _RESIDUAL_TOL:
        raise NumericalFailure(f"optimal solution violates constraints by {residual:.3e}")
    return LpSolution(OPTIMAL, x, float(p.objective @ x))


def game_from_solution(sol: LpSolution, n: int) -> Game:
    """Read the payoff matrices off an optimal solution of the program."""
    if sol.status != OPTIMAL or sol.values is None:
        raise ValueError("solution is not optimal")
    nsq = n * n
    A = sol.values[:nsq].reshape(n, n)
    B = sol.values[nsq : 2 * nsq].reshape(n, n)
    return Game(A, B)


def rationalize(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> tuple[Game, float] | None:
    """Decide whether the dataset is explainable as strict Nash play.

    Returns (game, delta_star) when the program's optimal margin exceeds
    delta_min, and None otherwise. The returned game is re-checked to be a
    strict rationalization of every observation.
    """
    prog = build_rationalization_lp(d, tol)
    sol = solve_lp(prog)
    if sol.status == UNBOUNDED:
        # Only possible when every support is full on both sides: delta never
        # appears in an inequality. Any constant game then explains the data.
        game = Game(np.zeros((d.n, d.n)), np.zeros((d.n, d.n)))
        delta_star = math.inf
    elif sol.status == INFEASIBLE:
        raise NumericalFailure("rationalization program reported infeasible; it is feasible by construction")
    else:
        delta_star = float(sol.objective_value)
        if delta_star <= tol.delta_min:
            return None
        game = game_from_solution(sol, d.n)
    for k, obs in enumerate(d.observations):
        if not is_strict_nash(game, obs, tol).is_strict:
            raise NumericalFailure(f"optimal game fails strictness on observation {k}")
    return game, delta_star
