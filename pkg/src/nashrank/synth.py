"""Low-rank rationalizing constructions.

Four routes to a game whose payoff-matrix rank is bounded by a structural
measure of the data: the dimension of the observed strategies, their support
size, the chromatic number of the support-intersection graph, and a composite
measure obtained by 3-partitioning the data and mixing the three constructions.

Every construction is implemented for the row player and applied to swapped
data for the column player.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_TOL,
    DataSet,
    Game,
    NashRankError,
    NumericalFailure,
    Tolerances,
    support,
)
from .linalg import (
    NonGenericData,
    col_strategy_matrix,
    coordinate_map,
    dual_basis,
    independent_columns,
    least_norm_solve,
    numerical_rank,
    row_strategy_matrix,
    selector_matrix,
)
from .lp import rationalize
from .verify import verify_dataset

__all__ = [
    "NotRationalizable",
    "OverlappingSupports",
    "SupportTooLarge",
    "SynthesisResult",
    "IntersectionGraph",
    "Coloring",
    "reduce_rank",
    "rationalize_low_dim",
    "support_poly_column",
    "rationalize_support",
    "rationalize_support_game",
    "build_intersection_graph",
    "greedy_coloring",
    "rank2_disjoint",
    "rationalize_chromatic",
    "composite_partition",
    "rationalize_composite",
    "synthesize_lp",
    "rationalize_auto",
    "SYNTHESIS_METHODS",
]


class NotRationalizable(NashRankError):
    """The dataset admits no strict-Nash explanation above the margin threshold."""


class OverlappingSupports(NashRankError):
    """Row supports were required to be pairwise disjoint but are not."""


class SupportTooLarge(NashRankError):
    """An observation exceeds the declared support-size cap."""


@dataclass(frozen=True, eq=False)
class SynthesisResult:
    """A rationalizing game together with its certified rank bound."""

    game: Game
    rank_A: int
    rank_B: int
    bound: int | None
    method: str
    measure: int | None  # structural measure behind the bound (dim, s, kappa, or sigma)

    def to_dict(self) -> dict:
        out = self.game.to_dict()
        out.update(
            {
                "method": self.method,
                "bound": self.bound,
                "rank_A": self.rank_A,
                "rank_B": self.rank_B,
                "sigma_or_kappa": self.measure,
            }
        )
        return out


@dataclass(frozen=True)
class IntersectionGraph:
    """One vertex per observation; an edge wherever the supports overlap."""

    num_vertices: int
    edges: frozenset[tuple[int, int]]

    def neighbors(self, v: int) -> set[int]:
        out = set()
        for a, b in self.edges:
            if a == v:
                out.add(b)
            elif b == v:
                out.add(a)
        return out

    def degree(self, v: int) -> int:
        return sum(1 for a, b in self.edges if v in (a, b))

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.num_vertices)), default=0)


@dataclass(frozen=True)
class Coloring:
    colors: tuple[int, ...]
    color_count: int

    def classes(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.color_count)]
        for v, c in enumerate(self.colors):
            out[c].append(v)
        return out


def _verified(game: Game, d: DataSet, tol: Tolerances, method: str) -> None:
    report = verify_dataset(game, d, tol)
    if not report.all_pass:
        bad = [k for k, o in enumerate(report.observations) if not o.passed]
        raise NumericalFailure(f"{method} construction fails strictness on observations {bad}")


def reduce_rank(A_hat: np.ndarray, Y: np.ndarray, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Replace A_hat by a matrix of rank at most rank(Y) acting identically on
    the column space of Y: a sum of outer products A_hat y_j gamma_j^T over an
    independent column set with dual basis gamma."""
    A_hat = np.asarray(A_hat, dtype=float)
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    idx = independent_columns(Y, tol)
    if not idx:
        return np.zeros_like(A_hat)
    Yhat = Y[:, idx]
    G = dual_basis(Yhat)
    return (A_hat @ Yhat) @ G.T


def rationalize_low_dim(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """Rationalize with player rank bounded by the dimension of the observed
    strategies. The witness game comes from the linear program; each payoff
    matrix is then rank-reduced onto the span of the opponent's observations."""
    found = rationalize(d, tol)
    if found is None:
        raise NotRationalizable("linear program found no margin above delta_min")
    witness, _ = found
    Y = col_strategy_matrix(d)
    X = row_strategy_matrix(d)
    A = reduce_rank(witness.row_payoff, Y, tol)
    B = reduce_rank(witness.col_payoff.T, X, tol).T
    game = Game(A, B)
    _verified(game, d, tol, "low-dimension")
    dim_r = numerical_rank(X, tol)
    dim_c = numerical_rank(Y, tol)
    bound = min(dim_r, dim_c)
    return SynthesisResult(
        game,
        rank_A=numerical_rank(A, tol),
        rank_B=numerical_rank(B, tol),
        bound=bound,
        method="lowdim",
        measure=bound,
    )


def support_poly_column(supp: frozenset[int] | set[int], n: int) -> np.ndarray:
    """Column of payoffs that peaks exactly on `supp`: the polynomial with
    double roots at the support points, evaluated on the strategy grid and
    negated, then rescaled by the largest magnitude to keep entries in [-1, 0]."""
    idx = sorted(supp)
    if not idx or min(idx) < 0 or max(idx) >= n:
        raise ValueError(f"support {idx} not within 0..{n - 1}")
    pts = np.arange(n, dtype=float)
    col = -np.prod((pts[:, None] - np.asarray(idx, dtype=float)[None, :]) ** 2, axis=1)
    peak = np.abs(col).max()
    if peak > 0:
        col /= peak
    return col


def _support_side(work: DataSet, tol: Tolerances, s: int | None = None) -> np.ndarray:
    supports = [support(o.row_strategy, tol) for o in work.observations]
    largest = max(len(sp) for sp in supports)
    if s is not None and largest > s:
        raise SupportTooLarge(f"support of size {largest} exceeds declared cap {s}")
    Y = col_strategy_matrix(work)
    V = coordinate_map(Y, tol)
    P = np.column_stack([support_poly_column(sp, work.n) for sp in supports])
    return P @ V


def rationalize_support(
    d: DataSet, side: str, tol: Tolerances = DEFAULT_TOL, s: int | None = None
) -> np.ndarray:
    """One player's payoff matrix with rank at most 2s+1, s the largest support
    on that side, built from support polynomials composed with the coordinate
    map of the opposite side's (generic) observations."""
    if side not in ("row", "col"):
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    if side == "row":
        return _support_side(d, tol, s)
    return _support_side(d.swapped(), tol, s).T


def rationalize_support_game(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """Full game from the support construction applied to both sides; the player
    rank bound 2s+1 uses the smaller of the two maximal support sizes."""
    A = rationalize_support(d, "row", tol)
    B = rationalize_support(d, "col", tol)
    game = Game(A, B)
    _verified(game, d, tol, "support")
    s_row = max(len(support(o.row_strategy, tol)) for o in d.observations)
    s_col = max(len(support(o.col_strategy, tol)) for o in d.observations)
    s = min(s_row, s_col)
    return SynthesisResult(
        game,
        rank_A=numerical_rank(A, tol),
        rank_B=numerical_rank(B, tol),
        bound=2 * s + 1,
        method="support",
        measure=s,
    )


def build_intersection_graph(d: DataSet, side: str, tol: Tolerances = DEFAULT_TOL) -> IntersectionGraph:
    if side not in ("row", "col"):
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    strategies = [o.row_strategy if side == "row" else o.col_strategy for o in d.observations]
    supports = [support(s, tol) for s in strategies]
    edges = frozenset(
        (k, l)
        for k in range(d.m)
        for l in range(k + 1, d.m)
        if supports[k] & supports[l]
    )
    return IntersectionGraph(d.m, edges)


def greedy_coloring(g: IntersectionGraph) -> Coloring:
    """Proper coloring in descending-degree order (ties by vertex index); uses
    at most max-degree + 1 colors."""
    order = sorted(range(g.num_vertices), key=lambda v: (-g.degree(v), v))
    adjacency = [g.neighbors(v) for v in range(g.num_vertices)]
    colors = [-1] * g.num_vertices
    for v in order:
        used = {colors[u] for u in adjacency[v] if colors[u] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
    count = max(colors) + 1 if colors else 0
    return Coloring(tuple(colors), count)


def rank2_disjoint(part: DataSet, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Rank-2 payoff matrix for the row player when the row supports in `part`
    are pairwise disjoint: u 1^T + 2 w f^T, where each pure strategy is tagged
    with the (1-based) index of the observation owning it (unowned rows get
    m+1), u = -tag^2, w = tag, and f interpolates f . y_k = k."""
    supports = [support(o.row_strategy, tol) for o in part.observations]
    combined: set[int] = set()
    total = 0
    for sp in supports:
        combined |= sp
        total += len(sp)
    if total != len(combined):
        raise OverlappingSupports("row supports of the part are not pairwise disjoint")
    n, m = part.n, part.m
    Y = col_strategy_matrix(part)
    f = least_norm_solve(Y, np.arange(1.0, m + 1.0), tol)
    tag = np.full(n, float(m + 1))
    for k, sp in enumerate(supports):
        tag[list(sp)] = k + 1.0
    u = -(tag**2)
    w = tag
    return np.outer(u, np.ones(n)) + 2.0 * np.outer(w, f)


def _chromatic_side(work: DataSet, tol: Tolerances) -> tuple[np.ndarray, int]:
    Y_all = col_strategy_matrix(work)
    coloring = greedy_coloring(build_intersection_graph(work, "row", tol))
    A = np.zeros((work.n, work.n))
    for members in coloring.classes():
        block = rank2_disjoint(work.subset(members), tol)
        A += block @ selector_matrix(Y_all, members, tol)
    return A, coloring.color_count


def rationalize_chromatic(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """Rationalize with player rank at most twice the (greedily colored)
    chromatic number: one rank-2 block per color class, glued with selector
    matrices that vanish on the other classes' observations."""
    if not (is_generic_dataset(d, "col", tol) and is_generic_dataset(d, "row", tol)):
        raise NonGenericData("chromatic construction needs generic observations on both sides")
    A, kappa_r = _chromatic_side(d, tol)
    M, kappa_c = _chromatic_side(d.swapped(), tol)
    B = M.T
    game = Game(A, B)
    _verified(game, d, tol, "chromatic")
    kappa = min(kappa_r, kappa_c)
    return SynthesisResult(
        game,
        rank_A=numerical_rank(A, tol),
        rank_B=numerical_rank(B, tol),
        bound=2 * kappa,
        method="chromatic",
        measure=kappa,
    )


def is_generic_dataset(d: DataSet, side: str, tol: Tolerances = DEFAULT_TOL) -> bool:
    from .linalg import is_generic

    M = row_strategy_matrix(d) if side == "row" else col_strategy_matrix(d)
    return is_generic(M, tol)


# ---------------------------------------------------------------------------
# composite measure: best 3-partition into dimension / support / chromatic parts
# ---------------------------------------------------------------------------

_EXHAUSTIVE_LIMIT = 10


def _bits(mask: int) -> list[int]:
    out = []
    v = 0
    while mask:
        if mask & 1:
            out.append(v)
        mask >>= 1
        v += 1
    return out


def _induced_greedy_count(adjacency: list[int], members: list[int]) -> int:
    if not members:
        return 0
    mask = 0
    for v in members:
        mask |= 1 << v
    degs = {v: bin(adjacency[v] & mask).count("1") for v in members}
    order = sorted(members, key=lambda v: (-degs[v], v))
    colors: dict[int, int] = {}
    best = 0
    for v in order:
        used = {colors[u] for u in members if (adjacency[v] >> u) & 1 and u in colors}
        c = 0
        while c in used:
            c += 1
        colors[v] = c
        best = max(best, c + 1)
    return best


def _partition_tables(work: DataSet, tol: Tolerances):
    Y = col_strategy_matrix(work)
    supp_sizes = [len(support(o.row_strategy, tol)) for o in work.observations]
    g = build_intersection_graph(work, "row", tol)
    adjacency = [0] * work.m
    for a, b in g.edges:
        adjacency[a] |= 1 << b
        adjacency[b] |= 1 << a
    return Y, supp_sizes, adjacency


def _exhaustive_partition(work: DataSet, tol: Tolerances) -> tuple[tuple[tuple[int, ...], ...], int]:
    m = work.m
    Y, supp_sizes, adjacency = _partition_tables(work, tol)
    full = (1 << m) - 1
    dim_cost = [0] * (full + 1)
    supp_cost = [0] * (full + 1)
    chrom_cost = [0] * (full + 1)
    for mask in range(1, full + 1):
        members = _bits(mask)
        dim_cost[mask] = numerical_rank(Y[:, members], tol)
        supp_cost[mask] = max(supp_sizes[i] for i in members)
        chrom_cost[mask] = _induced_greedy_count(adjacency, members)

    best_cost = None
    best = None
    for m1 in range(full + 1):
        base = dim_cost[m1]
        if best_cost is not None and base >= best_cost:
            continue
        rem = full ^ m1
        sub = rem
        while True:
            cost = base + supp_cost[sub] + chrom_cost[rem ^ sub]
            if best_cost is None or cost < best_cost:
                best_cost = cost
                best = (m1, sub, rem ^ sub)
            if sub == 0:
                break
            sub = (sub - 1) & rem
    assert best is not None
    parts = tuple(tuple(_bits(mask)) for mask in best)
    return parts, int(best_cost)


def _greedy_partition(work: DataSet, tol: Tolerances) -> tuple[tuple[tuple[int, ...], ...], int]:
    Y, supp_sizes, adjacency = _partition_tables(work, tol)
    parts: list[list[int]] = [[], [], []]
    costs = [0, 0, 0]
    for k in range(work.m):
        trials = [
            numerical_rank(Y[:, parts[0] + [k]], tol),
            max(costs[1], supp_sizes[k]),
            _induced_greedy_count(adjacency, parts[2] + [k]),
        ]
        totals = [
            trials[0] + costs[1] + costs[2],
            costs[0] + trials[1] + costs[2],
            costs[0] + costs[1] + trials[2],
        ]
        choice = int(np.argmin(totals))  # ties go to the lowest part index
        parts[choice].append(k)
        costs[choice] = trials[choice]
    return tuple(tuple(p) for p in parts), int(sum(costs))


def composite_partition(
    d: DataSet, side: str, tol: Tolerances = DEFAULT_TOL, mode: str = "auto"
) -> tuple[tuple[tuple[int, ...], ...], int]:
    """Split the observations into a dimension part, a support part, and a
    chromatic part, and return the partition with the summed measure.

    Exhaustive over all 3^m assignments for m <= 10 (or mode="exhaustive");
    otherwise each observation goes greedily, in input order, to the part with
    the least marginal cost. The value is an upper bound on the true composite
    measure, which minimizes over every partition.
    """
    if side not in ("row", "col"):
        raise ValueError(f"side must be 'row' or 'col', got {side!r}")
    if mode not in ("auto", "exhaustive", "greedy"):
        raise ValueError(f"unknown mode {mode!r}")
    work = d if side == "row" else d.swapped()
    if mode == "exhaustive" or (mode == "auto" and work.m <= _EXHAUSTIVE_LIMIT):
        return _exhaustive_partition(work, tol)
    return _greedy_partition(work, tol)


def _composite_side(work: DataSet, parts: tuple[tuple[int, ...], ...], tol: Tolerances) -> np.ndarray:
    dim_part, supp_part, chrom_part = parts
    Y_all = col_strategy_matrix(work)
    A = np.zeros((work.n, work.n))
    if dim_part:
        sub = work.subset(dim_part)
        found = rationalize(sub, tol)
        if found is None:
            raise NotRationalizable("dimension part of the partition is not rationalizable")
        witness, _ = found
        block = reduce_rank(witness.row_payoff, col_strategy_matrix(sub), tol)
        A += block @ selector_matrix(Y_all, dim_part, tol)
    if supp_part:
        block = _support_side(work.subset(supp_part), tol)
        A += block @ selector_matrix(Y_all, supp_part, tol)
    if chrom_part:
        block, _ = _chromatic_side(work.subset(chrom_part), tol)
        A += block @ selector_matrix(Y_all, chrom_part, tol)
    return A


def rationalize_composite(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """Rationalize with player rank at most 2*sigma+1 where sigma is the
    composite measure of the partition found by `composite_partition`."""
    if not (is_generic_dataset(d, "col", tol) and is_generic_dataset(d, "row", tol)):
        raise NonGenericData("composite construction needs generic observations on both sides")
    parts_r, sigma_r = composite_partition(d, "row", tol)
    A = _composite_side(d, parts_r, tol)
    parts_c, sigma_c = composite_partition(d, "col", tol)
    B = _composite_side(d.swapped(), parts_c, tol).T
    game = Game(A, B)
    _verified(game, d, tol, "composite")
    sigma = min(sigma_r, sigma_c)
    return SynthesisResult(
        game,
        rank_A=numerical_rank(A, tol),
        rank_B=numerical_rank(B, tol),
        bound=2 * sigma + 1,
        method="composite",
        measure=sigma,
    )


def synthesize_lp(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """The plain linear-program optimum as a synthesis result (no rank bound)."""
    found = rationalize(d, tol)
    if found is None:
        raise NotRationalizable("linear program found no margin above delta_min")
    game, _ = found
    return SynthesisResult(
        game,
        rank_A=numerical_rank(game.row_payoff, tol),
        rank_B=numerical_rank(game.col_payoff, tol),
        bound=None,
        method="lp",
        measure=None,
    )


def rationalize_auto(d: DataSet, tol: Tolerances = DEFAULT_TOL) -> SynthesisResult:
    """Run the construction with the smallest certified bound whose
    preconditions hold; ties break chromatic < support < lowdim < composite.
    A candidate whose numerical verification fails is skipped in favor of the
    next one."""
    candidates: list[tuple[int, int, str]] = []
    generic = is_generic_dataset(d, "col", tol) and is_generic_dataset(d, "row", tol)
    if generic:
        kappa_r = greedy_coloring(build_intersection_graph(d, "row", tol)).color_count
        kappa_c = greedy_coloring(build_intersection_graph(d, "col", tol)).color_count
        candidates.append((2 * min(kappa_r, kappa_c), 0, "chromatic"))
        s_row = max(len(support(o.row_strategy, tol)) for o in d.observations)
        s_col = max(len(support(o.col_strategy, tol)) for o in d.observations)
        candidates.append((2 * min(s_row, s_col) + 1, 1, "support"))
        _, sigma_r = composite_partition(d, "row", tol)
        _, sigma_c = composite_partition(d, "col", tol)
        candidates.append((2 * min(sigma_r, sigma_c) + 1, 3, "composite"))
    dim_r = numerical_rank(row_strategy_matrix(d), tol)
    dim_c = numerical_rank(col_strategy_matrix(d), tol)
    candidates.append((min(dim_r, dim_c), 2, "lowdim"))
    candidates.sort()

    last_error: NashRankError | None = None
    for _, _, method in candidates:
        try:
            return SYNTHESIS_METHODS[method](d, tol)
        except NotRationalizable:
            raise
        except NashRankError as exc:
            last_error = exc
    raise last_error if last_error is not None else NotRationalizable("no construction applies")


SYNTHESIS_METHODS = {
    "lp": synthesize_lp,
    "lowdim": rationalize_low_dim,
    "support": rationalize_support_game,
    "chromatic": rationalize_chromatic,
    "composite": rationalize_composite,
    "auto": rationalize_auto,
}
