"""Core domain types: mixed strategies, observations, datasets, games, and the
strict-Nash predicate everything else is judged against."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

__all__ = [
    "NashRankError",
    "DimensionMismatch",
    "EmptySupport",
    "DuplicateObservation",
    "NumericalFailure",
    "Tolerances",
    "DEFAULT_TOL",
    "MixedStrategy",
    "Observation",
    "DataSet",
    "Game",
    "StrictNashResult",
    "support",
    "best_response_rows",
    "is_strict_nash",
]


class NashRankError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(NashRankError):
    """Vector or matrix dimensions do not agree."""


class EmptySupport(NashRankError):
    """A strategy has no entry above the support threshold."""


class DuplicateObservation(NashRankError):
    """Two observations in a dataset are entrywise identical."""


class NumericalFailure(NashRankError):
    """A numerical routine could not meet its accuracy contract."""


@dataclass(frozen=True)
class Tolerances:
    """Numerical thresholds shared across the toolkit.

    tol_supp   entries at or below this count as zero probability
    tol_norm   allowed deviation of a probability sum from 1
    tol_rank   relative singular-value cutoff for rank decisions
    delta_min  margin by which a strict payoff inequality must hold
    """

    tol_supp: float = 1e-9
    tol_norm: float = 1e-9
    tol_rank: float = 1e-9
    delta_min: float = 1e-7

    def __post_init__(self) -> None:
        for name in ("tol_supp", "tol_norm", "tol_rank", "delta_min"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.delta_min <= self.tol_supp:
            raise ValueError("delta_min must exceed tol_supp")


DEFAULT_TOL = Tolerances()


def _as_probs(s: "MixedStrategy | Sequence[float] | np.ndarray") -> np.ndarray:
    if isinstance(s, MixedStrategy):
        return s.probs
    return np.asarray(s, dtype=float)


@dataclass(frozen=True, eq=False)
class MixedStrategy:
    """Probability vector over n pure strategies.

    Entries may be negative by at most tol_supp (rounding noise); the stored
    vector is renormalized so it sums to 1 in machine precision.
    """

    probs: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise DimensionMismatch("a mixed strategy must be a nonempty 1-D vector")
        if not np.all(np.isfinite(p)):
            raise ValueError("mixed strategy entries must be finite")
        if p.min() < -DEFAULT_TOL.tol_supp:
            raise ValueError(f"negative probability {p.min()!r} in mixed strategy")
        total = float(p.sum())
        if abs(total - 1.0) > DEFAULT_TOL.tol_norm:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        p = p / total
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.probs.size

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return f"MixedStrategy({np.round(self.probs, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class Observation:
    """One observed pair of mixed strategies (row player, column player)."""

    row_strategy: MixedStrategy
    col_strategy: MixedStrategy

    def __post_init__(self) -> None:
        for name in ("row_strategy", "col_strategy"):
            value = getattr(self, name)
            if not isinstance(value, MixedStrategy):
                object.__setattr__(self, name, MixedStrategy(np.asarray(value, dtype=float)))
        if self.row_strategy.n != self.col_strategy.n:
            raise DimensionMismatch(
                f"strategy lengths differ: {self.row_strategy.n} vs {self.col_strategy.n}"
            )
        # both sides must put weight somewhere
        support(self.row_strategy)
        support(self.col_strategy)

    @property
    def n(self) -> int:
        return self.row_strategy.n


@dataclass(frozen=True, eq=False)
class DataSet:
    """Ordered collection of observations over a common strategy set of size n."""

    n: int
    observations: tuple[Observation, ...]

    def __post_init__(self) -> None:
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if len(obs) == 0:
            raise ValueError("a dataset needs at least one observation")
        for o in obs:
            if o.n != self.n:
                raise DimensionMismatch(f"observation has length {o.n}, dataset has n={self.n}")
        for k in range(len(obs)):
            for l in range(k + 1, len(obs)):
                same_x = np.max(np.abs(obs[k].row_strategy.probs - obs[l].row_strategy.probs))
                same_y = np.max(np.abs(obs[k].col_strategy.probs - obs[l].col_strategy.probs))
                if max(same_x, same_y) <= DEFAULT_TOL.tol_norm:
                    raise DuplicateObservation(f"observations {k} and {l} are identical")

    @property
    def m(self) -> int:
        return len(self.observations)

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[tuple[Sequence[float], Sequence[float]]],
        n: int | None = None,
    ) -> "DataSet":
        obs = tuple(Observation(x, y) for x, y in pairs)
        if not obs:
            raise ValueError("a dataset needs at least one observation")
        return cls(n if n is not None else obs[0].n, obs)

    def subset(self, indices: Iterable[int]) -> "DataSet":
        return DataSet(self.n, tuple(self.observations[i] for i in indices))

    def swapped(self) -> "DataSet":
        """The same data with the roles of the two players exchanged."""
        return DataSet(
            self.n,
            tuple(Observation(o.col_strategy, o.row_strategy) for o in self.observations),
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "observations": [
                {"x": o.row_strategy.probs.tolist(), "y": o.col_strategy.probs.tolist()}
                for o in self.observations
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DataSet":
        if not isinstance(data, dict) or "n" not in data or "observations" not in data:
            raise ValueError("dataset JSON must be an object with fields 'n' and 'observations'")
        obs = []
        for k, entry in enumerate(data["observations"]):
            if "x" not in entry or "y" not in entry:
                raise ValueError(f"observation {k} must have fields 'x' and 'y'")
            obs.append(Observation(entry["x"], entry["y"]))
        return cls(int(data["n"]), tuple(obs))


@dataclass(frozen=True, eq=False)
class Game:
    """A two-player game in normal form: square payoff matrices (A, B)."""

    row_payoff: np.ndarray
    col_payoff: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.row_payoff, dtype=float)
        B = np.asarray(self.col_payoff, dtype=float)
        for name, M in (("row_payoff", A), ("col_payoff", B)):
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise DimensionMismatch(f"{name} must be a square matrix, got shape {M.shape}")
            if not np.all(np.isfinite(M)):
                raise ValueError(f"{name} has non-finite entries")
        if A.shape != B.shape:
            raise DimensionMismatch(f"payoff shapes differ: {A.shape} vs {B.shape}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "row_payoff", A)
        object.__setattr__(self, "col_payoff", B)

    @property
    def n(self) -> int:
        return self.row_payoff.shape[0]

    def to_dict(self) -> dict:
        return {"A": self.row_payoff.tolist(), "B": self.col_payoff.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "Game":
        if not isinstance(data, dict) or "A" not in data or "B" not in data:
            raise ValueError("game JSON must be an object with fields 'A' and 'B'")
        return cls(np.asarray(data["A"], dtype=float), np.asarray(data["B"], dtype=float))


def support(s: MixedStrategy | Sequence[float], tol: Tolerances = DEFAULT_TOL) -> frozenset[int]:
    """Indices played with probability above tol_supp."""
    p = _as_probs(s)
    idx = np.nonzero(p > tol.tol_supp)[0]
    if idx.size == 0:
        raise EmptySupport("strategy has no entry above the support threshold")
    return frozenset(int(i) for i in idx)


def best_response_rows(
    A: np.ndarray, y: MixedStrategy | Sequence[float], tol: Tolerances = DEFAULT_TOL
) -> frozenset[int]:
    """Rows whose expected payoff against y is within delta_min of the maximum.

    The column player's best responses are obtained by applying this to the
    transpose of their payoff matrix and the row player's strategy.
    """
    A = np.asarray(A, dtype=float)
    p = _as_probs(y)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"payoff matrix must be square, got shape {A.shape}")
    if A.shape[1] != p.size:
        raise DimensionMismatch(f"matrix is {A.shape[0]}x{A.shape[1]} but strategy has length {p.size}")
    payoffs = A @ p
    cutoff = payoffs.max() - tol.delta_min
    return frozenset(int(i) for i in np.nonzero(payoffs >= cutoff)[0])


class StrictNashResult(NamedTuple):
    is_strict: bool
    row_margin: float
    col_margin: float


def _margin(payoffs: np.ndarray, supp: frozenset[int]) -> float:
    """Worst on-support payoff minus best off-support payoff; +inf if full support."""
    mask = np.zeros(payoffs.size, dtype=bool)
    mask[list(supp)] = True
    if mask.all():
        return math.inf
    return float(payoffs[mask].min() - payoffs[~mask].max())


def is_strict_nash(g: Game, obs: Observation, tol: Tolerances = DEFAULT_TOL) -> StrictNashResult:
    """Whether obs is a strict Nash equilibrium of g: each player's support must
    equal their best-response set. Also reports the two strictness margins."""
    if g.n != obs.n:
        raise DimensionMismatch(f"game is {g.n}x{g.n} but observation has length {obs.n}")
    supp_x = support(obs.row_strategy, tol)
    supp_y = support(obs.col_strategy, tol)
    row_payoffs = g.row_payoff @ obs.col_strategy.probs
    col_payoffs = g.col_payoff.T @ obs.row_strategy.probs
    ok = supp_x == best_response_rows(g.row_payoff, obs.col_strategy, tol) and supp_y == best_response_rows(
        g.col_payoff.T, obs.row_strategy, tol
    )
    return StrictNashResult(bool(ok), _margin(row_payoffs, supp_x), _margin(col_payoffs, supp_y))
