"""Two-player normal-form games in payoff and allocation form.

A payoff game stores per-cell utilities in currency units.  An allocation
game decomposes every cell into (units of good, payment) so that utility is
``v * x + p`` for a per-unit valuation ``v``.  The endowed valuation used to
construct an allocation game is stored on the game but is treated as hidden
by the estimation code.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    InvalidRangeError,
    InvalidStrategyError,
    NonFinitePayoffError,
    NonPositiveValueError,
    ShapeMismatchError,
    SymmetryViolationError,
)

ROUND_TRIP_TOL = 1e-9


def _as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PayoffGame:
    """Two-player game given by row-player and column-player utility matrices.

    ``u1[a, b]`` is the row player's utility when the row player picks action
    ``a`` and the column player picks ``b``; ``u2[a, b]`` is the column
    player's utility in the same cell.
    """

    id: str
    u1: np.ndarray
    u2: np.ndarray
    symmetric: bool = False

    @property
    def n_actions(self) -> int:
        return self.u1.shape[0]

    def payoff_matrix(self, player: int) -> np.ndarray:
        if player == 0:
            return self.u1
        if player == 1:
            return self.u2
        raise IndexError(f"player must be 0 or 1, got {player}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "n_actions": self.n_actions,
            "u1": self.u1.tolist(),
            "u2": self.u2.tolist(),
            "symmetric": self.symmetric,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PayoffGame":
        return make_payoff_game(
            d["u1"], d["u2"], symmetric=d.get("symmetric", False), id=d.get("id", "g")
        )


@dataclass(frozen=True, eq=False)
class AllocationGame:
    """Per-cell (allocation, payment) decomposition of a payoff game.

    ``v_star`` is the endowed per-unit valuation used at construction time.
    Estimators must not read it; evaluation code uses it as ground truth.
    """

    id: str
    x1: np.ndarray
    x2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    v_star: float

    def __post_init__(self):
        mats = [self.x1, self.x2, self.p1, self.p2]
        shapes = {m.shape for m in mats}
        if len(shapes) != 1 or self.x1.ndim != 2 or self.x1.shape[0] != self.x1.shape[1]:
            raise ShapeMismatchError("allocation/payment matrices must share a square shape")
        for m in mats:
            if not np.all(np.isfinite(m)):
                raise NonFinitePayoffError(f"non-finite entries in allocation game {self.id}")
        if np.any(self.x1 < 0) or np.any(self.x2 < 0):
            raise NonPositiveValueError("allocations must be nonnegative")

    @property
    def n_actions(self) -> int:
        return self.x1.shape[0]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "x1": self.x1.tolist(),
            "x2": self.x2.tolist(),
            "p1": self.p1.tolist(),
            "p2": self.p2.tolist(),
            "v_star": self.v_star,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AllocationGame":
        return cls(
            id=d.get("id", "g"),
            x1=_as_matrix(d["x1"]),
            x2=_as_matrix(d["x2"]),
            p1=_as_matrix(d["p1"]),
            p2=_as_matrix(d["p2"]),
            v_star=float(d["v_star"]),
        )


def mixed_strategy(probs) -> np.ndarray:
    """Validate and return an action-probability vector."""
    s = np.asarray(probs, dtype=float)
    if s.ndim != 1 or np.any(s < 0) or abs(s.sum() - 1.0) > 1e-12:
        raise InvalidStrategyError(f"not a probability vector: {probs}")
    return s


def make_payoff_game(u1, u2, symmetric: bool = False, id: str = "g") -> PayoffGame:
    """Construct a validated :class:`PayoffGame`."""
    u1 = _as_matrix(u1)
    u2 = _as_matrix(u2)
    if u1.ndim != 2 or u1.shape[0] != u1.shape[1]:
        raise ShapeMismatchError(f"u1 must be square, got shape {u1.shape}")
    if u1.shape != u2.shape:
        raise ShapeMismatchError(f"u1 shape {u1.shape} != u2 shape {u2.shape}")
    if not (np.all(np.isfinite(u1)) and np.all(np.isfinite(u2))):
        raise NonFinitePayoffError("payoff matrices must be finite")
    if symmetric and not np.array_equal(u2, u1.T):
        raise SymmetryViolationError("symmetric flag set but u2 != u1.T")
    return PayoffGame(id=id, u1=u1, u2=u2, symmetric=symmetric)


def random_payoff_game(
    rng: np.random.Generator,
    n_actions: int = 3,
    lo: float = 0.0,
    hi: float = 100.0,
    id: str = "g",
) -> PayoffGame:
    """Draw a symmetric game with i.i.d. Uniform[lo, hi] row-player payoffs."""
    if not lo < hi:
        raise InvalidRangeError(f"need lo < hi, got [{lo}, {hi}]")
    if n_actions < 2:
        raise InvalidRangeError(f"need n_actions >= 2, got {n_actions}")
    u1 = rng.uniform(lo, hi, size=(n_actions, n_actions))
    return make_payoff_game(u1, u1.T, symmetric=True, id=id)


def allocation_from_payoff(
    g: PayoffGame,
    v_star: float,
    rng: np.random.Generator,
    zero_payment: bool = False,
) -> AllocationGame:
    """Decompose a payoff game into allocations and payments at valuation v_star.

    Allocations are drawn per player per cell from Uniform[0, max(u(G))/v_star]
    and payments make up the difference; with ``zero_payment`` the whole
    utility is carried by the allocation (x = u / v_star, p = 0).
    """
    if v_star <= 0:
        raise NonPositiveValueError(f"v_star must be positive, got {v_star}")
    if zero_payment:
        if np.any(g.u1 < 0) or np.any(g.u2 < 0):
            raise NonPositiveValueError("zero-payment mapping needs nonnegative utilities")
        x1 = g.u1 / v_star
        x2 = g.u2 / v_star
        p1 = np.zeros_like(x1)
        p2 = np.zeros_like(x2)
    else:
        # Upper bound uses the max utility entry over both players.
        x_hi = max(g.u1.max(), g.u2.max()) / v_star
        x1 = rng.uniform(0.0, x_hi, size=g.u1.shape)
        x2 = rng.uniform(0.0, x_hi, size=g.u2.shape)
        p1 = g.u1 - x1 * v_star
        p2 = g.u2 - x2 * v_star
    return AllocationGame(
        id=g.id,
        x1=_as_matrix(x1),
        x2=_as_matrix(x2),
        p1=_as_matrix(p1),
        p2=_as_matrix(p2),
        v_star=float(v_star),
    )


def induce_payoff_game(a: AllocationGame, v: float) -> PayoffGame:
    """Payoff game with per-cell utility v*x + p; inverts the decomposition at v = v_star."""
    u1 = v * a.x1 + a.p1
    u2 = v * a.x2 + a.p2
    return make_payoff_game(u1, u2, symmetric=False, id=a.id)


def expected_utility(g: PayoffGame, player: int, action: int, opp) -> float:
    """Expected utility of a pure action against an opponent mixed strategy."""
    opp = np.asarray(opp, dtype=float)
    if opp.shape != (g.n_actions,):
        raise DimensionMismatchError(
            f"opponent strategy has shape {opp.shape}, game has {g.n_actions} actions"
        )
    if player == 0:
        return float(g.u1[action, :] @ opp)
    return float(g.u2[:, action] @ opp)


def save_games(games, path) -> None:
    """Write a list of games to a JSON file (payoff or allocation form)."""
    with open(path, "w") as f:
        json.dump([g.to_dict() for g in games], f, indent=1, sort_keys=True)
        f.write("\n")


def load_payoff_games(path) -> list:
    with open(path) as f:
        return [PayoffGame.from_dict(d) for d in json.load(f)]


def load_allocation_games(path) -> list:
    with open(path) as f:
        return [AllocationGame.from_dict(d) for d in json.load(f)]
