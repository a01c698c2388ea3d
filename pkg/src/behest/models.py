"""Behavioral model components: non-strategic rules and strategic responses.

Non-strategic (level-0) rules: uniform randomization, linear4 (L4, hard
argmax per decision rule), differentiable-linear4 (DL4, softmax with
precision fixed at 1) and quantal-linear4 (QL4, softmax with a free
precision).  Strategic components: quantal best response (QBR), quantal
response equilibrium (optionally mixed with a level-0 population), and
Poisson quantal cognitive hierarchy with max level 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy.optimize import root

from .errors import (
    DimensionMismatchError,
    InvalidSpecError,
    InvalidWeightsError,
    MissingEmpiricalError,
    NegativeTauError,
    NoConvergenceError,
    NoOtherObservationsError,
)
from .games import PayoffGame

# Decision-rule order used for weight vectors throughout the package.
RULES = ("max", "min", "fair", "eff", "unif")

# Precision used when approximating best response for the Nash model.
NASH_LAMBDA = 100.0

MAX_LEVEL = 3

L4_TIE_TOL = 1e-9


@dataclass(frozen=True)
class Level0Spec:
    """A non-strategic rule: one of uniform, l4, dl4, ql4.

    ``weights`` follows the RULES order (max, min, fair, eff, unif) and must
    sum to 1.  ``lambda0`` is the rule precision; it is pinned to 1 for dl4
    and ignored for uniform and l4.
    """

    kind: str = "uniform"
    lambda0: float = 1.0
    weights: tuple = (0.2, 0.2, 0.2, 0.2, 0.2)

    def __post_init__(self):
        if self.kind not in ("uniform", "l4", "dl4", "ql4"):
            raise InvalidSpecError(f"unknown level-0 kind {self.kind!r}")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (5,) or np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1) > 1e-9:
            raise InvalidWeightsError(f"weights must lie in [0,1] and sum to 1: {self.weights}")
        if self.kind == "ql4" and not self.lambda0 > 0:
            raise InvalidSpecError("ql4 requires lambda0 > 0")
        if self.kind == "dl4" and self.lambda0 != 1.0:
            raise InvalidSpecError("dl4 pins lambda0 = 1")

    @property
    def weight_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lambda0": self.lambda0,
            "weights": {f"w_{r}": w for r, w in zip(RULES, self.weights)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Level0Spec":
        w = d.get("weights", {})
        if isinstance(w, dict):
            weights = tuple(float(w.get(f"w_{r}", 0.2)) for r in RULES)
        else:
            weights = tuple(float(x) for x in w)
        return cls(kind=d["kind"], lambda0=float(d.get("lambda0", 1.0)), weights=weights)


@dataclass(frozen=True)
class ModelSpec:
    """A strategic component paired with an optional non-strategic one.

    ``strategic`` is one of none, nash, qre, pqch.  ``beta`` is the
    non-strategic population share for the equilibrium models; ``tau`` is
    the Poisson level mean for pqch.  Nash pins the precision to
    NASH_LAMBDA at evaluation time.
    """

    strategic: str = "qre"
    nonstrategic: Level0Spec | None = None
    lam: float = 0.1
    beta: float = 0.0
    tau: float = 1.0
    max_level: int = MAX_LEVEL

    def __post_init__(self):
        if self.strategic not in ("none", "nash", "qre", "pqch"):
            raise InvalidSpecError(f"unknown strategic component {self.strategic!r}")
        if self.strategic == "none" and self.nonstrategic is None:
            raise InvalidSpecError("model needs at least one component")
        if self.nonstrategic is None and self.beta != 0.0:
            raise InvalidSpecError("beta requires a non-strategic component")
        if not 0.0 <= self.beta <= 1.0:
            raise InvalidSpecError(f"beta must lie in [0,1], got {self.beta}")
        if self.lam < 0 or self.tau < 0:
            raise InvalidSpecError("lam and tau must be nonnegative")

    @property
    def name(self) -> str:
        ns = self.nonstrategic.kind if self.nonstrategic is not None else "none"
        return f"{self.strategic}-{ns}"

    def to_dict(self) -> dict:
        return {
            "strategic": self.strategic,
            "nonstrategic": None if self.nonstrategic is None else self.nonstrategic.to_dict(),
            "lambda": self.lam,
            "beta": self.beta,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelSpec":
        ns = d.get("nonstrategic")
        return cls(
            strategic=d["strategic"],
            nonstrategic=None if ns is None else Level0Spec.from_dict(ns),
            lam=float(d.get("lambda", 0.1)),
            beta=float(d.get("beta", 0.0)),
            tau=float(d.get("tau", 1.0)),
        )


def named_model(name: str, **overrides) -> ModelSpec:
    """Build a ModelSpec from a 'STRAT-NONSTRAT' name like 'qre-ql4'."""
    parts = name.lower().split("-")
    strat = parts[0]
    ns = parts[1] if len(parts) > 1 else "none"
    nonstrategic = None if ns == "none" else Level0Spec(kind=ns, lambda0=1.0)
    defaults = dict(strategic=strat, nonstrategic=nonstrategic)
    if nonstrategic is not None and strat in ("nash", "qre"):
        defaults["beta"] = 0.5
    defaults.update(overrides)
    return ModelSpec(**defaults)


def _softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def qbr(g: PayoffGame, player: int, opp, lam: float) -> np.ndarray:
    """Quantal best response: softmax with precision lam over expected utilities."""
    opp = np.asarray(opp, dtype=float)
    if opp.shape != (g.n_actions,):
        raise DimensionMismatchError(
            f"opponent strategy has shape {opp.shape}, game has {g.n_actions} actions"
        )
    u = g.u1 if player == 0 else g.u2.T
    eu = u @ opp
    return _softmax(lam * eu)


def ql4_features(g: PayoffGame, player: int) -> dict:
    """Per-action decision-rule features: max, min, fair, eff.

    fair is the largest attainable (negative of the) utility gap between
    the two players; it is always <= 0 and equals 0 only where utilities
    coincide.
    """
    own = g.u1 if player == 0 else g.u2.T
    other = g.u2 if player == 0 else g.u1.T
    gap = -np.abs(g.u1 - g.u2)
    if player == 1:
        gap = gap.T
    return {
        "max": own.max(axis=1),
        "min": own.min(axis=1),
        "fair": gap.max(axis=1),
        "eff": (own + other).max(axis=1),
    }


def _rule_distributions(spec: Level0Spec, g: PayoffGame, player: int) -> np.ndarray:
    """Stack of the five per-rule action distributions, RULES order."""
    n = g.n_actions
    feats = ql4_features(g, player)
    rows = []
    for r in RULES[:4]:
        f = feats[r]
        if spec.kind == "l4":
            best = f >= f.max() - L4_TIE_TOL
            rows.append(best / best.sum())
        else:
            rows.append(_softmax(spec.lambda0 * f))
    rows.append(np.full(n, 1.0 / n))
    return np.vstack(rows)


def level0_predict(spec: Level0Spec, g: PayoffGame, player: int) -> np.ndarray:
    """Action distribution of the non-strategic rule."""
    n = g.n_actions
    if spec.kind == "uniform":
        return np.full(n, 1.0 / n)
    return spec.weight_array @ _rule_distributions(spec, g, player)


def truncated_poisson(tau: float, max_level: int = MAX_LEVEL) -> np.ndarray:
    """Poisson(tau) pmf truncated to levels 0..max_level and renormalized."""
    if tau < 0:
        raise NegativeTauError(f"tau must be nonnegative, got {tau}")
    w = np.array([tau**k / factorial(k) for k in range(max_level + 1)])
    return w / w.sum()


def pqch_predict(
    g: PayoffGame,
    player: int,
    tau: float,
    lam: float,
    l0: Level0Spec,
    max_level: int = MAX_LEVEL,
):
    """Poisson quantal cognitive hierarchy prediction.

    Returns (overall mixture, per-level strategy list) for the requested
    player.  Level k responds to the opponent's level-conditional mixture
    over levels 0..k-1.
    """
    levels = truncated_poisson(tau, max_level)
    pis = {p: [level0_predict(l0, g, p)] for p in (0, 1)}
    for k in range(1, max_level + 1):
        lower = levels[:k] / levels[:k].sum()
        for p in (0, 1):
            opp_mix = lower @ np.vstack(pis[1 - p][:k])
            pis[p].append(qbr(g, p, opp_mix, lam))
    overall = levels @ np.vstack(pis[player])
    return overall, pis[player]


def qre_fixed_point(
    g: PayoffGame,
    lam: float,
    beta: float = 0.0,
    l0: Level0Spec | None = None,
    tol: float = 1e-10,
    max_iter: int = 10000,
    damping: float = 0.5,
):
    """Solve the logit equilibrium s_i = QBR_i(beta*pi0 + (1-beta)*s_{-i}).

    Damped fixed-point iteration from the uniform profile; if the residual
    stalls above tol (sharp softmax regimes), polishes with a root finder.
    """
    if beta > 0 and l0 is None:
        raise InvalidSpecError("beta > 0 requires a level-0 spec")
    n = g.n_actions
    pi0 = (
        np.vstack([level0_predict(l0, g, 0), level0_predict(l0, g, 1)])
        if beta > 0
        else np.zeros((2, n))
    )

    def step(s):
        mixed = beta * pi0 + (1 - beta) * s
        return np.vstack([qbr(g, 0, mixed[1], lam), qbr(g, 1, mixed[0], lam)])

    def residual(s):
        return float(np.abs(s - step(s)).max())

    s = np.full((2, n), 1.0 / n)
    best, best_res = s, residual(s)
    for _ in range(max_iter):
        if best_res <= tol:
            return best
        s = (1 - damping) * s + damping * step(s)
        r = residual(s)
        if r < best_res:
            best, best_res = s, r

    def polish(start, precision):
        def eqn(x):
            return (x.reshape(2, n) - make_step(precision)(x.reshape(2, n))).ravel()

        sol = root(eqn, start.ravel(), tol=min(tol, 1e-13))
        out = np.clip(sol.x.reshape(2, n), 0.0, None)
        return out / out.sum(axis=1, keepdims=True)

    def make_step(precision):
        def stepped(s):
            mixed = beta * pi0 + (1 - beta) * s
            return np.vstack(
                [qbr(g, 0, mixed[1], precision), qbr(g, 1, mixed[0], precision)]
            )

        return stepped

    s = polish(best, lam)
    if residual(s) <= tol:
        return s
    if best_res <= tol:
        return best
    # iteration cycles and the direct root solve stalled: trace the
    # principal branch up from a soft precision where the map contracts
    s = np.full((2, n), 1.0 / n)
    for precision in np.linspace(min(lam, 0.5), lam, 20):
        s = polish(s, precision)
    if residual(s) <= tol:
        return s
    raise NoConvergenceError(
        f"QRE residual {residual(s):.3e} > tol {tol:.1e} on game {g.id}"
    )


def empirical_distribution(d, game_id: str, participant_id: str, n_actions: int) -> np.ndarray:
    """Leave-one-out frequency of other participants' actions in a game."""
    counts = np.zeros(n_actions)
    for obs in d.observations:
        if obs.game == game_id and obs.participant != participant_id:
            counts[obs.action] += 1
    total = counts.sum()
    if total == 0:
        raise NoOtherObservationsError(
            f"no other participant played game {game_id!r} (participant {participant_id!r})"
        )
    return counts / total


def model_predict(m: ModelSpec, g: PayoffGame, player: int, empirical=None) -> np.ndarray:
    """Predicted action distribution of a model for one player in one game."""
    if m.strategic == "none":
        return level0_predict(m.nonstrategic, g, player)
    if m.strategic == "pqch":
        if m.nonstrategic is None:
            raise InvalidSpecError("pqch requires a non-strategic component")
        overall, _ = pqch_predict(g, player, m.tau, m.lam, m.nonstrategic, m.max_level)
        return overall
    # Equilibrium models respond to the empirical distribution of play.
    if empirical is None:
        raise MissingEmpiricalError(f"{m.name} needs an empirical opponent distribution")
    lam = NASH_LAMBDA if m.strategic == "nash" else m.lam
    strategic = qbr(g, player, empirical, lam)
    if m.nonstrategic is None or m.beta == 0.0:
        return strategic
    return m.beta * level0_predict(m.nonstrategic, g, player) + (1 - m.beta) * strategic
