"""Synthetic panel data generated from a model with known (v*, theta).

Participants play sequentially; equilibrium-model agents respond to the
running empirical distribution of earlier participants (uniform for the
first), mirroring the play-against-the-previous-participant protocol.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError
from .estimation import maximize_likelihood
from .evaluation import relative_error
from .games import PayoffGame, allocation_from_payoff, induce_payoff_game
from .likelihood import Observation, Params, PlayDataset
from .models import (
    NASH_LAMBDA,
    ModelSpec,
    level0_predict,
    qbr,
    truncated_poisson,
)


@dataclass(frozen=True)
class SimulationConfig:
    model: ModelSpec
    v_star: float
    n_participants: int
    games: tuple
    pairing: str = "previous"  # "previous" or "pool"
    seed: int = 0
    stable_levels: bool = True  # pqch only: draw one level per participant
    # equilibrium models only: respond to the running empirical distribution
    # ("empirical") or draw i.i.d. from the solved fixed point ("profile")
    equilibrium_play: str = "empirical"

    def __post_init__(self):
        if self.v_star <= 0:
            raise InvalidConfigError("v_star must be positive")
        if self.pairing not in ("previous", "pool"):
            raise InvalidConfigError(f"unknown pairing {self.pairing!r}")
        if self.equilibrium_play not in ("empirical", "profile"):
            raise InvalidConfigError(
                f"unknown equilibrium_play {self.equilibrium_play!r}"
            )
        if self.pairing == "previous" and self.n_participants < 2:
            raise InvalidConfigError("previous-participant pairing needs >= 2 participants")
        if not self.games:
            raise InvalidConfigError("need at least one game")


def build_allocation_games(cfg: SimulationConfig):
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    return [allocation_from_payoff(g, cfg.v_star, rng) for g in cfg.games]


def _pqch_level_strategies(m: ModelSpec, g: PayoffGame, player: int):
    """Per-level strategies of the pqch recursion for one player."""
    from .models import pqch_predict

    _, per_level = pqch_predict(g, player, m.tau, m.lam, m.nonstrategic, m.max_level)
    return per_level


def simulate_dataset(cfg: SimulationConfig) -> PlayDataset:
    """Draw one action per (participant, game) from the generating model."""
    m = cfg.model
    allocs = build_allocation_games(cfg)
    # Simulated play happens in the payoff games induced at the true value.
    induced = [induce_payoff_game(a, cfg.v_star) for a in allocs]
    n = induced[0].n_actions
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 1]))

    l0_preds = (
        [level0_predict(m.nonstrategic, g, 0) for g in induced]
        if m.nonstrategic is not None
        else None
    )
    if m.strategic == "pqch":
        level_strats = [_pqch_level_strategies(m, g, 0) for g in induced]
        level_dist = truncated_poisson(m.tau, m.max_level)
    profile_strats = None
    if m.strategic in ("qre", "nash") and cfg.equilibrium_play == "profile":
        from .models import qre_fixed_point

        lam = NASH_LAMBDA if m.strategic == "nash" else m.lam
        # sampling accuracy, not equilibrium-computation accuracy: a loose
        # tolerance keeps sharp high-lambda profiles solvable
        profile_strats = [
            qre_fixed_point(g, lam, m.beta if m.nonstrategic is not None else 0.0,
                            m.nonstrategic, tol=1e-6)[0]
            for g in induced
        ]

    counts = [np.zeros(n) for _ in induced]
    prev_actions: list | None = None
    observations = []
    for i in range(cfg.n_participants):
        pid = f"p{i:04d}"
        actions = []
        if m.strategic == "pqch" and cfg.stable_levels:
            lvl = int(rng.choice(len(level_dist), p=level_dist))
        for gi, g in enumerate(induced):
            if m.strategic == "none":
                probs = l0_preds[gi]
            elif m.strategic == "pqch":
                if cfg.stable_levels:
                    probs = level_strats[gi][lvl]
                else:
                    lvl_g = int(rng.choice(len(level_dist), p=level_dist))
                    probs = level_strats[gi][lvl_g]
            elif profile_strats is not None:
                probs = profile_strats[gi]
                if m.nonstrategic is not None and m.beta > 0:
                    probs = m.beta * l0_preds[gi] + (1 - m.beta) * probs
            else:
                emp = counts[gi] / counts[gi].sum() if counts[gi].sum() > 0 else np.full(n, 1.0 / n)
                lam = NASH_LAMBDA if m.strategic == "nash" else m.lam
                strategic = qbr(g, 0, emp, lam)
                if m.nonstrategic is not None and m.beta > 0:
                    probs = m.beta * l0_preds[gi] + (1 - m.beta) * strategic
                else:
                    probs = strategic
            a = int(rng.choice(n, p=probs))
            actions.append(a)
            if cfg.pairing == "previous":
                opp = prev_actions[gi] if prev_actions is not None else None
            else:
                pool = counts[gi]
                opp = int(rng.choice(n, p=pool / pool.sum())) if pool.sum() > 0 else None
            observations.append(
                Observation(
                    participant=pid,
                    game=g.id,
                    action=a,
                    opponent_action=opp,
                    order=gi,
                )
            )
        for gi, a in enumerate(actions):
            counts[gi][a] += 1
        prev_actions = actions
    return PlayDataset(tuple(observations))


def true_params(cfg: SimulationConfig) -> Params:
    m = cfg.model
    ns = m.nonstrategic
    return Params(
        v=cfg.v_star,
        lam=m.lam,
        beta=m.beta,
        tau=m.tau,
        lambda0=ns.lambda0 if ns is not None else 1.0,
        weights=tuple(ns.weights) if ns is not None else (0.2,) * 5,
    )


def recovery_experiment(
    cfg: SimulationConfig,
    fit_model: ModelSpec,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    **fit_kwargs,
):
    """Simulate, fit, and report (true params, fit result, relative value error)."""
    d = simulate_dataset(cfg)
    allocs = build_allocation_games(cfg)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    result = maximize_likelihood(d, allocs, fit_model, restarts=restarts, rng=rng, **fit_kwargs)
    err = relative_error(result.v_hat, cfg.v_star)
    return true_params(cfg), result, err
