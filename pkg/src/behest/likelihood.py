"""Panel datasets and log-likelihoods of observed play under each model.

The hot path stacks all games of a dataset into (G, n, n) arrays and all
observations into flat index arrays, so a likelihood evaluation is a fixed
number of numpy operations regardless of dataset size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit, logsumexp

from .errors import (
    InvalidSpecError,
    NoOtherObservationsError,
    OutOfBoundsError,
    SchemaMismatchError,
    ShapeMismatchError,
)
from .models import MAX_LEVEL, NASH_LAMBDA, RULES, Level0Spec, ModelSpec, truncated_poisson

PROB_FLOOR = 1e-300

# Box constraints in natural parameter space.
BOUNDS = {
    "v": (1e-3, 1e4),
    "lam": (1e-6, 1e3),
    "lambda0": (1e-6, 1e3),
    "tau": (1e-6, 10.0),
}
LOGIT_BOX = 16.0  # box half-width for beta logits and weight logits

CSV_HEADER = ["participant_id", "game_id", "action", "opponent_action", "order"]


@dataclass(frozen=True)
class Observation:
    participant: str
    game: str
    action: int
    opponent_action: int | None = None
    order: int | None = None


@dataclass(frozen=True, eq=False)
class PlayDataset:
    """Panel of one-shot observations: who chose what in which game."""

    observations: tuple

    def __post_init__(self):
        seen = set()
        for obs in self.observations:
            key = (obs.participant, obs.game)
            if key in seen:
                raise InvalidSpecError(f"duplicate (participant, game) pair {key}")
            seen.add(key)

    @property
    def participants(self) -> list:
        out, seen = [], set()
        for obs in self.observations:
            if obs.participant not in seen:
                seen.add(obs.participant)
                out.append(obs.participant)
        return out

    @property
    def games(self) -> list:
        out, seen = [], set()
        for obs in self.observations:
            if obs.game not in seen:
                seen.add(obs.game)
                out.append(obs.game)
        return out

    def games_of(self, participant: str) -> list:
        return [o.game for o in self.observations if o.participant == participant]

    def subset(self, participants) -> "PlayDataset":
        keep = set(participants)
        return PlayDataset(tuple(o for o in self.observations if o.participant in keep))

    def __len__(self) -> int:
        return len(self.observations)


def save_dataset(d: PlayDataset, path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for o in d.observations:
            w.writerow(
                [
                    o.participant,
                    o.game,
                    o.action,
                    "" if o.opponent_action is None else o.opponent_action,
                    "" if o.order is None else o.order,
                ]
            )


def load_dataset(path) -> PlayDataset:
    obs = []
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise SchemaMismatchError(f"bad dataset header {header!r} in {path}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                obs.append(
                    Observation(
                        participant=row[0],
                        game=row[1],
                        action=int(row[2]),
                        opponent_action=int(row[3]) if row[3] != "" else None,
                        order=int(row[4]) if row[4] != "" else None,
                    )
                )
            except (IndexError, ValueError) as e:
                raise SchemaMismatchError(f"{path}: malformed row at line {lineno}: {row}") from e
    return PlayDataset(tuple(obs))


class LikelihoodData:
    """Dataset + allocation games prepared for repeated likelihood evaluation.

    All games must share the same action count.  Per-observation leave-one-out
    empirical distributions and participant groupings are parameter-free and
    precomputed once.
    """

    def __init__(self, dataset: PlayDataset, games):
        if isinstance(games, dict):
            games = dict(games)
        else:
            games = {g.id: g for g in games}
        self.dataset = dataset
        game_ids = dataset.games
        missing = [gid for gid in game_ids if gid not in games]
        if missing:
            raise InvalidSpecError(f"dataset references unknown games {missing}")
        self.games = [games[gid] for gid in game_ids]
        ns = {g.n_actions for g in self.games}
        if len(ns) != 1:
            raise ShapeMismatchError("all games in a dataset must share n_actions")
        self.n_actions = ns.pop()
        self.game_index = {gid: i for i, gid in enumerate(game_ids)}

        self.X1 = np.stack([g.x1 for g in self.games])
        self.P1 = np.stack([g.p1 for g in self.games])
        self.X2 = np.stack([g.x2 for g in self.games])
        self.P2 = np.stack([g.p2 for g in self.games])

        obs = dataset.observations
        for o in obs:
            if not 0 <= o.action < self.n_actions:
                raise InvalidSpecError(f"action {o.action} out of range in game {o.game}")
        self.obs_game = np.array([self.game_index[o.game] for o in obs], dtype=int)
        self.obs_action = np.array([o.action for o in obs], dtype=int)

        # Per-game action counts; leave-one-out empiricals are built lazily
        # because purely non-strategic likelihoods never need them.
        G, n = len(self.games), self.n_actions
        counts = np.zeros((G, n))
        np.add.at(counts, (self.obs_game, self.obs_action), 1.0)
        self.counts = counts
        self._loo = None

        participants = dataset.participants
        pidx = {p: i for i, p in enumerate(participants)}
        self.obs_participant = np.array([pidx[o.participant] for o in obs], dtype=int)
        self.n_participants = len(participants)

    @property
    def loo(self) -> np.ndarray:
        """Per-observation leave-one-out empirical distribution, shape (N, n)."""
        if self._loo is None:
            N = len(self.obs_action)
            totals = self.counts.sum(axis=1)
            loo = self.counts[self.obs_game].copy()
            loo[np.arange(N), self.obs_action] -= 1.0
            denom = totals[self.obs_game] - 1.0
            if np.any(denom <= 0):
                bad = self.games[self.obs_game[int(np.argmax(denom <= 0))]].id
                raise NoOtherObservationsError(f"game {bad!r} has a single observer")
            self._loo = loo / denom[:, None]
        return self._loo

    # -- model pieces, vectorized over the game stack --------------------

    def induced(self, v: float):
        return v * self.X1 + self.P1, v * self.X2 + self.P2

    @staticmethod
    def _softmax(logits, axis=-1):
        z = logits - logits.max(axis=axis, keepdims=True)
        e = np.exp(z)
        return e / e.sum(axis=axis, keepdims=True)

    def _rule_stack(self, U1, U2, kind, lambda0):
        """Per-rule distributions for the row player, shape (5, G, n)."""
        feats = np.stack(
            [
                U1.max(axis=2),
                U1.min(axis=2),
                (-np.abs(U1 - U2)).max(axis=2),
                (U1 + U2).max(axis=2),
            ]
        )
        if kind == "l4":
            best = feats >= feats.max(axis=2, keepdims=True) - 1e-9
            rules = best / best.sum(axis=2, keepdims=True)
        else:
            rules = self._softmax(lambda0 * feats, axis=2)
        unif = np.full(U1.shape[:2], 1.0 / self.n_actions)
        return np.concatenate([rules, unif[None]], axis=0)

    def level0(self, U1, U2, l0: Level0Spec):
        """Row-player level-0 distribution per game, shape (G, n)."""
        if l0.kind == "uniform":
            return np.full(U1.shape[:2], 1.0 / self.n_actions)
        stack = self._rule_stack(U1, U2, l0.kind, l0.lambda0)
        return np.einsum("r,rgn->gn", l0.weight_array, stack)

    def _level0_col(self, U1, U2, l0: Level0Spec):
        """Column-player level-0 distribution, via the transposed game."""
        return self.level0(np.swapaxes(U2, 1, 2), np.swapaxes(U1, 1, 2), l0)

    # -- likelihoods -----------------------------------------------------

    def loglik_equilibrium(
        self,
        v: float,
        lam: float,
        beta: float = 0.0,
        l0: Level0Spec | None = None,
        strategic: str = "qre",
        nash_lambda: float = NASH_LAMBDA,
    ) -> float:
        """Mixture likelihood: beta * level0 + (1-beta) * QBR vs leave-one-out play."""
        _check_bounds(v=v, lam=lam, beta=beta)
        if strategic == "nash":
            lam = nash_lambda
        U1, U2 = self.induced(v)
        if beta > 0.0:
            if l0 is None:
                raise InvalidSpecError("beta > 0 requires a level-0 spec")
            f0 = self.level0(U1, U2, l0)[self.obs_game, self.obs_action]
        else:
            f0 = 0.0
        if beta < 1.0:
            eu = np.einsum("oab,ob->oa", U1[self.obs_game], self.loo)
            z = lam * eu
            logp = z - logsumexp(z, axis=1, keepdims=True)
            qb = np.exp(logp[np.arange(len(self.obs_action)), self.obs_action])
        else:
            qb = 0.0
        probs = beta * f0 + (1.0 - beta) * qb
        return float(np.log(np.maximum(probs, PROB_FLOOR)).sum())

    def _pqch_level_probs(self, v, lam, tau, l0, max_level=MAX_LEVEL):
        """Row-player per-level action distributions, shape (levels+1, G, n)."""
        U1, U2 = self.induced(v)
        levels = truncated_poisson(tau, max_level)
        pi_row = [self.level0(U1, U2, l0)]
        pi_col = [self._level0_col(U1, U2, l0)]
        for k in range(1, max_level + 1):
            lower = levels[:k] / levels[:k].sum()
            mix_col = np.einsum("l,lgn->gn", lower, np.stack(pi_col[:k]))
            mix_row = np.einsum("l,lgn->gn", lower, np.stack(pi_row[:k]))
            eu_row = np.einsum("gab,gb->ga", U1, mix_col)
            eu_col = np.einsum("gab,ga->gb", U2, mix_row)
            pi_row.append(self._softmax(lam * eu_row))
            pi_col.append(self._softmax(lam * eu_col))
        return levels, np.stack(pi_row)

    def loglik_pqch(self, v, lam, tau, l0: Level0Spec, max_level=MAX_LEVEL) -> float:
        """Per-observation Poisson-QCH level-mixture likelihood."""
        _check_bounds(v=v, lam=lam, tau=tau)
        levels, pi = self._pqch_level_probs(v, lam, tau, l0, max_level)
        mixture = np.einsum("l,lgn->gn", levels, pi)
        probs = mixture[self.obs_game, self.obs_action]
        return float(np.log(np.maximum(probs, PROB_FLOOR)).sum())

    def loglik_stable_level(self, v, lam, tau, l0: Level0Spec, max_level=MAX_LEVEL) -> float:
        """Stable-level likelihood: the level mixture is per participant.

        Per participant: logsumexp over levels of [log prior + sum over their
        games of the per-level log action probability].
        """
        _check_bounds(v=v, lam=lam, tau=tau)
        levels, pi = self._pqch_level_probs(v, lam, tau, l0, max_level)
        obs_logp = np.log(np.maximum(pi[:, self.obs_game, self.obs_action], PROB_FLOOR))
        per_part = np.zeros((max_level + 1, self.n_participants))
        for lvl in range(max_level + 1):
            np.add.at(per_part[lvl], self.obs_participant, obs_logp[lvl])
        log_prior = np.log(np.maximum(levels, PROB_FLOOR))
        total = logsumexp(log_prior[:, None] + per_part, axis=0)
        return float(total.sum())

    def loglik(self, m: ModelSpec, params: "Params", stable_level: bool = False) -> float:
        """Dispatch on the model's strategic component."""
        if m.strategic == "none":
            return self.loglik_equilibrium(
                params.v, 0.0, beta=1.0, l0=params.level0(m), strategic="qre"
            )
        if m.strategic in ("qre", "nash"):
            return self.loglik_equilibrium(
                params.v,
                params.lam,
                beta=params.beta if m.nonstrategic is not None else 0.0,
                l0=params.level0(m),
                strategic=m.strategic,
            )
        fn = self.loglik_stable_level if stable_level else self.loglik_pqch
        return fn(params.v, params.lam, params.tau, params.level0(m), m.max_level)


def _check_bounds(**kw):
    for name, val in kw.items():
        if name == "beta":
            if not 0.0 <= val <= 1.0:
                raise OutOfBoundsError(f"beta = {val} outside [0, 1]")
            continue
        if val < 0:
            raise OutOfBoundsError(f"{name} = {val} must be nonnegative")


# -- parameter packing ----------------------------------------------------


@dataclass(frozen=True)
class Params:
    """Natural-space parameter record for one model."""

    v: float
    lam: float = 0.0
    beta: float = 0.0
    tau: float = 0.0
    lambda0: float = 1.0
    weights: tuple = (0.2, 0.2, 0.2, 0.2, 0.2)

    def level0(self, m: ModelSpec) -> Level0Spec | None:
        if m.nonstrategic is None:
            return None
        kind = m.nonstrategic.kind
        lambda0 = 1.0 if kind in ("dl4", "l4", "uniform") else self.lambda0
        if kind in ("l4", "dl4", "ql4"):
            return Level0Spec(kind=kind, lambda0=lambda0, weights=self.weights)
        return Level0Spec(kind=kind)

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "lambda": self.lam,
            "beta": self.beta,
            "tau": self.tau,
            "lambda0": self.lambda0,
            "weights": {f"w_{r}": w for r, w in zip(RULES, self.weights)},
        }


class ParamSchema:
    """Maps a ModelSpec to a transformed (unconstrained-style) vector.

    Positive parameters go through log, beta through logit, and the five
    rule weights through a softmax over four free logits with the uniform
    rule's logit pinned to 0.
    """

    def __init__(self, m: ModelSpec):
        self.model = m
        fields = ["v"]
        if m.strategic in ("qre", "pqch"):
            fields.append("lam")
        if m.strategic in ("qre", "nash") and m.nonstrategic is not None:
            fields.append("beta")
        if m.strategic == "pqch":
            fields.append("tau")
        ns = m.nonstrategic
        if ns is not None and ns.kind == "ql4":
            fields.append("lambda0")
        if ns is not None and ns.kind in ("l4", "dl4", "ql4"):
            fields += [f"w_{r}" for r in RULES[:4]]
        self.fields = fields
        self.dim = len(fields)

    def bounds(self):
        out = []
        for f in self.fields:
            if f in ("v", "lam", "tau", "lambda0"):
                lo, hi = BOUNDS["lam" if f == "lam" else f]
                out.append((np.log(lo), np.log(hi)))
            else:
                out.append((-LOGIT_BOX, LOGIT_BOX))
        return out

    def pack(self, p: Params) -> np.ndarray:
        x = np.empty(self.dim)
        w = np.clip(np.asarray(p.weights, dtype=float), 1e-12, None)
        for i, f in enumerate(self.fields):
            if f == "v":
                x[i] = np.log(p.v)
            elif f == "lam":
                x[i] = np.log(p.lam)
            elif f == "tau":
                x[i] = np.log(p.tau)
            elif f == "lambda0":
                x[i] = np.log(p.lambda0)
            elif f == "beta":
                x[i] = logit(p.beta)
            else:
                r = f[2:]
                x[i] = np.log(w[RULES.index(r)]) - np.log(w[4])
        return x

    def unpack(self, x) -> Params:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise SchemaMismatchError(f"expected vector of length {self.dim}, got {x.shape}")
        m = self.model
        vals = dict(zip(self.fields, x))
        logits = np.zeros(5)
        for i, r in enumerate(RULES[:4]):
            if f"w_{r}" in vals:
                logits[i] = vals[f"w_{r}"]
        z = np.exp(logits - logits.max())
        weights = tuple(z / z.sum())
        ns = m.nonstrategic
        return Params(
            v=float(np.exp(vals["v"])),
            lam=(
                NASH_LAMBDA
                if m.strategic == "nash"
                else float(np.exp(vals["lam"])) if "lam" in vals else 0.0
            ),
            beta=float(expit(vals["beta"])) if "beta" in vals else (1.0 if m.strategic == "none" else 0.0),
            tau=float(np.exp(vals["tau"])) if "tau" in vals else 0.0,
            lambda0=(
                float(np.exp(vals["lambda0"]))
                if "lambda0" in vals
                else (1.0 if ns is not None else 1.0)
            ),
            weights=weights if ns is not None and ns.kind != "uniform" else (0.2,) * 5,
        )

    def initial_params(self) -> Params:
        """Params taken from the spec's own field values."""
        m = self.model
        ns = m.nonstrategic
        return Params(
            v=1.0,
            lam=m.lam if m.strategic in ("qre", "pqch") else (NASH_LAMBDA if m.strategic == "nash" else 0.0),
            beta=m.beta,
            tau=m.tau,
            lambda0=ns.lambda0 if ns is not None else 1.0,
            weights=tuple(ns.weights) if ns is not None else (0.2,) * 5,
        )


def pack_params(m: ModelSpec, p: Params | None = None) -> np.ndarray:
    schema = ParamSchema(m)
    return schema.pack(p if p is not None else schema.initial_params())


def unpack_params(m: ModelSpec, x) -> Params:
    return ParamSchema(m).unpack(x)


# Convenience wrappers over a one-shot LikelihoodData.


def loglik_equilibrium(d, games, v, lam, beta=0.0, l0=None, strategic="qre") -> float:
    return LikelihoodData(d, games).loglik_equilibrium(v, lam, beta, l0, strategic)


def loglik_pqch(d, games, v, lam, tau, l0) -> float:
    return LikelihoodData(d, games).loglik_pqch(v, lam, tau, l0)


def loglik_stable_level(d, games, v, lam, tau, l0) -> float:
    return LikelihoodData(d, games).loglik_stable_level(v, lam, tau, l0)
