"""Evaluation protocol: scenarios, relative error, cross-validation,
bootstrap threshold analysis, and welfare prediction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import (
    NonPositiveValueError,
    OddGameCountError,
    TooFewParticipantsError,
    TooFewSamplesError,
)
from .estimation import maximize_likelihood
from .games import allocation_from_payoff, induce_payoff_game
from .likelihood import LikelihoodData, PlayDataset
from .models import ModelSpec, model_predict


@dataclass(frozen=True)
class Scenario:
    """One random allocation-game mapping of the payoff-game set at a given v*."""

    v_star: float
    allocation_games: tuple
    seed: int

    @property
    def games_by_id(self) -> dict:
        return {g.id: g for g in self.allocation_games}


def make_scenarios(games, v_star: float, k: int, rng: np.random.Generator) -> list:
    """k independent allocation mappings of the same payoff games."""
    if v_star <= 0:
        raise NonPositiveValueError(f"v_star must be positive, got {v_star}")
    scenarios = []
    for i in range(k):
        seed = int(rng.integers(0, 2**31 - 1))
        sub = np.random.default_rng(seed)
        allocs = tuple(allocation_from_payoff(g, v_star, sub) for g in games)
        scenarios.append(Scenario(v_star=v_star, allocation_games=allocs, seed=seed))
    return scenarios


def relative_error(v_hat: float, v_star: float) -> float:
    if v_star <= 0:
        raise NonPositiveValueError(f"v_star must be positive, got {v_star}")
    return abs(v_hat - v_star) / v_star


def t_confidence_interval(samples, level: float = 0.95):
    """Student-t interval (lower, mean, upper) for the sample mean."""
    x = np.asarray(list(samples), dtype=float)
    n = x.size
    if n < 2:
        raise TooFewSamplesError("need at least 2 samples for a t interval")
    mean = float(x.mean())
    s = float(x.std(ddof=1))
    if s == 0.0:
        return mean, mean, mean
    half = float(stats.t.ppf(0.5 + level / 2.0, n - 1)) * s / np.sqrt(n)
    return mean - half, mean, mean + half


@dataclass
class CVResult:
    mean_v: float
    fold_v_estimates: list
    test_logliks: list


def cross_validate(
    d: PlayDataset,
    games,
    m: ModelSpec,
    folds: int = 10,
    rounds: int = 10,
    rng: np.random.Generator | None = None,
    restarts: int = 2,
    **fit_kwargs,
) -> CVResult:
    """Repeated k-fold CV over participants; held-out folds score prediction.

    Test log-likelihood is the held-out average per-observation log-likelihood
    at the fitted parameters, with empirical distributions taken within the
    held-out fold (leave-one-out).
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    participants = d.participants
    if len(participants) < folds or folds < 2:
        raise TooFewParticipantsError(
            f"{len(participants)} participants cannot fill {folds} folds"
        )
    fold_vs, test_lls = [], []
    for _ in range(rounds):
        order = rng.permutation(len(participants))
        assignments = np.array_split(order, folds)
        for test_idx in assignments:
            test_set = {participants[i] for i in test_idx}
            train = d.subset([p for p in participants if p not in test_set])
            test = d.subset(sorted(test_set))
            fit_rng = np.random.default_rng(rng.integers(0, 2**31 - 1))
            res = maximize_likelihood(
                train, games, m, restarts=restarts, rng=fit_rng, **fit_kwargs
            )
            fold_vs.append(res.v_hat)
            test_data = LikelihoodData(test, games)
            ll = test_data.loglik(m, res.theta_hat) / len(test)
            test_lls.append(float(ll))
    return CVResult(mean_v=float(np.mean(fold_vs)), fold_v_estimates=fold_vs, test_logliks=test_lls)


def _default_fit(dataset, games, model, rng, restarts=2, **fit_kwargs):
    return maximize_likelihood(
        dataset, games, model, restarts=restarts, rng=rng, **fit_kwargs
    ).v_hat


def _resample_participants(d: PlayDataset, rng: np.random.Generator) -> PlayDataset:
    """Participant bootstrap: whole panels drawn with replacement, ids renamed."""
    from .likelihood import Observation

    participants = d.participants
    by_part = {p: [o for o in d.observations if o.participant == p] for p in participants}
    draw = rng.integers(0, len(participants), size=len(participants))
    obs = []
    for k, i in enumerate(draw):
        for o in by_part[participants[i]]:
            obs.append(
                Observation(
                    participant=f"b{k:04d}",
                    game=o.game,
                    action=o.action,
                    opponent_action=o.opponent_action,
                    order=o.order,
                )
            )
    return PlayDataset(tuple(obs))


def bootstrap_threshold(
    d: PlayDataset,
    models,
    scenarios,
    alpha: float = 0.10,
    B: int = 1000,
    rng: np.random.Generator | None = None,
    fit_fn=None,
):
    """Fraction of scenarios with relative error below alpha, bootstrapped.

    Returns {model name: (median fraction, (band lo, band hi))} over B
    participant resamples, band being the middle 95%.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    fit = fit_fn if fit_fn is not None else _default_fit
    fractions = {m.name: [] for m in models}
    for _ in range(B):
        sample = _resample_participants(d, rng)
        for m in models:
            hits = 0
            for sc in scenarios:
                fit_rng = np.random.default_rng(rng.integers(0, 2**31 - 1))
                v_hat = fit(sample, sc.games_by_id, m, fit_rng)
                if relative_error(v_hat, sc.v_star) < alpha:
                    hits += 1
            fractions[m.name].append(hits / len(scenarios))
    out = {}
    for name, fr in fractions.items():
        fr = np.asarray(fr)
        out[name] = (
            float(np.median(fr)),
            (float(np.quantile(fr, 0.025)), float(np.quantile(fr, 0.975))),
        )
    return out


def welfare_prediction(
    d: PlayDataset,
    games,
    m: ModelSpec,
    rng: np.random.Generator | None = None,
    restarts: int = 2,
    split: tuple | None = None,
    **fit_kwargs,
) -> float:
    """Fit on half the games, predict average welfare on the held-out half.

    Predicted welfare per held-out game treats the two players' predicted
    marginals as independent at the fitted (v, theta); empirical welfare is
    the mean realized payoff of observed actions (against recorded opponent
    actions where available, else the empirical distribution), in the game
    induced at the true endowed value.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    games = dict(games) if isinstance(games, dict) else {g.id: g for g in games}
    ids = sorted(games)
    if split is None:
        if len(ids) % 2 != 0:
            raise OddGameCountError(f"cannot split {len(ids)} games in half")
        order = rng.permutation(len(ids))
        half = len(ids) // 2
        train_ids = {ids[i] for i in order[:half]}
        test_ids = [g for g in ids if g not in train_ids]
    else:
        train_ids, test_ids = set(split[0]), list(split[1])

    train_obs = tuple(o for o in d.observations if o.game in train_ids)
    test_obs = [o for o in d.observations if o.game in test_ids]
    train = PlayDataset(train_obs)
    res = maximize_likelihood(
        train,
        {g: games[g] for g in train_ids},
        m,
        restarts=restarts,
        rng=np.random.default_rng(rng.integers(0, 2**31 - 1)),
        **fit_kwargs,
    )
    theta = res.theta_hat

    errors = []
    for gid in test_ids:
        a = games[gid]
        obs_g = [o for o in test_obs if o.game == gid]
        if not obs_g:
            continue
        # Empirical side: realized payoffs at the true endowed value.
        g_true = induce_payoff_game(a, a.v_star)
        emp = np.zeros(g_true.n_actions)
        for o in obs_g:
            emp[o.action] += 1
        emp /= emp.sum()
        realized = []
        for o in obs_g:
            if o.opponent_action is not None:
                realized.append(g_true.u1[o.action, o.opponent_action])
            else:
                realized.append(float(g_true.u1[o.action, :] @ emp))
        empirical_welfare = float(np.mean(realized))

        # Predicted side: model play in the game induced at the estimate.
        g_hat = induce_payoff_game(a, theta.v)
        spec = _spec_with(m, theta)
        s1 = model_predict(spec, g_hat, 0, empirical=emp)
        s2 = model_predict(spec, g_hat, 1, empirical=emp)
        pred = 0.5 * float(s1 @ g_hat.u1 @ s2) + 0.5 * float(s1 @ g_hat.u2 @ s2)
        denom = abs(empirical_welfare) if empirical_welfare != 0 else 1.0
        errors.append(abs(pred - empirical_welfare) / denom)
    return float(np.mean(errors))


def _spec_with(m: ModelSpec, theta) -> ModelSpec:
    """ModelSpec carrying the fitted parameter values."""
    return ModelSpec(
        strategic=m.strategic,
        nonstrategic=theta.level0(m),
        lam=theta.lam,
        beta=theta.beta if m.nonstrategic is not None and m.strategic in ("qre", "nash") else 0.0,
        tau=theta.tau if m.strategic == "pqch" else m.tau,
        max_level=m.max_level,
    )
