import numpy as np
import pytest

from behest import (
    Level0Spec,
    ModelSpec,
    PlayDataset,
    empirical_distribution,
    level0_predict,
    make_payoff_game,
    model_predict,
    pqch_predict,
    qbr,
    ql4_features,
    qre_fixed_point,
    random_payoff_game,
    truncated_poisson,
)
from behest.errors import (
    InvalidSpecError,
    InvalidWeightsError,
    MissingEmpiricalError,
    NegativeTauError,
    NoOtherObservationsError,
)
from behest.likelihood import Observation
from behest.models import NASH_LAMBDA


def uniform_spec():
    return Level0Spec(kind="uniform")


def ql4_spec(lambda0=1.0, weights=(0.2,) * 5):
    return Level0Spec(kind="ql4", lambda0=lambda0, weights=weights)


# -- quantal best response -------------------------------------------------


def test_qbr_lambda_zero_uniform():
    g = random_payoff_game(np.random.default_rng(0))
    s = qbr(g, 0, [0.3, 0.3, 0.4], 0.0)
    assert np.allclose(s, 1.0 / 3.0)


def test_qbr_two_action_logit_value():
    g = make_payoff_game([[1.0, 1.0], [0.0, 0.0]], np.zeros((2, 2)))
    s = qbr(g, 0, [0.5, 0.5], 1.0)
    assert s[0] == pytest.approx(0.73106, abs=1e-5)
    assert s[1] == pytest.approx(0.26894, abs=1e-5)


def test_qbr_large_lambda_concentrates_on_argmax():
    rng = np.random.default_rng(1)
    g = random_payoff_game(rng)
    opp = np.array([0.6, 0.3, 0.1])
    eu = g.u1 @ opp
    s = qbr(g, 0, opp, 1000.0)
    assert s[np.argmax(eu)] >= 1 - 1e-6


def test_qbr_matches_brute_force_softmax():
    rng = np.random.default_rng(2)
    for _ in range(50):
        g = random_payoff_game(rng)
        opp = rng.dirichlet(np.ones(3))
        lam = rng.uniform(0, 2)
        eu = g.u1 @ opp
        z = lam * eu - (lam * eu).max()
        expected = np.exp(z) / np.exp(z).sum()
        assert np.abs(qbr(g, 0, opp, lam) - expected).max() < 1e-12


def test_qbr_normalized_and_monotone_in_lambda():
    rng = np.random.default_rng(3)
    g = random_payoff_game(rng)
    opp = np.array([0.5, 0.25, 0.25])
    best = int(np.argmax(g.u1 @ opp))
    prev = 0.0
    for lam in (0.0, 0.01, 0.1, 0.5, 1.0, 5.0):
        s = qbr(g, 0, opp, lam)
        assert abs(s.sum() - 1.0) < 1e-12 and np.all(s >= 0)
        assert s[best] >= prev - 1e-12
        prev = s[best]


# -- quantal-linear4 features and level-0 rules ---------------------------


def test_ql4_features_equal_utilities_fair_zero():
    u = np.random.default_rng(0).uniform(0, 10, (3, 3))
    g = make_payoff_game(u, u)
    feats = ql4_features(g, 0)
    assert np.allclose(feats["fair"], 0.0)


def test_ql4_features_hand_example():
    g = make_payoff_game([[3.0, 7.0], [0.0, 0.0]], [[5.0, 5.0], [5.0, 5.0]])
    feats = ql4_features(g, 0)
    assert feats["max"][0] == 7.0
    assert feats["min"][0] == 3.0
    assert feats["eff"][0] == 12.0


def test_ql4_features_constant_game():
    g = make_payoff_game(np.full((3, 3), 4.0), np.full((3, 3), 4.0))
    feats = ql4_features(g, 0)
    for v in feats.values():
        assert np.allclose(v, v[0])


def test_level0_unif_weight_one_is_uniform():
    spec = Level0Spec(kind="ql4", lambda0=2.0, weights=(0, 0, 0, 0, 1.0))
    g = random_payoff_game(np.random.default_rng(4))
    assert np.allclose(level0_predict(spec, g, 0), 1.0 / 3.0)


def test_level0_ql4_constant_game_uniform():
    g = make_payoff_game(np.full((3, 3), 2.0), np.full((3, 3), 2.0))
    assert np.allclose(level0_predict(ql4_spec(), g, 0), 1.0 / 3.0)


def test_ql4_lambda0_one_equals_dl4():
    rng = np.random.default_rng(5)
    dl4 = Level0Spec(kind="dl4", lambda0=1.0, weights=(0.3, 0.1, 0.2, 0.3, 0.1))
    ql4 = Level0Spec(kind="ql4", lambda0=1.0, weights=(0.3, 0.1, 0.2, 0.3, 0.1))
    for _ in range(100):
        g = random_payoff_game(rng)
        assert np.array_equal(level0_predict(ql4, g, 0), level0_predict(dl4, g, 0))


def test_l4_tie_handling_uniform_over_optimizers():
    # Both actions share the same max utility: the max rule splits evenly.
    g = make_payoff_game([[7.0, 1.0], [7.0, 2.0]], np.zeros((2, 2)))
    spec = Level0Spec(kind="l4", weights=(1.0, 0, 0, 0, 0))
    assert np.allclose(level0_predict(spec, g, 0), [0.5, 0.5])


def test_ql4_converges_to_l4_at_large_lambda0():
    rng = np.random.default_rng(6)
    w = (0.25, 0.25, 0.25, 0.15, 0.1)
    l4 = Level0Spec(kind="l4", weights=w)
    for _ in range(20):
        g = random_payoff_game(rng)
        for lam0 in (1e3, 1e4):
            ql4 = Level0Spec(kind="ql4", lambda0=lam0, weights=w)
            gap = np.abs(level0_predict(ql4, g, 0) - level0_predict(l4, g, 0)).max()
            if lam0 == 1e4:
                assert gap < 1e-3


def test_l4_invariant_under_positive_affine_transform():
    rng = np.random.default_rng(7)
    w = (0.4, 0.2, 0.2, 0.2, 0.0)
    l4 = Level0Spec(kind="l4", weights=w)
    g = random_payoff_game(rng)
    g2 = make_payoff_game(3.0 * g.u1 + 7.0, 3.0 * g.u2 + 7.0)
    assert np.allclose(level0_predict(l4, g, 0), level0_predict(l4, g2, 0))


def test_invalid_weights_rejected():
    with pytest.raises(InvalidWeightsError):
        Level0Spec(kind="ql4", weights=(0.5, 0.5, 0.5, 0, 0))
    with pytest.raises(InvalidSpecError):
        Level0Spec(kind="dl4", lambda0=2.0)


# -- truncated Poisson and PQCH -------------------------------------------


def test_truncated_poisson_tau_zero():
    assert np.array_equal(truncated_poisson(0.0), [1.0, 0.0, 0.0, 0.0])


def test_truncated_poisson_tau_one():
    expected = np.array([1.0, 1.0, 0.5, 1.0 / 6.0])
    expected /= expected.sum()
    assert np.abs(truncated_poisson(1.0) - expected).max() < 1e-12


def test_truncated_poisson_sums_to_one():
    for tau in (0.0, 0.3, 1.0, 5.0, 10.0):
        assert abs(truncated_poisson(tau).sum() - 1.0) < 1e-12


def test_truncated_poisson_negative_tau():
    with pytest.raises(NegativeTauError):
        truncated_poisson(-0.1)


def test_pqch_tau_zero_equals_level0():
    g = random_payoff_game(np.random.default_rng(8))
    spec = ql4_spec(lambda0=0.5)
    overall, per_level = pqch_predict(g, 0, 0.0, 1.0, spec)
    assert np.allclose(overall, level0_predict(spec, g, 0))


def test_pqch_lambda_zero_uniform_with_uniform_l0():
    g = random_payoff_game(np.random.default_rng(9))
    overall, _ = pqch_predict(g, 0, 1.5, 0.0, uniform_spec())
    assert np.allclose(overall, 1.0 / 3.0)


def test_pqch_matches_hand_rolled_recursion():
    # Straight-line reimplementation of the level recursion as an oracle.
    g = make_payoff_game([[3.0, 1.0], [0.0, 2.0]], [[1.0, 0.0], [2.0, 1.0]])
    tau, lam = 1.0, 1.0
    L = np.array([1.0, 1.0, 0.5, 1.0 / 6.0])
    L /= L.sum()

    def softmax(z):
        e = np.exp(z - z.max())
        return e / e.sum()

    pis = {0: [np.array([0.5, 0.5])], 1: [np.array([0.5, 0.5])]}
    for k in range(1, 4):
        lower = L[:k] / L[:k].sum()
        mix1 = sum(lower[l] * pis[1][l] for l in range(k))
        mix0 = sum(lower[l] * pis[0][l] for l in range(k))
        pis[0].append(softmax(lam * (g.u1 @ mix1)))
        pis[1].append(softmax(lam * (g.u2.T @ mix0)))
    expected = sum(L[k] * pis[0][k] for k in range(4))

    overall, _ = pqch_predict(g, 0, tau, lam, uniform_spec())
    assert np.abs(overall - expected).max() < 1e-10


def test_pqch_level1_reduction():
    # All mass on level 1: prediction equals QBR against uniform.
    g = random_payoff_game(np.random.default_rng(10))
    lam = 0.7
    _, per_level = pqch_predict(g, 0, 1.0, lam, uniform_spec())
    assert np.allclose(per_level[1], qbr(g, 0, np.full(3, 1 / 3), lam))


# -- QRE fixed point -------------------------------------------------------


def test_qre_lambda_zero_uniform():
    g = random_payoff_game(np.random.default_rng(11))
    s = qre_fixed_point(g, 0.0)
    assert np.allclose(s, 1.0 / 3.0)


def test_qre_constant_game_uniform():
    g = make_payoff_game(np.full((3, 3), 5.0), np.full((3, 3), 5.0))
    s = qre_fixed_point(g, 2.0)
    assert np.allclose(s, 1.0 / 3.0, atol=1e-9)


def test_qre_residual_small():
    rng = np.random.default_rng(12)
    for _ in range(10):
        g = random_payoff_game(rng)
        s = qre_fixed_point(g, 0.5, tol=1e-10)
        target = np.vstack([qbr(g, 0, s[1], 0.5), qbr(g, 1, s[0], 0.5)])
        assert np.abs(s - target).max() <= 1e-8


def test_qre_with_level0_mixture():
    rng = np.random.default_rng(13)
    g = random_payoff_game(rng)
    l0 = ql4_spec(lambda0=0.3)
    s = qre_fixed_point(g, 1.0, beta=0.5, l0=l0)
    pi0 = np.vstack([level0_predict(l0, g, 0), level0_predict(l0, g, 1)])
    mixed = 0.5 * pi0 + 0.5 * s
    target = np.vstack([qbr(g, 0, mixed[1], 1.0), qbr(g, 1, mixed[0], 1.0)])
    assert np.abs(s - target).max() <= 1e-8


# -- empirical distribution and dispatch ----------------------------------


def _dataset(rows):
    return PlayDataset(tuple(Observation(p, g, a) for p, g, a in rows))


def test_empirical_distribution_counts_others():
    d = _dataset([("p1", "g", 0), ("p2", "g", 0), ("p3", "g", 1), ("me", "g", 2)])
    assert np.allclose(empirical_distribution(d, "g", "me", 3), [2 / 3, 1 / 3, 0])


def test_empirical_distribution_leave_one_out():
    d = _dataset([("me", "g", 1), ("p2", "g", 0), ("p3", "g", 0)])
    assert np.allclose(empirical_distribution(d, "g", "me", 3), [1, 0, 0])


def test_empirical_distribution_no_others():
    d = _dataset([("me", "g", 0)])
    with pytest.raises(NoOtherObservationsError):
        empirical_distribution(d, "g", "me", 3)


def test_model_predict_beta_degenerate_cases():
    g = random_payoff_game(np.random.default_rng(14))
    emp = np.array([0.5, 0.3, 0.2])
    l0 = ql4_spec(lambda0=0.4)
    m1 = ModelSpec(strategic="qre", nonstrategic=l0, lam=0.5, beta=1.0)
    assert np.allclose(model_predict(m1, g, 0, emp), level0_predict(l0, g, 0))
    m0 = ModelSpec(strategic="qre", nonstrategic=None, lam=0.5, beta=0.0)
    assert np.allclose(model_predict(m0, g, 0, emp), qbr(g, 0, emp, 0.5))


def test_model_predict_nash_is_qre_at_pinned_lambda():
    g = random_payoff_game(np.random.default_rng(15))
    emp = np.array([0.2, 0.2, 0.6])
    nash = ModelSpec(strategic="nash")
    qre = ModelSpec(strategic="qre", lam=NASH_LAMBDA)
    assert np.allclose(model_predict(nash, g, 0, emp), model_predict(qre, g, 0, emp))


def test_model_predict_missing_empirical():
    g = random_payoff_game(np.random.default_rng(16))
    with pytest.raises(MissingEmpiricalError):
        model_predict(ModelSpec(strategic="qre"), g, 0)
