"""Walkthrough: payoff/allocation games and the behavioral models.

Builds a random game, decomposes it into an allocation game, and compares
the action distributions predicted by the different model components.
"""

import numpy as np

from behest import (
    Level0Spec,
    ModelSpec,
    allocation_from_payoff,
    induce_payoff_game,
    level0_predict,
    pqch_predict,
    qbr,
    qre_fixed_point,
    random_payoff_game,
)

rng = np.random.default_rng(1)

g = random_payoff_game(rng, id="demo")
print("payoff matrix (row player):")
print(np.round(g.u1, 1))

# Decompose into units of a good plus a payment at an endowed value of 10.
v_star = 10.0
a = allocation_from_payoff(g, v_star, rng)
print("\nallocations x1 (payments make up the rest of each payoff):")
print(np.round(a.x1, 2))
back = induce_payoff_game(a, v_star)
print("round-trip max error:", np.abs(back.u1 - g.u1).max())

# A mistaken valuation induces a different game entirely.
wrong = induce_payoff_game(a, 2 * v_star)
print("payoff shift under doubled valuation:", np.round((wrong.u1 - g.u1).max(), 1))

# Non-strategic rules.
for kind in ("uniform", "l4", "dl4"):
    spec = Level0Spec(kind=kind)
    print(f"\n{kind} level-0 prediction:", np.round(level0_predict(spec, g, 0), 3))

# Strategic responses at increasing precision.
uniform_opp = np.full(3, 1 / 3)
for lam in (0.05, 0.5, 5.0):
    print(f"QBR to uniform, lam={lam}:", np.round(qbr(g, 0, uniform_opp, lam), 3))

s = qre_fixed_point(g, lam=0.5)
print("\nQRE profile (row, col):")
print(np.round(s, 3))

# Cognitive hierarchy: the overall mixture and what each level plays.
m = ModelSpec(strategic="pqch", lam=0.5, tau=1.0,
              nonstrategic=Level0Spec(kind="uniform"))
overall, per_level = pqch_predict(g, 0, m.tau, m.lam, m.nonstrategic)
print("\nPoisson-QCH mixture:", np.round(overall, 3))
for k, p in enumerate(per_level):
    print(f"  level {k}:", np.round(p, 3))
