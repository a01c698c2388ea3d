"""Joint maximum-likelihood estimation of valuations and behavioral parameters.

Optimization runs in the transformed parameter space (logs / logits, see
likelihood.ParamSchema) with box bounds, L-BFGS-B, and central-difference
numeric gradients.  Multistart: one canonical start plus seeded random
starts drawn uniformly inside the transformed boxes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from .errors import AllRestartsFailedError, EmptyDatasetError
from .likelihood import BOUNDS, LikelihoodData, Params, ParamSchema, PlayDataset
from .models import NASH_LAMBDA, ModelSpec

GRAD_STEP = 1e-5
CONVERGED_GTOL = 1e-6


def central_diff_grad(f, x, step: float = GRAD_STEP) -> np.ndarray:
    """Central-difference gradient with per-coordinate step step*(1+|x_i|)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * (1.0 + abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


@dataclass
class EstimationResult:
    v_hat: float
    theta_hat: Params
    loglik: float
    n_restarts_used: int
    converged: bool
    restarts: list

    def to_dict(self) -> dict:
        return {
            "v_hat": self.v_hat,
            "theta_hat": self.theta_hat.to_dict(),
            "loglik": self.loglik,
            "n_restarts_used": self.n_restarts_used,
            "converged": self.converged,
            "restarts": self.restarts,
        }

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")


def _canonical_start(schema: ParamSchema, data: LikelihoodData) -> Params:
    """Median payoff scale for v; mild defaults for the behavioral knobs."""
    med_p = float(np.median(np.abs(np.concatenate([data.P1.ravel(), data.P2.ravel()]))))
    med_x = float(np.median(np.concatenate([data.X1.ravel(), data.X2.ravel()])))
    v0 = med_p / med_x if med_x > 0 and med_p > 0 else 10.0
    v0 = float(np.clip(v0, *BOUNDS["v"]))
    return Params(v=v0, lam=0.1, beta=0.5, tau=1.0, lambda0=1.0, weights=(0.2,) * 5)


def _fit_from(objective, x0, bounds, maxiter):
    """One L-BFGS-B run; falls back to Powell on abnormal termination."""
    res = minimize(
        objective,
        x0,
        jac=lambda x: central_diff_grad(objective, x),
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": maxiter, "ftol": 1e-12, "gtol": 1e-9},
    )
    if not res.success and "ABNORMAL" in str(res.message).upper():
        res2 = minimize(objective, res.x, method="Powell", bounds=bounds)
        if res2.fun < res.fun:
            res = res2
    return res


def maximize_likelihood(
    d: PlayDataset,
    games,
    m: ModelSpec,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    stable_level: bool = False,
    maxiter: int = 300,
    nash_lambda: float = NASH_LAMBDA,
) -> EstimationResult:
    """Maximize the model's log-likelihood jointly over all free parameters."""
    if len(d) == 0:
        raise EmptyDatasetError("cannot estimate on an empty dataset")
    rng = rng if rng is not None else np.random.default_rng(0)
    data = LikelihoodData(d, games)
    schema = ParamSchema(m)
    bounds = schema.bounds()
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])

    def loglik_at(params: Params) -> float:
        if m.strategic == "nash":
            return data.loglik_equilibrium(
                params.v,
                0.0,
                beta=params.beta if m.nonstrategic is not None else 0.0,
                l0=params.level0(m),
                strategic="nash",
                nash_lambda=nash_lambda,
            )
        return data.loglik(m, params, stable_level=stable_level)

    def objective(x):
        return -loglik_at(schema.unpack(x))

    starts = [schema.pack(_canonical_start(schema, data))]
    for _ in range(restarts):
        starts.append(lo + rng.uniform(size=schema.dim) * (hi - lo))

    per_restart = []
    best = None
    for idx, x0 in enumerate(starts):
        try:
            res = _fit_from(objective, x0, bounds, maxiter)
        except Exception as e:  # noqa: BLE001 - record and move on
            per_restart.append({"restart": idx, "error": str(e)})
            continue
        ll = -float(res.fun)
        per_restart.append({"restart": idx, "loglik": ll, "success": bool(res.success)})
        if best is None or ll > best[0] + 1e-12:
            best = (ll, idx, np.asarray(res.x))
    if best is None:
        raise AllRestartsFailedError(f"no restart produced a finite optimum for {m.name}")

    ll, _, x_opt = best
    theta = schema.unpack(x_opt)
    grad = central_diff_grad(objective, x_opt)
    # Project out gradient components pointing into the active box bounds.
    at_lo = (x_opt <= lo + 1e-9) & (grad > 0)
    at_hi = (x_opt >= hi - 1e-9) & (grad < 0)
    grad = np.where(at_lo | at_hi, 0.0, grad)
    converged = bool(np.max(np.abs(grad)) <= CONVERGED_GTOL) if schema.dim else True
    return EstimationResult(
        v_hat=theta.v,
        theta_hat=theta,
        loglik=float(loglik_at(theta)),
        n_restarts_used=len(starts),
        converged=converged,
        restarts=per_restart,
    )


def estimate_nash(
    d: PlayDataset,
    games,
    lambda_fixed: float = NASH_LAMBDA,
    restarts: int = 10,
    rng: np.random.Generator | None = None,
    maxiter: int = 300,
) -> EstimationResult:
    """One-dimensional valuation fit with best response approximated at a pinned precision."""
    m = ModelSpec(strategic="nash", nonstrategic=None, lam=lambda_fixed)
    return maximize_likelihood(
        d, games, m, restarts=restarts, rng=rng, maxiter=maxiter, nash_lambda=lambda_fixed
    )


def lambda_sweep(
    d: PlayDataset,
    games,
    lambdas,
    restarts: int = 10,
    rng_seed: int = 0,
) -> list:
    """estimate_nash at each precision; rows of (lambda, v_hat, loglik)."""
    rows = []
    for lam in lambdas:
        rng = np.random.default_rng(rng_seed)
        r = estimate_nash(d, games, lambda_fixed=lam, restarts=restarts, rng=rng)
        rows.append((float(lam), r.v_hat, r.loglik))
    return rows
