"""Command-line pipeline: game generation, simulation, estimation, reports.

All randomness derives from a single seed via SeedSequence([seed,
crc32(command), task_index]), so identical invocations are byte-identical.
Seed precedence: --seed flag > config file > BEHEST_SEED env var > 0.

Exit codes: 0 success, 2 validation error, 3 convergence failure (results
were still written).
"""

from __future__ import annotations

import csv
import json
import os
import sys
import zlib
from pathlib import Path

import click
import numpy as np

from . import estimation, evaluation, likelihood, simulate
from .errors import BehestError, MissingResultsError, SchemaMismatchError
from .games import (
    load_allocation_games,
    load_payoff_games,
    random_payoff_game,
    save_games,
)
from .models import ModelSpec, named_model

EXIT_VALIDATION = 2
EXIT_NO_CONVERGENCE = 3


def derive_rng(seed: int, command: str, index: int = 0) -> np.random.Generator:
    """Deterministic per-command, per-task generator."""
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), zlib.crc32(command.encode()), int(index)])
    )


def _resolve_seed(seed, config) -> int:
    if seed is not None:
        return int(seed)
    if config and "seed" in config:
        return int(config["seed"])
    return int(os.environ.get("BEHEST_SEED", "0"))


def _load_config(path):
    if path is None:
        return {}
    with open(path) as f:
        return json.load(f)


def _load_models(spec, config):
    """Model list from a JSON file, inline JSON, or comma-separated names."""
    entries = None
    if spec:
        p = Path(spec)
        if p.exists():
            with open(p) as f:
                entries = json.load(f)
        elif spec.strip().startswith("["):
            entries = json.loads(spec)
        else:
            entries = [s for s in spec.split(",") if s]
    elif config.get("models"):
        entries = config["models"]
    if not entries:
        return []
    out = []
    for e in entries:
        out.append(ModelSpec.from_dict(e) if isinstance(e, dict) else named_model(e))
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)


def _fail(msg, code):
    click.echo(f"error: {msg}", err=True)
    sys.exit(code)


@click.group()
def main():
    """Valuation and behavioral-parameter estimation from one-shot play."""


@main.command("gen-games")
@click.option("--n", default=24, show_default=True)
@click.option("--n-actions", default=3, show_default=True)
@click.option("--lo", default=0.0, show_default=True)
@click.option("--hi", default=100.0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def gen_games(n, n_actions, lo, hi, out, seed, config):
    """Write a JSON file of random symmetric payoff games."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        rng = derive_rng(seed, "gen-games")
        games = [
            random_payoff_game(rng, n_actions=n_actions, lo=lo, hi=hi, id=f"g{i:03d}")
            for i in range(n)
        ]
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    save_games(games, out)
    click.echo(f"wrote {n} games to {out}")


@main.command("gen-scenarios")
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--v-star", "v_stars", required=True, help="comma-separated endowed values")
@click.option("--k", default=25, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def gen_scenarios(games_path, v_stars, k, out, seed, config):
    """Map payoff games to k allocation-game scenarios per endowed value."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    payoff_games = load_payoff_games(games_path)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    try:
        values = [float(v) for v in v_stars.split(",")]
        for vi, v in enumerate(values):
            rng = derive_rng(seed, "gen-scenarios", vi)
            scenarios = evaluation.make_scenarios(payoff_games, v, k, rng)
            for si, sc in enumerate(scenarios):
                path = outdir / f"scenario_v{v:g}_s{si:02d}.json"
                save_games(sc.allocation_games, path)
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    click.echo(f"wrote {k * len(values)} scenarios to {out}")


@main.command("simulate")
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_spec", required=True)
@click.option("--v-star", required=True, type=float)
@click.option("--participants", default=200, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def simulate_cmd(games_path, model_spec, v_star, participants, out, seed, config):
    """Generate a synthetic dataset CSV plus a JSON sidecar with the truth."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        models = _load_models(model_spec, cfg)
        if len(models) != 1:
            raise SchemaMismatchError("simulate takes exactly one model")
        sim_seed = int(derive_rng(seed, "simulate").integers(0, 2**31 - 1))
        sim_cfg = simulate.SimulationConfig(
            model=models[0],
            v_star=v_star,
            n_participants=participants,
            games=tuple(load_payoff_games(games_path)),
            seed=sim_seed,
        )
        d = simulate.simulate_dataset(sim_cfg)
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    likelihood.save_dataset(d, out)
    sidecar = {
        "model": models[0].to_dict(),
        "v_star": v_star,
        "seed": sim_seed,
        "true_params": simulate.true_params(sim_cfg).to_dict(),
    }
    with open(str(out) + ".json", "w") as f:
        json.dump(sidecar, f, indent=1, sort_keys=True)
        f.write("\n")
    click.echo(f"wrote {len(d)} observations to {out}")


def _load_scenarios(path):
    """Scenario allocation-game files from a directory, sorted by name."""
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.json"))
        files = [f for f in files if not f.name.endswith(".csv.json")]
    else:
        files = [p]
    if not files:
        raise MissingResultsError(f"no scenario files under {path}")
    out = []
    for f in files:
        allocs = load_allocation_games(f)
        out.append(
            evaluation.Scenario(
                v_star=allocs[0].v_star, allocation_games=tuple(allocs), seed=0
            )
        )
    return out


@main.command("estimate")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scenarios_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_spec", default=None)
@click.option("--restarts", default=2, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
@click.option("--jobs", default=1, show_default=True)
def estimate_cmd(dataset_path, scenarios_path, models_spec, restarts, out, seed, config, jobs):
    """Fit every model on every scenario; write result JSONs and a summary CSV."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    all_converged = True
    try:
        d = likelihood.load_dataset(dataset_path)
        models = _load_models(models_spec, cfg)
        scenarios = _load_scenarios(scenarios_path)
        tasks = [(m, sc) for m in models for sc in scenarios]

        def run(task_index):
            m, sc = tasks[task_index]
            rng = derive_rng(seed, "estimate", task_index)
            return estimation.maximize_likelihood(
                d, sc.games_by_id, m, restarts=restarts, rng=rng
            )

        if jobs > 1:
            from joblib import Parallel, delayed

            results = Parallel(n_jobs=jobs)(delayed(run)(i) for i in range(len(tasks)))
        else:
            results = [run(i) for i in range(len(tasks))]

        summary = {}
        for (m, sc), res in zip(tasks, results):
            all_converged &= res.converged
            name = f"{m.name}_v{sc.v_star:g}"
            group = summary.setdefault(name, [])
            res.save(outdir / f"{name}_s{len(group):03d}.json")
            group.append((res, sc))
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)

    rows = []
    for name in sorted(summary):
        pairs = summary[name]
        errs = [evaluation.relative_error(r.v_hat, sc.v_star) for r, sc in pairs]
        mean_v = float(np.mean([r.v_hat for r, _ in pairs]))
        if len(errs) >= 2 and np.std(errs) >= 0:
            lo_e, mean_e, hi_e = evaluation.t_confidence_interval(errs)
        else:
            lo_e = mean_e = hi_e = float(errs[0])
        rows.append(
            [name.rsplit("_v", 1)[0], pairs[0][1].v_star, mean_v, mean_e, lo_e, hi_e]
        )
    _write_csv(
        outdir / "summary.csv",
        ["model", "v_star", "mean_v_hat", "rel_error", "rel_error_lo", "rel_error_hi"],
        rows,
    )
    click.echo(f"wrote {len(rows)} summary rows to {outdir / 'summary.csv'}")
    if not all_converged:
        sys.exit(EXIT_NO_CONVERGENCE)


@main.command("nash-sweep")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--lambdas", required=True, help="comma-separated precisions")
@click.option("--restarts", default=2, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def nash_sweep(dataset_path, games_path, lambdas, restarts, out, seed, config):
    """Nash valuation fit across a grid of pinned precisions."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        d = likelihood.load_dataset(dataset_path)
        games = load_allocation_games(games_path)
        grid = [float(x) for x in lambdas.split(",") if x]
        rows = estimation.lambda_sweep(d, games, grid, restarts=restarts, rng_seed=seed)
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["lambda", "v_hat", "loglik"], rows)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command("crossval")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_spec", required=True)
@click.option("--folds", default=10, show_default=True)
@click.option("--rounds", default=10, show_default=True)
@click.option("--restarts", default=2, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def crossval(dataset_path, games_path, model_spec, folds, rounds, restarts, out, seed, config):
    """Repeated k-fold cross-validation of one model."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        d = likelihood.load_dataset(dataset_path)
        games = load_allocation_games(games_path)
        (model,) = _load_models(model_spec, cfg)
        res = evaluation.cross_validate(
            d,
            games,
            model,
            folds=folds,
            rounds=rounds,
            rng=derive_rng(seed, "crossval"),
            restarts=restarts,
        )
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "mean_v": res.mean_v,
        "fold_v_estimates": res.fold_v_estimates,
        "test_logliks": res.test_logliks,
    }
    with open(out, "w") as f:
        json.dump(payload, f, indent=1, sort_keys=True)
        f.write("\n")
    click.echo(f"mean v_hat {res.mean_v:.4f} -> {out}")


@main.command("bootstrap")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--scenarios", "scenarios_path", required=True, type=click.Path(exists=True))
@click.option("--models", "models_spec", required=True)
@click.option("--alpha", default=0.10, show_default=True)
@click.option("--b", "n_boot", default=1000, show_default=True)
@click.option("--restarts", default=1, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def bootstrap_cmd(dataset_path, scenarios_path, models_spec, alpha, n_boot, restarts, out, seed, config):
    """Bootstrapped fraction of scenarios recovered within the error threshold."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        d = likelihood.load_dataset(dataset_path)
        models = _load_models(models_spec, cfg)
        scenarios = _load_scenarios(scenarios_path)

        def fit(dataset, games, model, rng):
            return estimation.maximize_likelihood(
                dataset, games, model, restarts=restarts, rng=rng
            ).v_hat

        res = evaluation.bootstrap_threshold(
            d,
            models,
            scenarios,
            alpha=alpha,
            B=n_boot,
            rng=derive_rng(seed, "bootstrap"),
            fit_fn=fit,
        )
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    rows = [
        [name, med, band[0], band[1]] for name, (med, band) in sorted(res.items())
    ]
    _write_csv(out, ["model", "median_fraction", "band_lo", "band_hi"], rows)
    click.echo(f"wrote {len(rows)} rows to {out}")


@main.command("welfare")
@click.option("--dataset", "dataset_path", required=True, type=click.Path(exists=True))
@click.option("--games", "games_path", required=True, type=click.Path(exists=True))
@click.option("--model", "model_spec", required=True)
@click.option("--restarts", default=2, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=None, type=int)
@click.option("--config", default=None, type=click.Path(exists=True))
def welfare(dataset_path, games_path, model_spec, restarts, out, seed, config):
    """Held-out welfare prediction error for one model."""
    cfg = _load_config(config)
    seed = _resolve_seed(seed, cfg)
    try:
        d = likelihood.load_dataset(dataset_path)
        games = load_allocation_games(games_path)
        (model,) = _load_models(model_spec, cfg)
        err = evaluation.welfare_prediction(
            d, games, model, rng=derive_rng(seed, "welfare"), restarts=restarts
        )
    except BehestError as e:
        _fail(e, EXIT_VALIDATION)
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    _write_csv(out, ["model", "welfare_rel_error"], [[model.name, err]])
    click.echo(f"welfare relative error {err:.4f} -> {out}")


@main.command("report")
@click.option("--results", "results_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def report(results_dir, out):
    """Pivot summary CSVs into model-by-v* tables with best/tied_best markers."""
    summary = Path(results_dir) / "summary.csv"
    if not summary.exists():
        _fail(f"no summary.csv under {results_dir}", EXIT_VALIDATION)
    rows = []
    with open(summary, newline="") as f:
        reader = csv.DictReader(f)
        rows = list(reader)
    if not rows:
        _fail("summary.csv is empty", EXIT_VALIDATION)
    models = sorted({r["model"] for r in rows})
    v_stars = sorted({float(r["v_star"]) for r in rows})
    cell = {
        (r["model"], float(r["v_star"])): (
            float(r["rel_error"]),
            float(r["rel_error_lo"]),
            float(r["rel_error_hi"]),
        )
        for r in rows
    }
    out_rows = []
    for v in v_stars:
        present = [m for m in models if (m, v) in cell]
        best_m = min(present, key=lambda m: cell[(m, v)][0])
        best_lo, best_hi = cell[(best_m, v)][1], cell[(best_m, v)][2]
        for m in present:
            mean, lo, hi = cell[(m, v)]
            if m == best_m:
                marker = "best"
            elif not (hi < best_lo or lo > best_hi):
                marker = "tied_best"
            else:
                marker = ""
            out_rows.append([m, v, mean, lo, hi, marker])
    Path(out).mkdir(parents=True, exist_ok=True)
    _write_csv(
        Path(out) / "relative_error_table.csv",
        ["model", "v_star", "rel_error", "ci_lo", "ci_hi", "marker"],
        out_rows,
    )
    click.echo(f"wrote report tables to {out}")


if __name__ == "__main__":
    main()
