"""Joint estimation of valuations and behavioral-model parameters from
one-shot play in normal-form games."""

from .errors import BehestError
from .games import (
    AllocationGame,
    PayoffGame,
    allocation_from_payoff,
    expected_utility,
    induce_payoff_game,
    make_payoff_game,
    mixed_strategy,
    random_payoff_game,
)
from .models import (
    Level0Spec,
    ModelSpec,
    empirical_distribution,
    level0_predict,
    model_predict,
    named_model,
    pqch_predict,
    qbr,
    ql4_features,
    qre_fixed_point,
    truncated_poisson,
)
from .likelihood import (
    LikelihoodData,
    Observation,
    Params,
    ParamSchema,
    PlayDataset,
    load_dataset,
    pack_params,
    save_dataset,
    unpack_params,
)
from .estimation import (
    EstimationResult,
    estimate_nash,
    lambda_sweep,
    maximize_likelihood,
)
from .evaluation import (
    Scenario,
    bootstrap_threshold,
    cross_validate,
    make_scenarios,
    relative_error,
    t_confidence_interval,
    welfare_prediction,
)
from .simulate import (
    SimulationConfig,
    build_allocation_games,
    recovery_experiment,
    simulate_dataset,
    true_params,
)

__version__ = "0.1.0"
