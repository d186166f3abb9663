"""Online spectral filtering of dynamical systems.

Numerical core (filters, predictor, optimizers), ground-truth generators,
observer-design diagnostics, discretization lifts, streaming comparator
predictors, and an experiment harness with a CLI.
"""

from .filters import FilterBank, filter_bank, filtered_features, hankel_matrix
from .predictor import OsfParams, PredictorConfig, chebyshev_coeffs, gradient, loss, predict
from .systems import (
    LdsSystem,
    Trajectory,
    gen_gaussian_lds,
    gen_permutation_lds,
    langevin_simulate,
    lorenz_simulate,
    pendulum_simulate,
    simulate_lds,
)
from .observer import (
    ObserverSolution,
    SpectralConstraint,
    ackermann_gain,
    eval_qstar,
    observability_matrix,
    observer_rollout,
    permutation_closed_form,
    qstar_search,
)
from .lifting import (
    DiscreteLift,
    EpsNet,
    RbfDictionary,
    build_eps_net,
    edmd_fit,
    fit_rbf_dictionary,
    lift_rollout,
    markov_lift,
    markov_lift_stochastic,
    sfedmd_fit,
)
from .baselines import autoregressive_rollout, make_predictor
from .harness import (
    ExperimentConfig,
    RECIPES,
    decile_summary,
    make_config,
    run_experiment,
    smooth,
    spectral_gap,
)

__version__ = "0.1.0"
