"""dflmesh: a desk-scale laboratory for decentralized federated learning.

Local momentum-SGD plus gossip averaging over configurable communication
graphs, spectral topology design (optimal Laplacian-family mixing, regular
expanders from unions of random rings), a virtual-ring overlay protocol with
failure recovery, executable convergence/stability bounds, and a CLI that
reproduces the experiment shapes at laptop scale.
"""

from .bounds import (
    BoundParams,
    c_lambda,
    c_lambda_lemma,
    convergence_bound,
    convergence_constants,
    stability_bound,
    stepsize_sum_worst_ratio,
)
from .data import (
    Dataset,
    Partition,
    RegressionBundle,
    balanced_holdout,
    load_idx,
    partition_by_label,
    partition_iid,
    save_idx,
    synthetic_classification,
    synthetic_regression,
)
from .engine import (
    METRICS_COLUMNS,
    ConstantEstimates,
    ExperimentResult,
    FailurePlan,
    MetricsRecord,
    NodeState,
    TrainConfig,
    communication_round,
    consensus_distance,
    init_states,
    local_round,
    run_experiment,
)
from .errors import (
    BoundGuardError,
    ConfigError,
    DflmeshError,
    DisconnectedGraphError,
    MixingPropertyError,
    NonFiniteParameterError,
    NotConvergedError,
)
from .experiments import (
    analyze_topology,
    build_mixing,
    build_topology,
    compare_topologies,
    failure_sweep,
    run_from_config,
    validate_config,
)
from .graphs import (
    Graph,
    communication_cost,
    is_connected,
    make_complete,
    make_erdos_renyi,
    make_regular_expander,
    make_ring,
    make_ring_with_matching,
)
from .mixing import (
    THETA_MAX,
    MixingMatrix,
    clamp_theta,
    laplacian_mixing,
    max_degree_mixing,
    metropolis_hastings_mixing,
    mix_step,
    mixing_rate,
    optimal_theta,
)
from .models import (
    LeastSquares,
    LocalObjective,
    LogisticRegression,
    TanhMlp,
    accuracy,
    least_squares,
    least_squares_optimum,
    logistic_regression,
    mlp_classifier,
)
from .overlay import HopStats, OverlayNetwork, OverlayNode
from .spectral import (
    SpectralSummary,
    adjacency_second_eigenvalue,
    eigen_extremes,
    ramanujan_kappa_upper_bound,
    reduced_condition_number,
    ring_kappa_lower_bound,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "DflmeshError",
    "ConfigError",
    "DisconnectedGraphError",
    "NotConvergedError",
    "MixingPropertyError",
    "NonFiniteParameterError",
    "BoundGuardError",
    # graphs
    "Graph",
    "make_ring",
    "make_complete",
    "make_erdos_renyi",
    "make_regular_expander",
    "make_ring_with_matching",
    "is_connected",
    "communication_cost",
    # spectral
    "SpectralSummary",
    "eigen_extremes",
    "reduced_condition_number",
    "ring_kappa_lower_bound",
    "ramanujan_kappa_upper_bound",
    "adjacency_second_eigenvalue",
    # mixing
    "MixingMatrix",
    "THETA_MAX",
    "laplacian_mixing",
    "optimal_theta",
    "clamp_theta",
    "mixing_rate",
    "metropolis_hastings_mixing",
    "max_degree_mixing",
    "mix_step",
    # models
    "LeastSquares",
    "LogisticRegression",
    "TanhMlp",
    "LocalObjective",
    "least_squares",
    "logistic_regression",
    "mlp_classifier",
    "accuracy",
    "least_squares_optimum",
    # data
    "Dataset",
    "Partition",
    "RegressionBundle",
    "load_idx",
    "save_idx",
    "synthetic_classification",
    "synthetic_regression",
    "balanced_holdout",
    "partition_iid",
    "partition_by_label",
    # engine
    "METRICS_COLUMNS",
    "TrainConfig",
    "NodeState",
    "FailurePlan",
    "MetricsRecord",
    "ConstantEstimates",
    "ExperimentResult",
    "init_states",
    "local_round",
    "communication_round",
    "consensus_distance",
    "run_experiment",
    # bounds
    "BoundParams",
    "convergence_constants",
    "convergence_bound",
    "c_lambda",
    "c_lambda_lemma",
    "stability_bound",
    "stepsize_sum_worst_ratio",
    # overlay
    "OverlayNode",
    "OverlayNetwork",
    "HopStats",
    # experiments
    "validate_config",
    "build_topology",
    "build_mixing",
    "analyze_topology",
    "run_from_config",
    "compare_topologies",
    "failure_sweep",
]
