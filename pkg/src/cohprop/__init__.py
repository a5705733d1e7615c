"""Latent feature scaling and coherence-gated propagation on follow graphs."""

__version__ = "0.1.0"

from .graph import (  # noqa: F401
    DirectedGraph,
    Direction,
    EdgeListParseError,
    UnknownNodeError,
    load_edge_list,
)
from .features import (  # noqa: F401
    FeatureStore,
    centroid,
    coherent_neighborhood,
    estimation_error,
    incoherence,
    mean_error,
    read_features_csv,
    write_features_csv,
)
from .method_a import (  # noqa: F401
    PropagationResult,
    PropagationState,
    StepRecord,
    init_state,
    run_method_a,
    step_method_a,
)
from .method_b import (  # noqa: F401
    PivotSet,
    co_neighbors,
    compute_pivots,
    run_method_b,
    step_method_b,
)
from .scaling import (  # noqa: F401
    BipartiteAdjacency,
    RankDeficiencyError,
    ScalingResult,
    bipartite_from_graph,
    correspondence_analysis,
    filter_bipartite,
    seed_features_from_scaling,
)
from .synthetic import (  # noqa: F401
    PlantedConfig,
    generate_planted,
    graded_mixture_centers,
)
from .evaluation import (  # noqa: F401
    EvaluationReport,
    ReportRow,
    correlate_with_external,
    kfold_eval_method_b,
    spatial_uniform_sample,
    sweep_method_a,
)
