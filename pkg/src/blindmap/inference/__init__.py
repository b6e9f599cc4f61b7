from .alternating import AlternatingResult, InferenceConfig, alternate_optimize
from .em import EmConfig, em_fit, mixture_loglik
from .graph import (
    MobilityGraph,
    build_graph,
    fit_mobility,
    transition_logprob,
    transition_logprob_sequence,
    transition_logprob_table,
)
from .viterbi import TrajectoryEstimate, viterbi_solve

__all__ = [
    "AlternatingResult",
    "EmConfig",
    "InferenceConfig",
    "MobilityGraph",
    "TrajectoryEstimate",
    "alternate_optimize",
    "build_graph",
    "em_fit",
    "fit_mobility",
    "mixture_loglik",
    "transition_logprob",
    "transition_logprob_sequence",
    "transition_logprob_table",
    "viterbi_solve",
]
