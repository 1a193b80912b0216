"""Graph-structured preference optimization."""

from ._graphdpo import (
    CyclicPreference,
    Divergence,
    GraphDPOError,
    InvalidConfig,
    InvalidInput,
    NonLayerable,
    PreferenceGraph,
    anchor_loss,
    build_from_edges,
    build_from_labels,
    finite_diff_check,
    grad_total,
    graph_loss,
    graph_loss_naive,
    lambda_gt,
    multi_negative,
    node_influence,
    pairwise_dpo,
    pro_listmle,
    prompt_losses,
    total_loss,
    train_synthetic,
)

__all__ = [
    "CyclicPreference",
    "Divergence",
    "GraphDPOError",
    "InvalidConfig",
    "InvalidInput",
    "NonLayerable",
    "PreferenceGraph",
    "anchor_loss",
    "build_from_edges",
    "build_from_labels",
    "finite_diff_check",
    "grad_total",
    "graph_loss",
    "graph_loss_naive",
    "lambda_gt",
    "multi_negative",
    "node_influence",
    "pairwise_dpo",
    "pro_listmle",
    "prompt_losses",
    "total_loss",
    "train_synthetic",
]
__version__ = "0.1.0"
