"""Online coalescent tree inference with per-arrival SMC bridges."""

from .consensus import majority_consensus, weighted_median
from .likelihood import (
    ALPHABET,
    CoalState,
    SeqAlignment,
    coalescent_log_prior,
    jc_branch_logprobs,
    log_posterior,
    log_theta_prior,
    pairwise_log_likelihood,
    pruning_log_likelihood,
    simulate_alignment,
    site_patterns,
)
from .mcmc import (
    CoalescentKernel,
    CoalScales,
    adapt_scales,
    default_scales,
    height_move,
    spr_move,
    theta_move,
)
from .online import OnlineResult, StageRecord, run_online_inference, sample_prior_states
from .ordering import compute_ordering, snp_distance_matrix
from .proposals import (
    ProposalConfig,
    height_log_pdf,
    height_proposal,
    insertion_log_weight,
    insertion_push_log_density,
    lineage_log_probs,
    propose_insertion,
    snp_counts,
)
from .tree import (
    CoalTree,
    NewickNode,
    branches_alive_at,
    emit_newick,
    insert_leaf,
    lambda_set,
    parse_newick,
    remove_leaf,
    spr_candidates,
    spr_reattach,
    subtree_leaves,
    subtree_nodes,
    tree_to_newick,
    two_leaf_tree,
    with_height,
)

__all__ = [
    "ALPHABET",
    "CoalScales",
    "CoalState",
    "CoalTree",
    "CoalescentKernel",
    "NewickNode",
    "OnlineResult",
    "ProposalConfig",
    "SeqAlignment",
    "StageRecord",
    "adapt_scales",
    "branches_alive_at",
    "coalescent_log_prior",
    "compute_ordering",
    "default_scales",
    "emit_newick",
    "height_log_pdf",
    "height_move",
    "height_proposal",
    "insert_leaf",
    "insertion_log_weight",
    "insertion_push_log_density",
    "jc_branch_logprobs",
    "lambda_set",
    "lineage_log_probs",
    "log_posterior",
    "log_theta_prior",
    "majority_consensus",
    "pairwise_log_likelihood",
    "parse_newick",
    "propose_insertion",
    "pruning_log_likelihood",
    "remove_leaf",
    "run_online_inference",
    "sample_prior_states",
    "simulate_alignment",
    "site_patterns",
    "snp_counts",
    "snp_distance_matrix",
    "spr_candidates",
    "spr_move",
    "spr_reattach",
    "subtree_leaves",
    "subtree_nodes",
    "theta_move",
    "tree_to_newick",
    "two_leaf_tree",
    "weighted_median",
    "with_height",
]
