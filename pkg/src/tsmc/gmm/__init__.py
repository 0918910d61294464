"""Gaussian-mixture targets and trans-dimensional moves for the SMC engine.

Models are univariate mixtures with k components: weights on the open
simplex, strictly ascending means, positive precisions.  The target carries an
explicit k! factor so reported evidences refer to the unconstrained
(label-symmetric) mixture.  Birth and moment-matched split transformations
grow k by one; their incremental weights come in a conditional (label-frozen)
and a marginalised (label-summed) flavour.
"""

from tsmc.gmm.model import (
    GmmData,
    MixtureCloud,
    MixtureState,
    log_likelihood,
    log_posterior_unnorm,
    log_prior_ordered,
    sample_prior_cloud,
    tau_rate,
)
from tsmc.gmm.transforms import (
    SplitAux,
    birth_log_jacobian,
    birth_transform,
    merge_components,
    remove_component,
    split_log_jacobian,
    split_transform,
)
from tsmc.gmm.weights import (
    birth_weight,
    log_birth_aux_density,
    log_split_aux_density,
    sample_birth_aux,
    sample_split_aux,
    split_weight,
)
from tsmc.gmm.mcmc import acceptance_rescale, make_mixture_kernel, mcmc_sweep
from tsmc.gmm.evidence import ModelEvidence, SweepResult, smc2_baseline, tsmc_model_sweep

__all__ = [
    "GmmData",
    "ModelEvidence",
    "MixtureCloud",
    "MixtureState",
    "SplitAux",
    "SweepResult",
    "acceptance_rescale",
    "birth_log_jacobian",
    "birth_transform",
    "birth_weight",
    "log_birth_aux_density",
    "log_likelihood",
    "log_posterior_unnorm",
    "log_prior_ordered",
    "log_split_aux_density",
    "make_mixture_kernel",
    "mcmc_sweep",
    "merge_components",
    "remove_component",
    "sample_birth_aux",
    "sample_prior_cloud",
    "sample_split_aux",
    "smc2_baseline",
    "split_log_jacobian",
    "split_transform",
    "split_weight",
    "tau_rate",
    "tsmc_model_sweep",
]
