"""Sequential Monte Carlo with deterministic state transformations.

A particle cloud is pushed through a sequence of unnormalised targets that may
live on spaces of different dimension.  Each hop applies a deterministic
transformation to every particle, then anneals from the pushed-forward source
density to the destination target along an adaptively placed geometric ladder,
reweighting, resampling and moving particles as it goes.  The running
normalising-constant estimate is unbiased for a fixed schedule.

Two applications ship with the engine:

* :mod:`tsmc.gmm` -- marginal likelihoods of Gaussian mixtures, growing the
  model one component at a time by birth or moment-matched split moves.
* :mod:`tsmc.coalescent` -- online inference of a coalescent time-tree and
  mutation rate, adding one sequence per stage by a lineage-then-height
  insertion proposal.

Command line entry points ``gmm-evidence`` and ``coalescent-online`` live in
:mod:`tsmc.cli`.
"""

from tsmc.engine import (
    BridgeSpec,
    DegenerateCloudError,
    ParticleCloud,
    SmcConfig,
    TraceRow,
    bridge_step,
    cess,
    ess,
    find_next_gamma,
    init_cloud,
    normalize_and_accumulate,
    run_transformation_sequence,
    stratified_resample,
)

__all__ = [
    "BridgeSpec",
    "DegenerateCloudError",
    "ParticleCloud",
    "SmcConfig",
    "TraceRow",
    "bridge_step",
    "cess",
    "ess",
    "find_next_gamma",
    "init_cloud",
    "normalize_and_accumulate",
    "run_transformation_sequence",
    "stratified_resample",
]

__version__ = "0.1.0"
