"""Configuration, data ingestion, and result emission for the CLI tools."""

from .config import (
    COALESCENT_COMMAND,
    GMM_COMMAND,
    ConfigError,
    RunConfig,
    RunManifest,
    content_hash,
    make_manifest,
    manifest_from_json,
    manifest_to_json,
    parse_config,
    serialise_config,
    smc_config,
)
from .data import load_alignment, load_observations, parse_alignment, parse_observations
from .results import (
    coalescent_trace_rows,
    format_value,
    gmm_evidence_rows,
    write_coalescent_outputs,
    write_csv,
    write_gmm_outputs,
    write_manifest,
)

__all__ = [
    "COALESCENT_COMMAND",
    "ConfigError",
    "GMM_COMMAND",
    "RunConfig",
    "RunManifest",
    "coalescent_trace_rows",
    "content_hash",
    "format_value",
    "gmm_evidence_rows",
    "load_alignment",
    "load_observations",
    "make_manifest",
    "manifest_from_json",
    "manifest_to_json",
    "parse_alignment",
    "parse_config",
    "parse_observations",
    "serialise_config",
    "smc_config",
    "write_coalescent_outputs",
    "write_csv",
    "write_gmm_outputs",
    "write_manifest",
]
