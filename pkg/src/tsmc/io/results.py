"""Result emission: CSV files, Newick consensus trees, and the manifest.

Numbers are printed with 17 significant digits so a written double parses
back bit-for-bit; with the deterministic flag set, a rerun under the same
seed reproduces every output byte.
"""

from __future__ import annotations

import math
import os

from tsmc.coalescent import emit_newick

from .config import RunManifest, manifest_to_json

__all__ = [
    "coalescent_trace_rows",
    "format_value",
    "gmm_evidence_rows",
    "write_coalescent_outputs",
    "write_csv",
    "write_gmm_outputs",
    "write_manifest",
]

EVIDENCE_HEADER = ["model_k", "log_evidence", "n_intermediate_distributions", "wall_seconds", "seed"]
TRACE_HEADER = ["t", "log_evidence", "n_intermediate", "ess_min", "accept_theta", "accept_height", "accept_spr"]


def format_value(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "nan"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "%.17g" % value
    return str(value)


def write_csv(path: str, header: list[str], rows: list[dict]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(format_value(row[key]) for key in header) for row in rows)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def gmm_evidence_rows(sweep, wall_seconds: float, seed: int) -> list[dict]:
    """One row per model size; wall_seconds is the whole-run clock."""
    return [
        {
            "model_k": m.model_k,
            "log_evidence": m.log_evidence,
            "n_intermediate_distributions": m.n_intermediate,
            "wall_seconds": wall_seconds,
            "seed": seed,
        }
        for m in sweep.models
    ]


def coalescent_trace_rows(stages) -> list[dict]:
    return [
        {
            "t": record.t,
            "log_evidence": record.log_evidence,
            "n_intermediate": record.n_intermediate,
            "ess_min": record.ess_min,
            "accept_theta": record.accept_theta,
            "accept_height": record.accept_height,
            "accept_spr": record.accept_spr,
        }
        for record in stages
    ]


def write_gmm_outputs(output_dir: str, rows: list[dict]) -> None:
    os.makedirs(output_dir, exist_ok=True)
    write_csv(os.path.join(output_dir, "evidence.csv"), EVIDENCE_HEADER, rows)


def write_coalescent_outputs(output_dir: str, stages) -> None:
    os.makedirs(output_dir, exist_ok=True)
    write_csv(os.path.join(output_dir, "trace.csv"), TRACE_HEADER, coalescent_trace_rows(stages))
    for record in stages:
        path = os.path.join(output_dir, f"consensus_t{record.t}.nwk")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(emit_newick(record.consensus) + "\n")


def write_manifest(output_dir: str, manifest: RunManifest) -> str:
    os.makedirs(output_dir, exist_ok=True)
    path = os.path.join(output_dir, "manifest.json")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(manifest_to_json(manifest))
    return path
