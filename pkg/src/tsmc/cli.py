"""Command-line entry points.

Two tools share one skeleton: resolve config (defaults < file < flags), run,
emit CSV/Newick outputs plus a manifest.  Exit codes: 0 success, 2 bad
config or input data, 3 numeric failure mid-run.  The manifest is written
even when the run fails, with the error recorded.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import asdict

from tsmc.coalescent import ProposalConfig, compute_ordering, emit_newick, run_online_inference
from tsmc.engine import DegenerateCloudError
from tsmc.gmm import tsmc_model_sweep
from tsmc.io import (
    COALESCENT_COMMAND,
    GMM_COMMAND,
    ConfigError,
    coalescent_trace_rows,
    content_hash,
    gmm_evidence_rows,
    load_alignment,
    load_observations,
    make_manifest,
    parse_config,
    smc_config,
    write_coalescent_outputs,
    write_gmm_outputs,
    write_manifest,
)

__all__ = ["coalescent_online_main", "gmm_evidence_main"]

_NUMERIC_ERRORS = (DegenerateCloudError, ArithmeticError)


def _shared_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value config file; flags override it")
    parser.add_argument("--out", help="output directory (default .)")
    parser.add_argument("--particles", help="particle count P")
    parser.add_argument("--beta", help="CESS target fraction in (0,1)")
    parser.add_argument("--alpha", help="ESS resampling threshold fraction")
    parser.add_argument("--seed", help="RNG seed")
    parser.add_argument("--deterministic", choices=["true", "false"],
                        help="bitwise-reproducible reductions and zeroed wall times")


_FLAG_KEYS = {
    "data": "data_path",
    "alignment": "data_path",
    "out": "output_dir",
    "particles": "particle_count",
    "beta": "cess_target",
    "alpha": "resample_threshold",
    "seed": "seed",
    "deterministic": "deterministic",
    "move": "move",
    "mode": "mode",
    "tmax": "t_max",
    "ordering": "ordering",
    "lineage_power": "lineage_power",
    "height": "height_kind",
    "spr": "spr_moves",
}


def _resolve(command: str, args: argparse.Namespace):
    overrides = {}
    for flag, key in _FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    text = ""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from exc
    return parse_config(text, overrides, command=command)


def _execute(command: str, args: argparse.Namespace, runner) -> int:
    try:
        config = _resolve(command, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    start = time.perf_counter()
    input_hash = ""
    try:
        with open(config.data_path, "rb") as fh:
            input_hash = content_hash(fh.read())
        trace, results, emit = runner(config)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _fail_manifest(config, input_hash, start, exc)
        return 2
    except OSError as exc:
        print(f"error: cannot read {config.data_path}: {exc.strerror}", file=sys.stderr)
        _fail_manifest(config, input_hash, start, exc)
        return 2
    except _NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        _fail_manifest(config, input_hash, start, exc)
        return 3

    wall = time.perf_counter() - start
    emit(0.0 if config.deterministic else wall)
    manifest = make_manifest(config, input_hash, trace, results, wall)
    write_manifest(config.output_dir, manifest)
    return 0


def _fail_manifest(config, input_hash: str, start: float, exc: BaseException) -> None:
    wall = time.perf_counter() - start
    manifest = make_manifest(config, input_hash, (), (), wall, error=f"{type(exc).__name__}: {exc}")
    write_manifest(config.output_dir, manifest)


def gmm_evidence_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog=GMM_COMMAND,
        description="Mixture-size evidence ladder via transformation SMC.",
    )
    parser.add_argument("--data", help="observations, one number per line")
    parser.add_argument("--move", choices=["birth", "split"], help="transformation between sizes")
    parser.add_argument("--mode", choices=["conditional", "marginal"], help="incremental weight route")
    parser.add_argument("--tmax", help="largest model size")
    _shared_flags(parser)
    args = parser.parse_args(argv)

    def runner(config):
        data = load_observations(config.data_path)
        sweep = tsmc_model_sweep(data, config.t_max, config.move, config.mode, smc_config(config))

        def emit(wall_seconds: float) -> None:
            write_gmm_outputs(config.output_dir, gmm_evidence_rows(sweep, wall_seconds, config.seed))

        results = [
            {"model_k": m.model_k, "log_evidence": m.log_evidence, "n_intermediate": m.n_intermediate}
            for m in sweep.models
        ]
        return [asdict(row) for row in sweep.trace], results, emit

    return _execute(GMM_COMMAND, args, runner)


def coalescent_online_main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog=COALESCENT_COMMAND,
        description="Online coalescent tree inference over arriving sequences.",
    )
    parser.add_argument("--alignment", help="FASTA or relaxed PHYLIP alignment")
    parser.add_argument("--ordering", choices=["nearest", "furthest"], help="arrival order rule")
    parser.add_argument("--lineage-power", dest="lineage_power", help="lineage proposal power: 0|1|2|4")
    parser.add_argument("--height", choices=["laplace", "exp1"], help="attachment height proposal")
    parser.add_argument("--spr", help="SPR proposals per MCMC sweep")
    _shared_flags(parser)
    args = parser.parse_args(argv)

    def runner(config):
        alignment = load_alignment(config.data_path)
        if alignment.leaf_count < 2:
            raise ConfigError("alignment must contain at least 2 sequences")
        order = compute_ordering(alignment.letters, config.ordering)
        proposal = ProposalConfig(
            lineage_power=config.lineage_power,
            height_kind=config.height_kind,
            spr_moves_per_sweep=config.spr_moves,
        )
        result = run_online_inference(
            alignment.letters,
            smc_config(config),
            proposal=proposal,
            order=order,
            names=list(alignment.names),
        )

        def emit(wall_seconds: float) -> None:
            write_coalescent_outputs(config.output_dir, result.stages)

        trace = coalescent_trace_rows(result.stages)
        results = [{"t": r.t, "consensus": emit_newick(r.consensus)} for r in result.stages]
        return trace, results, emit

    return _execute(COALESCENT_COMMAND, args, runner)
