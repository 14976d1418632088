import argparse
import hashlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from typing import List, Optional

from pydantic import ValidationError

from growthgraph import __version__
from growthgraph.configs import RunConfig, SimulationSection, load_run_config, settings
from growthgraph.gtypes import RunManifest
from growthgraph.preprocess import load_model_data, write_transforms
from growthgraph.sampler import run_chain, run_fixed_partition
from growthgraph.scripts.simulate import simulate_dataset
from growthgraph.summary import read_partition_file, summarize_store
from growthgraph.utils import consts
from growthgraph.utils.errors import (
    ConfigError,
    DataError,
    NumericalError,
    SamplerError,
    TruncatedStoreError,
)

logging.basicConfig(level=settings.log_level, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger(__name__)


def sha256_file(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _write_manifest(out_dir: str, manifest: RunManifest, name: str = consts.MANIFEST_FILE) -> str:
    manifest.finished_at = _now()
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(manifest.model_dump_json(indent=2))
    return path


def _start_manifest(command: str, args: argparse.Namespace, config: Optional[RunConfig] = None,
                    seed: Optional[int] = None) -> RunManifest:
    data_hashes = {}
    if config is not None and config.data is not None:
        for name in ("longitudinal", "metabolites", "covariates"):
            path = config.data.path(name)
            if os.path.exists(path):
                data_hashes[os.path.basename(path)] = sha256_file(path)
    arguments = {k: v for k, v in vars(args).items() if k != "handler"}
    return RunManifest(
        command=command,
        config_hash=sha256_file(args.config) if getattr(args, "config", None) else None,
        data_hashes=data_hashes,
        seed=seed,
        software_version=__version__,
        started_at=_now(),
        arguments=arguments,
    )


def _output_dir(args: argparse.Namespace, config: Optional[RunConfig] = None) -> str:
    requested = args.out or (config.output.dir if config is not None else None)
    out_dir = settings.resolve_output_dir(requested)
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _require_data(config: RunConfig) -> None:
    if config.data is None:
        raise ConfigError("configuration has no 'data' section")


def fit_one_chain(config_path: str, out_dir: str, seed: int, partition_path: Optional[str] = None) -> str:
    """Preprocess, run one chain and return its store directory; runs inside worker processes too."""
    config = load_run_config(config_path)
    _require_data(config)
    os.makedirs(out_dir, exist_ok=True)
    data = load_model_data(config.data)
    write_transforms(os.path.join(out_dir, consts.TRANSFORMS_FILE), data)

    partition_path = partition_path or config.mcmc.fixed_partition
    if partition_path and not os.path.isabs(partition_path) and not os.path.exists(partition_path):
        partition_path = os.path.join(os.path.dirname(os.path.abspath(config_path)), partition_path)
    fixed = read_partition_file(partition_path, data.subject_ids) if partition_path else None
    sampler_config = config.sampler_config(data.metabolites.p_M, fixed_partition=fixed, seed=seed)
    if fixed is not None:
        run_fixed_partition(sampler_config, data, out_dir)
    else:
        run_chain(sampler_config, data, out_dir)
    return out_dir


def _fit(args: argparse.Namespace, command: str, partition_path: Optional[str] = None) -> int:
    config = load_run_config(args.config)
    _require_data(config)
    out_dir = _output_dir(args, config)
    seed = config.mcmc.seed if args.seed is None else args.seed
    manifest = _start_manifest(command, args, config, seed)

    n_chains = max(1, getattr(args, "chains", 1) or 1)
    if n_chains == 1:
        outputs = [fit_one_chain(args.config, out_dir, seed, partition_path)]
    else:
        targets = [os.path.join(out_dir, f"chain_{c}") for c in range(n_chains)]
        seeds = [seed + c for c in range(n_chains)]
        logger.info(f"Running {n_chains} chains with seeds {seeds}")
        with ProcessPoolExecutor(max_workers=n_chains) as pool:
            outputs = list(pool.map(fit_one_chain, [args.config] * n_chains, targets, seeds,
                                    [partition_path] * n_chains))
    manifest.outputs = [os.path.relpath(p, out_dir) for p in outputs]
    _write_manifest(out_dir, manifest)
    logger.info(f"{command} finished; outputs in {out_dir}")
    return consts.EXIT_OK


def cmd_simulate(args: argparse.Namespace) -> int:
    config = load_run_config(args.config) if args.config else RunConfig()
    sim = config.simulation or SimulationSection()
    out_dir = _output_dir(args, None if args.out else config)
    seed = sim.seed if args.seed is None else args.seed
    manifest = _start_manifest("simulate", args, None, seed)
    simulate_dataset(sim, out_dir, seed=seed)
    manifest.outputs = [consts.LONGITUDINAL_FILE, consts.METABOLITE_FILE, consts.COVARIATE_FILE,
                        consts.TRUTH_FILE, "config.yaml"]
    _write_manifest(out_dir, manifest)
    return consts.EXIT_OK


def cmd_fit(args: argparse.Namespace) -> int:
    return _fit(args, "fit")


def cmd_refit_fixed(args: argparse.Namespace) -> int:
    return _fit(args, "refit-fixed-partition", partition_path=args.partition)


def cmd_summarize(args: argparse.Namespace) -> int:
    out_dir = settings.resolve_output_dir(args.out or args.store)
    manifest = _start_manifest("summarize", args)
    diffnets = [tuple(pair) for pair in (args.diffnet or [])]
    written = summarize_store(args.store, out_dir, diffnets=diffnets, threshold=args.threshold)
    manifest.outputs = [os.path.relpath(p, out_dir) for p in written]
    _write_manifest(out_dir, manifest, consts.SUMMARY_MANIFEST_FILE)
    return consts.EXIT_OK


def cmd_diffnet(args: argparse.Namespace) -> int:
    args.diffnet = [[args.k1, args.k2]]
    return cmd_summarize(args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="growthgraph",
        description="Joint clustering of growth trajectories and metabolite networks",
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default from GROWTHGRAPH_LOG_LEVEL)")
    subparsers = parser.add_subparsers(dest="command", required=True)

    sim = subparsers.add_parser("simulate", help="Write a synthetic dataset with its ground truth")
    sim.add_argument("--config", help="YAML config with an optional 'simulation' section")
    sim.add_argument("--out", help="Output directory")
    sim.add_argument("--seed", type=int, default=None, help="Overrides simulation.seed")
    sim.set_defaults(handler=cmd_simulate)

    fit = subparsers.add_parser("fit", help="Preprocess the data and run the sampler")
    fit.add_argument("--config", required=True)
    fit.add_argument("--out", help="Output directory (default output.dir)")
    fit.add_argument("--seed", type=int, default=None, help="Overrides mcmc.seed")
    fit.add_argument("--chains", type=int, default=1, help="Independent chains with seeds seed+0..n-1")
    fit.set_defaults(handler=cmd_fit)

    refit = subparsers.add_parser("refit-fixed-partition", help="Rerun the sampler with cluster labels fixed")
    refit.add_argument("--config", required=True)
    refit.add_argument("--partition", help="CSV with subject_id and cluster columns (e.g. binder_partition.csv)")
    refit.add_argument("--out", help="Output directory (default output.dir)")
    refit.add_argument("--seed", type=int, default=None)
    refit.add_argument("--chains", type=int, default=1)
    refit.set_defaults(handler=cmd_refit_fixed)

    summ = subparsers.add_parser("summarize", help="Posterior summaries of a sample store")
    summ.add_argument("--store", required=True, help="SampleStore directory written by fit")
    summ.add_argument("--out", help="Output directory (default: the store directory)")
    summ.add_argument("--diffnet", nargs=2, type=int, action="append", metavar=("K1", "K2"),
                      help="Emit the differential network between two clusters; repeatable")
    summ.add_argument("--threshold", type=float, default=consts.DIFFNET_THRESHOLD)
    summ.set_defaults(handler=cmd_summarize)

    diff = subparsers.add_parser("diffnet", help="Summaries plus the differential network of two clusters")
    diff.add_argument("--store", required=True)
    diff.add_argument("--out")
    diff.add_argument("--threshold", type=float, default=consts.DIFFNET_THRESHOLD)
    diff.add_argument("k1", type=int)
    diff.add_argument("k2", type=int)
    diff.set_defaults(handler=cmd_diffnet)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.log_level:
        logging.getLogger().setLevel(args.log_level.upper())
    try:
        return args.handler(args)
    except (DataError, ConfigError, TruncatedStoreError, ValidationError) as e:
        logger.error(f"{args.command} failed: {e}")
        return consts.EXIT_USER_ERROR
    except (NumericalError, SamplerError) as e:
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        return consts.EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
