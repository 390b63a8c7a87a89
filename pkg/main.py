# main.py
# Command-line entry point for the Kerr phase-shift csQPT toolkit.

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from src import config
from src.errors import ConfigError, NumericError
from src.experiments import run_experiment
from src.services.persistence import ArtifactStore
from src.services.run_config import EXPERIMENTS, RunConfig, apply_overrides, load_run_config
from src.utils import close_log_file, setup_logging, stable_json_dumps
from src.visualization.visualization import EXPORT_KINDS, export_plotdata

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Kerr phase-shift channel simulation and csQPT toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)

    for experiment in EXPERIMENTS:
        sub = subparsers.add_parser(experiment, help=f"Run the {experiment} experiment")
        sub.add_argument("--config", help="JSON run configuration (a run manifest also works)")
        sub.add_argument("--seed", type=int, help="64-bit run seed; overrides the config file")
        sub.add_argument("--out", help="Output directory; overrides the config file")
        sub.add_argument("--threads", type=int, help="Worker threads; results do not depend on it")

    export = subparsers.add_parser("export", help="Write plot-ready data series from a stored artifact")
    export.add_argument("--artifact", required=True, help="Artifact file to export from")
    export.add_argument("--kind", required=True, help=f"One of: {', '.join(EXPORT_KINDS)}")
    export.add_argument("--out", help="Output directory (default: <artifact dir>/plotdata)")

    validate = subparsers.add_parser("validate-config", help="Validate a run configuration and print it resolved")
    validate.add_argument("--config", required=True, help="JSON run configuration")
    return parser


def resolve_run_config(args) -> RunConfig:
    """The config file (or defaults) with CLI overrides; the verb picks the experiment."""
    if args.config:
        run_config = load_run_config(args.config, seed=args.seed, output_dir=args.out, threads=args.threads)
    else:
        run_config = apply_overrides(
            RunConfig(experiment=args.command), seed=args.seed, output_dir=args.out, threads=args.threads
        )
    if run_config.experiment != args.command:
        logging.info(f"Config names experiment '{run_config.experiment}'; running '{args.command}' instead")
        run_config = replace(run_config, experiment=args.command)
    run_config.require_seed()
    return run_config


def seal_run(store: ArtifactStore, manifest_config: dict, summary: dict) -> None:
    """Close run.log, hash it into the artifact list, then write the manifest."""
    close_log_file()
    store.adopt(config.LOG_FILE_NAME, "log")
    store.write_manifest(manifest_config, summary)


def run_command(args) -> None:
    run_config = resolve_run_config(args)
    output_dir = Path(run_config.output_dir)
    with ArtifactStore(output_dir) as store:
        setup_logging(output_dir / config.LOG_FILE_NAME)
        logging.info("==================================================")
        logging.info(f"Starting {run_config.experiment} run {time.strftime('%Y-%m-%d %H:%M:%S')}")
        logging.info("==================================================")
        summary = run_experiment(run_config, store)
        logging.info("==================================================")
        logging.info(f"{run_config.experiment} run finished; artifacts in {output_dir}")
        logging.info("==================================================")
        seal_run(store, run_config.to_dict(), summary)


def export_command(args) -> None:
    artifact = Path(args.artifact)
    output_dir = Path(args.out) if args.out else artifact.parent / "plotdata"
    with ArtifactStore(output_dir) as store:
        setup_logging(output_dir / config.LOG_FILE_NAME)
        written = export_plotdata(artifact, args.kind, store)
        logging.info(f"--- {len(written)} plot data file(s) saved to {output_dir} ---")
        export_config = {"export": {"artifact": str(artifact), "kind": args.kind}}
        seal_run(store, export_config, {"files": [p.name for p in written]})


def validate_command(args) -> None:
    run_config = load_run_config(args.config)
    logging.info(f"Configuration {args.config} is valid")
    print(stable_json_dumps(run_config.to_dict()))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging()
    try:
        if args.command == "export":
            export_command(args)
        elif args.command == "validate-config":
            validate_command(args)
        else:
            run_command(args)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except NumericError as e:
        logging.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except Exception as e:
        logging.error(f"An unexpected error occurred: {e}", exc_info=True)
        return EXIT_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
