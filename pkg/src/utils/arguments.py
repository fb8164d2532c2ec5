import argparse
import os

import yaml

from src.utils.scenarios import PLANNERS

DEFAULT_CONFIG = {
    # Output
    "output_dir": None,
    "threads": 1,
    "verbose": False,
    # Logging
    "project_name": "lcgp",
    "entity_name": None,
    "experiment_name": None,
    "wandb_mode": "disabled",
    # Planning
    "planner": None,
    "seed": None,
    "max_orderings": None,
    "dump_sets": False,
    # Evaluation
    "trials": None,
    "noise_seed": None,
    "zero_noise": False,
    # Benchmark
    "seeds": None,
    "planners": None,
}

OUTPUT_DIR_ENV = "LCGP_OUTPUT_DIR"


def load_config(file_path):
    # Load a yaml configuration file; a missing file means no overrides
    if file_path is None or not os.path.exists(file_path):
        return {}
    with open(file_path, "r") as fd:
        return yaml.safe_load(fd) or {}


def parse_arguments(argv=None):
    parser = argparse.ArgumentParser(
        description="Localizability-constrained multi-robot planning benchmark"
    )
    parser.add_argument(
        "--config",
        type=str,
        default=None,
        help="path to a YAML configuration file",
    )
    parser.add_argument(
        "--threads",
        type=int,
        help="number of worker processes for the benchmark",
    )
    parser.add_argument(
        "--verbose",
        default=None,
        action=argparse.BooleanOptionalAction,
        help="whether to log debug messages",
    )
    parser.add_argument(
        "--wandb_mode",
        "--wandb-mode",
        type=str,
        help="mode of WandB (online, offline, disabled)",
    )
    parser.add_argument(
        "--experiment_name",
        "--experiment-name",
        type=str,
        help="name of the experiment",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    # plan
    plan = subparsers.add_parser("plan", help="plan one scenario")
    plan.add_argument("scenario_file", type=str, help="path to the scenario JSON")
    plan.add_argument(
        "--planner",
        type=str,
        choices=PLANNERS,
        help="planner to run (default: the one named in the scenario)",
    )
    plan.add_argument(
        "--seed",
        type=int,
        help="planner seed (default: the scenario's planner seed)",
    )
    plan.add_argument(
        "--max_orderings",
        "--max-orderings",
        type=int,
        help="number of planning orders LCGP may try",
    )
    plan.add_argument(
        "--dump_sets",
        "--dump-sets",
        default=None,
        action=argparse.BooleanOptionalAction,
        help="whether to keep the per-timestep constraint set sizes in the run file",
    )
    plan.add_argument("--out", dest="out", type=str, help="path of the run JSON")

    # evaluate
    evaluate = subparsers.add_parser("evaluate", help="evaluate a planned run")
    evaluate.add_argument("run_file", type=str, help="path to the run JSON")
    evaluate.add_argument(
        "--trials",
        type=int,
        help="number of Monte-Carlo noise trials",
    )
    evaluate.add_argument(
        "--noise_seed",
        "--noise-seed",
        type=int,
        help="seed of the simulated range noise",
    )
    evaluate.add_argument(
        "--zero_noise",
        "--zero-noise",
        default=None,
        action=argparse.BooleanOptionalAction,
        help="whether to evaluate with noiseless ranges",
    )
    evaluate.add_argument("--out", dest="out", type=str, help="prefix of the metrics files")

    # benchmark
    benchmark = subparsers.add_parser("benchmark", help="run a suite of scenarios")
    benchmark.add_argument("suite_file", type=str, help="path to the suite YAML")
    benchmark.add_argument(
        "--seeds",
        type=int,
        help="number of seeds per scenario and planner",
    )
    benchmark.add_argument(
        "--trials",
        type=int,
        help="number of Monte-Carlo noise trials per run",
    )
    benchmark.add_argument("--out", dest="output_dir", type=str, help="output directory")

    # gen-scenarios
    generate = subparsers.add_parser(
        "gen-scenarios", help="write the five reference scenarios"
    )
    generate.add_argument("out_dir", type=str, help="directory of the scenario files")

    return parser.parse_args(argv)


def merge_configs(file_config, cmd_args):
    # Merge dictionaries in the order of priority:
    # command line args > yaml config file > default values
    config = DEFAULT_CONFIG.copy()
    config.update({k: v for k, v in file_config.items() if v is not None})
    config.update({k: v for k, v in vars(cmd_args).items() if v is not None})
    if config["output_dir"] is None:
        config["output_dir"] = os.environ.get(OUTPUT_DIR_ENV, "output")
    return config


def check_config(config):
    # Check that the configuration is valid
    if config["threads"] < 1:
        raise ValueError(f"threads must be at least 1, got {config['threads']}")
    if config["wandb_mode"] not in ("online", "offline", "disabled"):
        raise ValueError(f"unknown wandb_mode {config['wandb_mode']!r}")
    for key in ("trials", "seeds", "max_orderings"):
        if config.get(key) is not None and config[key] < 1:
            raise ValueError(f"{key} must be at least 1, got {config[key]}")
    if config.get("planners") is not None:
        unknown = set(config["planners"]) - set(PLANNERS)
        if unknown:
            raise ValueError(f"unknown planners {sorted(unknown)}")
    return True
