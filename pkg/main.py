import logging
import sys

from src.benchmark.runner import run_benchmark, run_evaluate, run_plan
from src.utils.arguments import (
    check_config,
    load_config,
    merge_configs,
    parse_arguments,
)
from src.utils.errors import PlanningFailure, ScenarioError, ScenarioValidationError
from src.utils.logging import init_wandb, setup_logging
from src.utils.reference_scenarios import make_reference_scenarios

logger = logging.getLogger("lcgp")

EXIT_OK = 0
EXIT_INPUT_ERROR = 2
EXIT_PLANNING_FAILURE = 3

COMMANDS = {
    "plan": run_plan,
    "evaluate": run_evaluate,
    "benchmark": run_benchmark,
}


def main(argv=None):
    args = parse_arguments(argv)

    # Load the configuration file and merge it with the CLI arguments
    config = load_config(args.config)
    config = merge_configs(config, args)
    setup_logging(config["verbose"])

    # Check the configuration
    try:
        check_config(config)
    except ValueError as exc:
        logger.error("invalid configuration: %s", exc)
        return EXIT_INPUT_ERROR

    if config["command"] == "gen-scenarios":
        for path in make_reference_scenarios(config["out_dir"]):
            logger.info("wrote %s", path)
        return EXIT_OK

    # Initialise WandB
    run = init_wandb(config)
    try:
        COMMANDS[config["command"]](config)
    except ScenarioValidationError as exc:
        for diagnostic in exc.diagnostics:
            logger.error("%s", diagnostic)
        return EXIT_INPUT_ERROR
    except (ScenarioError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_INPUT_ERROR
    except PlanningFailure as failure:
        logger.error("planning failed: %s", failure.reason.value)
        return EXIT_PLANNING_FAILURE
    finally:
        run.finish()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
