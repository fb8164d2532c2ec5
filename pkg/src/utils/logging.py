import logging

import wandb
from rich.logging import RichHandler


def setup_logging(verbose=False):
    # One handler on the root logger per CLI invocation
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=True, show_path=verbose)],
        force=True,
    )


def init_wandb(config):
    return wandb.init(
        project=config.get("project_name"),
        config=config,
        name=config.get("experiment_name"),
        mode=config.get("wandb_mode"),
        entity=config.get("entity_name"),
        reinit=True,
    )
