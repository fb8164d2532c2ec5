from pathlib import Path

import numpy as np
import pandas as pd
import wandb

from src.planning.trajectory import TrajectoryPlan

TRAJECTORY_COLUMNS = ["t", "robot", "anchor", "x", "y"]


def trajectory_frame(plan: TrajectoryPlan, n_anchor: int) -> pd.DataFrame:
    """Long-format positions, one row per (t, robot).

    Args:
        plan (TrajectoryPlan): a successful plan
        n_anchor (int): number of anchors, flagged in the anchor column
    """
    n_robots, n_steps, _ = plan.positions.shape
    t, robot = np.meshgrid(np.arange(n_steps), np.arange(n_robots), indexing="ij")
    xy = plan.positions.transpose(1, 0, 2).reshape(-1, 2)
    return pd.DataFrame(
        {
            "t": t.ravel(),
            "robot": robot.ravel(),
            "anchor": (robot.ravel() < n_anchor).astype(int),
            "x": xy[:, 0],
            "y": xy[:, 1],
        },
        columns=TRAJECTORY_COLUMNS,
    )


def export_trajectory_csv(plan: TrajectoryPlan, n_anchor: int, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    trajectory_frame(plan, n_anchor).to_csv(
        path, index=False, float_format="%.9g", lineterminator="\n"
    )
    return path


def log_trajectory(plan: TrajectoryPlan, n_anchor: int):
    # Plot-ready table; rendering is left to the WandB UI
    table = wandb.Table(dataframe=trajectory_frame(plan, n_anchor))
    wandb.log({f"{plan.planner_name}_trajectory": table})
