import os
from pathlib import Path

import click
from loguru import logger

from src.config import settings
from src.config.models import ExperimentConfig, SweepGrid, weight_overrides
from src.errors import exit_on_error
from src.modelling import model_utils


@click.command()
@click.option(
    "--grid-path",
    default=settings.GRIDS_DIR / "alpha.yaml",
    help="Sweep grid yaml (dimension + points), see config/grids/.",
)
@click.option(
    "--config-path",
    default=settings.CONFIG_DIR / "default.yaml",
    help="Path to the experiment configuration yaml file",
)
@click.option("--events-csv", help="Event log CSV (user_id,item_id,kind,timestamp).")
@click.option(
    "--out-csv",
    default=settings.DATA_DIR / "sweeps" / "sweep.csv",
    help="Where to write one row per grid point.",
)
@click.option(
    "--trainer",
    type=click.Choice(["als", "bpr"], case_sensitive=False),
    help="Latent factor trainer.",
)
@click.option("--seed", type=int, help="Single seed, fanned out to every stage.")
@click.option("--boundary", type=int, help="Split timestamp; later events are tested.")
@click.option("--w-view", type=float, help="Weight of list-view events.")
@click.option("--w-click", type=float, help="Weight of click events.")
@click.option("--w-cart", type=float, help="Weight of add-to-cart events.")
@click.option("--w-order", type=float, help="Weight of order events.")
@click.option(
    "--use-frequency",
    is_flag=True,
    default=False,
    help="If true, each signal counts as many times as it occurred.",
)
@click.option("--n-jobs", type=int, help="Threads for the index and ALS row solves.")
def main(
    grid_path,
    config_path,
    events_csv,
    out_csv,
    trainer,
    seed,
    boundary,
    w_view,
    w_click,
    w_cart,
    w_order,
    use_frequency,
    n_jobs,
):
    with exit_on_error():
        grid = SweepGrid.from_yaml(grid_path)
        overrides = {
            "data_params.events_csv": events_csv,
            "data_params.boundary": boundary,
            "trainer": trainer,
            "seed": seed,
            "n_jobs": n_jobs,
            **weight_overrides(w_view, w_click, w_cart, w_order, use_frequency),
        }
        config = ExperimentConfig.load(config_path, overrides)
        logger.info(f"Sweeping {len(grid.points)} {grid.dimension.value} points")

        results = model_utils.run_sweep(grid, config)

        # Prepare output dir
        out_csv = Path(out_csv)
        if not os.path.exists(out_csv.parent):
            os.makedirs(out_csv.parent, exist_ok=True)
        results.to_csv(out_csv, index=False, lineterminator="\n")

        n_failed = int((results["error"] != "").sum())
        logger.info(f"Wrote {len(results)} rows to {out_csv} ({n_failed} failed)")


if __name__ == "__main__":
    main()
