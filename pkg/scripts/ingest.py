import os
from pathlib import Path

import click
from loguru import logger

from src.config import settings
from src.config.models import ExperimentConfig, weight_overrides
from src.data_processing import interactions
from src.errors import exit_on_error
from src.modelling import model_utils


@click.command()
@click.option(
    "--config-path",
    default=settings.CONFIG_DIR / "default.yaml",
    help="Path to the experiment configuration yaml file",
)
@click.option("--events-csv", help="Event log CSV (user_id,item_id,kind,timestamp).")
@click.option("--out-dir", help="Where to write matrix.txt.")
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
@click.option(
    "--lenient",
    is_flag=True,
    default=False,
    help="If true, malformed lines are skipped with a warning instead of failing.",
)
@click.option(
    "--boundary",
    type=int,
    help="Split timestamp; only events before it go into the matrix.",
)
def main(
    config_path,
    events_csv,
    out_dir,
    w_view,
    w_click,
    w_cart,
    w_order,
    use_frequency,
    lenient,
    boundary,
):
    with exit_on_error():
        overrides = {
            "data_params.events_csv": events_csv,
            "data_params.strict": False if lenient else None,
            "data_params.boundary": boundary,
            "out_dir": out_dir,
            **weight_overrides(w_view, w_click, w_cart, w_order, use_frequency),
        }
        config = ExperimentConfig.load(config_path, overrides)

        events = model_utils.load_events(config)
        train_events, _, _ = model_utils.split_for_evaluation(events, config)
        matrix = interactions.build_matrix(train_events, config.weights)

        stats = interactions.matrix_stats(matrix)
        logger.info(
            f"n_users={stats['n_users']:,} n_items={stats['n_items']:,} "
            f"n_entries={stats['n_entries']:,} sparsity={stats['sparsity']:.6f}"
        )

        out_dir = Path(config.out_dir)
        if not os.path.exists(out_dir):
            os.makedirs(out_dir, exist_ok=True)
        interactions.save_matrix(matrix, out_dir / settings.MATRIX_FILENAME)
        logger.info(f"Saved rating matrix to {out_dir / settings.MATRIX_FILENAME}")


if __name__ == "__main__":
    main()
