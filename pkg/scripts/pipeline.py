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
@click.option("--out-dir", help="Where to write matrix, candidates, model and config.")
@click.option(
    "--trainer",
    type=click.Choice(["als", "bpr"], case_sensitive=False),
    help="Latent factor trainer.",
)
@click.option("--seed", type=int, help="Single seed, fanned out to every stage.")
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
    "--binarize-cf",
    is_flag=True,
    default=False,
    help="If true, item-item cosine uses interaction presence instead of ratings.",
)
@click.option(
    "--boundary",
    type=int,
    help="Split timestamp; only events before it are used for training.",
)
@click.option("--n-jobs", type=int, help="Threads for the index and ALS row solves.")
def main(
    config_path,
    events_csv,
    out_dir,
    trainer,
    seed,
    w_view,
    w_click,
    w_cart,
    w_order,
    use_frequency,
    binarize_cf,
    boundary,
    n_jobs,
):
    with exit_on_error():
        overrides = {
            "data_params.events_csv": events_csv,
            "data_params.boundary": boundary,
            "out_dir": out_dir,
            "trainer": trainer,
            "seed": seed,
            "n_jobs": n_jobs,
            "index_params.binarize": True if binarize_cf else None,
            **weight_overrides(w_view, w_click, w_cart, w_order, use_frequency),
        }
        config = ExperimentConfig.load(config_path, overrides)

        artifacts = model_utils.run_pipeline(config)

        stats = interactions.matrix_stats(artifacts.matrix)
        logger.info(
            f"n_users={stats['n_users']:,} n_items={stats['n_items']:,} "
            f"sparsity={stats['sparsity']:.6f}"
        )


if __name__ == "__main__":
    main()
