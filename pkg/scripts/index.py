from pathlib import Path

import click
from loguru import logger

from src.config import settings
from src.config.models import ExperimentConfig
from src.data_processing import interactions
from src.errors import exit_on_error
from src.modelling import simcore


@click.command()
@click.option(
    "--config-path",
    default=settings.CONFIG_DIR / "default.yaml",
    help="Path to the experiment configuration yaml file",
)
@click.option("--out-dir", help="Artifact directory holding matrix.txt.")
@click.option("--n-neighbors", type=int, help="Candidates kept per item.")
@click.option(
    "--binarize-cf",
    is_flag=True,
    default=False,
    help="If true, item-item cosine uses interaction presence instead of ratings.",
)
@click.option("--n-jobs", type=int, help="Threads for scoring item blocks.")
def main(config_path, out_dir, n_neighbors, binarize_cf, n_jobs):
    with exit_on_error():
        overrides = {
            "out_dir": out_dir,
            "index_params.n_neighbors": n_neighbors,
            "index_params.binarize": True if binarize_cf else None,
            "n_jobs": n_jobs,
        }
        config = ExperimentConfig.load(config_path, overrides)
        out_dir = Path(config.out_dir)

        matrix = interactions.load_matrix(out_dir / settings.MATRIX_FILENAME)
        candidates = simcore.build_candidate_index(
            matrix,
            n_neighbors=config.index_params.n_neighbors,
            binarize=config.index_params.binarize,
            n_jobs=config.n_jobs,
        )

        candidates_path = out_dir / settings.CANDIDATES_FILENAME
        simcore.save_candidate_index(candidates, candidates_path)
        logger.info(f"Saved candidate index to {candidates_path}")


if __name__ == "__main__":
    main()
