import json
from pathlib import Path

import click
import yaml
from loguru import logger

from src.config import settings
from src.config.models import ExperimentConfig, TrainerTag
from src.data_processing import interactions
from src.errors import exit_on_error
from src.modelling import model_utils
from src.modelling.als_trainer import als_train
from src.modelling.factor_model import save_model


@click.command()
@click.option(
    "--config-path",
    default=settings.CONFIG_DIR / "default.yaml",
    help="Path to the experiment configuration yaml file",
)
@click.option("--out-dir", help="Artifact directory holding matrix.txt.")
@click.option(
    "--trainer",
    type=click.Choice(["als", "bpr"], case_sensitive=False),
    help="Latent factor trainer.",
)
@click.option("--seed", type=int, help="Single seed, fanned out to every stage.")
@click.option("--n-jobs", type=int, help="Threads for the ALS row solves.")
@click.option(
    "--track-objective",
    is_flag=True,
    default=False,
    help="If true (ALS only), saves the objective after every half-round as json.",
)
def train(config_path, out_dir, trainer, seed, n_jobs, track_objective):
    with exit_on_error():
        overrides = {
            "out_dir": out_dir,
            "trainer": trainer,
            "seed": seed,
            "n_jobs": n_jobs,
        }
        config = ExperimentConfig.load(config_path, overrides)

        out_dir = Path(config.out_dir)
        matrix = interactions.load_matrix(out_dir / settings.MATRIX_FILENAME)

        if track_objective and config.trainer == TrainerTag.ALS:
            model = als_train(
                matrix, config.als, track_objective=True, n_jobs=config.n_jobs
            )
            with open(out_dir / "objective_trace.json", "w") as f:
                json.dump(model.metadata["objective_trace"], f, indent=4)
        else:
            if track_objective:
                logger.warning("--track-objective only applies to the ALS trainer")
            model = model_utils.train_factor_model(matrix, config)

        # Serialize model and the config it was trained with
        save_model(model, out_dir / settings.MODEL_FILENAME)
        with open(out_dir / settings.CONFIG_FILENAME, "w") as f:
            yaml.dump(config.to_yaml_dict(), f, default_flow_style=False)

        model_path = out_dir / settings.MODEL_FILENAME
        logger.info(f"Saved {config.trainer.value} model to {model_path}")


if __name__ == "__main__":
    train()
