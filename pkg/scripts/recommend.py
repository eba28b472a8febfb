from pathlib import Path

import click

from src.config import settings
from src.config.models import ExperimentConfig
from src.errors import exit_on_error
from src.prediction import predict_utils


@click.command()
@click.option("--item", required=True, help="Id of the product being viewed.")
@click.option("--user", help="Id of the shopper. Leave out for anonymous sessions.")
@click.option(
    "--out-dir",
    default=settings.DATA_DIR / "artifacts",
    help="Artifact directory written by the pipeline.",
)
@click.option(
    "--config-path",
    help="Experiment config. Defaults to the config.yaml saved next to the artifacts.",
)
@click.option(
    "--alpha",
    type=float,
    help="Weight on the user-preference score; 0 gives the non-personalized list.",
)
@click.option("--top-k", type=int, help="Number of products to return.")
@click.option(
    "--normalization",
    type=click.Choice(["minmax", "rank"]),
    help="How both score lists are mapped onto [0, 1] before blending.",
)
def main(item, user, out_dir, config_path, alpha, top_k, normalization):
    with exit_on_error():
        out_dir = Path(out_dir)
        if config_path is None:
            config_path = out_dir / settings.CONFIG_FILENAME

        overrides = {
            "blend.alpha": alpha,
            "blend.top_k": top_k,
            "blend.normalization": normalization,
        }
        config = ExperimentConfig.load(config_path, overrides)
        artifacts = predict_utils.load_artifacts(out_dir)

        recommendations = predict_utils.recommend(user, item, artifacts, config.blend)
        click.echo(
            recommendations.to_csv(
                index=False, float_format=settings.FLOAT_FORMAT, lineterminator="\n"
            ),
            nl=False,
        )


if __name__ == "__main__":
    main()
