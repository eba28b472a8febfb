import json
import os
from pathlib import Path

import click
from loguru import logger

from src.config import settings
from src.config.models import ExperimentConfig
from src.errors import exit_on_error
from src.modelling import model_utils
from src.prediction import predict_utils


@click.command()
@click.option(
    "--out-dir",
    default=settings.DATA_DIR / "artifacts",
    help="Artifact directory written by the pipeline.",
)
@click.option(
    "--config-path",
    help="Experiment config. Defaults to the config.yaml saved next to the artifacts.",
)
@click.option("--events-csv", help="Event log CSV; defaults to the one in the config.")
@click.option("--boundary", type=int, help="Split timestamp; later events are tested.")
@click.option(
    "--alpha",
    type=float,
    help="Weight on the user-preference score; 0 gives the non-personalized baseline.",
)
@click.option("--top-k", type=int, help="Length of each recommended list.")
@click.option("--k", type=int, help="Metric cut-off rank (default 15).")
@click.option("--per-query-csv", help="If given, per-query metrics are written here.")
def main(out_dir, config_path, events_csv, boundary, alpha, top_k, k, per_query_csv):
    with exit_on_error():
        out_dir = Path(out_dir)
        if config_path is None:
            config_path = out_dir / settings.CONFIG_FILENAME

        overrides = {
            "data_params.events_csv": events_csv,
            "data_params.boundary": boundary,
            "blend.alpha": alpha,
            "blend.top_k": top_k,
            "eval_params.k": k,
        }
        config = ExperimentConfig.load(config_path, overrides)

        artifacts = predict_utils.load_artifacts(out_dir)
        events = model_utils.load_events(config)
        _, test_events, _ = model_utils.split_for_evaluation(events, config)

        report = model_utils.evaluate_artifacts(
            artifacts, test_events, config.blend, config.eval_params.k
        )

        if per_query_csv is not None:
            per_query_dir = Path(per_query_csv).parent
            if not os.path.exists(per_query_dir):
                os.makedirs(per_query_dir, exist_ok=True)
        report_path = out_dir / settings.REPORT_FILENAME
        model_utils.save_report(report, report_path, per_query_csv)

        click.echo(json.dumps(report.to_dict(), indent=4))
        logger.info(f"Saved report to {report_path}")


if __name__ == "__main__":
    main()
