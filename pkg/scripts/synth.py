import os
from pathlib import Path

import click
import yaml
from loguru import logger

from src.config import settings
from src.config.models import SynthConfig
from src.data_processing import interactions, synthgen
from src.errors import exit_on_error


@click.command()
@click.option(
    "--out-csv",
    default=settings.DATA_DIR / "synthetic" / "events.csv",
    help="Where to write the generated event log.",
)
@click.option(
    "--oracle-csv",
    help="If given, also write the planted user x item affinities here.",
)
@click.option("--config-path", help="Optional yaml file with generator settings.")
@click.option("--n-users", type=int, help="Number of users.")
@click.option("--n-items", type=int, help="Number of items.")
@click.option("--n-styles", type=int, help="Number of planted item styles.")
@click.option("--events-per-user", type=float, help="Mean list views per user.")
@click.option("--taste-sharpness", type=float, help="Sharpness of user preferences.")
@click.option("--seed", type=int, help="Random seed.")
def main(
    out_csv,
    oracle_csv,
    config_path,
    n_users,
    n_items,
    n_styles,
    events_per_user,
    taste_sharpness,
    seed,
):
    with exit_on_error():
        raw_config = {}
        if config_path is not None:
            with open(config_path, "r") as config_file:
                raw_config = yaml.safe_load(config_file) or {}

        overrides = {
            "n_users": n_users,
            "n_items": n_items,
            "n_styles": n_styles,
            "events_per_user": events_per_user,
            "taste_sharpness": taste_sharpness,
        }
        if seed is not None:
            overrides["seed"] = seed + settings.SEED_OFFSETS["synth"]
        raw_config.update(
            {key: value for key, value in overrides.items() if value is not None}
        )
        cfg = SynthConfig.parse_obj(raw_config)

        events, oracle = synthgen.generate(cfg)

        # Prepare output dir
        out_csv = Path(out_csv)
        if not os.path.exists(out_csv.parent):
            os.makedirs(out_csv.parent, exist_ok=True)

        interactions.write_events(out_csv, events)
        logger.info(f"Wrote {len(events):,} events to {out_csv}")

        if oracle_csv is not None:
            synthgen.write_oracle(oracle_csv, oracle)
            logger.info(f"Wrote the affinity oracle to {oracle_csv}")


if __name__ == "__main__":
    main()
