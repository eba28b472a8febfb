import json
import os
import time
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd
import yaml
from loguru import logger
from tqdm import tqdm

from src.config import settings
from src.config.models import (
    BlendConfig,
    ExperimentConfig,
    SweepDimension,
    SweepGrid,
    TrainerTag,
)
from src.data_processing import interactions
from src.data_processing.interactions import Event, RatingMatrix
from src.errors import InputError, NoQueriesError, PersimError
from src.modelling import eval_utils, simcore
from src.modelling.als_trainer import als_train
from src.modelling.bpr_trainer import bpr_train
from src.modelling.factor_model import FactorModel, save_model
from src.prediction.predict_utils import Artifacts
from src.prediction.reranker import rerank


def load_events(config: ExperimentConfig) -> List[Event]:
    if not config.data_params.events_csv:
        raise InputError(
            "No event file given (set data_params.events_csv or --events-csv)"
        )
    return interactions.read_events(
        config.data_params.events_csv, strict=config.data_params.strict
    )


def split_for_evaluation(events: List[Event], config: ExperimentConfig):
    """Chronological train/test split. An explicit boundary wins over test_fraction.

    Returns:
        list of Event: Train events.
        list of Event: Test events (empty when no split is configured).
        int: The boundary used, or None.
    """
    boundary = config.data_params.boundary
    if boundary is None and config.data_params.test_fraction is not None:
        boundary = eval_utils.boundary_at_fraction(
            events, config.data_params.test_fraction
        )
    if boundary is None:
        return list(events), [], None

    train_events, test_events = eval_utils.split_events(events, boundary)
    logger.info(
        f"Split at {boundary}: {len(train_events):,} train / "
        f"{len(test_events):,} test events"
    )
    return train_events, test_events, boundary


def train_factor_model(m: RatingMatrix, config: ExperimentConfig) -> FactorModel:
    if config.trainer == TrainerTag.ALS:
        return als_train(m, config.als, n_jobs=config.n_jobs)
    return bpr_train(m, config.bpr)


def build_artifacts(train_events: List[Event], config: ExperimentConfig) -> Artifacts:
    """Rating matrix, candidate index and factor model from the training events."""
    matrix = interactions.build_matrix(train_events, config.weights)
    stats = interactions.matrix_stats(matrix)
    logger.info(
        f"Matrix: {stats['n_users']:,} users x {stats['n_items']:,} items, "
        f"{stats['n_entries']:,} entries (sparsity {stats['sparsity']:.4%})"
    )

    start_time = time.time()
    candidates = simcore.build_candidate_index(
        matrix,
        n_neighbors=config.index_params.n_neighbors,
        binarize=config.index_params.binarize,
        n_jobs=config.n_jobs,
    )
    elapsed = time.time() - start_time
    logger.info(f"Candidate index built in {elapsed:.1f}s")

    start_time = time.time()
    model = train_factor_model(matrix, config)
    elapsed = time.time() - start_time
    logger.info(f"{config.trainer.value} model trained in {elapsed:.1f}s")

    return Artifacts(matrix, candidates, model)


def save_artifacts(artifacts: Artifacts, config: ExperimentConfig, out_dir=None):
    out_dir = Path(out_dir or config.out_dir)
    if not os.path.exists(out_dir):
        os.makedirs(out_dir, exist_ok=True)

    interactions.save_matrix(artifacts.matrix, out_dir / settings.MATRIX_FILENAME)
    simcore.save_candidate_index(
        artifacts.candidates, out_dir / settings.CANDIDATES_FILENAME
    )
    save_model(artifacts.model, out_dir / settings.MODEL_FILENAME)

    # Copy over the resolved config so we keep track of the configuration
    with open(out_dir / settings.CONFIG_FILENAME, "w") as f:
        yaml.dump(config.to_yaml_dict(), f, default_flow_style=False)

    logger.info(f"Saved artifacts to {out_dir}")


def run_pipeline(config: ExperimentConfig) -> Artifacts:
    """ingest -> candidate index -> trainer -> artifacts on disk."""
    start_time = time.time()
    events = load_events(config)
    train_events, _, _ = split_for_evaluation(events, config)

    artifacts = build_artifacts(train_events, config)
    save_artifacts(artifacts, config)
    logger.info(f"Pipeline finished in {time.time() - start_time:.1f}s")
    return artifacts


def evaluate_artifacts(
    artifacts: Artifacts, test_events: List[Event], blend: BlendConfig, k: int
) -> eval_utils.EvalReport:
    queries = eval_utils.build_queries(test_events, artifacts.matrix)
    if not queries:
        raise NoQueriesError(
            "No evaluation queries: no test user has a known query item and at least "
            "one other known test item"
        )

    # Metrics at k are taken over the top-k list, so rank at least k items
    if blend.top_k < k:
        logger.info(f"Ranking {k} items per query to match the metric cut-off")
        blend = blend.copy(update={"top_k": k})

    def recommend_fn(user, query_item):
        return rerank(user, query_item, artifacts.candidates, artifacts.model, blend)

    return eval_utils.evaluate(queries, recommend_fn, k=k)


def save_report(report: eval_utils.EvalReport, path, per_query_path=None):
    with open(path, "w") as f:
        json.dump(report.to_dict(), f, indent=4)
    if per_query_path is not None:
        report.per_query_frame().to_csv(
            per_query_path,
            index=False,
            float_format=settings.FLOAT_FORMAT,
            lineterminator="\n",
        )


def _point_columns(dimension: SweepDimension, point) -> dict:
    if dimension == SweepDimension.RATING_WEIGHTS:
        w_list_view, w_click, w_cart, w_order, freq = point.as_tuple()
        return {
            "w_list_view": w_list_view,
            "w_click": w_click,
            "w_cart": w_cart,
            "w_order": w_order,
            "use_frequency": freq,
        }
    if dimension == SweepDimension.CONFIDENCE:
        return {"confidence": point}
    return {"alpha": point}


def _config_at_point(config: ExperimentConfig, dimension: SweepDimension, point):
    if dimension == SweepDimension.RATING_WEIGHTS:
        return config.copy(update={"weights": point})
    if dimension == SweepDimension.CONFIDENCE:
        return config.copy(
            update={
                "trainer": TrainerTag.ALS,
                "als": config.als.copy(update={"confidence": point}),
            }
        )
    return config.copy(update={"blend": config.blend.copy(update={"alpha": point})})


def run_sweep(
    grid: SweepGrid, config: ExperimentConfig, events: Optional[List[Event]] = None
) -> pd.DataFrame:
    """Evaluates every grid point on the configured split, one row per point.

    A failing point gets its error recorded in the row and the sweep moves on.
    Alpha points share one set of artifacts since alpha only enters at rerank time.
    A confidence sweep runs ALS and ends with one BPR reference row, whose
    confidence is NaN.
    """
    if events is None:
        events = load_events(config)
    train_events, test_events, _ = split_for_evaluation(events, config)
    k = config.eval_params.k

    if grid.dimension == SweepDimension.CONFIDENCE and config.trainer != TrainerTag.ALS:
        logger.warning("Confidence only affects ALS, sweeping with the ALS trainer")

    jobs = []
    for point in grid.points:
        point_config = _config_at_point(config, grid.dimension, point)
        jobs.append((_point_columns(grid.dimension, point), point_config))
    if grid.dimension == SweepDimension.CONFIDENCE:
        bpr_config = config.copy(update={"trainer": TrainerTag.BPR})
        jobs.append(({"confidence": np.nan}, bpr_config))

    shared_artifacts = None
    rows = []
    for row, point_config in tqdm(jobs, desc=f"Sweeping {grid.dimension.value}"):
        row["trainer"] = point_config.trainer.value
        try:
            if grid.dimension == SweepDimension.ALPHA:
                if shared_artifacts is None:
                    shared_artifacts = build_artifacts(train_events, config)
                artifacts = shared_artifacts
            else:
                artifacts = build_artifacts(train_events, point_config)
            report = evaluate_artifacts(artifacts, test_events, point_config.blend, k)
            row.update(
                {
                    f"map@{k}": report.map_at_k,
                    f"precision@{k}": report.precision_at_k,
                    f"recall@{k}": report.recall_at_k,
                    "n_queries": report.n_queries,
                    "error": "",
                }
            )
        except (PersimError, ValueError, np.linalg.LinAlgError) as e:
            logger.error(f"Sweep point {row} failed: {e}")
            row.update(
                {
                    f"map@{k}": np.nan,
                    f"precision@{k}": np.nan,
                    f"recall@{k}": np.nan,
                    "n_queries": 0,
                    "error": f"{type(e).__name__}: {e}",
                }
            )
        rows.append(row)

    return pd.DataFrame(rows)
