from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import pandas as pd
from loguru import logger

from src.config import settings
from src.config.models import BlendConfig
from src.data_processing.interactions import RatingMatrix, load_matrix
from src.errors import DimensionMismatchError, UnknownQueryItemError
from src.modelling.factor_model import FactorModel, load_model
from src.modelling.simcore import CandidateIndex, load_candidate_index
from src.prediction.reranker import ANONYMOUS, RankedList, rerank

RECOMMENDATION_COLUMNS = ["rank", "item_id", "blended", "similarity", "preference"]


@dataclass
class Artifacts:
    """Everything the recommender needs at query time."""

    matrix: RatingMatrix
    candidates: CandidateIndex
    model: FactorModel

    def __post_init__(self):
        self.model.check_matches(self.matrix)
        if self.candidates.n_items != self.matrix.n_items:
            raise DimensionMismatchError("Candidate index and matrix disagree on items")


def load_artifacts(artifact_dir) -> Artifacts:
    artifact_dir = Path(artifact_dir)
    matrix = load_matrix(artifact_dir / settings.MATRIX_FILENAME)
    model = load_model(artifact_dir / settings.MODEL_FILENAME)
    candidates = load_candidate_index(
        artifact_dir / settings.CANDIDATES_FILENAME, matrix.item_ids
    )
    logger.info(
        f"Loaded {model.trainer_tag.value} artifacts from {artifact_dir} "
        f"({matrix.n_users:,} users, {matrix.n_items:,} items)"
    )
    return Artifacts(matrix, candidates, model)


def ranked_list_to_frame(ranked: RankedList, artifacts: Artifacts) -> pd.DataFrame:
    rows = [
        (
            rank,
            artifacts.matrix.item_ids[entry.item],
            entry.blended,
            entry.similarity,
            entry.preference,
        )
        for rank, entry in enumerate(ranked.entries, start=1)
    ]
    return pd.DataFrame(rows, columns=RECOMMENDATION_COLUMNS)


def recommend(
    user_id: Optional[str], item_id: str, artifacts: Artifacts, cfg: BlendConfig
) -> pd.DataFrame:
    """Similar products for `item_id`, personalized for `user_id` when it is known.

    Args:
        user_id (str): The shopper, or None for an anonymous session.
        item_id (str): The product being viewed.
        artifacts (Artifacts): Matrix, candidate index and factor model.
        cfg (BlendConfig): Blend weight, list length and normalization.
    Returns:
        pd.DataFrame: rank, item_id, blended, similarity, preference.
    """
    query = artifacts.matrix.item_index.get(item_id)
    if query is None:
        raise UnknownQueryItemError(item_id)

    user = ANONYMOUS
    if user_id is not None:
        user = artifacts.matrix.user_index.get(user_id, ANONYMOUS)
        if user is ANONYMOUS:
            logger.warning(f"Unknown user {user_id!r}, not personalizing")

    ranked = rerank(user, query, artifacts.candidates, artifacts.model, cfg)
    return ranked_list_to_frame(ranked, artifacts)
