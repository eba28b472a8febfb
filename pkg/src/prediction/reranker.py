from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from loguru import logger
from scipy.stats import rankdata

from src.config.models import BlendConfig
from src.errors import IndexOutOfRangeError, UnknownQueryItemError
from src.modelling.factor_model import FactorModel
from src.modelling.simcore import CandidateIndex, top_n

# A user without a trained vector; gets the non-personalized list
ANONYMOUS = None


class RankedEntry(NamedTuple):
    item: int
    blended: float
    similarity: float
    preference: float


@dataclass
class RankedList:
    """Final ranking for one (user, query item) pair.

    `similarity` and `preference` are the normalized components that were blended.
    """

    query_item: int
    user: Optional[int]
    entries: List[RankedEntry] = field(default_factory=list)

    @property
    def items(self) -> List[int]:
        return [entry.item for entry in self.entries]

    @property
    def is_anonymous(self):
        return self.user is ANONYMOUS

    def __len__(self):
        return len(self.entries)


def user_item_score(model: FactorModel, u: int, i: int) -> float:
    if not 0 <= u < model.n_users:
        raise IndexOutOfRangeError(f"User index {u} out of range [0, {model.n_users})")
    if not 0 <= i < model.n_items:
        raise IndexOutOfRangeError(f"Item index {i} out of range [0, {model.n_items})")
    return float(model.user_factors[u] @ model.item_factors[i])


def normalize_scores(scores, method: str = "minmax") -> np.ndarray:
    """Maps a score list onto [0, 1]. A constant list maps to 0.5 everywhere.

    Args:
        scores (array-like): Raw scores for one candidate list.
        method (str): "minmax" for (s - min) / (max - min), "rank" for the
            average-rank percentile.
    Returns:
        np.ndarray
    """
    scores = np.asarray(scores, dtype=np.float64)
    if len(scores) == 0:
        return scores
    low, high = scores.min(), scores.max()
    if high == low:
        return np.full(len(scores), 0.5)

    if method == "minmax":
        return (scores - low) / (high - low)
    if method == "rank":
        return (rankdata(scores, method="average") - 1) / (len(scores) - 1)
    raise ValueError(f"Unknown normalization {method!r}")


def _resolve_user(user, model: FactorModel):
    if user is ANONYMOUS:
        return ANONYMOUS
    if not 0 <= user < model.n_users:
        logger.warning(f"User index {user} has no trained vector, not personalizing")
        return ANONYMOUS
    return user


def rerank(
    user: Optional[int],
    query: int,
    candidates: CandidateIndex,
    model: FactorModel,
    cfg: BlendConfig,
) -> RankedList:
    """Blends candidate similarity with the user's latent preference.

    blended = alpha * preference + (1 - alpha) * similarity, both components
    normalized over the query's candidate list. Anonymous or unknown users get
    the alpha = 0 ranking.
    """
    if not 0 <= query < candidates.n_items:
        raise UnknownQueryItemError(query)

    user = _resolve_user(user, model)
    neighbor_list = [
        (item, score) for item, score in candidates.candidates(query) if item != query
    ]
    if not neighbor_list:
        return RankedList(query, user)

    items = np.array([item for item, _ in neighbor_list], dtype=np.int64)
    scores = [score for _, score in neighbor_list]
    similarity = normalize_scores(scores, cfg.normalization)

    if user is ANONYMOUS:
        alpha = 0.0
        preference = np.zeros(len(items))
    else:
        alpha = cfg.alpha
        raw_preference = model.item_factors[items] @ model.user_factors[user]
        preference = normalize_scores(raw_preference, cfg.normalization)

    blended = alpha * preference + (1 - alpha) * similarity

    # Descending blended score, ties by ascending item index
    order = np.lexsort((items, -blended))[: cfg.top_k]
    entries = [
        RankedEntry(
            int(items[o]), float(blended[o]), float(similarity[o]), float(preference[o])
        )
        for o in order
    ]
    return RankedList(query, user, entries)


def recommend_for_user(
    model: FactorModel, u: int, top_k: int, exclude: Optional[Iterable[int]] = None
) -> List[Tuple[int, float]]:
    """Personalized listing: every item sorted by x_u . y_i, minus the excluded ones."""
    if not 0 <= u < model.n_users:
        raise IndexOutOfRangeError(f"User index {u} out of range [0, {model.n_users})")

    scores = model.user_scores(u)
    if exclude is not None:
        scores[list(exclude)] = -np.inf
    return top_n(scores, top_k)
