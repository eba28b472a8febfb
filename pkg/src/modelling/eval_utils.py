from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from sklearn.metrics import roc_auc_score
from tqdm import tqdm

from src.data_processing.interactions import Event, RatingMatrix
from src.errors import EmptyInputError, EmptyTruthError, NoQueriesError
from src.modelling.factor_model import FactorModel
from src.prediction.reranker import RankedList

PER_QUERY_COLUMNS = [
    "user",
    "query_item",
    "n_truth",
    "n_hits",
    "average_precision",
    "precision",
    "recall",
]


@dataclass(frozen=True)
class EvalQuery:
    user: int
    query_item: int
    ground_truth: FrozenSet[int]

    def __post_init__(self):
        object.__setattr__(self, "ground_truth", frozenset(self.ground_truth))
        if not self.ground_truth:
            raise EmptyTruthError(f"Query for user {self.user} has no ground truth")
        assert self.query_item not in self.ground_truth


@dataclass
class EvalReport:
    k: int
    n_queries: int
    precision_at_k: float
    recall_at_k: float
    map_at_k: float
    per_query: Optional[List[dict]] = field(default=None, repr=False)

    def to_dict(self):
        return {
            "k": self.k,
            "n_queries": self.n_queries,
            f"precision@{self.k}": self.precision_at_k,
            f"recall@{self.k}": self.recall_at_k,
            f"map@{self.k}": self.map_at_k,
        }

    def per_query_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_query or [], columns=PER_QUERY_COLUMNS)


def _sorted_by_time(events: List[Event]) -> List[Event]:
    # Stable, so equal timestamps keep their file order
    return sorted(events, key=lambda e: e.timestamp)


def split_events(events: List[Event], boundary: int):
    """Chronological split: train is strictly before `boundary`, test is the rest."""
    events = _sorted_by_time(events)
    train = [e for e in events if e.timestamp < boundary]
    test = [e for e in events if e.timestamp >= boundary]
    return train, test


def boundary_at_fraction(events: List[Event], test_fraction: float) -> int:
    """Timestamp with about the last `test_fraction` of events on or after it."""
    if not events:
        raise EmptyInputError("Cannot choose a split boundary without events")
    assert 0 < test_fraction < 1

    timestamps = np.sort(np.array([e.timestamp for e in events], dtype=np.int64))
    position = int(np.floor(len(timestamps) * (1 - test_fraction)))
    position = min(max(position, 0), len(timestamps) - 1)
    return int(timestamps[position])


def build_queries(
    test_events: List[Event], train_matrix: RatingMatrix
) -> List[EvalQuery]:
    """Turns each returning user's test activity into one query.

    The query is the user's first test item known to the train matrix; the ground
    truth is every other distinct known test item. Users unknown to the train
    matrix, or left without ground truth, are dropped.
    """
    items_by_user: Dict[int, List[int]] = {}
    for e in _sorted_by_time(test_events):
        user = train_matrix.user_index.get(e.user_id)
        item = train_matrix.item_index.get(e.item_id)
        if user is None or item is None:
            continue
        items_by_user.setdefault(user, []).append(item)

    queries = []
    for user in sorted(items_by_user):
        query_item, *rest = items_by_user[user]
        ground_truth = set(rest) - {query_item}
        if ground_truth:
            queries.append(EvalQuery(user, query_item, frozenset(ground_truth)))

    n_test_users = len({e.user_id for e in test_events})
    logger.info(
        f"Built {len(queries):,} queries from {n_test_users:,} test users "
        f"({n_test_users - len(queries):,} dropped)"
    )
    return queries


def _hits(predicted: Sequence[int], truth, k: int) -> int:
    return sum(1 for item in predicted[:k] if item in truth)


def precision_at_k(predicted: Sequence[int], truth, k: int) -> float:
    assert k >= 1
    return _hits(predicted, truth, k) / k


def recall_at_k(predicted: Sequence[int], truth, k: int) -> float:
    if not truth:
        raise EmptyTruthError("recall is undefined for an empty ground truth")
    return _hits(predicted, truth, k) / len(truth)


def average_precision(predicted: Sequence[int], truth, k: int) -> float:
    """AP@k = sum of precision@r over the relevant ranks r <= k, over min(|truth|, k).

    Args:
        predicted (list of int): Ranked items, no duplicates.
        truth (set of int): Relevant items.
        k (int): Cut-off rank.
    Returns:
        float: A value in [0, 1].
    """
    if not truth:
        raise EmptyTruthError("average precision needs a non-empty ground truth")
    assert k >= 1
    assert len(set(predicted)) == len(predicted), "predicted items must be unique"

    hits = 0
    total = 0.0
    for rank, item in enumerate(predicted[:k], start=1):
        if item in truth:
            hits += 1
            total += hits / rank
    return total / min(len(truth), k)


def _predicted_items(result) -> List[int]:
    if isinstance(result, RankedList):
        return result.items
    return list(result)


def evaluate(
    queries: List[EvalQuery], recommend_fn: Callable[[int, int], Iterable], k: int = 15
) -> EvalReport:
    """Scores a recommender on the query protocol.

    Args:
        queries (list of EvalQuery): Queries from `build_queries`.
        recommend_fn (callable): (user, query_item) -> RankedList or item list.
        k (int): Cut-off rank.
    Returns:
        EvalReport: Unweighted means over the queries plus per-query rows.
    """
    if not queries:
        raise NoQueriesError("No evaluation queries left after filtering")
    assert k >= 1

    per_query = []
    for query in tqdm(queries, desc="Evaluating queries"):
        predicted = _predicted_items(recommend_fn(query.user, query.query_item))
        truth = query.ground_truth
        per_query.append(
            {
                "user": query.user,
                "query_item": query.query_item,
                "n_truth": len(truth),
                "n_hits": _hits(predicted, truth, k),
                "average_precision": average_precision(predicted, truth, k),
                "precision": precision_at_k(predicted, truth, k),
                "recall": recall_at_k(predicted, truth, k),
            }
        )

    report = EvalReport(
        k=k,
        n_queries=len(per_query),
        precision_at_k=float(np.mean([row["precision"] for row in per_query])),
        recall_at_k=float(np.mean([row["recall"] for row in per_query])),
        map_at_k=float(np.mean([row["average_precision"] for row in per_query])),
        per_query=per_query,
    )
    logger.info(
        f"MAP@{k}: {report.map_at_k:.4f}, precision@{k}: {report.precision_at_k:.4f}, "
        f"recall@{k}: {report.recall_at_k:.4f} over {report.n_queries:,} queries"
    )
    return report


def user_auc(scores, positives, negatives) -> float:
    """ROC AUC of one user's scores, positives against negatives."""
    positives, negatives = list(positives), list(negatives)
    if not positives or not negatives:
        raise ValueError("AUC needs at least one positive and one negative item")

    scores = np.asarray(scores, dtype=np.float64)
    labels = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))])
    return float(roc_auc_score(labels, scores[positives + negatives]))


def mean_auc(
    model: FactorModel,
    truth: Dict[int, Iterable[int]],
    exclude: Optional[Dict[int, Iterable[int]]] = None,
) -> float:
    """Mean per-user AUC of the factor scores.

    Args:
        model (FactorModel): The trained model.
        truth (dict): User index -> relevant item indices.
        exclude (dict): User index -> items left out of both classes (e.g. the
            training positives).
    Returns:
        float
    """
    exclude = exclude or {}
    aucs = []
    for user in sorted(truth):
        excluded = set(exclude.get(user, ()))
        positives = sorted(set(truth[user]) - excluded)
        negatives = sorted(set(range(model.n_items)) - set(truth[user]) - excluded)
        if not positives or not negatives:
            continue
        aucs.append(user_auc(model.user_scores(user), positives, negatives))

    if not aucs:
        raise NoQueriesError("No user has both positive and negative items for AUC")
    return float(np.mean(aucs))
