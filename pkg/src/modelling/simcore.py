from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from loguru import logger
from scipy import sparse
from sklearn.preprocessing import normalize

from src.config import settings
from src.data_processing.interactions import RatingMatrix
from src.errors import (
    ArtifactNotFoundError,
    DimensionMismatchError,
    InputError,
    TooFewItemsError,
)

DEFAULT_N_NEIGHBORS = 100
SCORE_DECIMALS = 12

# Items per block when scoring the item-item similarities
BLOCK_SIZE = 512


@dataclass
class CandidateIndex:
    """Per-item top-N most similar other items, sorted by descending cosine.

    `neighbors[i]` is a list of `(item_index, score)` pairs; ties are ordered by
    ascending item index.
    """

    n_items: int
    n_neighbors: int
    neighbors: List[List[Tuple[int, float]]]
    item_ids: Optional[List[str]] = None

    def __post_init__(self):
        assert len(self.neighbors) == self.n_items

    def candidates(self, item: int) -> List[Tuple[int, float]]:
        return self.neighbors[item]


def _as_dense_vector(vector):
    if sparse.issparse(vector):
        return np.asarray(vector.todense(), dtype=np.float64).ravel()
    return np.asarray(vector, dtype=np.float64).ravel()


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot dot shapes {a.shape} and {b.shape}")
    return float(np.dot(a, b))


def cosine(a, b) -> float:
    """Cosine similarity of two vectors (dense or scipy sparse); 0 if either is zero."""
    a = _as_dense_vector(a)
    b = _as_dense_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"Cannot compare shapes {a.shape} and {b.shape}")

    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0:
        return 0.0
    return float(np.dot(a, b) / norm)


def top_n(scores: np.ndarray, n: int) -> List[Tuple[int, float]]:
    """Top-n finite scores, descending, ties by ascending index."""
    valid = np.flatnonzero(np.isfinite(scores))
    if len(valid) == 0:
        return []

    if len(valid) > n:
        # Keep everything tied with the n-th best so the tie-break stays exact
        threshold = np.partition(scores[valid], len(valid) - n)[len(valid) - n]
        valid = valid[scores[valid] >= threshold]

    order = np.lexsort((valid, -scores[valid]))[:n]
    chosen = valid[order]
    return [(int(item), float(scores[item])) for item in chosen]


def _score_block(normalized, start, stop, n, empty_items):
    block = (normalized[start:stop] @ normalized.T).toarray()
    # Rounding makes scores that are equal up to float noise tie exactly
    block = np.round(block, SCORE_DECIMALS)

    # Exclude self matches and items without interactions
    block[np.arange(stop - start), np.arange(start, stop)] = -np.inf
    block[:, empty_items] = -np.inf

    results = []
    for offset, row in enumerate(block):
        if empty_items[start + offset]:
            results.append([])
        else:
            results.append(top_n(row, n))
    return results


def build_candidate_index(
    m: RatingMatrix,
    n_neighbors: int = DEFAULT_N_NEIGHBORS,
    binarize: bool = False,
    n_jobs: int = 1,
) -> CandidateIndex:
    """Exact item-item cosine top-N over the rating matrix columns.

    Args:
        m (RatingMatrix): The user x item ratings.
        n_neighbors (int): Neighbors kept per item.
        binarize (bool): If True, presence (1) replaces the rating values.
        n_jobs (int): Parallel item blocks. The output does not depend on it.
    Returns:
        CandidateIndex
    """
    if m.n_items < 2:
        raise TooFewItemsError(
            f"Need at least 2 items for a candidate index, got {m.n_items}"
        )
    assert n_neighbors >= 1

    item_vectors = m.item_users
    if binarize:
        item_vectors = item_vectors.copy()
        item_vectors.data = np.ones_like(item_vectors.data)

    # Rows become unit vectors, so a sparse product gives the cosines directly
    normalized = normalize(item_vectors, norm="l2", axis=1).tocsr()
    empty_items = np.asarray(item_vectors.getnnz(axis=1) == 0)

    blocks = [
        (start, min(start + BLOCK_SIZE, m.n_items))
        for start in range(0, m.n_items, BLOCK_SIZE)
    ]
    logger.info(
        f"Scoring {m.n_items:,} items in {len(blocks)} blocks "
        f"(top {n_neighbors} neighbors)"
    )
    block_results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_score_block)(normalized, start, stop, n_neighbors, empty_items)
        for start, stop in blocks
    )

    neighbors = [row for block in block_results for row in block]
    return CandidateIndex(
        n_items=m.n_items,
        n_neighbors=n_neighbors,
        neighbors=neighbors,
        item_ids=list(m.item_ids),
    )


def brute_force_candidates(m: RatingMatrix, n_neighbors: int, binarize: bool = False):
    """Dense all-pairs cosine reference for `build_candidate_index`."""
    dense = m.ratings.toarray().T
    if binarize:
        dense = (dense > 0).astype(np.float64)

    neighbors = []
    for i in range(m.n_items):
        if not np.any(dense[i]):
            neighbors.append([])
            continue
        scored = [
            (j, cosine(dense[i], dense[j]))
            for j in range(m.n_items)
            if j != i and np.any(dense[j])
        ]
        scored.sort(key=lambda pair: (-round(pair[1], SCORE_DECIMALS), pair[0]))
        neighbors.append(scored[:n_neighbors])
    return CandidateIndex(m.n_items, n_neighbors, neighbors, list(m.item_ids))


def save_candidate_index(index: CandidateIndex, path):
    rows = [
        (index.item_ids[item], rank, index.item_ids[neighbor], score)
        for item, neighbor_list in enumerate(index.neighbors)
        for rank, (neighbor, score) in enumerate(neighbor_list, start=1)
    ]
    df = pd.DataFrame(rows, columns=["item_id", "rank", "neighbor_item_id", "score"])
    df.to_csv(
        path, index=False, float_format=settings.FLOAT_FORMAT, lineterminator="\n"
    )


def load_candidate_index(path, item_ids: List[str]) -> CandidateIndex:
    """Reads a candidate CSV back into index space given the item id order."""
    path = Path(path)
    if not path.exists():
        raise ArtifactNotFoundError(path)

    df = pd.read_csv(
        path, dtype={"item_id": str, "neighbor_item_id": str}, keep_default_na=False
    )
    item_index = {item_id: index for index, item_id in enumerate(item_ids)}

    unknown = set(df["item_id"]).union(df["neighbor_item_id"]) - set(item_index)
    if unknown:
        raise InputError(f"{path} references {len(unknown):,} unknown items")

    neighbors = [[] for _ in item_ids]
    df = df.sort_values(["item_id", "rank"], kind="stable")
    rows = zip(df["item_id"], df["neighbor_item_id"], df["score"])
    for item_id, neighbor_id, score in rows:
        neighbors[item_index[item_id]].append((item_index[neighbor_id], float(score)))

    n_neighbors = int(df["rank"].max()) if len(df) else 0
    return CandidateIndex(len(item_ids), max(n_neighbors, 1), neighbors, list(item_ids))
