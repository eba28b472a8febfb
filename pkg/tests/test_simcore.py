import numpy as np
import pytest
from scipy import sparse

from src.data_processing.interactions import RatingMatrix
from src.errors import DimensionMismatchError, TooFewItemsError
from src.modelling import simcore
from src.modelling.simcore import (
    brute_force_candidates,
    build_candidate_index,
    cosine,
    dot,
)


def _matrix_from_dense(dense):
    dense = np.asarray(dense, dtype=float)
    n_users, n_items = dense.shape
    return RatingMatrix(
        sparse.csr_matrix(dense),
        [f"u{u}" for u in range(n_users)],
        [f"p{i}" for i in range(n_items)],
    )


def _assert_same_index(actual, expected):
    assert actual.n_items == expected.n_items
    for got, want in zip(actual.neighbors, expected.neighbors):
        assert [item for item, _ in got] == [item for item, _ in want]
        assert np.allclose([s for _, s in got], [s for _, s in want], atol=1e-9)


def test_cosine_examples():
    assert cosine([1, 2, 0], [1, 2, 0]) == pytest.approx(1.0)
    assert cosine([1, 0], [0, 1]) == 0.0
    assert cosine([1, 1, 0], [1, 0, 0]) == pytest.approx(0.70710678, abs=1e-8)


def test_cosine_zero_vector_and_sparse_input():
    assert cosine([0, 0], [1, 2]) == 0.0
    a = sparse.csr_matrix([[1.0, 0.0, 2.0]])
    b = sparse.csr_matrix([[2.0, 1.0, 0.0]])
    assert cosine(a, b) == pytest.approx(2 / (np.sqrt(5) * np.sqrt(5)))


def test_cosine_is_symmetric_and_scale_invariant():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.normal(size=6), rng.normal(size=6)
        assert cosine(a, b) == cosine(b, a)
        assert cosine(3.7 * a, b) == pytest.approx(cosine(a, b), rel=1e-12)


def test_dot():
    assert dot([1, 2], [3, 4]) == 11
    assert dot([5, -2], [0, 0]) == 0
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=8), rng.normal(size=8)
    assert dot(a, b) == pytest.approx(sum(x * y for x, y in zip(a, b)), rel=1e-12)
    with pytest.raises(DimensionMismatchError):
        dot([1, 2], [1, 2, 3])


def test_identical_and_orthogonal_columns():
    m = _matrix_from_dense([[1, 1, 0], [2, 2, 0], [0, 0, 3]])
    index = build_candidate_index(m, n_neighbors=2)
    assert index.neighbors[0] == [(1, pytest.approx(1.0)), (2, 0.0)]


def test_lists_are_exhausted_when_n_exceeds_items(make_matrix):
    m = make_matrix(30, 6, density=0.9, seed=4)
    index = build_candidate_index(m, n_neighbors=50)
    assert all(len(neighbors) == 5 for neighbors in index.neighbors)


def test_too_few_items():
    with pytest.raises(TooFewItemsError):
        build_candidate_index(_matrix_from_dense([[1.0], [2.0]]), n_neighbors=3)


def test_index_invariants(make_matrix):
    m = make_matrix(20, 30, density=0.2, seed=5)
    index = build_candidate_index(m, n_neighbors=10)
    for item, neighbors in enumerate(index.neighbors):
        items = [j for j, _ in neighbors]
        scores = [s for _, s in neighbors]
        assert item not in items
        assert all(abs(s) <= 1 + 1e-9 for s in scores)
        # Descending by score, ties by ascending index
        keys = [(-s, j) for j, s in neighbors]
        assert keys == sorted(keys)


def test_matches_brute_force_on_20x30(make_matrix):
    m = make_matrix(20, 30, density=0.25, seed=6)
    _assert_same_index(build_candidate_index(m, 10), brute_force_candidates(m, 10))


@pytest.mark.parametrize("binarize", [False, True])
def test_matches_brute_force_on_random_matrices(make_matrix, binarize):
    rng = np.random.default_rng(7)
    for seed in range(25):
        n_users, n_items = rng.integers(2, 51, size=2)
        m = make_matrix(int(n_users), int(n_items), density=0.15, seed=seed)
        if m.n_items < 2:
            continue
        n = int(rng.integers(1, 12))
        _assert_same_index(
            build_candidate_index(m, n, binarize=binarize),
            brute_force_candidates(m, n, binarize=binarize),
        )


def test_binarized_ties_break_by_index():
    # Columns 1, 2 and 3 all equal column 0 once binarized
    m = _matrix_from_dense([[1, 5, 2, 1], [1, 3, 9, 1]])
    index = build_candidate_index(m, 3, binarize=True)
    assert [item for item, _ in index.neighbors[0]] == [1, 2, 3]


def test_empty_columns_are_left_out():
    m = _matrix_from_dense([[1, 0, 1], [1, 0, 0]])
    index = build_candidate_index(m, 5)
    assert index.neighbors[1] == []
    assert all(item != 1 for neighbors in index.neighbors for item, _ in neighbors)


def test_parallel_blocks_give_the_same_index(make_matrix, monkeypatch):
    m = make_matrix(40, 45, density=0.2, seed=8)
    single = build_candidate_index(m, 7, n_jobs=1)
    monkeypatch.setattr(simcore, "BLOCK_SIZE", 4)
    parallel = build_candidate_index(m, 7, n_jobs=3)
    assert single.neighbors == parallel.neighbors


def test_candidate_csv_round_trip(make_matrix, tmp_path):
    m = make_matrix(15, 12, density=0.4, seed=9)
    index = build_candidate_index(m, 4)
    path = tmp_path / "candidates.csv"
    simcore.save_candidate_index(index, path)

    header = path.read_text().splitlines()[0]
    assert header == "item_id,rank,neighbor_item_id,score"

    loaded = simcore.load_candidate_index(path, m.item_ids)
    for got, want in zip(loaded.neighbors, index.neighbors):
        assert [j for j, _ in got] == [j for j, _ in want]
        assert np.allclose([s for _, s in got], [s for _, s in want], atol=1e-8)
