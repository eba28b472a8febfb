import time

import numpy as np
import pytest
from scipy import optimize, sparse

from src.config.models import AlsConfig, RatingWeights, SynthConfig, TrainerTag
from src.data_processing.interactions import RatingMatrix, build_matrix
from src.data_processing.synthgen import generate
from src.errors import DimensionMismatchError, SingularSystemError
from src.modelling.als_trainer import als_objective, als_train
from src.modelling.factor_model import FactorModel


def _matrix(dense):
    dense = np.asarray(dense, dtype=float)
    return RatingMatrix(
        sparse.csr_matrix(dense),
        [f"u{u}" for u in range(dense.shape[0])],
        [f"p{i}" for i in range(dense.shape[1])],
    )


def _model(X, Y):
    X, Y = np.asarray(X, dtype=float), np.asarray(Y, dtype=float)
    return FactorModel(
        X,
        Y,
        [f"u{u}" for u in range(len(X))],
        [f"p{i}" for i in range(len(Y))],
        TrainerTag.ALS,
    )


def _dense_objective(dense, X, Y, cfg):
    """Double loop over every (user, item) pair."""
    total = 0.0
    for u in range(dense.shape[0]):
        for i in range(dense.shape[1]):
            r = dense[u, i]
            p = 1.0 if r > 0 else 0.0
            c = 1.0 + cfg.confidence * r
            total += c * (p - X[u] @ Y[i]) ** 2
    return total + cfg.regularization * (np.sum(X**2) + np.sum(Y**2))


def test_objective_single_entry():
    cfg = AlsConfig(k=1, regularization=0.0, confidence=1.0)
    m = _matrix([[2.0]])
    assert als_objective(m, _model([[0.0]], [[0.0]]), cfg) == pytest.approx(3.0)


def test_objective_zero_residual():
    cfg = AlsConfig(k=1, regularization=0.0, confidence=5.0)
    m = _matrix([[1.0, 1.0], [1.0, 1.0]])
    model = _model([[1.0], [1.0]], [[1.0], [1.0]])
    assert als_objective(m, model, cfg) == pytest.approx(0.0, abs=1e-12)


def test_objective_matches_dense_loop():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_users, n_items = (int(n) for n in rng.integers(1, 11, size=2))
        k = int(rng.integers(1, 5))
        shape = (n_users, n_items)
        dense = np.where(rng.random(shape) < 0.4, rng.uniform(0.25, 3, shape), 0.0)
        X, Y = rng.normal(size=(n_users, k)), rng.normal(size=(n_items, k))
        cfg = AlsConfig(
            k=k, regularization=rng.uniform(0, 0.5), confidence=rng.uniform(0, 20)
        )
        expected = _dense_objective(dense, X, Y, cfg)
        assert als_objective(_matrix(dense), _model(X, Y), cfg) == pytest.approx(
            expected, rel=1e-10
        )


def test_objective_dimension_mismatch():
    cfg = AlsConfig(k=1)
    with pytest.raises(DimensionMismatchError):
        als_objective(_matrix([[1.0, 0.0]]), _model([[1.0]], [[1.0]]), cfg)


def test_one_by_one_optimum_matches_brute_force():
    cfg = AlsConfig(k=1, regularization=0.1, confidence=1.0, iterations=300, seed=3)
    model = als_train(_matrix([[1.0]]), cfg)

    def loss(xy):
        x, y = xy
        return 2.0 * (1.0 - x * y) ** 2 + 0.1 * (x**2 + y**2)

    grid = np.linspace(-2, 2, 201)
    best = min(((x, y) for x in grid for y in grid), key=loss)
    refined = optimize.minimize(
        loss, best, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-14}
    )
    expected = refined.x[0] * refined.x[1]

    trained = model.user_factors[0, 0] * model.item_factors[0, 0]
    assert trained == pytest.approx(expected, abs=1e-3)


def test_objective_never_increases(make_matrix):
    m = make_matrix(60, 40, density=0.1, seed=2)
    cfg = AlsConfig(k=6, regularization=0.05, confidence=10.0, iterations=8, seed=1)
    model = als_train(m, cfg, track_objective=True)

    trace = [point["objective"] for point in model.metadata["objective_trace"]]
    assert len(trace) == 1 + 2 * cfg.iterations
    for before, after in zip(trace, trace[1:]):
        assert after <= before + 1e-9 * abs(before)


def test_item_rows_are_optimal_after_training(make_matrix):
    m = make_matrix(12, 9, density=0.3, seed=5)
    cfg = AlsConfig(k=3, regularization=0.1, confidence=4.0, iterations=3, seed=2)
    model = als_train(m, cfg)
    baseline = als_objective(m, model, cfg)

    # The item side is solved last, so no single item coordinate can be improved
    for i in range(0, m.n_items, 2):
        for d in range(cfg.k):
            for step in (1e-3, -1e-3):
                perturbed = model.item_factors.copy()
                perturbed[i, d] += step
                trial = _model(model.user_factors, perturbed)
                assert als_objective(m, trial, cfg) >= baseline - 1e-9 * baseline


def test_training_is_deterministic(make_matrix):
    m = make_matrix(30, 25, density=0.2, seed=3)
    cfg = AlsConfig(k=4, iterations=3, seed=11)
    first = als_train(m, cfg)
    second = als_train(m, cfg, n_jobs=3)
    assert np.array_equal(first.user_factors, second.user_factors)
    assert np.array_equal(first.item_factors, second.item_factors)
    assert first.is_finite()


def test_singular_system_without_regularization():
    cfg = AlsConfig(k=3, regularization=0.0, confidence=1.0, iterations=1)
    with pytest.raises(SingularSystemError):
        als_train(_matrix([[1.0]]), cfg)


def test_config_rejects_zero_iterations():
    with pytest.raises(ValueError):
        AlsConfig(iterations=0)
    with pytest.raises(ValueError):
        AlsConfig(k=0)


@pytest.mark.slow
def test_default_scale_objective_and_runtime():
    events, _ = generate(SynthConfig(n_users=2000, n_items=500, seed=0))
    m = build_matrix(events, RatingWeights())
    cfg = AlsConfig(seed=0)

    start_time = time.perf_counter()
    model = als_train(m, cfg, track_objective=True)
    elapsed = time.perf_counter() - start_time

    trace = [point["objective"] for point in model.metadata["objective_trace"]]
    assert len(trace) == 1 + 2 * cfg.iterations == 31
    for before, after in zip(trace, trace[1:]):
        assert after <= before + 1e-9 * abs(before)
    # Timed with objective tracking on
    assert elapsed < 60
