import time

import numpy as np
from joblib import Parallel, delayed
from loguru import logger
from scipy import linalg, sparse
from tqdm import tqdm

from src.config.models import AlsConfig, TrainerTag
from src.data_processing.interactions import RatingMatrix
from src.errors import EmptyInputError, SingularSystemError
from src.modelling.factor_model import FactorModel, init_factors

# Smallest pivot ratio of the Cholesky factor before a row system counts as singular
SINGULAR_TOLERANCE = 1e-12


def als_objective(m: RatingMatrix, model: FactorModel, cfg: AlsConfig) -> float:
    """Confidence-weighted squared loss over every (user, item) pair plus L2 penalty.

    Absent pairs count with preference 0 and confidence 1. The sum over all pairs is
    taken through the Gram matrices, so only the stored entries are visited.
    """
    model.check_matches(m)
    X, Y = model.user_factors, model.item_factors

    # sum over all pairs of (x_u . y_i)^2
    total = float(np.sum((X.T @ X) * (Y.T @ Y)))

    coo = m.ratings.tocoo()
    predicted = np.einsum("ij,ij->i", X[coo.row], Y[coo.col])
    confidence = 1.0 + cfg.confidence * coo.data
    total += float(np.sum(confidence * (1.0 - predicted) ** 2 - predicted**2))

    total += cfg.regularization * float(np.sum(X**2) + np.sum(Y**2))
    return max(total, 0.0)


def _solve_rows(rows, fixed, gram, rated: sparse.csr_matrix, cfg: AlsConfig):
    k = fixed.shape[1]
    regularized = gram + cfg.regularization * np.eye(k)

    solved = np.empty((len(rows), k))
    for position, row in enumerate(rows):
        start, end = rated.indptr[row], rated.indptr[row + 1]
        observed = fixed[rated.indices[start:end]]
        confidence = 1.0 + cfg.confidence * rated.data[start:end]

        # (F^T C F + lambda I) x = F^T C p, with C - I only non-zero on observed entries
        lhs = regularized + (observed.T * (confidence - 1.0)) @ observed
        rhs = observed.T @ confidence
        try:
            factor = linalg.cho_factor(lhs)
        except linalg.LinAlgError as e:
            raise _singular(row, cfg) from e

        # Cholesky can succeed on a rank-deficient system through rounding alone
        pivots = np.diag(factor[0]) ** 2
        if pivots.min() <= SINGULAR_TOLERANCE * pivots.max():
            raise _singular(row, cfg)
        solved[position] = linalg.cho_solve(factor, rhs)
    return solved


def _singular(row, cfg):
    return SingularSystemError(
        f"Normal equations for row {row} are singular "
        f"(regularization={cfg.regularization}); use a regularization > 0"
    )


def _half_round(fixed, rated, cfg, n_jobs):
    """Exact least-squares update of every row of one side, the other held fixed."""
    gram = fixed.T @ fixed
    row_chunks = np.array_split(np.arange(rated.shape[0]), max(n_jobs, 1))
    chunks = [chunk for chunk in row_chunks if len(chunk)]
    solved = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_solve_rows)(chunk, fixed, gram, rated, cfg) for chunk in chunks
    )
    return np.vstack(solved)


def _trace_point(iteration, half, m, model, cfg):
    objective = als_objective(m, model, cfg)
    return {"iteration": iteration, "half": half, "objective": objective}


def als_train(
    m: RatingMatrix, cfg: AlsConfig, track_objective: bool = False, n_jobs: int = 1
) -> FactorModel:
    """Implicit ALS: alternating exact row solves of the confidence-weighted loss.

    Args:
        m (RatingMatrix): Training ratings.
        cfg (AlsConfig): Latent dimension, regularization, confidence scale,
            iterations and seed.
        track_objective (bool): If True, the objective after initialisation and after
            every half-round is stored in `metadata["objective_trace"]`.
        n_jobs (int): Threads for the row solves. The factors do not depend on it.
    Returns:
        FactorModel
    """
    if m.n_entries == 0:
        raise EmptyInputError("Cannot train ALS on a matrix without ratings")

    rng = np.random.default_rng(cfg.seed)
    X = init_factors(m.n_users, cfg.k, rng)
    Y = init_factors(m.n_items, cfg.k, rng)
    model = FactorModel(X, Y, m.user_ids, m.item_ids, TrainerTag.ALS)

    trace = []
    if track_objective:
        trace.append(_trace_point(0, "init", m, model, cfg))

    user_items = m.ratings
    item_users = m.item_users

    logger.info(
        f"Training ALS on {m.n_users:,} users x {m.n_items:,} items "
        f"(k={cfg.k}, regularization={cfg.regularization}, confidence={cfg.confidence})"
    )
    start_time = time.time()
    for iteration in tqdm(range(1, cfg.iterations + 1), desc="ALS iterations"):
        model.user_factors = _half_round(model.item_factors, user_items, cfg, n_jobs)
        if track_objective:
            trace.append(_trace_point(iteration, "users", m, model, cfg))

        model.item_factors = _half_round(model.user_factors, item_users, cfg, n_jobs)
        if track_objective:
            trace.append(_trace_point(iteration, "items", m, model, cfg))

    elapsed = time.time() - start_time
    logger.info(f"ALS finished {cfg.iterations} iterations in {elapsed:.1f}s")

    model.metadata = {"config": cfg.dict()}
    if track_objective:
        model.metadata["objective_trace"] = trace
        logger.info(f"Final objective: {trace[-1]['objective']:,.4f}")

    assert model.is_finite(), "ALS produced non-finite factors"
    return model
