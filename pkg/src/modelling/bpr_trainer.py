import time
from typing import List, NamedTuple, Optional

import numpy as np
from loguru import logger
from scipy.special import expit, log_expit
from tqdm import tqdm

from src.config.models import BprConfig, TrainerTag
from src.data_processing.interactions import RatingMatrix
from src.errors import NoNegativesAvailableError, NoTrainableUsersError
from src.modelling.factor_model import FactorModel, init_factors


class Triplet(NamedTuple):
    """User u prefers positive item i over unobserved item j."""

    u: int
    i: int
    j: int


def trainable_users(m: RatingMatrix) -> np.ndarray:
    """Users with at least one positive and one item left to use as negative."""
    counts = m.ratings.getnnz(axis=1)
    return np.flatnonzero((counts > 0) & (counts < m.n_items))


def _has_entry(m: RatingMatrix, users, items):
    return np.asarray(m.ratings[users, items]).ravel() > 0


def sample_triplet(m: RatingMatrix, rng: np.random.Generator) -> Triplet:
    """Draws one triplet: u uniform, i uniform over u's positives, j by rejection.

    Users that interacted with every item can never give a negative and are skipped.
    """
    users = trainable_users(m)
    if len(users) == 0:
        raise NoNegativesAvailableError(
            "No user has both a positive and an unobserved item to sample"
        )

    u = int(users[rng.integers(len(users))])
    positives = m.user_items(u)
    i = int(positives[rng.integers(len(positives))])

    j = int(rng.integers(m.n_items))
    while _has_entry(m, [u], [j])[0]:
        j = int(rng.integers(m.n_items))
    return Triplet(u, i, j)


def sample_triplets(m: RatingMatrix, n: int, rng: np.random.Generator) -> List[Triplet]:
    """Batch version of `sample_triplet`, same distribution per draw."""
    users = trainable_users(m)
    if len(users) == 0:
        raise NoNegativesAvailableError(
            "No user has both a positive and an unobserved item to sample"
        )

    u = users[rng.integers(len(users), size=n)]
    starts = m.ratings.indptr[u]
    counts = m.ratings.indptr[u + 1] - starts
    i = m.ratings.indices[starts + rng.integers(0, counts)]

    j = rng.integers(m.n_items, size=n)
    rejected = _has_entry(m, u, j) if n else np.zeros(0, dtype=bool)
    while rejected.any():
        j[rejected] = rng.integers(m.n_items, size=int(rejected.sum()))
        rejected[rejected] = _has_entry(m, u[rejected], j[rejected])

    return [Triplet(int(a), int(b), int(c)) for a, b, c in zip(u, i, j)]


def _as_arrays(triplets):
    if len(triplets) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, empty
    u, i, j = np.asarray(triplets, dtype=np.int64).T
    return u, i, j


def _ranking_margins(model: FactorModel, triplets):
    u, i, j = _as_arrays(triplets)
    X, Y = model.user_factors, model.item_factors
    return np.einsum("ij,ij->i", X[u], Y[i] - Y[j]), (u, i, j)


def bpr_loss(
    m: RatingMatrix, model: FactorModel, triplets: List[Triplet], cfg: BprConfig
) -> float:
    """-sum ln sigma(x_uij) plus lambda * ||theta||^2 per triplet vector."""
    model.check_matches(m)
    margins, (u, i, j) = _ranking_margins(model, triplets)
    X, Y = model.user_factors, model.item_factors

    loss = -float(np.sum(log_expit(margins)))
    loss += cfg.lambda_user * float(np.sum(X[u] ** 2))
    loss += cfg.lambda_item_pos * float(np.sum(Y[i] ** 2))
    loss += cfg.lambda_item_neg * float(np.sum(Y[j] ** 2))
    return loss


def mean_ranking_loss(model: FactorModel, triplets: List[Triplet]) -> float:
    """Mean -ln sigma(x_uij) over the triplets, without the penalty."""
    margins, _ = _ranking_margins(model, triplets)
    return -float(np.mean(log_expit(margins)))


def triplet_loss(model: FactorModel, t: Triplet, cfg: BprConfig) -> float:
    """Per-triplet SGD objective; `bpr_step` descends exactly this function."""
    x_u = model.user_factors[t.u]
    y_i = model.item_factors[t.i]
    y_j = model.item_factors[t.j]
    margin = float(x_u @ (y_i - y_j))
    penalty = (
        cfg.lambda_user * float(x_u @ x_u)
        + cfg.lambda_item_pos * float(y_i @ y_i)
        + cfg.lambda_item_neg * float(y_j @ y_j)
    )
    return -float(log_expit(margin)) + 0.5 * penalty


def triplet_gradients(model: FactorModel, t: Triplet, cfg: BprConfig):
    """Gradients of `triplet_loss` with respect to x_u, y_i and y_j."""
    x_u = model.user_factors[t.u]
    y_i = model.item_factors[t.i]
    y_j = model.item_factors[t.j]

    # 1 - sigma(x_uij)
    e = float(expit(-(x_u @ (y_i - y_j))))

    grad_user = -e * (y_i - y_j) + cfg.lambda_user * x_u
    grad_pos = -e * x_u + cfg.lambda_item_pos * y_i
    grad_neg = e * x_u + cfg.lambda_item_neg * y_j
    return grad_user, grad_pos, grad_neg


def bpr_step(model: FactorModel, t: Triplet, cfg: BprConfig) -> FactorModel:
    """One SGD update in place. Item updates use the user vector from before it."""
    grad_user, grad_pos, grad_neg = triplet_gradients(model, t, cfg)
    model.user_factors[t.u] -= cfg.learning_rate * grad_user
    model.item_factors[t.i] -= cfg.learning_rate * grad_pos
    model.item_factors[t.j] -= cfg.learning_rate * grad_neg
    return model


def bpr_train(
    m: RatingMatrix, cfg: BprConfig, holdout: Optional[List[Triplet]] = None
) -> FactorModel:
    """Sequential SGD over uniformly sampled triplets.

    Args:
        m (RatingMatrix): Training ratings, binarized to presence for sampling.
        cfg (BprConfig): Latent dimension, learning rate, the three regularization
            constants, epochs, samples per epoch and seed.
        holdout (list of Triplet): If given, the mean ranking loss on these triplets
            is recorded after every epoch in `metadata["holdout_loss"]`.
    Returns:
        FactorModel
    """
    if len(trainable_users(m)) == 0:
        raise NoTrainableUsersError(
            "BPR needs a user with at least one positive and one unobserved item"
        )

    rng = np.random.default_rng(cfg.seed)
    X = init_factors(m.n_users, cfg.k, rng)
    Y = init_factors(m.n_items, cfg.k, rng)
    model = FactorModel(X, Y, m.user_ids, m.item_ids, TrainerTag.BPR)

    samples_per_epoch = cfg.samples_per_epoch
    if samples_per_epoch == "auto":
        samples_per_epoch = m.n_entries
    logger.info(
        f"Training BPR on {m.n_users:,} users x {m.n_items:,} items "
        f"(k={cfg.k}, lr={cfg.learning_rate}, {samples_per_epoch:,} samples/epoch)"
    )

    holdout_loss = []
    start_time = time.time()
    for _ in tqdm(range(cfg.epochs), desc="BPR epochs"):
        for t in sample_triplets(m, samples_per_epoch, rng):
            bpr_step(model, t, cfg)

        if holdout:
            holdout_loss.append(mean_ranking_loss(model, holdout))

    elapsed = time.time() - start_time
    logger.info(f"BPR finished {cfg.epochs} epochs in {elapsed:.1f}s")

    model.metadata = {"config": cfg.dict()}
    if holdout:
        model.metadata["holdout_loss"] = holdout_loss
        logger.info(
            f"Held-out ranking loss: {holdout_loss[0]:.4f} -> {holdout_loss[-1]:.4f}"
        )

    assert model.is_finite(), "BPR produced non-finite factors"
    return model
