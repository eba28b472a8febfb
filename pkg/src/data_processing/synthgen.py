from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from loguru import logger
from scipy.special import expit
from tqdm import tqdm

from src.config import settings
from src.config.models import SynthConfig
from src.data_processing.interactions import Event, EventKind

SECONDS_PER_DAY = 24 * 60 * 60

# Funnel steps after a view, with the most each step can lag the previous one
FUNNEL = [EventKind.CLICK, EventKind.ADD_TO_CART, EventKind.ORDER]
MAX_FUNNEL_LAG = 3600


@dataclass
class SynthOracle:
    """The planted ground truth behind a generated event log."""

    affinity: np.ndarray
    user_ids: List[str]
    item_ids: List[str]
    item_styles: np.ndarray
    # Style with the largest weight in each user's taste
    user_styles: np.ndarray


def user_id(index):
    return f"u{index:05d}"


def item_id(index):
    return f"p{index:05d}"


def _plant_tastes(cfg: SynthConfig, rng: np.random.Generator):
    item_styles = rng.permutation(np.arange(cfg.n_items) % cfg.n_styles)

    centroids = rng.normal(size=(cfg.n_styles, cfg.k_true))
    if cfg.k_true >= cfg.n_styles:
        # Orthonormal style centroids
        centroids = np.linalg.qr(centroids.T)[0].T
    else:
        centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
    item_vectors = centroids[item_styles] + cfg.item_noise * rng.normal(
        size=(cfg.n_items, cfg.k_true)
    )

    user_vectors = np.empty((cfg.n_users, cfg.k_true))
    user_styles = np.empty(cfg.n_users, dtype=np.int64)
    for u in range(cfg.n_users):
        n_liked = min(int(rng.integers(1, 3)), cfg.n_styles)
        liked = rng.choice(cfg.n_styles, size=n_liked, replace=False)
        primary = rng.uniform(0.7, 0.9) if n_liked == 2 else 1.0
        weights = np.array([primary, 1.0 - primary])[:n_liked]

        user_vectors[u] = weights @ centroids[liked]
        user_vectors[u] += cfg.user_noise * rng.normal(size=cfg.k_true)
        user_styles[u] = liked[0]

    return item_styles, user_styles, user_vectors @ item_vectors.T


def _funnel_probability(base, affinity):
    # 2 * sigmoid(0) = 1, so a neutral item keeps the configured rate
    return float(np.clip(base * 2 * expit(affinity), 0.0, 1.0))


def generate(cfg: SynthConfig) -> Tuple[List[Event], SynthOracle]:
    """Generates a clickstream with planted user tastes and item styles.

    Args:
        cfg (SynthConfig): Sizes, funnel rates, taste sharpness and seed.
    Returns:
        list of Event: Time-sorted events.
        SynthOracle: The exact affinities and styles used to draw them.
    """
    rng = np.random.default_rng(cfg.seed)
    item_styles, user_styles, affinity = _plant_tastes(cfg, rng)

    span_seconds = cfg.span_days * SECONDS_PER_DAY
    events = []
    for u in tqdm(range(cfg.n_users), desc="Generating users"):
        logits = cfg.taste_sharpness * affinity[u]
        view_probs = np.exp(logits - logits.max())
        view_probs /= view_probs.sum()

        n_views = 1 + int(rng.poisson(cfg.events_per_user - 1))
        viewed = rng.choice(cfg.n_items, size=n_views, p=view_probs)
        view_times = cfg.start_timestamp + rng.integers(0, span_seconds, size=n_views)

        for i, timestamp in zip(viewed, view_times):
            i, timestamp = int(i), int(timestamp)
            events.append(Event(user_id(u), item_id(i), EventKind.LIST_VIEW, timestamp))

            # Each step only happens if the previous one did
            for kind, base in zip(FUNNEL, cfg.funnel_probs):
                if rng.random() >= _funnel_probability(base, affinity[u, i]):
                    break
                timestamp += int(rng.integers(1, MAX_FUNNEL_LAG + 1))
                events.append(Event(user_id(u), item_id(i), kind, timestamp))

    events.sort(key=lambda e: e.timestamp)
    oracle = SynthOracle(
        affinity=affinity,
        user_ids=[user_id(u) for u in range(cfg.n_users)],
        item_ids=[item_id(i) for i in range(cfg.n_items)],
        item_styles=item_styles,
        user_styles=user_styles,
    )
    logger.info(
        f"Generated {len(events):,} events for {cfg.n_users:,} users and "
        f"{cfg.n_items:,} items "
        f"(sparsity {sparsity(events, cfg.n_users, cfg.n_items):.4f})"
    )
    return events, oracle


def generate_blocks(
    n_users: int = 200,
    n_items: int = 100,
    n_blocks: int = 2,
    interactions_per_user: int = 10,
    seed: int = settings.SEED,
):
    """Planted block data: users of a block only interact with items of that block.

    User u is in block u % n_blocks and item i in block i % n_blocks.

    Returns:
        list of Event: One click per (user, item) interaction.
        np.ndarray: Block of each user, by user number.
        np.ndarray: Block of each item, by item number.
    """
    assert 1 <= n_blocks <= min(n_users, n_items)
    rng = np.random.default_rng(seed)
    user_blocks = np.arange(n_users) % n_blocks
    item_blocks = np.arange(n_items) % n_blocks

    events = []
    timestamp = 0
    for u in range(n_users):
        in_block = np.flatnonzero(item_blocks == user_blocks[u])
        size = min(interactions_per_user, len(in_block))
        for i in rng.choice(in_block, size=size, replace=False):
            event = Event(user_id(u), item_id(int(i)), EventKind.CLICK, timestamp)
            events.append(event)
            timestamp += 1

    return events, user_blocks, item_blocks


def sparsity(
    events: List[Event], n_users: Optional[int] = None, n_items: Optional[int] = None
) -> float:
    """Distinct (user, item) pairs over the size of the user x item grid.

    The grid defaults to the users and items seen in the events.
    """
    if not events:
        return 0.0
    n_users = n_users or len({e.user_id for e in events})
    n_items = n_items or len({e.item_id for e in events})
    pairs = {(e.user_id, e.item_id) for e in events}
    return len(pairs) / (n_users * n_items)


def write_oracle(path, oracle: SynthOracle):
    """Writes `user_id,item_id,affinity` for every user x item pair."""
    n_users, n_items = oracle.affinity.shape
    df = pd.DataFrame(
        {
            "user_id": np.repeat(oracle.user_ids, n_items),
            "item_id": np.tile(oracle.item_ids, n_users),
            "affinity": oracle.affinity.ravel(),
        }
    )
    df.to_csv(
        path, index=False, float_format=settings.FLOAT_FORMAT, lineterminator="\n"
    )
