import numpy as np
import pytest
from loguru import logger
from scipy import sparse

from src.config.models import SynthConfig
from src.data_processing.interactions import Event, RatingMatrix, write_events
from src.data_processing.synthgen import generate


def _make_matrix(n_users, n_items, density=0.3, seed=0, low=0.25, high=3.0):
    """Random RatingMatrix with positive ratings, ids u0.. and p0.."""
    rng = np.random.default_rng(seed)
    mask = rng.random((n_users, n_items)) < density
    dense = np.where(mask, rng.uniform(low, high, size=(n_users, n_items)), 0.0)
    return RatingMatrix(
        sparse.csr_matrix(dense),
        [f"u{u}" for u in range(n_users)],
        [f"p{i}" for i in range(n_items)],
    )


def _make_events(rows):
    return [Event(*row) for row in rows]


@pytest.fixture
def make_matrix():
    return _make_matrix


@pytest.fixture
def make_events():
    return _make_events


@pytest.fixture
def small_events():
    """Two shoppers with overlapping interests over five products."""
    return _make_events(
        [
            ("u1", "p1", "list_view", 100),
            ("u1", "p1", "click", 110),
            ("u1", "p2", "list_view", 120),
            ("u2", "p1", "list_view", 130),
            ("u2", "p3", "list_view", 140),
            ("u2", "p3", "click", 150),
            ("u2", "p3", "add_to_cart", 160),
            ("u1", "p4", "list_view", 170),
            ("u2", "p2", "order", 180),
            ("u1", "p5", "list_view", 190),
        ]
    )


@pytest.fixture
def log_messages():
    """Collects loguru messages emitted while the test runs."""
    messages = []
    handler_id = logger.add(lambda message: messages.append(message.record["message"]))
    yield messages
    logger.remove(handler_id)


@pytest.fixture(scope="session")
def tiny_synth():
    cfg = SynthConfig(
        n_users=150, n_items=60, n_styles=4, k_true=6, events_per_user=12.0, seed=7
    )
    return generate(cfg)


@pytest.fixture
def synth_events_csv(tmp_path, tiny_synth):
    events, _ = tiny_synth
    path = tmp_path / "events.csv"
    write_events(path, events)
    return path
