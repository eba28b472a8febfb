import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from src.config import settings
from src.config.models import TrainerTag
from src.data_processing.interactions import RatingMatrix
from src.errors import ArtifactNotFoundError, DimensionMismatchError, InputError

MODEL_HEADER = re.compile(
    r"^persim-model v1 trainer=(ALS|BPR) k=(\d+) users=(\d+) items=(\d+)$"
)


@dataclass
class FactorModel:
    """Latent user vectors (x_u rows) and item vectors (y_i rows)."""

    user_factors: np.ndarray
    item_factors: np.ndarray
    user_ids: List[str]
    item_ids: List[str]
    trainer_tag: TrainerTag
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.trainer_tag = TrainerTag(self.trainer_tag)
        assert self.user_factors.ndim == 2 and self.item_factors.ndim == 2
        if self.user_factors.shape[1] != self.item_factors.shape[1]:
            raise DimensionMismatchError("user and item factors differ in dimension")
        if self.user_factors.shape[0] != len(self.user_ids):
            raise DimensionMismatchError("user factor rows do not match the user ids")
        if self.item_factors.shape[0] != len(self.item_ids):
            raise DimensionMismatchError("item factor rows do not match the item ids")

    @property
    def k(self):
        return self.user_factors.shape[1]

    @property
    def n_users(self):
        return self.user_factors.shape[0]

    @property
    def n_items(self):
        return self.item_factors.shape[0]

    def is_finite(self):
        return bool(
            np.all(np.isfinite(self.user_factors))
            and np.all(np.isfinite(self.item_factors))
        )

    def check_matches(self, m: RatingMatrix):
        if (m.n_users, m.n_items) != (self.n_users, self.n_items):
            raise DimensionMismatchError(
                f"Model is {self.n_users}x{self.n_items} but the matrix is "
                f"{m.n_users}x{m.n_items}"
            )

    def user_scores(self, user: int) -> np.ndarray:
        return self.item_factors @ self.user_factors[user]


def init_factors(n_rows: int, k: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.01, 0.01, size=(n_rows, k))


def save_model(model: FactorModel, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(
            f"persim-model v1 trainer={model.trainer_tag.value} k={model.k} "
            f"users={model.n_users} items={model.n_items}\n"
        )
        for user_id in model.user_ids:
            f.write(f"{user_id}\n")
        for item_id in model.item_ids:
            f.write(f"{item_id}\n")
        np.savetxt(f, model.user_factors, fmt=settings.FLOAT_FORMAT, delimiter=" ")
        np.savetxt(f, model.item_factors, fmt=settings.FLOAT_FORMAT, delimiter=" ")


def load_model(path) -> FactorModel:
    path = Path(path)
    if not path.exists():
        raise ArtifactNotFoundError(path)

    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()

    match = MODEL_HEADER.match(lines[0]) if lines else None
    if match is None:
        raise InputError(f"{path} is not a persim-model v1 file")
    trainer, k, n_users, n_items = match.groups()
    k, n_users, n_items = int(k), int(n_users), int(n_items)
    if len(lines) != 1 + 2 * (n_users + n_items):
        raise InputError(f"{path} is truncated or has extra lines")

    user_ids = lines[1 : 1 + n_users]
    item_ids = lines[1 + n_users : 1 + n_users + n_items]
    factor_lines = lines[1 + n_users + n_items :]
    factors = np.array([line.split(" ") for line in factor_lines], dtype=np.float64)
    factors = factors.reshape(n_users + n_items, k)

    return FactorModel(
        user_factors=factors[:n_users],
        item_factors=factors[n_users:],
        user_ids=user_ids,
        item_ids=item_ids,
        trainer_tag=TrainerTag(trainer),
    )
