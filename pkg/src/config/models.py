from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from loguru import logger
from pydantic import BaseModel, Field, root_validator, validator

from src.config import settings


class TrainerTag(str, Enum):
    ALS = "ALS"
    BPR = "BPR"


class SweepDimension(str, Enum):
    RATING_WEIGHTS = "RatingWeights"
    CONFIDENCE = "Confidence"
    ALPHA = "Alpha"


class RatingWeights(BaseModel):
    """Weights of the four implicit signals in the per-(user, item) rating."""

    w_list_view: float = 0.25
    w_click: float = 1.0
    w_cart: float = 1.0
    w_order: float = 1.0
    use_frequency: bool = False

    @validator("w_list_view", "w_click", "w_cart", "w_order")
    def check_non_negative(cls, value):
        if value < 0:
            raise ValueError("rating weights must be >= 0")
        return value

    @root_validator(skip_on_failure=True)
    def check_any_positive(cls, values):
        names = ("w_list_view", "w_click", "w_cart", "w_order")
        weights = [values[name] for name in names]
        if max(weights) <= 0:
            raise ValueError("at least one rating weight must be > 0")
        return values

    def as_tuple(self):
        return (
            self.w_list_view,
            self.w_click,
            self.w_cart,
            self.w_order,
            int(self.use_frequency),
        )

    @classmethod
    def from_point(cls, point):
        """Accepts `[view, click, cart, order, freq]` or a mapping of field names."""
        if isinstance(point, dict):
            return cls.parse_obj(point)
        values = list(point)
        if len(values) not in (4, 5):
            raise ValueError(
                f"Expected 4 weights and an optional freq flag, got {point}"
            )
        freq = bool(values[4]) if len(values) == 5 else False
        return cls(
            w_list_view=values[0],
            w_click=values[1],
            w_cart=values[2],
            w_order=values[3],
            use_frequency=freq,
        )


class AlsConfig(BaseModel):
    k: int = 64
    regularization: float = 0.01
    confidence: float = 10.0
    iterations: int = 15
    seed: int = settings.SEED

    @validator("k", "iterations")
    def check_at_least_one(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("regularization", "confidence")
    def check_non_negative(cls, value):
        if value < 0:
            raise ValueError("must be >= 0")
        return value


class BprConfig(BaseModel):
    k: int = 32
    learning_rate: float = 0.05
    lambda_user: float = 0.01
    lambda_item_pos: float = 0.01
    lambda_item_neg: float = 0.01
    epochs: int = 30
    samples_per_epoch: Union[int, Literal["auto"]] = "auto"
    seed: int = settings.SEED

    @validator("k", "epochs")
    def check_at_least_one(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("learning_rate")
    def check_learning_rate(cls, value):
        if value <= 0:
            raise ValueError("learning_rate must be > 0")
        return value

    @validator("lambda_user", "lambda_item_pos", "lambda_item_neg")
    def check_non_negative(cls, value):
        if value < 0:
            raise ValueError("regularization must be >= 0")
        return value

    @validator("samples_per_epoch")
    def check_samples(cls, value):
        if value != "auto" and value < 1:
            raise ValueError("samples_per_epoch must be >= 1 or 'auto'")
        return value


class BlendConfig(BaseModel):
    # alpha is the weight on the user-preference score
    alpha: float = 0.2
    top_k: int = 15
    normalization: Literal["minmax", "rank"] = "minmax"

    @validator("alpha")
    def check_alpha(cls, value):
        if not 0 <= value <= 1:
            raise ValueError("alpha must be in [0, 1]")
        return value

    @validator("top_k")
    def check_top_k(cls, value):
        if value < 1:
            raise ValueError("top_k must be >= 1")
        return value


class SynthConfig(BaseModel):
    n_users: int = 2000
    n_items: int = 500
    n_styles: int = 10
    k_true: int = 16
    events_per_user: float = 8.0
    funnel_probs: Tuple[float, float, float] = (0.3, 0.3, 0.5)
    taste_sharpness: float = 5.0
    item_noise: float = 0.25
    user_noise: float = 0.1
    start_timestamp: int = 1_600_000_000
    span_days: int = 390
    seed: int = settings.SEED

    @validator("n_users", "n_items", "n_styles", "k_true", "span_days")
    def check_counts(cls, value):
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @validator("n_styles")
    def check_styles(cls, value, values):
        if "n_items" in values and value > values["n_items"]:
            raise ValueError("n_styles must be <= n_items")
        return value

    @validator("events_per_user")
    def check_events_per_user(cls, value):
        if value < 1:
            raise ValueError("events_per_user must be >= 1")
        return value

    @validator("funnel_probs")
    def check_probs(cls, value):
        if any(not 0 <= p <= 1 for p in value):
            raise ValueError("funnel probabilities must be in [0, 1]")
        return value

    @validator("taste_sharpness")
    def check_sharpness(cls, value):
        if value <= 0:
            raise ValueError("taste_sharpness must be > 0")
        return value

    @validator("item_noise", "user_noise", "start_timestamp")
    def check_non_negative(cls, value):
        if value < 0:
            raise ValueError("must be >= 0")
        return value


class SweepGrid(BaseModel):
    dimension: SweepDimension
    points: List[Any]

    @validator("points")
    def check_points(cls, points, values):
        if not points:
            raise ValueError("a sweep grid needs at least one point")
        dimension = values.get("dimension")
        if dimension == SweepDimension.RATING_WEIGHTS:
            parsed = [RatingWeights.from_point(point) for point in points]
            keys = [weights.as_tuple() for weights in parsed]
        elif dimension == SweepDimension.ALPHA:
            parsed = [float(point) for point in points]
            if any(not 0 <= alpha <= 1 for alpha in parsed):
                raise ValueError("alpha points must be in [0, 1]")
            keys = parsed
        else:
            parsed = [float(point) for point in points]
            if any(confidence < 0 for confidence in parsed):
                raise ValueError("confidence points must be >= 0")
            keys = parsed
        if len(set(keys)) != len(keys):
            raise ValueError("duplicate points in sweep grid")
        return parsed

    @classmethod
    def from_yaml(cls, path):
        with open(path, "r") as grid_file:
            return cls.parse_obj(yaml.safe_load(grid_file))


class DataParams(BaseModel):
    events_csv: Optional[str] = None
    strict: bool = True
    # An explicit boundary wins over test_fraction
    boundary: Optional[int] = None
    test_fraction: Optional[float] = 0.2

    @validator("test_fraction")
    def check_fraction(cls, value):
        if value is not None and not 0 < value < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        return value


class IndexParams(BaseModel):
    n_neighbors: int = 100
    binarize: bool = False

    @validator("n_neighbors")
    def check_neighbors(cls, value):
        if value < 1:
            raise ValueError("n_neighbors must be >= 1")
        return value


class EvalParams(BaseModel):
    k: int = 15

    @validator("k")
    def check_k(cls, value):
        if value < 1:
            raise ValueError("k must be >= 1")
        return value


class ExperimentConfig(BaseModel):
    data_params: DataParams = Field(default_factory=DataParams)
    weights: RatingWeights = Field(default_factory=RatingWeights)
    index_params: IndexParams = Field(default_factory=IndexParams)
    trainer: TrainerTag = TrainerTag.BPR
    als: AlsConfig = Field(default_factory=AlsConfig)
    bpr: BprConfig = Field(default_factory=BprConfig)
    blend: BlendConfig = Field(default_factory=BlendConfig)
    eval_params: EvalParams = Field(default_factory=EvalParams)
    out_dir: Path = settings.DATA_DIR / "artifacts"
    seed: int = settings.SEED
    n_jobs: int = 1

    @validator("trainer", pre=True)
    def normalize_trainer(cls, value):
        return value.upper() if isinstance(value, str) else value

    def stage_seed(self, stage):
        return self.seed + settings.SEED_OFFSETS[stage]

    def with_stage_seeds(self):
        """Returns a copy whose trainer seeds are fanned out from `seed`."""
        return self.copy(
            update={
                "als": self.als.copy(update={"seed": self.stage_seed("als")}),
                "bpr": self.bpr.copy(update={"seed": self.stage_seed("bpr")}),
            }
        )

    @classmethod
    def load(cls, config_path=None, overrides=None):
        """Loads an experiment config with precedence flags > yaml file > defaults.

        Args:
            config_path (str or Path): Optional yaml file.
            overrides (dict): Dotted keys (e.g. `"blend.alpha"`) to values. Keys whose
                value is None are ignored, so unset click options fall through.
        Returns:
            ExperimentConfig: The validated config with stage seeds applied.
        """
        raw_config = {}
        if config_path is not None:
            with open(config_path, "r") as config_file:
                raw_config = yaml.safe_load(config_file) or {}
            logger.info(f"Loaded experiment config from {config_path}")

        for dotted_key, value in (overrides or {}).items():
            if value is None:
                continue
            _set_dotted(raw_config, dotted_key, value)

        return cls.parse_obj(raw_config).with_stage_seeds()

    def to_yaml_dict(self) -> Dict[str, Any]:
        raw = self.dict()
        raw["trainer"] = self.trainer.value
        raw["out_dir"] = str(self.out_dir)
        return raw


def _set_dotted(raw: dict, dotted_key: str, value):
    keys = dotted_key.split(".")
    node = raw
    for key in keys[:-1]:
        if node.get(key) is None:
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value


def weight_overrides(w_view, w_click, w_cart, w_order, use_frequency):
    """Dotted overrides for the rating-weight flags shared by several scripts."""
    return {
        "weights.w_list_view": w_view,
        "weights.w_click": w_click,
        "weights.w_cart": w_cart,
        "weights.w_order": w_order,
        # Flag only switches frequency on; the config file decides otherwise
        "weights.use_frequency": True if use_frequency else None,
    }
