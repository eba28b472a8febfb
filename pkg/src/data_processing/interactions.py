import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, List, Tuple, Union

import numpy as np
import pandas as pd
from loguru import logger
from scipy import sparse

from src.config import settings
from src.config.models import RatingWeights
from src.errors import (
    ArtifactNotFoundError,
    EmptyInputError,
    InputError,
    MalformedLineError,
)

MATRIX_HEADER = re.compile(r"^persim-matrix v1 users=(\d+) items=(\d+) entries=(\d+)$")

EVENT_COLUMNS = ["user_id", "item_id", "kind", "timestamp"]


class EventKind(str, Enum):
    LIST_VIEW = "list_view"
    CLICK = "click"
    ADD_TO_CART = "add_to_cart"
    ORDER = "order"


# Column order used whenever the four signals are laid out side by side
KIND_ORDER = [
    EventKind.LIST_VIEW,
    EventKind.CLICK,
    EventKind.ADD_TO_CART,
    EventKind.ORDER,
]


@dataclass(frozen=True)
class Event:
    user_id: str
    item_id: str
    kind: EventKind
    timestamp: int

    def __post_init__(self):
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))
        if self.timestamp < 0:
            raise ValueError(f"timestamp must be >= 0, got {self.timestamp}")


@dataclass
class RatingMatrix:
    """Sparse user x item matrix of weighted implicit ratings.

    Only strictly positive ratings are stored. Row/column positions follow `user_ids`
    and `item_ids`, which are assigned in first-appearance order by `build_matrix`.
    """

    ratings: sparse.csr_matrix
    user_ids: List[str]
    item_ids: List[str]
    user_index: Dict[str, int] = field(init=False, repr=False)
    item_index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.ratings = sparse.csr_matrix(self.ratings, dtype=np.float64)
        self.ratings.sort_indices()
        self.user_ids = list(self.user_ids)
        self.item_ids = list(self.item_ids)
        self.user_index = {user_id: u for u, user_id in enumerate(self.user_ids)}
        self.item_index = {item_id: i for i, item_id in enumerate(self.item_ids)}

        assert self.ratings.shape == (len(self.user_ids), len(self.item_ids))
        assert len(self.user_index) == len(self.user_ids), "duplicate user ids"
        assert len(self.item_index) == len(self.item_ids), "duplicate item ids"
        assert np.all(self.ratings.data > 0), "stored ratings must be positive"

    @property
    def n_users(self):
        return self.ratings.shape[0]

    @property
    def n_items(self):
        return self.ratings.shape[1]

    @property
    def n_entries(self):
        return self.ratings.nnz

    @property
    def item_users(self):
        """Item x user view of the ratings (the item column vectors as rows)."""
        return self.ratings.T.tocsr()

    def entries(self) -> List[Tuple[int, int, float]]:
        coo = self.ratings.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def user_items(self, user: int) -> np.ndarray:
        start, end = self.ratings.indptr[user], self.ratings.indptr[user + 1]
        return self.ratings.indices[start:end]


def parse_events(
    stream: Union[str, Iterable[str], Iterable[bytes]], strict: bool = True
) -> List[Event]:
    """Parses `user_id,item_id,kind,timestamp` lines into events, in file order.

    Args:
        stream (str or iterable of str or bytes): The raw text or an open file.
            Byte lines are decoded as UTF-8 one line at a time.
        strict (bool): If True, the first bad line raises MalformedLineError. Otherwise
            bad lines are logged and skipped.
    Returns:
        list of Event
    """
    lines = stream.splitlines() if isinstance(stream, str) else stream

    events = []
    skipped = 0
    for line_no, line in enumerate(lines, start=1):
        try:
            line = _decode_line(line, line_no).rstrip("\r\n")
            if not line.strip():
                continue
            events.append(_parse_line(line, line_no))
        except MalformedLineError as e:
            if strict:
                raise
            skipped += 1
            logger.warning(f"Skipping line {line_no}: {e.reason}")

    if skipped:
        logger.warning(f"Skipped {skipped:,} malformed lines")

    return events


def _decode_line(line, line_no):
    if isinstance(line, str):
        return line
    try:
        return line.decode("utf-8")
    except UnicodeDecodeError:
        raise MalformedLineError(line_no, "invalid UTF-8")


def _parse_line(line, line_no):
    fields = line.split(",")
    if len(fields) != 4:
        raise MalformedLineError(line_no, f"expected 4 fields, got {len(fields)}")

    user_id, item_id, kind, timestamp = fields
    if not user_id or not item_id:
        raise MalformedLineError(line_no, "empty user or item id")

    try:
        kind = EventKind(kind)
    except ValueError:
        raise MalformedLineError(line_no, f"unknown event kind {kind!r}")

    try:
        timestamp = int(timestamp)
    except ValueError:
        raise MalformedLineError(line_no, f"non-integer timestamp {timestamp!r}")
    if timestamp < 0:
        raise MalformedLineError(line_no, f"negative timestamp {timestamp}")

    return Event(user_id, item_id, kind, timestamp)


def read_events(path, strict=True) -> List[Event]:
    path = Path(path)
    if not path.exists():
        raise ArtifactNotFoundError(path)

    with open(path, "rb") as f:
        events = parse_events(f, strict=strict)
    logger.info(f"Loaded {len(events):,} events from {path}")
    return events


def write_events(path, events: List[Event]):
    events_to_frame(events).to_csv(path, header=False, index=False, lineterminator="\n")


def events_to_frame(events: List[Event]) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "user_id": pd.Series([e.user_id for e in events], dtype=object),
            "item_id": pd.Series([e.item_id for e in events], dtype=object),
            "kind": pd.Series([e.kind.value for e in events], dtype=object),
            "timestamp": pd.Series([e.timestamp for e in events], dtype=np.int64),
        },
        columns=EVENT_COLUMNS,
    )


def _kind_weights(weights: RatingWeights):
    return {
        EventKind.LIST_VIEW: weights.w_list_view,
        EventKind.CLICK: weights.w_click,
        EventKind.ADD_TO_CART: weights.w_cart,
        EventKind.ORDER: weights.w_order,
    }


def compute_rating(events_for_pair: List[Event], weights: RatingWeights) -> float:
    """Weighted sum of the signals observed for one (user, item) pair.

    Without frequency each kind counts once if present; with frequency it counts
    as many times as it occurred.
    """
    assert len({(e.user_id, e.item_id) for e in events_for_pair}) <= 1

    counts = Counter(e.kind for e in events_for_pair)
    kind_weights = _kind_weights(weights)

    rating = 0.0
    for kind in KIND_ORDER:
        count = counts.get(kind, 0)
        if count == 0:
            continue
        rating += kind_weights[kind] * (count if weights.use_frequency else 1)
    return rating


def build_matrix(events: List[Event], weights: RatingWeights) -> RatingMatrix:
    if not events:
        raise EmptyInputError("Cannot build a rating matrix from zero events")

    df = events_to_frame(events)

    # Indices by order of first appearance
    user_codes, user_ids = pd.factorize(df["user_id"], sort=False)
    item_codes, item_ids = pd.factorize(df["item_id"], sort=False)
    df["user_index"] = user_codes
    df["item_index"] = item_codes

    counts = (
        df.groupby(["user_index", "item_index", "kind"], sort=True)
        .size()
        .unstack(fill_value=0)
        .reindex(columns=[kind.value for kind in KIND_ORDER], fill_value=0)
    )

    kind_weights = _kind_weights(weights)
    ratings = np.zeros(len(counts), dtype=np.float64)
    for kind in KIND_ORDER:
        kind_counts = counts[kind.value].to_numpy(dtype=np.float64)
        if not weights.use_frequency:
            kind_counts = (kind_counts > 0).astype(np.float64)
        ratings += kind_weights[kind] * kind_counts

    # Zero-rated pairs stay absent
    keep = ratings > 0
    rows = counts.index.get_level_values("user_index").to_numpy()[keep]
    cols = counts.index.get_level_values("item_index").to_numpy()[keep]

    matrix = sparse.csr_matrix(
        (ratings[keep], (rows, cols)), shape=(len(user_ids), len(item_ids))
    )
    dropped = int((~keep).sum())
    if dropped:
        logger.info(f"Dropped {dropped:,} zero-rated (user, item) pairs")

    return RatingMatrix(matrix, list(user_ids), list(item_ids))


def matrix_stats(m: RatingMatrix) -> dict:
    cells = m.n_users * m.n_items
    return {
        "n_users": m.n_users,
        "n_items": m.n_items,
        "n_entries": m.n_entries,
        "sparsity": m.n_entries / cells if cells else 0.0,
    }


def save_matrix(m: RatingMatrix, path):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(
            f"persim-matrix v1 users={m.n_users} items={m.n_items} "
            f"entries={m.n_entries}\n"
        )
        for user_id in m.user_ids:
            f.write(f"{user_id}\n")
        for item_id in m.item_ids:
            f.write(f"{item_id}\n")
        for user, item, rating in m.entries():
            f.write(f"{user} {item} {settings.FLOAT_FORMAT % rating}\n")


def load_matrix(path) -> RatingMatrix:
    path = Path(path)
    if not path.exists():
        raise ArtifactNotFoundError(path)

    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()

    match = MATRIX_HEADER.match(lines[0]) if lines else None
    if match is None:
        raise InputError(f"{path} is not a persim-matrix v1 file")
    n_users, n_items, n_entries = (int(value) for value in match.groups())
    if len(lines) != 1 + n_users + n_items + n_entries:
        raise InputError(f"{path} is truncated or has extra lines")

    user_ids = lines[1 : 1 + n_users]
    item_ids = lines[1 + n_users : 1 + n_users + n_items]
    rows, cols, data = [], [], []
    for line in lines[1 + n_users + n_items :]:
        user, item, rating = line.split(" ")
        rows.append(int(user))
        cols.append(int(item))
        data.append(float(rating))

    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(n_users, n_items))
    return RatingMatrix(matrix, user_ids, item_ids)
