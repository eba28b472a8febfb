import io
import random

import numpy as np
import pytest
from scipy import sparse

from src.config.models import RatingWeights
from src.data_processing import interactions
from src.data_processing.interactions import (
    Event,
    EventKind,
    RatingMatrix,
    build_matrix,
    compute_rating,
    parse_events,
)
from src.errors import (
    EXIT_INPUT,
    ArtifactNotFoundError,
    EmptyInputError,
    InputError,
    MalformedLineError,
)


def test_parse_single_line():
    assert parse_events("u1,p9,click,100") == [Event("u1", "p9", EventKind.CLICK, 100)]


def test_parse_empty_input():
    assert parse_events("") == []
    assert parse_events(io.StringIO("")) == []


def test_parse_keeps_file_order_and_skips_blank_lines():
    events = parse_events("u2,p1,order,5\n\nu1,p2,list_view,3\n")
    assert [(e.user_id, e.timestamp) for e in events] == [("u2", 5), ("u1", 3)]


@pytest.mark.parametrize(
    "text, line_no",
    [
        ("u1,p9,swipe,100", 1),
        ("u1,p9,click,100\nu1,p9,click", 2),
        ("u1,p9,click,100\nu1,p9,click,abc", 2),
        ("u1,p9,click,100\nu1,p9,click,1\nu1,p9,click,-4", 3),
    ],
)
def test_strict_parse_reports_line(text, line_no):
    with pytest.raises(MalformedLineError) as excinfo:
        parse_events(text, strict=True)
    assert excinfo.value.line_no == line_no


def test_lenient_parse_skips_bad_lines(log_messages):
    text = "u1,p9,click,100\nu1,p9,swipe,100\nu2,p1,order,7"
    events = parse_events(text, strict=False)
    assert [e.user_id for e in events] == ["u1", "u2"]
    assert any("line 2" in message for message in log_messages)


def test_invalid_utf8_line_is_malformed(tmp_path):
    path = tmp_path / "events.csv"
    path.write_bytes(b"u1,p9,click,100\nu2,p\xff\xfe,order,7\r\nu3,p1,list_view,9\n")

    with pytest.raises(MalformedLineError) as excinfo:
        interactions.read_events(path, strict=True)
    assert excinfo.value.line_no == 2
    assert excinfo.value.exit_code == EXIT_INPUT


def test_lenient_read_skips_invalid_utf8(tmp_path, log_messages):
    path = tmp_path / "events.csv"
    path.write_bytes(b"u1,p9,click,100\nu2,p\xff\xfe,order,7\r\nu3,p1,list_view,9\n")

    events = interactions.read_events(path, strict=False)
    assert [e.user_id for e in events] == ["u1", "u3"]
    assert any("line 2" in message for message in log_messages)


def test_read_events_handles_crlf_and_utf8_ids(tmp_path):
    path = tmp_path / "events.csv"
    path.write_bytes("u1,pé,click,100\r\nu2,p1,order,7\r\n".encode("utf-8"))
    assert interactions.read_events(path) == [
        Event("u1", "pé", EventKind.CLICK, 100),
        Event("u2", "p1", EventKind.ORDER, 7),
    ]


def test_event_rejects_negative_timestamp():
    with pytest.raises(ValueError):
        Event("u1", "p1", "click", -1)


def test_compute_rating_presence_and_frequency(make_events):
    events = make_events(
        [
            ("u1", "p1", "list_view", 1),
            ("u1", "p1", "list_view", 2),
            ("u1", "p1", "click", 3),
            ("u1", "p1", "order", 4),
        ]
    )
    assert compute_rating(events, RatingWeights()) == pytest.approx(2.25)
    frequency = RatingWeights(use_frequency=True)
    assert compute_rating(events, frequency) == pytest.approx(2.5)
    assert compute_rating([], RatingWeights()) == 0


def test_compute_rating_is_order_invariant(small_events):
    pair = [e for e in small_events if (e.user_id, e.item_id) == ("u2", "p3")]
    weights = RatingWeights(w_click=10, w_cart=4, use_frequency=True)
    shuffled = list(pair)
    random.Random(3).shuffle(shuffled)
    assert compute_rating(shuffled, weights) == compute_rating(pair, weights)


def test_build_matrix_shape_and_first_appearance_order(small_events):
    m = build_matrix(small_events, RatingWeights())
    assert m.user_ids == ["u1", "u2"]
    assert m.item_ids == ["p1", "p2", "p3", "p4", "p5"]
    assert m.n_entries == 7
    assert m.ratings[0, 0] == pytest.approx(1.25)
    assert m.ratings[1, 2] == pytest.approx(2.25)


def test_build_matrix_single_event(make_events):
    m = build_matrix(make_events([("u1", "p1", "order", 0)]), RatingWeights())
    assert m.entries() == [(0, 0, 1.0)]


def test_build_matrix_three_events():
    events = [
        Event("a", "x", "click", 1),
        Event("b", "y", "click", 2),
        Event("a", "y", "order", 3),
    ]
    m = build_matrix(events, RatingWeights())
    assert (m.n_users, m.n_items) == (2, 2)
    assert m.n_entries <= 4


def test_zero_weighted_pair_is_absent(small_events):
    weights = RatingWeights(w_list_view=0)
    m = build_matrix(small_events, weights)
    # p4 and p5 were only viewed, so they keep their index without any rating
    assert m.item_ids[3:] == ["p4", "p5"]
    assert m.ratings[:, 3].nnz == 0
    assert np.all(m.ratings.data > 0)


def test_build_matrix_empty_input():
    with pytest.raises(EmptyInputError):
        build_matrix([], RatingWeights())


def test_ratings_sum_matches_per_pair_ratings(small_events):
    weights = RatingWeights(w_click=10, w_cart=4, use_frequency=True)
    m = build_matrix(small_events, weights)
    pairs = {}
    for e in small_events:
        pairs.setdefault((e.user_id, e.item_id), []).append(e)
    expected = sum(compute_rating(pair, weights) for pair in pairs.values())
    assert m.ratings.sum() == pytest.approx(expected)


def test_duplicate_events_do_not_change_presence_matrix(small_events):
    m = build_matrix(small_events, RatingWeights())
    doubled = build_matrix(small_events + small_events[:4], RatingWeights())
    assert m.user_ids == doubled.user_ids
    assert m.item_ids == doubled.item_ids
    assert (m.ratings != doubled.ratings).nnz == 0


def test_parse_then_build_is_deterministic(small_events, tmp_path):
    path = tmp_path / "events.csv"
    interactions.write_events(path, small_events)
    first = build_matrix(interactions.read_events(path), RatingWeights())
    second = build_matrix(interactions.read_events(path), RatingWeights())
    assert first.entries() == second.entries()
    assert path.read_bytes().count(b"\r") == 0


def test_matrix_round_trip(small_events, tmp_path):
    m = build_matrix(small_events, RatingWeights(w_click=10, w_cart=4))
    path = tmp_path / "matrix.txt"
    interactions.save_matrix(m, path)
    loaded = interactions.load_matrix(path)
    assert loaded.user_ids == m.user_ids
    assert loaded.item_ids == m.item_ids
    assert np.allclose(loaded.ratings.toarray(), m.ratings.toarray(), rtol=1e-8)


def test_load_matrix_rejects_other_files(tmp_path):
    path = tmp_path / "matrix.txt"
    path.write_text("hello\n")
    with pytest.raises(InputError):
        interactions.load_matrix(path)
    with pytest.raises(ArtifactNotFoundError):
        interactions.load_matrix(tmp_path / "missing.txt")


def test_matrix_stats(small_events):
    stats = interactions.matrix_stats(build_matrix(small_events, RatingWeights()))
    assert stats["n_users"] == 2 and stats["n_items"] == 5
    assert stats["sparsity"] == pytest.approx(7 / 10)


def test_rating_matrix_rejects_duplicate_ids():
    with pytest.raises(AssertionError):
        RatingMatrix(sparse.csr_matrix((2, 1)), ["u1", "u1"], ["p1"])


def test_weights_need_one_positive():
    with pytest.raises(ValueError):
        RatingWeights(w_list_view=0, w_click=0, w_cart=0, w_order=0)
    with pytest.raises(ValueError):
        RatingWeights(w_click=-1)
