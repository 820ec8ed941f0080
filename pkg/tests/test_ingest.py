import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousedyn.ingest import (
    AllEventsRemoved,
    BadLabelFile,
    Button,
    EmptySession,
    MalformedLine,
    MissingLabel,
    MouseEvent,
    Role,
    State,
    clean_events,
    load_corpus,
    parse_button,
    parse_session,
    read_labels,
    role_counts,
    write_session,
)

from conftest import session_of


def ev(ctime, x=10, y=10, button=Button.NONE, state=State.MOVE):
    return MouseEvent(ctime, ctime, button, state, x, y)


def test_parse_example_line(tmp_path):
    f = tmp_path / "session_1"
    f.write_text("record timestamp,client timestamp,button,state,x,y\n0.0,21.43,NoButton,Move,383,301\n")
    s = parse_session(f, 7)
    assert s.user_id == 7 and s.session_id == "session_1"
    assert s.events == [MouseEvent(0.0, 21.43, Button.NONE, State.MOVE, 383, 301)]


def test_parse_without_header(tmp_path):
    f = tmp_path / "s"
    f.write_text("0.0,1.0,Left,Pressed,1,2\n0.1,1.1,Left,Released,1,2\n")
    assert [e.state for e in parse_session(f, 1).events] == [State.PRESSED, State.RELEASED]


def test_empty_file(tmp_path):
    f = tmp_path / "s"
    f.write_text("")
    with pytest.raises(EmptySession):
        parse_session(f, 1)


def test_malformed_line_number(tmp_path):
    f = tmp_path / "s"
    f.write_text("a,b,c\n")
    with pytest.raises(MalformedLine) as exc:
        parse_session(f, 1)
    assert exc.value.line == 1


def test_unparseable_number(tmp_path):
    f = tmp_path / "s"
    f.write_text("0.0,1.0,NoButton,Move,1,2\n0.1,x,NoButton,Move,1,2\n")
    with pytest.raises(MalformedLine) as exc:
        parse_session(f, 1)
    assert exc.value.line == 2


def test_token_modes(tmp_path):
    f = tmp_path / "s"
    f.write_text("0.0,1.0,Wheel,Hover,1,2\n")
    with pytest.raises(MalformedLine):
        parse_session(f, 1)
    e = parse_session(f, 1, strict=False).events[0]
    assert (e.button, e.state) == (Button.NONE, State.MOVE)
    assert parse_button("Scroll_Up") is Button.SCROLL


def test_exact_duplicates_collapse():
    e = ev(1.0)
    assert clean_events([e, e]) == [e]


def test_out_of_screen_replaced_by_previous():
    a = MouseEvent(0.0, 0.0, Button.NONE, State.MOVE, 383, 301)
    b = MouseEvent(0.1, 0.1, Button.NONE, State.MOVE, 70000, 301)
    out = clean_events([a, b], max_x=4096)
    assert (out[1].x, out[1].y) == (383, 301)


def test_leading_out_of_screen_dropped():
    out = clean_events([ev(0.0, x=9999), ev(0.1)])
    assert len(out) == 1 and out[0].ctime == 0.1


def test_scroll_removed():
    out = clean_events([ev(0.0), ev(0.1, button=Button.SCROLL, state=State.DOWN), ev(0.2)])
    assert all(e.button is not Button.SCROLL for e in out) and len(out) == 2


def test_equal_ctime_keeps_last():
    a, b, c = ev(5.0, x=1), ev(5.0, x=2), ev(5.1, x=3)
    assert clean_events([a, b, c]) == [b, c]


def test_all_removed():
    with pytest.raises(AllEventsRemoved):
        clean_events([ev(0.0, button=Button.SCROLL)])


_event = st.builds(
    MouseEvent,
    rtime=st.just(0.0),
    ctime=st.integers(0, 40).map(lambda k: k / 8),
    button=st.sampled_from(list(Button)),
    state=st.sampled_from(list(State)),
    x=st.integers(0, 6000),
    y=st.integers(0, 6000),
)


@settings(max_examples=300, deadline=None)
@given(st.lists(_event, min_size=1, max_size=40))
def test_cleaning_properties(events):
    try:
        once = clean_events(events)
    except AllEventsRemoved:
        return
    assert clean_events(once) == once
    assert all(e.button is not Button.SCROLL for e in once)
    assert all(e.x <= 4096 and e.y <= 4096 for e in once)
    assert all(b.ctime > a.ctime for a, b in zip(once, once[1:]))


@settings(max_examples=100, deadline=None)
@given(st.lists(_event, min_size=1, max_size=30))
def test_round_trip(tmp_path_factory, events):
    path = tmp_path_factory.mktemp("rt") / "session_x"
    write_session(session_of(events), path)
    assert parse_session(path, 1).events == events


def test_labels(tmp_path):
    f = tmp_path / "labels.csv"
    f.write_text("filename,is_illegal\nsession_a,0\nsession_b,1\n")
    assert read_labels(f) == {"session_a": False, "session_b": True}
    f.write_text("filename,is_illegal\nsession_a,maybe\n")
    with pytest.raises(BadLabelFile):
        read_labels(f)


def test_empty_root(tmp_path):
    assert load_corpus(tmp_path) == []


def test_missing_label(tmp_path, synthetic_corpus):
    root, labels = synthetic_corpus
    partial = tmp_path / "labels.csv"
    lines = labels.read_text().splitlines()
    partial.write_text("\n".join(lines[:-1]) + "\n")
    missing = lines[-1].split(",")[0]
    with pytest.raises(MissingLabel, match=missing):
        load_corpus(root, partial)
    sessions = load_corpus(root, partial, unlabeled="skip")
    assert all(s.session_id != missing for s in sessions)


def test_load_synthetic_corpus(synthetic_corpus):
    root, labels = synthetic_corpus
    sessions = load_corpus(root, labels)
    counts = role_counts(sessions)
    assert counts == {Role.TRAINING: 6, Role.TEST_POSITIVE: 6, Role.TEST_NEGATIVE: 6}
    keys = [(s.role is not Role.TRAINING, s.user_id, s.session_id) for s in sessions]
    assert keys == sorted(keys)
    for s in sessions:
        t = np.array([e.ctime for e in s.events])
        assert np.all(np.diff(t) > 0)


def test_no_labels(synthetic_corpus):
    root, _ = synthetic_corpus
    with pytest.raises(MissingLabel, match="no labels file"):
        load_corpus(root)
    sessions = load_corpus(root, unlabeled="skip")
    assert role_counts(sessions) == {Role.TRAINING: 6, Role.TEST_POSITIVE: 0, Role.TEST_NEGATIVE: 0}
