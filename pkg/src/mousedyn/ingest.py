"""Reading Balabit-style session files and cleaning the raw event stream.

A session file holds one mouse event per line::

    record timestamp,client timestamp,button,state,x,y
    0.0,21.43,NoButton,Move,383,301

Only the client timestamp is used downstream; the record timestamp is kept
on the event for completeness.
"""

from __future__ import annotations

import csv
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

DEFAULT_MAX_X = 4096
DEFAULT_MAX_Y = 4096


class IngestError(Exception):
    """Base class for problems reading a corpus."""


class MalformedLine(IngestError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class EmptySession(IngestError):
    pass


class AllEventsRemoved(IngestError):
    pass


class MissingLabel(IngestError):
    pass


class BadLabelFile(IngestError):
    pass


class Button(enum.Enum):
    NONE = "NoButton"
    LEFT = "Left"
    RIGHT = "Right"
    MIDDLE = "Middle"
    SCROLL = "Scroll"


class State(enum.Enum):
    MOVE = "Move"
    PRESSED = "Pressed"
    RELEASED = "Released"
    DRAG = "Drag"
    DOWN = "Down"
    UP = "Up"


class Role(enum.Enum):
    TRAINING = "training"
    TEST_POSITIVE = "test_positive"
    TEST_NEGATIVE = "test_negative"


_BUTTONS = {b.value: b for b in Button}
_STATES = {s.value: s for s in State}


def parse_button(token: str, strict: bool = True) -> Button:
    token = token.strip()
    if token in _BUTTONS:
        return _BUTTONS[token]
    # the raw logs occasionally carry scroll variants such as "Scroll_Up"
    if token.lower().startswith("scroll"):
        return Button.SCROLL
    if strict:
        raise ValueError(f"unknown button token {token!r}")
    return Button.NONE


def parse_state(token: str, strict: bool = True) -> State:
    token = token.strip()
    if token in _STATES:
        return _STATES[token]
    if strict:
        raise ValueError(f"unknown state token {token!r}")
    return State.MOVE


@dataclass(frozen=True, slots=True)
class MouseEvent:
    rtime: float
    ctime: float
    button: Button
    state: State
    x: int
    y: int

    def key(self):
        """Fields compared when looking for duplicated entries (rtime excluded)."""
        return (self.ctime, self.button, self.state, self.x, self.y)

    def to_row(self) -> list[str]:
        return [repr(self.rtime), repr(self.ctime), self.button.value, self.state.value, str(self.x), str(self.y)]


@dataclass(slots=True)
class Session:
    user_id: int
    session_id: str
    role: Role
    events: list[MouseEvent] = field(default_factory=list)


def _parse_number(text: str, kind):
    text = text.strip()
    if kind is int:
        # coordinates are sometimes written as floats ("383.0")
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"non-integral coordinate {text!r}")
        return int(value)
    return float(text)


def _looks_like_header(fields: list[str]) -> bool:
    try:
        float(fields[0])
    except ValueError:
        return True
    return False


def parse_session(path, user_id: int, role: Role = Role.TRAINING, *, strict: bool = True) -> Session:
    """Parse one session file into a :class:`Session` (events uncleaned)."""
    path = Path(path)
    events = []
    with path.open(newline="") as fh:
        for lineno, fields in enumerate(csv.reader(fh), start=1):
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != 6:
                raise MalformedLine(path, lineno, f"expected 6 fields, got {len(fields)}")
            if lineno == 1 and _looks_like_header(fields):
                continue
            try:
                ev = MouseEvent(
                    rtime=_parse_number(fields[0], float),
                    ctime=_parse_number(fields[1], float),
                    button=parse_button(fields[2], strict),
                    state=parse_state(fields[3], strict),
                    x=_parse_number(fields[4], int),
                    y=_parse_number(fields[5], int),
                )
            except ValueError as exc:
                raise MalformedLine(path, lineno, str(exc)) from None
            if ev.x < 0 or ev.y < 0:
                raise MalformedLine(path, lineno, "negative coordinate")
            events.append(ev)
    if not events:
        raise EmptySession(f"{path}: no events")
    return Session(user_id=user_id, session_id=path.name, role=role, events=events)


def write_session(session: Session, path) -> None:
    """Write events back out in the raw file format (with header)."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record timestamp", "client timestamp", "button", "state", "x", "y"])
        for ev in session.events:
            w.writerow(ev.to_row())


def clean_events(
    events: list[MouseEvent],
    max_x: int = DEFAULT_MAX_X,
    max_y: int = DEFAULT_MAX_Y,
    *,
    dedup: str = "exact",
) -> list[MouseEvent]:
    """Apply the cleaning rules in order and return a new event list.

    1. consecutive duplicates collapse to one (``dedup="exact"`` compares
       ctime, button, state and coordinates; ``dedup="position"`` compares
       button, state and coordinates only);
    2. out-of-screen coordinates are replaced by the last in-bounds ones,
       events with no in-bounds predecessor are dropped;
    3. scroll events are removed;
    4. runs of equal ctime keep only their last event, and events whose
       ctime goes backwards are dropped, so ctime is strictly increasing.
    """
    if not events:
        raise ValueError("clean_events needs at least one event")
    if dedup == "exact":
        key = MouseEvent.key
    elif dedup == "position":
        key = lambda e: (e.button, e.state, e.x, e.y)  # noqa: E731
    else:
        raise ValueError(f"unknown dedup mode {dedup!r}")

    out = []
    prev_key = None
    for ev in events:
        k = key(ev)
        if k != prev_key:
            out.append(ev)
        prev_key = k

    fixed = []
    last_xy = None
    for ev in out:
        if ev.x > max_x or ev.y > max_y:
            if last_xy is None:
                continue
            ev = MouseEvent(ev.rtime, ev.ctime, ev.button, ev.state, *last_xy)
        else:
            last_xy = (ev.x, ev.y)
        fixed.append(ev)

    fixed = [ev for ev in fixed if ev.button is not Button.SCROLL]

    result: list[MouseEvent] = []
    for ev in fixed:
        if result and ev.ctime <= result[-1].ctime:
            if ev.ctime == result[-1].ctime:
                result[-1] = ev
            continue
        result.append(ev)

    if not result:
        raise AllEventsRemoved("cleaning removed every event")
    return result


def read_labels(path) -> dict[str, bool]:
    """Map test session filename to its ``is_illegal`` flag."""
    path = Path(path)
    labels = {}
    try:
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or len(header) < 2:
                raise BadLabelFile(f"{path}: missing header")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2 or row[1].strip() not in ("0", "1", "0.0", "1.0"):
                    raise BadLabelFile(f"{path}:{lineno}: bad row {row!r}")
                labels[row[0].strip()] = float(row[1]) == 1.0
    except OSError as exc:
        raise BadLabelFile(f"{path}: {exc}") from None
    return labels


def _user_id(dirname: str) -> int:
    digits = "".join(ch for ch in dirname if ch.isdigit())
    if not digits:
        raise IngestError(f"cannot derive user id from directory {dirname!r}")
    return int(digits)


def _find_part(root: Path, *names: str) -> Path | None:
    for name in names:
        if (root / name).is_dir():
            return root / name
    return None


def load_corpus(
    root,
    labels=None,
    *,
    max_x: int = DEFAULT_MAX_X,
    max_y: int = DEFAULT_MAX_Y,
    strict: bool = True,
    unlabeled: str = "error",
    dedup: str = "exact",
) -> list[Session]:
    """Load and clean every session under ``root``.

    The layout is ``root/training_files/user<N>/session_*`` and
    ``root/test_files/user<N>/session_*``. Test sessions take their role from
    the labels file. The public release only labels part of the test files;
    pass ``unlabeled="skip"`` to ignore the rest instead of failing. With
    ``unlabeled="skip"`` and no labels file only the training part is loaded.
    """
    root = Path(root)
    if unlabeled not in ("error", "skip"):
        raise ValueError(f"unlabeled must be 'error' or 'skip', not {unlabeled!r}")
    train_dir = _find_part(root, "training_files", "training")
    test_dir = _find_part(root, "test_files", "test")
    label_map = {}
    if labels is not None:
        label_map = read_labels(labels)
    elif unlabeled == "error" and test_dir is not None and any(test_dir.glob("*/*")):
        raise MissingLabel(f"{test_dir}: test sessions present but no labels file given")

    jobs = []
    if train_dir is not None:
        for user_dir in sorted(p for p in train_dir.iterdir() if p.is_dir()):
            for f in sorted(p for p in user_dir.iterdir() if p.is_file()):
                jobs.append((f, _user_id(user_dir.name), Role.TRAINING))
    if test_dir is not None:
        for user_dir in sorted(p for p in test_dir.iterdir() if p.is_dir()):
            for f in sorted(p for p in user_dir.iterdir() if p.is_file()):
                if f.name not in label_map:
                    if unlabeled == "skip":
                        continue
                    raise MissingLabel(f"{f}: not in labels file")
                role = Role.TEST_NEGATIVE if label_map[f.name] else Role.TEST_POSITIVE
                jobs.append((f, _user_id(user_dir.name), role))

    sessions = []
    for path, uid, role in jobs:
        s = parse_session(path, uid, role, strict=strict)
        try:
            s.events = clean_events(s.events, max_x, max_y, dedup=dedup)
        except AllEventsRemoved:
            log.warning("%s: cleaning removed every event, session skipped", path)
            continue
        sessions.append(s)
    sessions.sort(key=lambda s: (s.role is not Role.TRAINING, s.user_id, s.session_id))
    return sessions


def role_counts(sessions) -> dict[Role, int]:
    counts = {r: 0 for r in Role}
    for s in sessions:
        counts[s.role] += 1
    return counts
