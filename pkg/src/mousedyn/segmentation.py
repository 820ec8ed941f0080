"""Splitting a cleaned event stream into mouse actions.

Three kinds of action are produced:

* ``MM`` - plain movement,
* ``PC`` - movement ending in a click (a Pressed directly followed by a
  Released),
* ``DD`` - drag and drop, from a left-button Pressed through Drag events to
  the Released.

The stream is first cut into segments that end at Released events. Inside a
segment, pauses longer than ``gap_threshold`` seconds split the movement into
separate actions. Actions with fewer than ``min_events`` events are dropped.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .ingest import Button, MouseEvent, Session, State

GAP_THRESHOLD = 10.0
MIN_EVENTS = 4


class ActionKind(enum.Enum):
    MM = "MM"
    PC = "PC"
    DD = "DD"


@dataclass(frozen=True, eq=False)
class MouseAction:
    """A typed run of consecutive events, stored as ``(n, 3)`` rows of x, y, t."""

    kind: ActionKind
    points: np.ndarray
    user_id: int = -1
    session_id: str = ""
    start: int = -1  # index of the first event in the cleaned session stream
    resampled: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must have shape (n, 3), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def t(self):
        return self.points[:, 2]

    @property
    def stop(self) -> int:
        return self.start + self.n

    def __eq__(self, other):
        if not isinstance(other, MouseAction):
            return NotImplemented
        return (
            self.kind is other.kind
            and self.user_id == other.user_id
            and self.session_id == other.session_id
            and self.start == other.start
            and np.array_equal(self.points, other.points)
        )

    @classmethod
    def from_events(cls, kind, events, user_id=-1, session_id="", start=-1):
        pts = np.array([(e.x, e.y, e.ctime) for e in events], dtype=float)
        return cls(kind, pts, user_id, session_id, start)


def _split_on_gaps(events, lo, hi, gap):
    """Yield (start, stop) runs of events[lo:hi] separated by pauses > gap."""
    start = lo
    for i in range(lo + 1, hi):
        if events[i].ctime - events[i - 1].ctime > gap:
            yield start, i
            start = i
    if start < hi:
        yield start, hi


def _terminal_kind(events, lo, release):
    """Classify the segment events[lo:release+1] that ends at a Released.

    Returns ``(kind, start)`` of the terminal action's button envelope or
    ``None`` when the segment holds no recognisable click or drag.
    """
    if release - 1 >= lo and events[release - 1].state is State.PRESSED:
        return ActionKind.PC, release - 1
    for i in range(release - 1, lo - 1, -1):
        if events[i].state is State.PRESSED:
            if events[i].button is not Button.LEFT:
                return None
            if any(e.state is State.DRAG for e in events[i + 1 : release]):
                return ActionKind.DD, i
            return None
    return None


def segment(session: Session, gap_threshold: float = GAP_THRESHOLD, min_events: int = MIN_EVENTS):
    """Segment a cleaned session into a list of :class:`MouseAction`.

    A PC action is the last uninterrupted movement run of its segment plus
    the Pressed/Released pair. A DD action is exactly the Pressed..Released
    envelope; pauses inside it do not split it. Movement before the envelope
    yields MM actions. A segment whose Released has no matching press (or a
    dangling Pressed at the end of the session) is treated as movement.
    """
    events = session.events
    actions = []

    def emit(kind, lo, hi):
        if hi - lo >= min_events:
            actions.append(
                MouseAction.from_events(kind, events[lo:hi], session.user_id, session.session_id, lo)
            )

    def movement(lo, hi):
        for a, b in _split_on_gaps(events, lo, hi, gap_threshold):
            emit(ActionKind.MM, a, b)

    lo = 0
    for i, ev in enumerate(events):
        if ev.state is not State.RELEASED:
            continue
        term = _terminal_kind(events, lo, i)
        if term is None:
            movement(lo, i + 1)
        elif term[0] is ActionKind.DD:
            movement(lo, term[1])
            emit(ActionKind.DD, term[1], i + 1)
        else:
            # the gap check stops at the press: press/release are never split
            runs = list(_split_on_gaps(events, lo, term[1] + 1, gap_threshold))
            for a, b in runs[:-1]:
                emit(ActionKind.MM, a, b)
            emit(ActionKind.PC, runs[-1][0], i + 1)
        lo = i + 1
    if lo < len(events):
        movement(lo, len(events))
    return actions


def action_type_histogram(actions) -> dict[str, dict[str, float]]:
    """Counts and percentages per action kind."""
    counts = Counter(a.kind for a in actions)
    total = sum(counts.values())
    out = {}
    for kind in ActionKind:
        c = counts.get(kind, 0)
        out[kind.value] = {"count": c, "percent": 100.0 * c / total if total else 0.0}
    return out
