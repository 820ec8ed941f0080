import numpy as np
import pytest

from mousedyn.ingest import Button, MouseEvent, Role, Session, State
from mousedyn.segmentation import ActionKind, MouseAction

_TOKENS = {
    "M": (Button.NONE, State.MOVE),
    "P": (Button.LEFT, State.PRESSED),
    "R": (Button.LEFT, State.RELEASED),
    "p": (Button.RIGHT, State.PRESSED),
    "r": (Button.RIGHT, State.RELEASED),
    "D": (Button.NONE, State.DRAG),
}


def events_from(tokens, dt=0.05, gaps=None, x0=100, y0=100):
    """Build a strictly increasing event stream from tokens like "MMMPR".

    ``gaps`` maps an event index to the pause inserted before it.
    """
    gaps = gaps or {}
    evs = []
    t = 0.0
    for i, tok in enumerate(tokens):
        if i:
            t += gaps.get(i, dt)
        b, s = _TOKENS[tok]
        evs.append(MouseEvent(t, t, b, s, x0 + 3 * i, y0 + 2 * i))
    return evs


def session_of(events, user_id=1, sid="s1", role=Role.TRAINING):
    return Session(user_id, sid, role, list(events))


def random_stream(rng, n=None):
    """Random event stream with strictly increasing ctime and occasional long pauses."""
    n = n or int(rng.integers(1, 60))
    evs = []
    t = float(rng.uniform(0, 10))
    pressed = None
    for _ in range(n):
        t += 12.0 if rng.random() < 0.08 else float(rng.uniform(0.005, 0.3))
        r = rng.random()
        if pressed is None:
            if r < 0.6:
                b, s = Button.NONE, State.MOVE
            elif r < 0.8:
                pressed = Button.LEFT if rng.random() < 0.8 else Button.RIGHT
                b, s = pressed, State.PRESSED
            elif r < 0.9:
                b, s = Button.LEFT, State.RELEASED  # orphan release
            else:
                b, s = Button.NONE, State.DRAG
        else:
            if r < 0.45:
                b, s = pressed, State.RELEASED
                pressed = None
            elif r < 0.8:
                b, s = Button.NONE, State.DRAG
            elif r < 0.95:
                b, s = Button.NONE, State.MOVE
            else:
                b, s = pressed, State.PRESSED
        evs.append(MouseEvent(t, t, b, s, int(rng.integers(0, 1920)), int(rng.integers(0, 1080))))
    return evs


def random_action(rng, n=None, kind=ActionKind.MM, dyadic=False):
    """A valid action: integer pixel coords, strictly increasing times.

    With ``dyadic=True`` times are multiples of 2**-10 so sums and
    differences of timestamps are exact in floating point.
    """
    n = n or int(rng.integers(4, 40))
    x = np.cumsum(rng.integers(-30, 31, n))
    y = np.cumsum(rng.integers(-30, 31, n))
    if dyadic:
        t = np.cumsum(rng.integers(1, 80, n)) / 1024.0
    else:
        t = np.cumsum(rng.uniform(0.002, 0.2, n))
    x = x - x.min() + int(rng.integers(0, 500))
    y = y - y.min() + int(rng.integers(0, 500))
    return MouseAction(kind, np.column_stack([x, y, t]), 1, "s")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def synthetic_corpus(tmp_path_factory):
    from mousedyn.synthetic import make_corpus

    root = tmp_path_factory.mktemp("corpus")
    labels = make_corpus(root, users=(7, 9, 12), train_sessions=2, train_actions=80, test_sessions=4, test_actions=20)
    return root, labels


# one summary line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion(request):
    """Record the outcome of an acceptance criterion: ``criterion(n, ok, detail)``."""

    def record(number, ok, detail=""):
        ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        assert ok, detail

    return record


def pytest_runtest_logreport(report):
    if report.when == "setup" and report.skipped and "test_acceptance" in report.nodeid:
        num = _criterion_number(report.nodeid)
        if num is not None:
            reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else ""
            ACCEPTANCE_LINES.setdefault(num, f"criterion {num:>2}: SKIP  {reason}")
    if report.when == "call" and report.failed and "test_acceptance" in report.nodeid:
        num = _criterion_number(report.nodeid)
        if num is not None:
            ACCEPTANCE_LINES.setdefault(num, f"criterion {num:>2}: FAIL  (error before a result was recorded)")


def _criterion_number(nodeid):
    name = nodeid.rsplit("::", 1)[-1]
    if name.startswith("test_c") and "_" in name[6:]:
        head = name[6:].split("_", 1)[0]
        if head.isdigit():
            return int(head)
    return None


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
