"""Synthetic corpora in the Balabit directory layout, for tests and demos.

Each user moves the pointer along curved paths with a personal speed,
curvature and sampling jitter, so per-user classifiers have something to
learn. Streams also carry the artefacts cleaning must handle: duplicated
lines, off-screen coordinates and scroll events.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

HEADER = ["record timestamp", "client timestamp", "button", "state", "x", "y"]


@dataclass(frozen=True)
class UserStyle:
    speed: float  # px/s
    bend: float  # lateral bulge as a fraction of the chord
    dt: float  # mean sampling interval, s
    drag_rate: float


def user_style(user_id: int, seed: int = 0) -> UserStyle:
    rng = np.random.default_rng([seed, user_id])
    return UserStyle(
        speed=float(rng.uniform(300, 1500)),
        bend=float(rng.uniform(-0.35, 0.35)),
        dt=float(rng.uniform(0.012, 0.04)),
        drag_rate=float(rng.uniform(0.05, 0.2)),
    )


def _path(rng, style, start, end, t0):
    chord = np.hypot(*(end - start))
    duration = max(chord / style.speed * rng.uniform(0.8, 1.25), 4 * style.dt)
    n = max(int(duration / style.dt), 4)
    dts = rng.uniform(0.5, 1.5, n) * style.dt
    ts = t0 + np.cumsum(dts)
    u = (ts - ts[0]) / (ts[-1] - ts[0])
    u = u * u * (3 - 2 * u)  # ease in / out
    normal = np.array([-(end - start)[1], (end - start)[0]])
    bulge = style.bend * np.sin(np.pi * u)[:, None] * normal[None, :]
    pts = start[None, :] + u[:, None] * (end - start)[None, :] + bulge
    pts = np.clip(np.round(pts), 0, [1919, 1079]).astype(int)
    return pts, ts


def session_rows(user_id: int, n_actions: int, seed: int, style: UserStyle | None = None):
    """Raw event rows (rtime, ctime, button, state, x, y) for one session."""
    rng = np.random.default_rng([seed, user_id, n_actions])
    style = style or user_style(user_id)
    rows = []
    t = float(rng.uniform(0, 5))
    pos = rng.uniform([0, 0], [1920, 1080])

    def emit(button, state, x, y):
        rows.append([round(t + 0.004, 3), round(t, 3), button, state, int(x), int(y)])

    for _ in range(n_actions):
        target = rng.uniform([0, 0], [1920, 1080])
        pts, ts = _path(rng, style, pos, target, t)
        r = rng.random()
        if r < style.drag_rate:
            emit("Left", "Pressed", *pts[0])
            for (x, y), tt in zip(pts[1:], ts[1:]):
                t = tt
                emit("NoButton", "Drag", x, y)
            t += 0.02
            emit("Left", "Released", *pts[-1])
        else:
            for (x, y), tt in zip(pts, ts):
                t = tt
                emit("NoButton", "Move", x, y)
            if r < 0.8:
                t += rng.uniform(0.02, 0.1)
                button = "Left" if rng.random() < 0.9 else "Right"
                emit(button, "Pressed", *pts[-1])
                t += rng.uniform(0.05, 0.15)
                emit(button, "Released", *pts[-1])
            else:
                t += rng.uniform(10.5, 14)  # long pause ends a pure movement
        # artefacts
        if rng.random() < 0.05:
            rows.append(list(rows[-1]))
        if rng.random() < 0.03:
            t += 0.01
            emit("NoButton", "Move", 65535, 65535)
        if rng.random() < 0.03:
            t += 0.01
            emit("Scroll", "Down", *pts[-1])
        pos = pts[-1].astype(float)
        t += rng.uniform(0.05, 0.6)
    return rows


def write_session_file(path, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        w.writerows(rows)


def make_corpus(
    root,
    users=(7, 9, 12),
    train_sessions: int = 2,
    train_actions: int = 120,
    test_sessions: int = 4,
    test_actions: int = 25,
    seed: int = 0,
):
    """Write a small corpus; returns the labels file path.

    Half of each user's test sessions are impostor sessions generated with
    another user's style.
    """
    root = Path(root)
    labels = []
    counter = 0
    users = list(users)
    for ui, u in enumerate(users):
        for s in range(train_sessions):
            counter += 1
            rows = session_rows(u, train_actions, seed * 1000 + counter)
            write_session_file(root / "training_files" / f"user{u}" / f"session_{counter:010d}", rows)
        for s in range(test_sessions):
            counter += 1
            illegal = s % 2 == 1
            style_user = users[(ui + 1) % len(users)] if illegal else u
            rows = session_rows(style_user, test_actions, seed * 1000 + counter, user_style(style_user))
            name = f"session_{counter:010d}"
            write_session_file(root / "test_files" / f"user{u}" / name, rows)
            labels.append((name, int(illegal)))
    labels_path = root / "labels.csv"
    with labels_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["filename", "is_illegal"])
        w.writerows(labels)
    return labels_path
