"""Kinematic time series and the 39 per-action features."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .segmentation import ActionKind, MouseAction

SHARP_THRESHOLD = 0.0005

SERIES = ("vx", "vy", "v", "a", "j", "omega", "c")
STATS = ("mean", "std", "min", "max")

FEATURE_NAMES: tuple[str, ...] = tuple(f"{stat}_{s}" for s in SERIES for stat in STATS) + (
    "type_of_action",
    "elapsed_time",
    "trajectory_length",
    "dist_end_to_end",
    "direction",
    "straightness",
    "num_points",
    "sum_of_angles",
    "largest_deviation",
    "sharp_angles",
    "a_beg_time",
)
CATEGORICAL = ("type_of_action", "direction")
META_COLUMNS = ("user_id", "session_id", "genuine")

# first 1-based index at which each series holds a computed (not padded) value
_FIRST_DEFINED = {"vx": 2, "vy": 2, "v": 2, "a": 3, "j": 4, "omega": 2, "c": 2}

KIND_CODES = {ActionKind.MM: 0, ActionKind.PC: 1, ActionKind.DD: 2}


class DegenerateAction(ValueError):
    pass


@dataclass(frozen=True)
class KinematicSeries:
    """Per-event series of length n; index 0 holds the padding element."""

    theta: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    v: np.ndarray
    a: np.ndarray
    j: np.ndarray
    omega: np.ndarray
    c: np.ndarray
    s: np.ndarray
    dt: np.ndarray


def _check(action: MouseAction):
    if action.n < 4:
        raise DegenerateAction(f"action has {action.n} points, need at least 4")
    if np.any(np.diff(action.t) <= 0):
        raise DegenerateAction("timestamps must be strictly increasing")


def _diff0(arr):
    out = np.zeros_like(arr)
    out[1:] = np.diff(arr)
    return out


def compute_series(action: MouseAction) -> KinematicSeries:
    _check(action)
    x, y, t = action.x, action.y, action.t
    dx, dy, dt = _diff0(x), _diff0(y), _diff0(t)
    ds = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx)
    theta[0] = 0.0

    safe_dt = dt.copy()
    safe_dt[0] = 1.0
    vx = dx / safe_dt
    vy = dy / safe_dt
    v = np.hypot(vx, vy)
    vx[0] = vy[0] = v[0] = 0.0
    a = _diff0(v) / safe_dt
    a[0] = 0.0
    j = _diff0(a) / safe_dt
    j[0] = 0.0
    dtheta = _diff0(theta)
    omega = dtheta / safe_dt
    omega[0] = 0.0
    c = np.zeros_like(theta)
    moving = ds > 0
    c[moving] = dtheta[moving] / ds[moving]
    c[0] = 0.0
    return KinematicSeries(theta, vx, vy, v, a, j, omega, c, np.cumsum(ds), dt)


def quantize_direction(p_start, p_end) -> int:
    """Direction code 1..8 of the vector p_start -> p_end, 45 degrees per code."""
    deg = math.degrees(math.atan2(p_end[1] - p_start[1], p_end[0] - p_start[0]))
    if deg < 0:
        deg += 360.0
    return min(int(deg // 45.0), 7) + 1


def _largest_deviation(x, y) -> float:
    x0, y0 = x[0], y[0]
    ex, ey = x[-1] - x0, y[-1] - y0
    chord = math.hypot(ex, ey)
    if chord == 0:
        return float(np.max(np.hypot(x - x0, y - y0)))
    return float(np.max(np.abs(ex * (y - y0) - ey * (x - x0))) / chord)


def _a_beg_time(a, dt) -> float:
    # a[0] is padding and a[1] uses the padded v, so the scan starts at 1-based index 3
    nonpos = np.nonzero(a[2:] <= 0)[0]
    if len(nonpos) == 0:
        return float(np.sum(dt[1:]))
    k = nonpos[0] + 2  # 0-based position of a_{k+1}; sum dt_2..dt_k
    return float(np.sum(dt[1:k]))


@dataclass(frozen=True)
class ActionFeatures:
    mean_vx: float
    std_vx: float
    min_vx: float
    max_vx: float
    mean_vy: float
    std_vy: float
    min_vy: float
    max_vy: float
    mean_v: float
    std_v: float
    min_v: float
    max_v: float
    mean_a: float
    std_a: float
    min_a: float
    max_a: float
    mean_j: float
    std_j: float
    min_j: float
    max_j: float
    mean_omega: float
    std_omega: float
    min_omega: float
    max_omega: float
    mean_c: float
    std_c: float
    min_c: float
    max_c: float
    type_of_action: str
    elapsed_time: float
    trajectory_length: float
    dist_end_to_end: float
    direction: int
    straightness: float
    num_points: int
    sum_of_angles: float
    largest_deviation: float
    sharp_angles: int
    a_beg_time: float
    user_id: int = -1
    session_id: str = ""
    genuine: bool = True

    def values(self) -> tuple:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def vector(self) -> np.ndarray:
        """Numeric encoding used by the forest (action type as 0/1/2)."""
        vals = list(self.values())
        vals[FEATURE_NAMES.index("type_of_action")] = KIND_CODES[ActionKind(self.type_of_action)]
        return np.array(vals, dtype=float)


def extract_features(
    action: MouseAction, sharp_threshold: float = SHARP_THRESHOLD, genuine: bool = True
) -> ActionFeatures:
    """Compute the 39 features of one action.

    The summary statistics skip the padding at the head of each series
    (velocities and angular quantities from the 2nd event, acceleration from
    the 3rd, jerk from the 4th). Standard deviations are population ones.
    """
    ks = compute_series(action)
    stats = {}
    for name in SERIES:
        vals = getattr(ks, name)[_FIRST_DEFINED[name] - 1 :]
        stats[f"mean_{name}"] = float(np.mean(vals))
        stats[f"std_{name}"] = float(np.std(vals))
        stats[f"min_{name}"] = float(np.min(vals))
        stats[f"max_{name}"] = float(np.max(vals))

    x, y, t = action.x, action.y, action.t
    arc = float(ks.s[-1])
    chord = math.hypot(x[-1] - x[0], y[-1] - y[0])
    # rounding in the cumulative sum can leave the chord a few ulps above the arc
    chord = min(chord, arc)
    return ActionFeatures(
        **stats,
        type_of_action=action.kind.value,
        elapsed_time=float(t[-1] - t[0]),
        trajectory_length=arc,
        dist_end_to_end=chord,
        direction=quantize_direction((x[0], y[0]), (x[-1], y[-1])),
        straightness=chord / arc if arc > 0 else 0.0,
        num_points=action.n,
        sum_of_angles=float(np.sum(ks.theta)),
        largest_deviation=_largest_deviation(x, y),
        sharp_angles=int(np.count_nonzero(np.abs(ks.theta) < sharp_threshold)),
        a_beg_time=_a_beg_time(ks.a, ks.dt),
        user_id=action.user_id,
        session_id=action.session_id,
        genuine=genuine,
    )
