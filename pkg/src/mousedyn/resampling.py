"""Uniform-in-time resampling of an action's trajectory."""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np
from scipy.interpolate import CubicSpline

from .segmentation import MouseAction


class ResampleMethod(enum.Enum):
    NONE = "none"
    LINEAR = "linear"
    SPLINE = "spline"


class TooShortForSpline(ValueError):
    pass


@dataclass(frozen=True)
class ResampleConfig:
    frequency: float = 20.0
    method: ResampleMethod = ResampleMethod.NONE

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")
        if not isinstance(self.method, ResampleMethod):
            object.__setattr__(self, "method", ResampleMethod(self.method))


def sample_times(t0: float, t1: float, frequency: float) -> np.ndarray:
    """t0, t0 + 1/f, ... up to t1, with t1 appended if no sample lands on it."""
    step = 1.0 / frequency
    count = int(np.floor((t1 - t0) * frequency + 1e-9)) + 1
    ts = t0 + step * np.arange(count)
    ts = ts[ts <= t1]
    if np.isclose(ts[-1], t1, rtol=0, atol=1e-9):
        ts[-1] = t1
    else:
        ts = np.append(ts, t1)
    return ts


def resample(action: MouseAction, cfg: ResampleConfig) -> MouseAction:
    """Interpolate x(t), y(t) at a fixed rate.

    If fewer than four samples would result, the action is returned as is
    with ``resampled=False``; otherwise the result has ``resampled=True``.
    """
    if cfg.method is ResampleMethod.NONE:
        return action
    if cfg.method is ResampleMethod.SPLINE and action.n < 4:
        raise TooShortForSpline(f"spline resampling needs 4 points, action has {action.n}")
    t = action.t
    ts = sample_times(t[0], t[-1], cfg.frequency)
    if len(ts) < 4:
        return replace(action, resampled=False)
    if cfg.method is ResampleMethod.LINEAR:
        xs = np.interp(ts, t, action.x)
        ys = np.interp(ts, t, action.y)
    else:
        xs = CubicSpline(t, action.x, bc_type="natural")(ts)
        ys = CubicSpline(t, action.y, bc_type="natural")(ts)
    xs[0], ys[0] = action.x[0], action.y[0]
    xs[-1], ys[-1] = action.x[-1], action.y[-1]
    return replace(action, points=np.column_stack([xs, ys, ts]), resampled=True)
