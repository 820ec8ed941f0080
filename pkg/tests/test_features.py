import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mousedyn.features import (
    FEATURE_NAMES,
    DegenerateAction,
    compute_series,
    extract_features,
    quantize_direction,
)
from mousedyn.segmentation import ActionKind, MouseAction

from conftest import random_action


def action(points, kind=ActionKind.MM):
    return MouseAction(kind, np.asarray(points, dtype=float))


def oracle_series(pts):
    """Literal per-index transcription of the series definitions, 1-based."""
    n = len(pts)
    x = [None] + [p[0] for p in pts]
    y = [None] + [p[1] for p in pts]
    t = [None] + [p[2] for p in pts]
    th, vx, vy, v, a, j, w, c, s = ([0.0] * (n + 1) for _ in range(9))
    for i in range(2, n + 1):
        dx, dy, dt = x[i] - x[i - 1], y[i] - y[i - 1], t[i] - t[i - 1]
        th[i] = math.atan2(dy, dx)
        vx[i], vy[i] = dx / dt, dy / dt
        v[i] = math.sqrt(vx[i] ** 2 + vy[i] ** 2)
        s[i] = s[i - 1] + math.sqrt(dx * dx + dy * dy)
    for i in range(2, n + 1):
        dt = t[i] - t[i - 1]
        a[i] = (v[i] - v[i - 1]) / dt
        w[i] = (th[i] - th[i - 1]) / dt
        ds = s[i] - s[i - 1]
        c[i] = (th[i] - th[i - 1]) / ds if ds else 0.0
    for i in range(2, n + 1):
        j[i] = (a[i] - a[i - 1]) / (t[i] - t[i - 1])
    return {k: np.array(val[1:]) for k, val in zip("theta vx vy v a j omega c s".split(), (th, vx, vy, v, a, j, w, c, s))}


def test_straight_line_series():
    ks = compute_series(action([(0, 0, 0), (1, 0, 0.1), (2, 0, 0.2), (3, 0, 0.3)]))
    np.testing.assert_allclose(ks.vx, [0, 10, 10, 10])
    np.testing.assert_array_equal(ks.vy, 0)
    np.testing.assert_array_equal(ks.theta, 0)
    np.testing.assert_array_equal(ks.omega, 0)
    np.testing.assert_array_equal(ks.c, 0)
    np.testing.assert_array_equal(ks.s, [0, 1, 2, 3])


def test_vertical_line_angles():
    ks = compute_series(action([(0, 0, 0), (0, 1, 0.1), (0, 2, 0.2), (0, 3, 0.3)]))
    np.testing.assert_array_equal(ks.theta, [0, math.pi / 2, math.pi / 2, math.pi / 2])


L_SHAPE = [(0, 0, 0.0), (1, 0, 0.1), (1, 1, 0.2), (1, 2, 0.3)]


def test_l_shape_against_oracle():
    ks = compute_series(action(L_SHAPE))
    ref = oracle_series(L_SHAPE)
    for name, vals in ref.items():
        np.testing.assert_allclose(getattr(ks, name), vals, rtol=0, atol=1e-9, err_msg=name)
    # frozen values worked out by hand from the same definitions
    np.testing.assert_allclose(ks.a, [0, 100, 0, 0], atol=1e-9)
    np.testing.assert_allclose(ks.j, [0, 1000, -1000, 0], atol=1e-9)
    np.testing.assert_allclose(ks.omega, [0, 0, 5 * math.pi, 0], atol=1e-9)
    np.testing.assert_allclose(ks.c, [0, 0, math.pi / 2, 0], atol=1e-12)


def test_random_actions_against_oracle(rng):
    for _ in range(200):
        act = random_action(rng)
        ks = compute_series(act)
        ref = oracle_series(act.points.tolist())
        for name, vals in ref.items():
            np.testing.assert_allclose(getattr(ks, name), vals, rtol=1e-9, atol=1e-9, err_msg=name)


def test_uniform_line_features():
    f = extract_features(action([(0, 0, 0), (1, 0, 0.1), (2, 0, 0.2), (3, 0, 0.3)]))
    assert f.mean_vx == pytest.approx(10) and f.std_vx == pytest.approx(0, abs=1e-12)
    assert f.min_vx == pytest.approx(10) and f.max_vx == pytest.approx(10)
    assert f.straightness == 1.0
    assert f.largest_deviation == 0.0
    assert f.sum_of_angles == 0.0
    assert f.direction == 1
    assert f.num_points == 4
    assert f.elapsed_time == pytest.approx(0.3)


def test_a_beg_time_example():
    # speeds (., 10, 20, 10) px/s at 0.1 s steps -> a = (., ., 100, -100)
    act = action([(0, 0, 0), (1, 0, 0.1), (3, 0, 0.2), (4, 0, 0.3)])
    ks = compute_series(act)
    np.testing.assert_allclose(ks.v[1:], [10, 20, 10])
    np.testing.assert_allclose(ks.a[2:], [100, -100])
    assert extract_features(act).a_beg_time == pytest.approx(0.2)


def test_a_beg_time_never_decelerating():
    act = action([(0, 0, 0), (1, 0, 0.1), (3, 0, 0.2), (6, 0, 0.3)])
    assert extract_features(act).a_beg_time == pytest.approx(0.3)


def test_sharp_angles_and_deviation():
    f = extract_features(action(L_SHAPE))
    assert f.sharp_angles == 2  # theta_1 (padding) and the first horizontal step
    # distance of (1, 0) from the chord (0,0)-(1,2)
    assert f.largest_deviation == pytest.approx(2 / math.sqrt(5))
    assert f.sum_of_angles == pytest.approx(math.pi)


def test_closed_loop_deviation():
    f = extract_features(action([(0, 0, 0), (3, 0, 1), (3, 4, 2), (0, 0, 3)]))
    assert f.dist_end_to_end == 0 and f.straightness == 0
    assert f.largest_deviation == pytest.approx(5.0)


def test_stationary_interval_curvature():
    ks = compute_series(action([(0, 0, 0), (1, 0, 0.1), (1, 0, 0.2), (2, 0, 0.3)]))
    assert np.all(np.isfinite(ks.c))
    assert ks.c[2] == 0


@pytest.mark.parametrize(
    "end, code",
    [((10, 1), 1), ((0, 10), 3), ((-1, 0), 5), ((0, 0), 1), ((1, 1), 2), ((1, -1), 8), ((0, -1), 7), ((-1, -1), 6)],
)
def test_direction(end, code):
    assert quantize_direction((0, 0), end) == code


def test_degenerate():
    with pytest.raises(DegenerateAction):
        compute_series(action([(0, 0, 0), (1, 1, 1), (2, 2, 2)]))
    with pytest.raises(DegenerateAction):
        compute_series(action([(0, 0, 0), (1, 1, 1), (2, 2, 1), (3, 3, 2)]))


def test_feature_order_and_count():
    assert len(FEATURE_NAMES) == 39
    assert FEATURE_NAMES[:4] == ("mean_vx", "std_vx", "min_vx", "max_vx")
    assert FEATURE_NAMES[28:] == (
        "type_of_action", "elapsed_time", "trajectory_length", "dist_end_to_end", "direction",
        "straightness", "num_points", "sum_of_angles", "largest_deviation", "sharp_angles", "a_beg_time",
    )
    f = extract_features(action(L_SHAPE, ActionKind.DD))
    assert len(f.values()) == 39 and f.vector()[28] == 2


SCALED = ("trajectory_length", "dist_end_to_end", "largest_deviation")
INVARIANT = ("straightness", "direction", "sum_of_angles", "sharp_angles", "num_points", "elapsed_time", "a_beg_time")


def check_invariances(act, dx, dy, dt, k):
    base = extract_features(act)
    moved = MouseAction(act.kind, act.points + [dx, dy, 0])
    assert extract_features(moved).values() == base.values()
    shifted = MouseAction(act.kind, act.points + [0, 0, dt])
    assert extract_features(shifted).values() == base.values()

    scaled = extract_features(MouseAction(act.kind, act.points * [k, k, 1]))
    for name in SCALED:
        assert getattr(scaled, name) == pytest.approx(k * getattr(base, name), rel=1e-9, abs=1e-9)
    for name in INVARIANT:
        assert getattr(scaled, name) == pytest.approx(getattr(base, name), rel=1e-9, abs=1e-9), name
    for series in ("vx", "vy", "v", "a", "j"):
        for stat in ("mean", "std", "min", "max"):
            name = f"{stat}_{series}"
            assert getattr(scaled, name) == pytest.approx(k * getattr(base, name), rel=1e-7, abs=1e-6), name
    for stat in ("mean", "std", "min", "max"):
        assert getattr(scaled, f"{stat}_omega") == pytest.approx(getattr(base, f"{stat}_omega"), rel=1e-9, abs=1e-9)
        assert getattr(scaled, f"{stat}_c") == pytest.approx(getattr(base, f"{stat}_c") / k, rel=1e-7, abs=1e-9)
    vals = np.array(base.vector())
    assert np.all(np.isfinite(vals))
    assert 0 <= base.straightness <= 1
    assert base.dist_end_to_end <= base.trajectory_length


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    dx=st.integers(-1000, 1000),
    dy=st.integers(-1000, 1000),
    dt=st.integers(0, 5000),
    k=st.sampled_from([2.0, 3.0, 0.5, 0.75, 8.0]),
)
def test_invariances(seed, dx, dy, dt, k):
    act = random_action(np.random.default_rng(seed), dyadic=True)
    check_invariances(act, dx, dy, float(dt), k)
