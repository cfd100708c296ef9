import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bearing_reg.errors import DegenerateGeometryError, InvalidArgumentError
from bearing_reg.geometry import (
    SensorConfig,
    bearing_from,
    pair_covariance_arrays,
    pair_jacobian,
    transform_covariance,
    triangulate,
    triangulate_arrays,
    triangulate_tan_form,
    wrap_angle,
)


@pytest.mark.parametrize(
    "angle, expected",
    [
        (0.0, 0.0),
        (math.pi, math.pi),
        (-math.pi, math.pi),
        (3 * math.pi, math.pi),
        (2 * math.pi + 0.1, 0.1),
        (-0.5, -0.5),
    ],
)
def test_wrap_angle_examples(angle, expected):
    assert wrap_angle(angle) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_wrap_angle_rejects_non_finite(bad):
    with pytest.raises(InvalidArgumentError):
        wrap_angle(bad)


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_wrap_angle_range_and_idempotent(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert wrap_angle(w) == w
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)


def test_wrap_angle_array():
    out = wrap_angle(np.array([0.0, -math.pi, 4.0]))
    np.testing.assert_allclose(out, [0.0, math.pi, 4.0 - 2 * math.pi])


@pytest.mark.parametrize(
    "sensor, target, expected",
    [
        ((0, 0), (5, 5), math.pi / 4),
        ((10, 0), (5, 5), 3 * math.pi / 4),
        ((0, 0), (1, 0), 0.0),
        ((0, 0), (-1, 0), math.pi),
        ((0, 0), (0, -2), -math.pi / 2),
    ],
)
def test_bearing_from(sensor, target, expected):
    assert bearing_from(sensor, target) == pytest.approx(expected, abs=1e-15)


def test_bearing_from_coincident():
    with pytest.raises(DegenerateGeometryError):
        bearing_from((3.0, 4.0), (3.0, 4.0))


def test_triangulate_symmetric(pair_sensors):
    si, sj = pair_sensors
    p = triangulate(si, sj, math.pi / 4, 3 * math.pi / 4)
    assert p.x == pytest.approx(5.0, abs=1e-12)
    assert p.y == pytest.approx(5.0, abs=1e-12)


@pytest.mark.parametrize("ti, tj", [(0.0, math.pi), (0.0, 0.0), (0.3, 0.3), (math.pi / 2, 2.0)])
def test_triangulate_degenerate(pair_sensors, ti, tj):
    si, sj = pair_sensors
    with pytest.raises(DegenerateGeometryError):
        triangulate(si, sj, ti, tj)


def test_triangulate_round_trip_random(rng):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (10_000.0, 0.0), 0.01)
    worst = 0.0
    for _ in range(1000):
        t = rng.uniform(1000.0, 5000.0, size=2)
        p = triangulate(si, sj, bearing_from(si, t), bearing_from(sj, t))
        worst = max(worst, math.hypot(p.x - t[0], p.y - t[1]))
    assert worst < 1e-9


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-5000, 5000),
    st.floats(-5000, 5000),
    st.floats(100, 9000),
    st.floats(100, 9000),
)
def test_triangulate_round_trip_property(sx, sy, tx, ty):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (sx, sy), 0.01)
    ti, tj = math.atan2(ty, tx), math.atan2(ty - sy, tx - sx)
    # keep away from the baseline and the vertical tangent singularity
    gap = abs(math.sin(tj - ti))
    if gap < 0.05 or min(abs(math.cos(ti)), abs(math.cos(tj))) < 0.05 or math.hypot(tx - sx, ty - sy) < 50:
        return
    p = triangulate(si, sj, ti, tj)
    assert math.hypot(p.x - tx, p.y - ty) < 1e-9
    # the recovered point lies on both rays: bearings agree modulo pi
    assert math.sin(bearing_from(si, p) - ti) == pytest.approx(0.0, abs=1e-12)
    assert math.sin(bearing_from(sj, p) - tj) == pytest.approx(0.0, abs=1e-12)


def test_sin_cos_form_matches_tan_form(rng):
    for _ in range(500):
        si = SensorConfig(1, tuple(rng.uniform(-100, 100, 2)), 0.01)
        sj = SensorConfig(2, tuple(rng.uniform(9000, 10_000, 2)), 0.01)
        t = rng.uniform(1000.0, 8000.0, 2)
        ti, tj = bearing_from(si, t), bearing_from(sj, t)
        a = triangulate(si, sj, ti, tj)
        b = triangulate_tan_form(si, sj, ti, tj)
        assert a.x == pytest.approx(b.x, rel=1e-9, abs=1e-7)
        assert a.y == pytest.approx(b.y, rel=1e-9, abs=1e-7)


def test_triangulate_arrays_flags_invalid():
    x, y, ok = triangulate_arrays(0.0, 0.0, 10.0, 0.0, np.array([math.pi / 4, 0.0]), np.array([3 * math.pi / 4, math.pi]))
    assert ok.tolist() == [True, False]
    assert np.isnan(x[1]) and np.isnan(y[1])


def test_pair_jacobian_hand_value(pair_sensors):
    J = pair_jacobian(*pair_sensors, (5.0, 5.0))
    np.testing.assert_allclose(J, [[-0.1, 0.1], [-0.1, -0.1]], atol=1e-15)


@pytest.mark.parametrize("d", [1.0, 7.5, 1234.0])
def test_pair_jacobian_axis_row(d):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (0.0, -50.0), 0.01)
    J = pair_jacobian(si, sj, (d, 0.0))
    np.testing.assert_allclose(J[0], [0.0, 1.0 / d], atol=1e-15)


def test_pair_jacobian_at_sensor(pair_sensors):
    with pytest.raises(DegenerateGeometryError):
        pair_jacobian(*pair_sensors, (10.0, 0.0))


def _fd_jacobian(si, sj, p, h=1e-6):
    J = np.zeros((2, 2))
    for r, s in enumerate((si, sj)):
        for c in range(2):
            up, dn = list(p), list(p)
            up[c] += h
            dn[c] -= h
            J[r, c] = (bearing_from(s, up) - bearing_from(s, dn)) / (2 * h)
    return J


def test_pair_jacobian_finite_difference(rng):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (10_000.0, 0.0), 0.01)
    for _ in range(200):
        p = tuple(rng.uniform(500.0, 9500.0, 2))
        J = pair_jacobian(si, sj, p)
        fd = _fd_jacobian(si, sj, p)
        rel = np.abs(J - fd) / np.max(np.abs(J))
        assert rel.max() <= 1e-5


def test_transform_covariance_hand_value(pair_sensors):
    var = 0.0261**2
    J = pair_jacobian(*pair_sensors, (5.0, 5.0))
    cov = transform_covariance(J, np.diag([var, var]))
    np.testing.assert_allclose(cov, 50 * var * np.eye(2), rtol=1e-12, atol=1e-15)
    # direct evaluation of (J^T R^-1 J)^-1 without the helper
    direct = np.linalg.inv(J.T @ np.linalg.inv(np.diag([var, var])) @ J)
    np.testing.assert_allclose(cov, direct, rtol=1e-12, atol=1e-15)


def test_transform_covariance_identity():
    np.testing.assert_allclose(transform_covariance(np.eye(2), np.eye(2)), np.eye(2))


def test_transform_covariance_symmetric_pd(rng):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (10_000.0, 0.0), 0.01)
    for _ in range(100):
        p = rng.uniform(500.0, 9500.0, 2)
        R = np.diag(rng.uniform(1e-6, 1e-2, 2))
        cov = transform_covariance(pair_jacobian(si, sj, p), R)
        assert np.max(np.abs(cov - cov.T)) < 1e-12
        assert np.all(np.linalg.eigvalsh(cov) > 0)


@pytest.mark.parametrize(
    "J, R, err",
    [
        (np.ones((2, 2)), np.eye(2), DegenerateGeometryError),
        (np.eye(2), np.diag([1.0, 0.0]), InvalidArgumentError),
        (np.eye(2), np.array([[1.0, 0.1], [0.1, 1.0]]), InvalidArgumentError),
        (np.eye(3), np.eye(3), InvalidArgumentError),
    ],
)
def test_transform_covariance_rejects(J, R, err):
    with pytest.raises(err):
        transform_covariance(J, R)


def test_vectorised_covariance_matches_scalar(rng):
    si = SensorConfig(1, (0.0, 0.0), 0.01)
    sj = SensorConfig(2, (10_000.0, 0.0), 0.01)
    pts = rng.uniform(500.0, 9500.0, (20, 2))
    vec = pair_covariance_arrays(0.0, 0.0, 10_000.0, 0.0, pts[:, 0], pts[:, 1], 1e-4, 4e-4)
    for p, c in zip(pts, vec):
        ref = transform_covariance(pair_jacobian(si, sj, p), np.diag([1e-4, 4e-4]))
        np.testing.assert_allclose(c, ref, rtol=1e-10)


@pytest.mark.parametrize("sigma", [0.0, -1.0, math.nan])
def test_sensor_config_validates_sigma(sigma):
    with pytest.raises(InvalidArgumentError):
        SensorConfig(1, (0.0, 0.0), sigma)
