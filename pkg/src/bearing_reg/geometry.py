"""Angle conventions, two-sensor triangulation and polar-to-Cartesian covariance.

Bearings are measured counter-clockwise from the +x axis:

    theta = atan2(y_target - y_sensor, x_target - x_sensor)

so that d(theta)/dx = -(y - y_s) / r**2 and d(theta)/dy = (x - x_s) / r**2.
Every module in the package uses this convention.

The scalar functions raise :class:`DegenerateGeometryError`; the ``*_arrays``
variants are vectorised over numpy broadcasting and return a validity mask
instead, which is what the likelihood and Monte Carlo code paths use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateGeometryError, InvalidArgumentError

# Triangulation is rejected when the tan-form denominator or a cosine is this small.
TAN_DIFF_TOL = 1e-9
COS_TOL = 1e-6
_COINCIDENT_TOL = 1e-12


@dataclass(frozen=True)
class SensorConfig:
    id: int
    position: tuple[float, float]
    sigma_theta: float
    true_bias: float = 0.0

    def __post_init__(self):
        if not (self.sigma_theta > 0 and math.isfinite(self.sigma_theta)):
            raise InvalidArgumentError(f"sensor {self.id}: sigma_theta must be > 0")
        x, y = self.position
        if not (math.isfinite(x) and math.isfinite(y)):
            raise InvalidArgumentError(f"sensor {self.id}: non-finite position")
        object.__setattr__(self, "position", (float(x), float(y)))

    @property
    def x(self) -> float:
        return self.position[0]

    @property
    def y(self) -> float:
        return self.position[1]


class Position2D(NamedTuple):
    x: float
    y: float


def _xy(p) -> tuple[float, float]:
    if isinstance(p, SensorConfig):
        return p.position
    return float(p[0]), float(p[1])


def wrap_angle(angle):
    """Map an angle (scalar or array) into (-pi, pi]."""
    a = np.asarray(angle, dtype=float)
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError("wrap_angle: non-finite input")
    w = np.mod(a + np.pi, 2.0 * np.pi) - np.pi
    # mod lands exact odd multiples of pi on -pi; the interval is open there
    w = np.where(w <= -np.pi, np.pi, w)
    # values already in range pass through untouched
    w = np.where((a > -np.pi) & (a <= np.pi), a, w)
    if w.ndim == 0:
        return float(w)
    return w


def bearing_from(sensor, target) -> float:
    sx, sy = _xy(sensor)
    tx, ty = _xy(target)
    dx, dy = tx - sx, ty - sy
    if math.hypot(dx, dy) <= _COINCIDENT_TOL:
        raise DegenerateGeometryError("bearing undefined: target coincides with sensor")
    return wrap_angle(math.atan2(dy, dx))


def bearing_arrays(sx, sy, tx, ty):
    """Vectorised :func:`bearing_from` without the degeneracy check."""
    return np.arctan2(np.asarray(ty) - sy, np.asarray(tx) - sx)


def triangulate_arrays(xi, yi, xj, yj, theta_i, theta_j):
    """Intersect bearing lines from two sensors.

    Uses the sin/cos line-intersection form, which equals the tangent form
    ``x = (y_j - y_i + x_i tan_i - x_j tan_j) / (tan_i - tan_j)`` wherever the
    latter is defined but stays well conditioned near +-pi/2.

    Returns:
        ``(x, y, valid)``; entries with ``valid == False`` are NaN.
    """
    ci, si = np.cos(theta_i), np.sin(theta_i)
    cj, sj = np.cos(theta_j), np.sin(theta_j)
    with np.errstate(divide="ignore", invalid="ignore"):
        tan_gap = np.abs(si / ci - sj / cj)
    valid = (np.abs(ci) >= COS_TOL) & (np.abs(cj) >= COS_TOL) & (tan_gap >= TAN_DIFF_TOL)
    cross = ci * sj - si * cj  # sin(theta_j - theta_i)
    dx = np.asarray(xj) - xi
    dy = np.asarray(yj) - yi
    with np.errstate(divide="ignore", invalid="ignore"):
        r_i = (dx * sj - dy * cj) / cross
    x = np.where(valid, xi + r_i * ci, np.nan)
    y = np.where(valid, yi + r_i * si, np.nan)
    return x, y, valid


def triangulate(si, sj, theta_i: float, theta_j: float) -> Position2D:
    """Cartesian position where the bearing lines of sensors ``si`` and ``sj`` cross.

    Raises:
        DegenerateGeometryError: near-parallel lines (target on the baseline)
            or either bearing within ``COS_TOL`` of the tangent singularity.
    """
    xi, yi = _xy(si)
    xj, yj = _xy(sj)
    x, y, ok = triangulate_arrays(xi, yi, xj, yj, float(theta_i), float(theta_j))
    if not bool(ok):
        raise DegenerateGeometryError(
            f"cannot triangulate bearings {theta_i:.6g}, {theta_j:.6g}: "
            "parallel rays or tangent singularity"
        )
    return Position2D(float(x), float(y))


def triangulate_tan_form(si, sj, theta_i: float, theta_j: float) -> Position2D:
    """Direct tangent-form intersection, kept as a cross-check of :func:`triangulate`."""
    xi, yi = _xy(si)
    xj, yj = _xy(sj)
    ti, tj = math.tan(theta_i), math.tan(theta_j)
    d = ti - tj
    if abs(d) < TAN_DIFF_TOL or min(abs(math.cos(theta_i)), abs(math.cos(theta_j))) < COS_TOL:
        raise DegenerateGeometryError("tangent-form triangulation is singular")
    x = (yj - yi + xi * ti - xj * tj) / d
    y = (yj * ti - yi * tj + (xi - xj) * ti * tj) / d
    return Position2D(x, y)


def jacobian_rows_arrays(sx, sy, px, py):
    """Bearing gradient [d/dx, d/dy] of each sensor at points p, stacked on the last axis."""
    dx = np.asarray(px) - sx
    dy = np.asarray(py) - sy
    r2 = dx * dx + dy * dy
    return np.stack([-dy / r2, dx / r2], axis=-1)


def pair_jacobian(si, sj, p) -> np.ndarray:
    """2x2 Jacobian of (theta_i, theta_j) with respect to (x, y) at ``p``."""
    px, py = _xy(p)
    rows = []
    for s in (si, sj):
        sx, sy = _xy(s)
        if math.hypot(px - sx, py - sy) <= _COINCIDENT_TOL:
            raise DegenerateGeometryError("Jacobian undefined at a sensor position")
        rows.append(jacobian_rows_arrays(sx, sy, px, py))
    return np.array(rows)


def transform_covariance(J, R_polar) -> np.ndarray:
    """Cartesian covariance ``(J^T R^-1 J)^-1`` of a triangulated point."""
    J = np.asarray(J, dtype=float)
    R = np.asarray(R_polar, dtype=float)
    if R.shape != (2, 2) or J.shape != (2, 2):
        raise InvalidArgumentError("transform_covariance expects 2x2 inputs")
    if np.any(np.diag(R) <= 0) or R[0, 1] != 0 or R[1, 0] != 0:
        raise InvalidArgumentError("polar covariance must be diagonal with positive entries")
    scale = max(np.max(np.abs(J)), 1e-300)
    if abs(np.linalg.det(J / scale)) < 1e-12:
        raise DegenerateGeometryError("singular bearing Jacobian (parallel rays)")
    info = J.T @ np.diag(1.0 / np.diag(R)) @ J
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)


def pair_covariance_arrays(xi, yi, xj, yj, px, py, var_i, var_j):
    """Vectorised ``transform_covariance(pair_jacobian(...), diag(var_i, var_j))``.

    Computed as ``J^-1 R J^-T`` in closed form for speed; returns (..., 2, 2).
    """
    gi = jacobian_rows_arrays(xi, yi, px, py)
    gj = jacobian_rows_arrays(xj, yj, px, py)
    a, b = gi[..., 0], gi[..., 1]
    c, d = gj[..., 0], gj[..., 1]
    det = a * d - b * c
    # J^-1 = [[d, -b], [-c, a]] / det ; cov = J^-1 diag(vi, vj) J^-T
    vi = np.broadcast_to(var_i, det.shape)
    vj = np.broadcast_to(var_j, det.shape)
    # parallel rays give inf/nan entries; callers screen them out
    with np.errstate(divide="ignore", invalid="ignore"):
        cxx = (d * d * vi + b * b * vj) / det**2
        cyy = (c * c * vi + a * a * vj) / det**2
        cxy = -(c * d * vi + a * b * vj) / det**2
    cov = np.empty(det.shape + (2, 2))
    cov[..., 0, 0] = cxx
    cov[..., 1, 1] = cyy
    cov[..., 0, 1] = cxy
    cov[..., 1, 0] = cxy
    return cov
