"""Split a triangulated position into its bias-free part and a bias-induced offset.

With ``t = tan(theta)`` and ``tau = tan(b)`` the biased intersection of the
bearing lines of sensors ``i`` and ``j`` is

    x_hat = (D_x + Bx_i tau_i + Bx_j tau_j + Bx_ij tau_i tau_j) / N
    N     = D + B tau_i - B tau_j + D tau_i tau_j

(likewise for y), so ``x_hat = D_x / D + beta_x``. :func:`bias_offset` computes
``beta`` as the exact difference of two triangulations; the factored form in
:func:`bias_offset_closed_form` is an independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateGeometryError, InvalidArgumentError
from .geometry import COS_TOL, TAN_DIFF_TOL, Position2D, _xy, triangulate, triangulate_arrays
from .pairing import PairingPlan

DEFAULT_BIAS_BOUND = 0.05


@dataclass(frozen=True)
class FactorTerms:
    D: float
    B: float
    D_x: float
    B_x_i: float
    B_x_j: float
    B_x_ij: float
    D_y: float
    B_y_i: float
    B_y_j: float
    B_y_ij: float


class BiasOffset2D(NamedTuple):
    beta_x: float
    beta_y: float


@dataclass(frozen=True)
class BiasVector:
    """Per-sensor angular offsets (rad), ordered like ``sensor_ids``."""

    offsets: tuple[float, ...]
    sensor_ids: tuple[int, ...]
    lower_bound: float = -DEFAULT_BIAS_BOUND
    upper_bound: float = DEFAULT_BIAS_BOUND

    def __post_init__(self):
        offsets = tuple(float(v) for v in np.ravel(self.offsets))
        ids = tuple(int(s) for s in self.sensor_ids)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "sensor_ids", ids)
        if len(offsets) != len(ids):
            raise InvalidArgumentError("offsets and sensor_ids differ in length")
        if not self.lower_bound < self.upper_bound:
            raise InvalidArgumentError("lower_bound must be below upper_bound")
        for s, v in zip(ids, offsets):
            if not (math.isfinite(v) and self.lower_bound <= v <= self.upper_bound):
                raise InvalidArgumentError(
                    f"bias {v:.6g} rad of sensor {s} outside "
                    f"[{self.lower_bound}, {self.upper_bound}]"
                )

    @classmethod
    def zeros(cls, sensor_ids, **bounds) -> "BiasVector":
        return cls(tuple(0.0 for _ in sensor_ids), tuple(sensor_ids), **bounds)

    def as_array(self) -> np.ndarray:
        return np.array(self.offsets)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.sensor_ids, self.offsets))

    def __getitem__(self, sensor_id: int) -> float:
        return self.offsets[self.sensor_ids.index(sensor_id)]


def _lookup(b, sensor_id) -> float:
    if isinstance(b, BiasVector):
        return b[sensor_id]
    return float(b[sensor_id])


def _tangents(theta_i, theta_j):
    if min(abs(math.cos(theta_i)), abs(math.cos(theta_j))) < COS_TOL:
        raise DegenerateGeometryError("bearing at the tangent singularity")
    return math.tan(theta_i), math.tan(theta_j)


def factor_terms(si, sj, theta_i: float, theta_j: float) -> FactorTerms:
    """Common terms of the tangent-expanded triangulation.

    The y-terms carry ``(x_i - x_j)`` and ``B_x_j`` ends in ``- x_j``; these are
    the signs the expansion of the intersection formula actually produces.
    """
    xi, yi = _xy(si)
    xj, yj = _xy(sj)
    ti, tj = _tangents(theta_i, theta_j)
    D = ti - tj
    if abs(D) < TAN_DIFF_TOL:
        raise DegenerateGeometryError("parallel bearings: D = tan(theta_i) - tan(theta_j) = 0")
    dy = yj - yi
    dx = xi - xj
    return FactorTerms(
        D=D,
        B=1.0 + ti * tj,
        D_x=xi * ti - xj * tj + dy,
        B_x_i=-dy * ti + xj * ti * tj + xi,
        B_x_j=-dy * tj - xi * ti * tj - xj,
        B_x_ij=xj * ti - xi * tj + dy * ti * tj,
        D_y=yj * ti - yi * tj + dx * ti * tj,
        B_y_i=dx * tj + yi * ti * tj + yj,
        B_y_j=dx * ti - yj * ti * tj - yi,
        B_y_ij=yi * ti - yj * tj + dx,
    )


def unbiased_position(ft: FactorTerms) -> Position2D:
    if abs(ft.D) < TAN_DIFF_TOL:
        raise DegenerateGeometryError("D = 0")
    return Position2D(ft.D_x / ft.D, ft.D_y / ft.D)


def bias_offset(si, sj, theta_i, theta_j, b_i, b_j) -> BiasOffset2D:
    """Shift of the triangulated point caused by offsets ``b_i``, ``b_j``."""
    if b_i == 0.0 and b_j == 0.0:
        triangulate(si, sj, theta_i, theta_j)  # still reject degenerate geometry
        return BiasOffset2D(0.0, 0.0)
    biased = triangulate(si, sj, theta_i + b_i, theta_j + b_j)
    clean = triangulate(si, sj, theta_i, theta_j)
    return BiasOffset2D(biased.x - clean.x, biased.y - clean.y)


def bias_offset_closed_form(ft: FactorTerms, b_i: float, b_j: float) -> BiasOffset2D:
    """Factored bias offset; agrees with :func:`bias_offset` to round-off."""
    ui, uj = math.tan(b_i), math.tan(b_j)
    n = ft.D + ft.B * ui - ft.B * uj + ft.D * ui * uj
    if abs(n) < TAN_DIFF_TOL:
        raise DegenerateGeometryError("biased bearings are parallel")
    shift = ft.B * ui - ft.B * uj + ft.D * ui * uj
    bx = (ft.B_x_i * ui + ft.B_x_j * uj + ft.B_x_ij * ui * uj) / n - ft.D_x * shift / (ft.D * n)
    by = (ft.B_y_i * ui + ft.B_y_j * uj + ft.B_y_ij * ui * uj) / n - ft.D_y * shift / (ft.D * n)
    return BiasOffset2D(bx, by)


def h_of_b(
    pairing: PairingPlan,
    bearings: Mapping[int, float],
    b,
    sensors: Mapping[int, object],
) -> np.ndarray:
    """Bias-only pseudo-measurement model for one target at one time step.

    ``bearings`` are bias-free bearings per sensor id, ``b`` a BiasVector or a
    mapping id -> offset, ``sensors`` maps id -> SensorConfig. Returns a 2-vector
    for plans with a single pair difference, else an (n_differences, 2) array.
    """
    rows = []
    for (i, j), (m, n) in pairing.differences:
        a = bias_offset(sensors[i], sensors[j], bearings[i], bearings[j], _lookup(b, i), _lookup(b, j))
        c = bias_offset(sensors[m], sensors[n], bearings[m], bearings[n], _lookup(b, m), _lookup(b, n))
        rows.append((a.beta_x - c.beta_x, a.beta_y - c.beta_y))
    out = np.array(rows)
    return out[0] if len(rows) == 1 else out


def h_arrays(pos: np.ndarray, theta: np.ndarray, bias: np.ndarray):
    """Vectorised bias model over stacked pair-of-pairs slots.

    Args:
        pos: (..., 4, 2) sensor positions for slots (i, j, m, n).
        theta: (..., 4) bias-free bearings.
        bias: (..., 4) offsets per slot; broadcasts against ``theta``.

    Returns:
        ``(h, valid)`` with ``h`` of shape (..., 2).
    """
    biased = theta + bias
    x = pos[..., 0]
    y = pos[..., 1]
    a_x, a_y, ok1 = triangulate_arrays(x[..., 0], y[..., 0], x[..., 1], y[..., 1], biased[..., 0], biased[..., 1])
    c_x, c_y, ok2 = triangulate_arrays(x[..., 2], y[..., 2], x[..., 3], y[..., 3], biased[..., 2], biased[..., 3])
    a0x, a0y, ok3 = triangulate_arrays(x[..., 0], y[..., 0], x[..., 1], y[..., 1], theta[..., 0], theta[..., 1])
    c0x, c0y, ok4 = triangulate_arrays(x[..., 2], y[..., 2], x[..., 3], y[..., 3], theta[..., 2], theta[..., 3])
    h = np.stack([(a_x - a0x) - (c_x - c0x), (a_y - a0y) - (c_y - c0y)], axis=-1)
    return h, ok1 & ok2 & ok3 & ok4


def slot_ids(pairing: PairingPlan) -> list[tuple[int, int, int, int]]:
    """Sensor ids in (i, j, m, n) slot order for every pair difference of the plan."""
    return [(i, j, m, n) for (i, j), (m, n) in pairing.differences]


def stack_slots(ids: Sequence[int], sensors: Mapping[int, object]) -> np.ndarray:
    return np.array([_xy(sensors[s]) for s in ids])
