"""Fisher information and Cramer-Rao lower bound for the sensor offset biases.

The stacked model is ``Z = h(b) + w`` over every target and time step, with
block-diagonal noise covariance. The Fisher information is
``sum_t,k H_tk^T R_tk^-1 H_tk`` where ``H_tk = dh/db`` at the true bias and the
noise-free bearings. ``dh/db`` is taken by central differences.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .bias_model import BiasVector, h_arrays, h_of_b
from .errors import NoDataError, UnobservableBiasError
from .geometry import bearing_arrays, pair_covariance_arrays
from .pairing import PairingPlan, plan_pairing

logger = logging.getLogger(__name__)

FD_STEP = 1e-6
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class FisherInfo:
    matrix: np.ndarray
    sensor_ids: tuple[int, ...]
    n_blocks: int = 0

    def __add__(self, other: "FisherInfo") -> "FisherInfo":
        if self.sensor_ids != other.sensor_ids:
            raise ValueError("Fisher matrices over different sensor sets")
        return FisherInfo(self.matrix + other.matrix, self.sensor_ids, self.n_blocks + other.n_blocks)


@dataclass(frozen=True)
class CrlbResult:
    covariance_bound: np.ndarray
    sqrt_diagonal: np.ndarray
    sensor_ids: tuple[int, ...]

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.sensor_ids, self.sqrt_diagonal.tolist()))


def _bias_values(b, sensor_ids):
    if b is None:
        return np.zeros(len(sensor_ids))
    if isinstance(b, BiasVector):
        return np.array([b[s] for s in sensor_ids])
    if isinstance(b, Mapping):
        return np.array([float(b[s]) for s in sensor_ids])
    return np.asarray(b, dtype=float)


def jacobian_h_wrt_b(
    plan: PairingPlan,
    bearings: Mapping[int, float],
    b,
    sensors: Mapping[int, object],
    sensor_ids: Optional[Sequence[int]] = None,
    step: float = FD_STEP,
    central: bool = True,
) -> np.ndarray:
    """Derivative of the bias model for one target/time, shape (2, S).

    Only the plan's first pair difference is used. Columns of sensors outside
    the plan are zero.
    """
    ids = tuple(sensor_ids) if sensor_ids is not None else tuple(sensors)
    b0 = dict(zip(ids, _bias_values(b, ids)))
    single = PairingPlan(plan.mode, plan.differences[0]) if len(plan.pairs) > 2 else plan
    H = np.zeros((2, len(ids)))
    base = None if central else h_of_b(single, bearings, b0, sensors)
    for col, s in enumerate(ids):
        up = dict(b0)
        up[s] += step
        if central:
            down = dict(b0)
            down[s] -= step
            H[:, col] = (h_of_b(single, bearings, up, sensors) - h_of_b(single, bearings, down, sensors)) / (2 * step)
        else:
            H[:, col] = (h_of_b(single, bearings, up, sensors) - base) / step
    return H


def _stack_blocks(sensors, truth_xy, plan, sensor_ids, variances):
    """Slot geometry for every (target, step, difference) block at the true positions."""
    index = {s: n for n, s in enumerate(sensor_ids)}
    pos, theta, slot_idx, R = [], [], [], []
    px, py = truth_xy[..., 0].ravel(), truth_xy[..., 1].ravel()
    for (i, j), (m, n) in plan.differences:
        slots = (i, j, m, n)
        sp = np.array([sensors[s].position for s in slots])
        th = np.stack([bearing_arrays(sp[q, 0], sp[q, 1], px, py) for q in range(4)], axis=-1)
        var = [variances[s] for s in slots]
        c1 = pair_covariance_arrays(sp[0, 0], sp[0, 1], sp[1, 0], sp[1, 1], px, py, var[0], var[1])
        c2 = pair_covariance_arrays(sp[2, 0], sp[2, 1], sp[3, 0], sp[3, 1], px, py, var[2], var[3])
        pos.append(np.broadcast_to(sp, (len(px), 4, 2)))
        theta.append(th)
        slot_idx.append(np.broadcast_to([index[s] for s in slots], (len(px), 4)))
        R.append(c1 + c2)
    return np.concatenate(pos), np.concatenate(theta), np.concatenate(slot_idx), np.concatenate(R)


def block_jacobians(pos, theta, slot_idx, b_vals, step=FD_STEP):
    """Central-difference ``dh/db`` for stacked blocks, shape (M, 2, S), plus validity."""
    S = len(b_vals)
    M = len(theta)
    H = np.zeros((M, 2, S))
    valid = np.ones(M, dtype=bool)
    for col in range(S):
        e = np.zeros(S)
        e[col] = step
        hp, okp = h_arrays(pos, theta, (b_vals + e)[slot_idx])
        hm, okm = h_arrays(pos, theta, (b_vals - e)[slot_idx])
        H[:, :, col] = (hp - hm) / (2 * step)
        valid &= okp & okm
    return H, valid


def fim(
    sensors: Mapping[int, object],
    truth: np.ndarray,
    b_true=None,
    plan: Optional[PairingPlan] = None,
    variances: Optional[Mapping[int, float]] = None,
) -> FisherInfo:
    """Fisher information of the bias vector for a scenario.

    Args:
        sensors: id -> SensorConfig, in bias-vector order.
        truth: target states, shape (N, K, 4) as ``[x, vx, y, vy]``; a (N, K, 2)
            position array is also accepted.
        b_true: true bias (BiasVector, mapping or array); defaults to each
            sensor's ``true_bias``.
        plan: pairing plan; defaults to :func:`plan_pairing` over ``sensors``.
        variances: bearing variance per sensor; defaults to ``sigma_theta**2``.
    """
    ids = tuple(sensors)
    if plan is None:
        plan = plan_pairing(ids)
    if b_true is None:
        b_true = {s: sensors[s].true_bias for s in ids}
    b_vals = _bias_values(b_true, ids)
    if variances is None:
        variances = {s: sensors[s].sigma_theta ** 2 for s in ids}
    truth = np.asarray(truth, dtype=float)
    if truth.size == 0:
        raise NoDataError("no target states to evaluate the Fisher information on")
    xy = truth[..., [0, 2]] if truth.shape[-1] == 4 else truth[..., :2]

    pos, theta, slot_idx, R = _stack_blocks(sensors, xy, plan, ids, variances)
    H, valid = block_jacobians(pos, theta, slot_idx, b_vals)
    det = R[:, 0, 0] * R[:, 1, 1] - R[:, 0, 1] ** 2
    valid &= np.isfinite(det) & (det > 0) & np.all(np.isfinite(H), axis=(1, 2))
    if not np.all(valid):
        logger.debug("fim: skipped %d degenerate blocks", int((~valid).sum()))
    if not np.any(valid):
        raise NoDataError("no valid (target, time) blocks for the Fisher information")
    H, R = H[valid], R[valid]
    blocks = np.einsum("mis,mij,mjt->mst", H, np.linalg.inv(R), H)
    J = blocks.sum(axis=0)
    return FisherInfo(0.5 * (J + J.T), ids, int(valid.sum()))


def crlb(fi: FisherInfo) -> CrlbResult:
    """Invert the Fisher information.

    Raises:
        UnobservableBiasError: the information is singular or its condition
            number exceeds ``MAX_CONDITION``; ``null_direction`` holds the
            least-informed bias direction.
    """
    J = np.asarray(fi.matrix, dtype=float)
    w, V = np.linalg.eigh(J)
    if w[-1] <= 0 or w[0] <= w[-1] / MAX_CONDITION:
        direction = V[:, 0]
        raise UnobservableBiasError(
            "Fisher information is singular; unobservable bias direction "
            + ", ".join(f"{s}:{v:+.3f}" for s, v in zip(fi.sensor_ids, direction)),
            null_direction=direction,
        )
    cov = (V / w) @ V.T
    cov = 0.5 * (cov + cov.T)
    return CrlbResult(cov, np.sqrt(np.diag(cov)), fi.sensor_ids)
