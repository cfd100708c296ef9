"""Nearly-constant-velocity Kalman tracking of triangulated bearing pairs.

State order is ``[x, vx, y, vy]``. Each time step, every planned sensor pair is
triangulated, its covariance mapped to Cartesian coordinates, and the pair
positions are applied as sequential Kalman updates.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .bias_model import BiasVector
from .crlb import CrlbResult
from .errors import DegenerateGeometryError, InvalidArgumentError, NumericalFailureError
from .geometry import pair_jacobian, transform_covariance, triangulate, wrap_angle
from .pairing import PairingPlan
from .reports import BearingReport, group_by_time_target

logger = logging.getLogger(__name__)

H_POS = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
DEFAULT_CRLB_SCALE = 10.0


@dataclass(frozen=True)
class MotionModel:
    T: float = 1.0
    q_x: float = 0.1
    q_y: float = 0.1
    # only the white-noise-acceleration model is implemented; "cwpa" is reserved
    kind: str = "ncv"

    def __post_init__(self):
        if not self.T > 0:
            raise InvalidArgumentError("sampling time T must be > 0")
        if self.q_x < 0 or self.q_y < 0:
            raise InvalidArgumentError("process noise intensities must be >= 0")
        if self.kind != "ncv":
            raise NotImplementedError(f"motion model {self.kind!r} is not implemented")


@dataclass(frozen=True)
class TrackState:
    mean: np.ndarray
    covariance: np.ndarray


@dataclass
class TrackHistory:
    target: int
    steps: list[int] = field(default_factory=list)
    states: list[TrackState] = field(default_factory=list)

    def positions(self) -> np.ndarray:
        return np.array([[s.mean[0], s.mean[2]] for s in self.states]).reshape(-1, 2)


def transition_matrices(m: MotionModel) -> tuple[np.ndarray, np.ndarray]:
    T = m.T
    f = np.array([[1.0, T], [0.0, 1.0]])
    q = np.array([[T**3 / 3.0, T**2 / 2.0], [T**2 / 2.0, T]])
    F = np.zeros((4, 4))
    Q = np.zeros((4, 4))
    F[:2, :2] = F[2:, 2:] = f
    Q[:2, :2] = q * m.q_x
    Q[2:, 2:] = q * m.q_y
    return F, Q


def kf_predict(s: TrackState, m: MotionModel) -> TrackState:
    F, Q = transition_matrices(m)
    P = F @ s.covariance @ F.T + Q
    return TrackState(F @ s.mean, 0.5 * (P + P.T))


def kf_update(s: TrackState, z, R, joseph: bool = False) -> TrackState:
    """Linear update with a Cartesian position measurement ``z`` of covariance ``R``."""
    z = np.asarray(z, dtype=float)
    R = np.asarray(R, dtype=float)
    P = s.covariance
    S = H_POS @ P @ H_POS.T + R
    try:
        L = np.linalg.cholesky(0.5 * (S + S.T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailureError("innovation covariance is not positive definite") from exc
    # K = P H^T S^-1 via the Cholesky factor
    PHt = P @ H_POS.T
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    mean = s.mean + K @ (z - H_POS @ s.mean)
    if joseph:
        A = np.eye(4) - K @ H_POS
        P_new = A @ P @ A.T + K @ R @ K.T
    else:
        P_new = P - K @ S @ K.T
    return TrackState(mean, 0.5 * (P_new + P_new.T))


def correct_bearings(
    reports: Iterable[BearingReport],
    b_hat,
    crlb: Optional[CrlbResult] = None,
    scale: float = DEFAULT_CRLB_SCALE,
    sensors: Optional[Mapping[int, object]] = None,
) -> list[BearingReport]:
    """Subtract estimated offsets and inflate bearing variances by ``scale * CRLB``.

    ``sensors`` supplies the nominal sigma_theta for reports that carry no
    variance of their own; without it such reports keep ``variance=None``
    unless an inflation applies, in which case ``sensors`` is required.
    """
    if scale < 0:
        raise InvalidArgumentError("CRLB scale must be >= 0")
    offsets = b_hat.as_dict() if isinstance(b_hat, BiasVector) else dict(b_hat)
    extra = crlb.covariance_bound.diagonal() if crlb is not None else None
    extra_by_id = dict(zip(crlb.sensor_ids, extra)) if crlb is not None else {}
    out = []
    for r in reports:
        bearing = wrap_angle(r.bearing - offsets.get(r.sensor, 0.0))
        inflate = scale * extra_by_id.get(r.sensor, 0.0)
        variance = r.variance
        if inflate > 0:
            if variance is None:
                if sensors is None:
                    raise InvalidArgumentError("sensors are needed to inflate a nominal variance")
                variance = sensors[r.sensor].sigma_theta ** 2
            variance = variance + inflate
        out.append(replace(r, bearing=bearing, variance=variance))
    return out


def _pair_measurements(by_sensor, plan: PairingPlan, sensors, at=None):
    """Triangulated pair fixes with covariances linearised at ``at`` (default: the fix)."""
    meas = []
    for i, j in plan.pairs:
        if i not in by_sensor or j not in by_sensor:
            continue
        ri, rj = by_sensor[i], by_sensor[j]
        si, sj = sensors[i], sensors[j]
        try:
            p = triangulate(si, sj, ri.bearing, rj.bearing)
            vi = ri.variance if ri.variance is not None else si.sigma_theta**2
            vj = rj.variance if rj.variance is not None else sj.sigma_theta**2
            R = transform_covariance(pair_jacobian(si, sj, p if at is None else at), np.diag([vi, vj]))
        except DegenerateGeometryError:
            continue
        meas.append((np.array(p), R))
    return meas


def fuse_measurements(meas):
    """Information-weighted combination of independent position measurements."""
    info = sum(np.linalg.inv(R) for _, R in meas)
    cov = np.linalg.inv(info)
    z = cov @ sum(np.linalg.solve(R, p) for p, R in meas)
    return z, 0.5 * (cov + cov.T)


def two_point_init(z0, R0, z1, R1, T: float) -> TrackState:
    """Position from the second fix, velocity by differencing the two."""
    mean = np.array([z1[0], (z1[0] - z0[0]) / T, z1[1], (z1[1] - z0[1]) / T])
    P = np.zeros((4, 4))
    pos, vel = [0, 2], [1, 3]
    P[np.ix_(pos, pos)] = R1
    P[np.ix_(pos, vel)] = R1 / T
    P[np.ix_(vel, pos)] = R1 / T
    P[np.ix_(vel, vel)] = (R0 + R1) / T**2
    return TrackState(mean, P)


def run_tracker(
    reports: Iterable[BearingReport],
    plan: PairingPlan,
    sensors: Mapping[int, object],
    m: MotionModel,
) -> dict[int, TrackHistory]:
    """Track every labelled target; returns ``{target: TrackHistory}``.

    The first two steps with at least one valid pair triangulation initialise
    the track; the history starts at the second of them. Steps without valid
    triangulations get a prediction only.
    """
    groups = group_by_time_target(reports)
    by_target: dict[int, dict[int, dict]] = {}
    for (k, t), by_sensor in groups.items():
        by_target.setdefault(t, {})[k] = by_sensor

    tracks = {}
    for t, steps in by_target.items():
        hist = TrackHistory(t)
        state = None
        first = None
        k_prev = None
        for k in range(min(steps), max(steps) + 1):
            if state is None:
                meas = _pair_measurements(steps.get(k, {}), plan, sensors)
                if not meas:
                    continue
                z, R = fuse_measurements(meas)
                if first is None:
                    first = (k, z, R)
                    continue
                state = two_point_init(first[1], first[2], z, R, m.T * (k - first[0]))
            else:
                for _ in range(k - k_prev):
                    state = kf_predict(state, m)
                # covariances at the predicted position keep the weights independent of the noise
                meas = _pair_measurements(steps.get(k, {}), plan, sensors, at=H_POS @ state.mean)
                for z, R in meas:
                    state = kf_update(state, z, R)
            k_prev = k
            hist.steps.append(k)
            hist.states.append(state)
        tracks[t] = hist
    return tracks


def position_errors(tracks: Mapping[int, TrackHistory], truth: np.ndarray, k0: int = 0) -> np.ndarray:
    """Euclidean position error per (target, step); NaN where a track has no state.

    ``truth`` is (N, K, 4) with target ``t`` at row ``t`` and step ``k`` at
    column ``k - k0``.
    """
    truth = np.asarray(truth)
    err = np.full(truth.shape[:2], np.nan)
    for t, hist in tracks.items():
        for k, s in zip(hist.steps, hist.states):
            tx, ty = truth[t, k - k0, 0], truth[t, k - k0, 2]
            err[t, k - k0] = np.hypot(s.mean[0] - tx, s.mean[2] - ty)
    return err


def position_rmse(errors) -> np.ndarray:
    """Per-step RMSE across runs.

    Args:
        errors: array (runs, K) of position errors, or a sequence of (x, y)
            error arrays of shape (runs, K, 2).
    """
    e = np.asarray(errors, dtype=float)
    if e.ndim == 3:
        if e.shape[-1] != 2:
            raise InvalidArgumentError("error vectors must have two components")
        e = np.hypot(e[..., 0], e[..., 1])
    if e.ndim == 1:
        e = e[None]
    if e.ndim != 2:
        raise InvalidArgumentError("errors must be (runs, K) or (runs, K, 2)")
    with warnings.catch_warnings():
        # steps before track initialisation are all-NaN
        warnings.simplefilter("ignore", RuntimeWarning)
        return np.sqrt(np.nanmean(e**2, axis=0))


def rmse_from_tracks(estimates: Sequence[np.ndarray], truths: Sequence[np.ndarray]) -> np.ndarray:
    """RMSE curve from aligned per-run (K, 2) position estimates and truths."""
    if len(estimates) != len(truths):
        raise InvalidArgumentError("number of runs differs between estimates and truth")
    diffs = []
    for est, tru in zip(estimates, truths):
        est, tru = np.asarray(est, float), np.asarray(tru, float)
        if est.shape != tru.shape:
            raise InvalidArgumentError(f"mismatched lengths {est.shape} vs {tru.shape}")
        diffs.append(est - tru)
    return position_rmse(np.array(diffs))
