"""Bias pseudo-measurements and maximum-likelihood bias estimation.

For every target and time step, two sensor pairs triangulate the same target.
Their difference ``z_b`` is (up to noise) a function of the sensor offsets
only. The estimator maximises the Gaussian likelihood of all ``z_b`` with a
bounded genetic algorithm.

The model prediction for a candidate bias vector ``b`` is evaluated at the
de-biased measured bearings ``z - b``, so the residual
``z_b - h(b)`` equals the disagreement of the two pair triangulations after
correcting the bearings by ``b``. It vanishes exactly at the true bias on
noiseless data.
"""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.stats import chi2

from .bias_model import BiasVector, h_arrays
from .errors import DegenerateGeometryError, InvalidCovarianceError, NoDataError
from .ga import GAResult, GASettings, run_ga
from .geometry import pair_jacobian, transform_covariance, triangulate
from .pairing import PairingPlan, plan_pairing
from .reports import BearingReport, group_by_time_target

__all__ = [
    "PairingPlan",
    "plan_pairing",
    "PseudoMeasurement",
    "build_pseudo_measurements",
    "neg_log_likelihood",
    "estimate_bias_batch",
    "estimate_bias_windowed",
    "estimate_bias_gated",
    "BiasEstimate",
]

logger = logging.getLogger(__name__)

_LOG_2PI = math.log(2.0 * math.pi)
_FD_STEP = 1e-6


@dataclass(frozen=True)
class PseudoMeasurement:
    time: int
    target: int
    z_b: np.ndarray
    R_w: np.ndarray
    slots: tuple[int, int, int, int]  # sensor ids (i, j, m, n); odd plans repeat the shared sensor
    bearings: tuple[float, float, float, float]  # measured bearings in slot order


def _pair_point_and_cov(si, sj, ri: BearingReport, rj: BearingReport):
    p = triangulate(si, sj, ri.bearing, rj.bearing)
    var_i = ri.variance if ri.variance is not None else si.sigma_theta**2
    var_j = rj.variance if rj.variance is not None else sj.sigma_theta**2
    cov = transform_covariance(pair_jacobian(si, sj, p), np.diag([var_i, var_j]))
    return np.array(p), cov


def build_pseudo_measurements(
    reports: Iterable[BearingReport],
    plan: PairingPlan,
    sensors: Mapping[int, object],
) -> list[PseudoMeasurement]:
    """Difference the pair triangulations of every (time, target) group.

    Groups missing a planned sensor or with degenerate geometry are skipped
    and logged at DEBUG level.
    """
    out = []
    skipped = 0
    for (k, target), by_sensor in group_by_time_target(reports).items():
        for (i, j), (m, n) in plan.differences:
            if not all(s in by_sensor for s in (i, j, m, n)):
                skipped += 1
                logger.debug("k=%d target=%s: missing report for pairs (%d,%d)/(%d,%d)", k, target, i, j, m, n)
                continue
            try:
                p1, c1 = _pair_point_and_cov(sensors[i], sensors[j], by_sensor[i], by_sensor[j])
                p2, c2 = _pair_point_and_cov(sensors[m], sensors[n], by_sensor[m], by_sensor[n])
            except DegenerateGeometryError as exc:
                skipped += 1
                logger.debug("k=%d target=%s: %s", k, target, exc)
                continue
            out.append(
                PseudoMeasurement(
                    time=k,
                    target=target,
                    z_b=p1 - p2,
                    R_w=c1 + c2,
                    slots=(i, j, m, n),
                    bearings=tuple(by_sensor[s].bearing for s in (i, j, m, n)),
                )
            )
    if skipped:
        logger.debug("skipped %d pseudo-measurement groups", skipped)
    return out


class PseudoBatch:
    """Stacked pseudo-measurements for vectorised likelihood evaluation."""

    def __init__(self, Z_b: Sequence[PseudoMeasurement], sensors: Mapping[int, object], sensor_ids: Sequence[int]):
        if len(Z_b) == 0:
            raise NoDataError("no pseudo-measurements to estimate from")
        self.sensor_ids = tuple(sensor_ids)
        index = {s: n for n, s in enumerate(self.sensor_ids)}
        self.pos = np.array([[sensors[s].position for s in zm.slots] for zm in Z_b])
        self.z = np.array([zm.bearings for zm in Z_b])
        self.slot_index = np.array([[index[s] for s in zm.slots] for zm in Z_b])
        self.z_b = np.array([zm.z_b for zm in Z_b])
        R = np.array([zm.R_w for zm in Z_b])
        eig = np.linalg.eigvalsh(0.5 * (R + np.swapaxes(R, -1, -2)))
        if not np.all(np.isfinite(R)) or np.any(eig[:, 0] <= 0) or not np.allclose(R, np.swapaxes(R, -1, -2)):
            raise InvalidCovarianceError("pseudo-measurement covariance is not symmetric positive definite")
        self.R_inv = np.linalg.inv(R)
        self.logdet = np.log(eig).sum(axis=1)
        self.times = np.array([zm.time for zm in Z_b])

    def __len__(self):
        return len(self.z_b)

    def residuals(self, B: np.ndarray) -> np.ndarray:
        """(P, M, 2) residuals ``z_b - h(b)`` for a (P, S) population of bias vectors."""
        B = np.atleast_2d(B)
        slot_bias = B[:, self.slot_index]  # (P, M, 4)
        theta = self.z[None] - slot_bias
        h, valid = h_arrays(self.pos[None], theta, slot_bias)
        r = self.z_b[None] - h
        return np.where(valid[..., None], r, np.nan)

    def quadratic_terms(self, B) -> np.ndarray:
        r = self.residuals(B)
        return 0.5 * np.einsum("pmi,mij,pmj->pm", r, self.R_inv, r)

    def nll_population(self, B) -> np.ndarray:
        terms = self.quadratic_terms(B) + 0.5 * self.logdet + _LOG_2PI
        # sorting first makes the sum independent of measurement order
        return np.sort(terms, axis=1).sum(axis=1)

    def gauss_newton_information(self, b) -> np.ndarray:
        """``sum G^T R_w^-1 G`` with ``G = d(residual)/db`` by central differences."""
        b = np.asarray(b, dtype=float)
        S = len(b)
        steps = np.eye(S) * _FD_STEP
        plus = self.residuals(b[None] + steps)
        minus = self.residuals(b[None] - steps)
        G = np.transpose((plus - minus) / (2 * _FD_STEP), (1, 2, 0))  # (M, 2, S)
        G = np.nan_to_num(G)
        return np.einsum("mis,mij,mjt->st", G, self.R_inv, G)


def _as_bias_array(b, sensor_ids) -> np.ndarray:
    if isinstance(b, BiasVector):
        return np.array([b[s] for s in sensor_ids])
    if isinstance(b, Mapping):
        return np.array([float(b[s]) for s in sensor_ids])
    return np.asarray(b, dtype=float)


def _ids_from(Z_b, sensors) -> tuple[int, ...]:
    used = {s for zm in Z_b for s in zm.slots}
    return tuple(s for s in sensors if s in used)


def neg_log_likelihood(Z_b: Sequence[PseudoMeasurement], b, sensors: Mapping[int, object]) -> float:
    """Gaussian negative log-likelihood of the pseudo-measurements under bias ``b``.

    ``b`` may be a BiasVector, a mapping sensor id -> offset, or an array in the
    order of the sensors used by ``Z_b`` (as listed in ``sensors``).
    """
    ids = _ids_from(Z_b, sensors)
    batch = PseudoBatch(Z_b, sensors, ids)
    return float(batch.nll_population(_as_bias_array(b, ids)[None])[0])


@dataclass
class BiasEstimate:
    bias: BiasVector
    nll: float
    history: list[float]
    ga: GAResult
    information: Optional[np.ndarray] = None
    window_index: int = 0
    times: tuple[int, int] = (0, 0)
    # mask of the pseudo-measurements used, when some were gated out
    kept: Optional[np.ndarray] = None

    def __iter__(self):
        # allows ``bias, history = estimate_bias_batch(...)``
        return iter((self.bias, self.history))


def _polish(batch: PseudoBatch, x0, lo, hi, prior) -> np.ndarray:
    def quad(x):
        q = float(np.sort(batch.quadratic_terms(x[None])[0]).sum())
        if not math.isfinite(q):
            return 1e300
        if prior is not None:
            d = x - prior[0]
            q += 0.5 * float(d @ prior[1] @ d)
        return q

    res = minimize(quad, x0, method="L-BFGS-B", bounds=[(lo, hi)] * len(x0), options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 200})
    return res.x if res.fun <= quad(x0) else x0


def _estimate(batch: PseudoBatch, settings: GASettings, rng, initial_population=None, prior=None) -> BiasEstimate:
    def objective(P):
        f = batch.nll_population(P)
        if prior is not None:
            d = P - prior[0]
            f = f + 0.5 * np.einsum("ps,st,pt->p", d, prior[1], d)
        return f

    result = run_ga(objective, len(batch.sensor_ids), settings, rng, initial_population)
    best = result.best
    if settings.polish:
        best = _polish(batch, best, settings.lower_bound, settings.upper_bound, prior)
    best = np.clip(best, settings.lower_bound, settings.upper_bound)
    bias = BiasVector(tuple(best), batch.sensor_ids, settings.lower_bound, settings.upper_bound)
    return BiasEstimate(
        bias=bias,
        nll=float(objective(best[None])[0]),
        history=result.history,
        ga=result,
        times=(int(batch.times.min()), int(batch.times.max())),
    )


def estimate_bias_batch(
    Z_b: Sequence[PseudoMeasurement],
    sensors: Mapping[int, object],
    settings: GASettings = GASettings(),
    *,
    sensor_ids: Optional[Sequence[int]] = None,
    initial_population=None,
) -> BiasEstimate:
    """Maximum-likelihood bias vector over a whole batch of pseudo-measurements.

    Deterministic for a fixed ``settings.seed``. Raises NoDataError when
    ``Z_b`` is empty.
    """
    if len(Z_b) == 0:
        raise NoDataError("no pseudo-measurements to estimate from")
    ids = tuple(sensor_ids) if sensor_ids is not None else _ids_from(Z_b, sensors)
    batch = PseudoBatch(Z_b, sensors, ids)
    rng = np.random.default_rng(settings.seed)
    return _estimate(batch, settings, rng, initial_population)


def estimate_bias_gated(
    Z_b: Sequence[PseudoMeasurement],
    sensors: Mapping[int, object],
    settings: GASettings = GASettings(),
    *,
    sensor_ids: Optional[Sequence[int]] = None,
    gate_prob: float = 0.99,
    max_rounds: int = 10,
) -> BiasEstimate:
    """Batch estimate that discards pseudo-measurements inconsistent with it.

    After each estimate, pseudo-measurements whose normalised residual
    exceeds the ``gate_prob`` chi-square quantile are dropped and the
    estimate is repeated, warm-started from the last population, until the
    kept set stops changing. Meant for data with association errors, where a
    few wild pseudo-measurements would otherwise dominate the likelihood.
    """
    if len(Z_b) == 0:
        raise NoDataError("no pseudo-measurements to estimate from")
    ids = tuple(sensor_ids) if sensor_ids is not None else _ids_from(Z_b, sensors)
    full = PseudoBatch(Z_b, sensors, ids)
    gate = float(chi2.ppf(gate_prob, 2))
    rng = np.random.default_rng(settings.seed)
    keep = np.ones(len(Z_b), dtype=bool)
    population = None
    for _ in range(max_rounds):
        batch = PseudoBatch([z for z, k in zip(Z_b, keep) if k], sensors, ids)
        est = _estimate(batch, settings, rng, population)
        population = est.ga.population
        d2 = 2.0 * full.quadratic_terms(est.bias.as_array()[None])[0]
        new_keep = np.isfinite(d2) & (d2 < gate)
        if not new_keep.any():
            raise NoDataError("no pseudo-measurement is consistent with the bias estimate")
        if np.array_equal(new_keep, keep):
            break
        keep = new_keep
    est.kept = keep
    logger.debug("gated estimate kept %d of %d pseudo-measurements", int(keep.sum()), len(keep))
    return est


def estimate_bias_windowed(
    stream: Iterable[PseudoMeasurement],
    sensors: Mapping[int, object],
    settings: GASettings = GASettings.realtime(),
    *,
    sensor_ids: Optional[Sequence[int]] = None,
    warm_start: bool = True,
    carry_information: bool = True,
) -> list[BiasEstimate]:
    """Re-estimate the biases on consecutive windows of ``settings.window_size`` steps.

    Each window's GA starts from the previous window's final population when
    ``warm_start`` is set. With ``carry_information`` the earlier windows enter
    as a Gaussian prior centred on the previous estimate, weighted by their
    accumulated Gauss-Newton information, so later windows refine rather than
    restart. Trailing incomplete windows produce no estimate.
    """
    if settings.window_size is None:
        raise ValueError("windowed estimation needs settings.window_size")
    stream = list(stream)
    if not stream:
        raise NoDataError("empty pseudo-measurement stream")
    ids = tuple(sensor_ids) if sensor_ids is not None else _ids_from(stream, sensors)
    w = settings.window_size
    k0 = min(zm.time for zm in stream)
    k_last = max(zm.time for zm in stream)
    by_window: dict[int, list[PseudoMeasurement]] = defaultdict(list)
    for zm in stream:
        by_window[(zm.time - k0) // w].append(zm)
    n_complete = (k_last - k0 + 1) // w

    rng = np.random.default_rng(settings.seed)
    results: list[BiasEstimate] = []
    population = None
    info = np.zeros((len(ids), len(ids)))
    for n in range(n_complete):
        chunk = by_window.get(n, [])
        if not chunk:
            logger.debug("window %d has no pseudo-measurements", n)
            continue
        batch = PseudoBatch(chunk, sensors, ids)
        prior = (results[-1].bias.as_array(), info.copy()) if (carry_information and results) else None
        est = _estimate(batch, settings, rng, population if warm_start else None, prior)
        info = info + batch.gauss_newton_information(est.bias.as_array())
        est.information = info.copy()
        est.window_index = n
        est.times = (k0 + n * w, k0 + (n + 1) * w - 1)
        results.append(est)
        population = est.ga.population
    return results


def realtime_settings(**overrides) -> GASettings:
    return GASettings.realtime(**overrides)


def with_seed(settings: GASettings, seed: int) -> GASettings:
    return replace(settings, seed=seed)
