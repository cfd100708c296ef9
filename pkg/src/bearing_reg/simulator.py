"""Scenario simulation and Monte Carlo batteries.

Distributed mode hands labelled bearing reports (AMRs) straight to the
registration stage. Centralized mode first thins the reports with a detection
probability, adds Poisson clutter, strips the labels, and re-associates the
detections with :func:`prune_and_associate`.
"""

from __future__ import annotations

import logging
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix
from scipy.stats import chi2

from .bias_model import BiasVector
from .crlb import CrlbResult, crlb, fim
from .errors import BearingRegError, InvalidArgumentError, UnobservableBiasError
from .ga import GASettings
from .geometry import SensorConfig, bearing_arrays, pair_covariance_arrays, triangulate_arrays, wrap_angle
from .pairing import PairingPlan, plan_pairing
from .registration import (
    BiasEstimate,
    build_pseudo_measurements,
    estimate_bias_batch,
    estimate_bias_gated,
    estimate_bias_windowed,
)
from .reports import BearingReport
from .tracker import (
    DEFAULT_CRLB_SCALE,
    H_POS,
    MotionModel,
    TrackState,
    correct_bearings,
    kf_predict,
    kf_update,
    position_errors,
    run_tracker,
    transition_matrices,
)

logger = logging.getLogger(__name__)

B_TEST1 = (0.04, -0.02, 0.03, -0.02)
B_TEST2 = (-0.04, -0.02, -0.03, -0.02)
B_TEST3 = (0.04, 0.02, 0.03, 0.02)
SIGMA_THETA = 0.0261
TRUTH_Q = 0.001
TRACKER_Q = 0.1


@dataclass(frozen=True)
class ClutterModel:
    lam: float = 0.5
    volume: float = 2.0 * math.pi
    p_d: float = 0.7

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidArgumentError("clutter density must be >= 0")
        if not 0 < self.p_d <= 1:
            raise InvalidArgumentError("detection probability must be in (0, 1]")
        if self.volume <= 0:
            raise InvalidArgumentError("surveillance volume must be > 0")

    @property
    def mean_false_alarms(self) -> float:
        return self.lam * self.volume


@dataclass(frozen=True)
class ScenarioConfig:
    sensors: tuple[SensorConfig, ...]
    targets: tuple[tuple[float, float, float, float], ...]  # initial [x, vx, y, vy]
    K: int = 100
    T: float = 1.0
    truth_q: float = TRUTH_Q
    tracker_q: float = TRACKER_Q
    mode: Literal["distributed", "centralized"] = "distributed"
    clutter: ClutterModel = field(default_factory=ClutterModel)
    persistence: int = 3
    noise: bool = True
    crlb_scale: float = DEFAULT_CRLB_SCALE
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "targets", tuple(tuple(float(v) for v in t) for t in self.targets))
        if self.K < 1:
            raise InvalidArgumentError("K must be >= 1")
        if self.T <= 0:
            raise InvalidArgumentError("T must be > 0")
        if self.truth_q < 0 or self.tracker_q < 0:
            raise InvalidArgumentError("process noise must be >= 0")
        if self.mode not in ("distributed", "centralized"):
            raise InvalidArgumentError(f"unknown mode {self.mode!r}")
        ids = [s.id for s in self.sensors]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError("sensor ids must be unique")
        if any(len(t) != 4 for t in self.targets):
            raise InvalidArgumentError("targets need [x, vx, y, vy]")
        if self.persistence < 1:
            raise InvalidArgumentError("persistence must be >= 1")

    @property
    def sensor_map(self) -> dict[int, SensorConfig]:
        return {s.id: s for s in self.sensors}

    @property
    def true_bias(self) -> BiasVector:
        return BiasVector(
            tuple(s.true_bias for s in self.sensors),
            tuple(s.id for s in self.sensors),
            lower_bound=-math.inf,
            upper_bound=math.inf,
        )

    @property
    def plan(self) -> PairingPlan:
        return plan_pairing([s.id for s in self.sensors])


SQUARE_CORNERS = ((0.0, 0.0), (10_000.0, 0.0), (10_000.0, 10_000.0), (0.0, 10_000.0))


def canonical_targets(n: int = 16) -> tuple[tuple[float, float, float, float], ...]:
    """Targets on a 4x4 grid spanning 1.5-8.5 km of the 10 km square.

    Speeds run from 5 to 15 m/s with headings within 60 degrees of the
    direction to the square's centre, so no target reaches a sensor baseline
    within a few hundred steps. The first four are edge points forming a
    pinwheel (each maps to the next under a quarter turn about the centre):
    every sensor pair sees one of them at close range, which makes the offset
    biases visible in the tracks while keeping registration well conditioned.
    """
    g = np.linspace(1500.0, 8500.0, 4)
    grid = [(float(x), float(y)) for y in g for x in g]
    order = [2, 11, 13, 4, 0, 3, 12, 15, 1, 7, 14, 8, 5, 6, 9, 10]
    out = []
    for rank, idx in enumerate(order[:n]):
        x, y = grid[idx]
        speed = 5.0 + 10.0 * rank / 15.0
        inward = math.atan2(5000.0 - y, 5000.0 - x)
        heading = inward + math.radians(60.0) * math.sin(2.4 * rank + 0.5)
        out.append((x, speed * math.cos(heading), y, speed * math.sin(heading)))
    return tuple(out)


def canonical_scenario(
    bias: Sequence[float] = B_TEST1,
    n_sensors: int = 4,
    n_targets: int = 4,
    K: int = 100,
    sigma_theta: float = SIGMA_THETA,
    **overrides,
) -> ScenarioConfig:
    """Square-corner sensor layout with grid targets.

    Three-sensor scenarios drop the (10 km, 10 km) corner, so both pairs
    (1, 2) and (1, 3) run along the square's edges and no target crosses a
    pair baseline.
    """
    if n_sensors == 4:
        corners = SQUARE_CORNERS
    elif n_sensors == 3:
        corners = (SQUARE_CORNERS[0], SQUARE_CORNERS[1], SQUARE_CORNERS[3])
    elif n_sensors == 2:
        corners = SQUARE_CORNERS[:2]
    else:
        raise InvalidArgumentError("canonical scenarios have 2, 3 or 4 sensors")
    bias = tuple(bias)[:n_sensors]
    if len(bias) != n_sensors:
        raise InvalidArgumentError("need one bias per sensor")
    sensors = tuple(SensorConfig(n + 1, c, sigma_theta, b) for n, (c, b) in enumerate(zip(corners, bias)))
    return ScenarioConfig(sensors=sensors, targets=canonical_targets(n_targets), K=K, **overrides)


def generate_truth(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """NCV trajectories, shape (N, K, 4)."""
    F, Q = transition_matrices(MotionModel(cfg.T, cfg.truth_q, cfg.truth_q))
    N = len(cfg.targets)
    x = np.zeros((N, cfg.K, 4))
    x[:, 0] = np.array(cfg.targets)
    if cfg.truth_q > 0:
        L = np.linalg.cholesky(Q[:2, :2])
        noise = rng.standard_normal((N, cfg.K, 2, 2)) @ L.T  # (..., axis, [pos, vel])
        noise = noise.reshape(N, cfg.K, 4)
    else:
        noise = np.zeros((N, cfg.K, 4))
    for k in range(1, cfg.K):
        x[:, k] = x[:, k - 1] @ F.T + noise[:, k]
    return x


def true_bearings(truth: np.ndarray, sensors: Sequence[SensorConfig]) -> np.ndarray:
    """Noise-free bearings, shape (K, S, N)."""
    px = truth[..., 0].T  # (K, N)
    py = truth[..., 2].T
    return np.stack([bearing_arrays(s.x, s.y, px, py) for s in sensors], axis=1)


def generate_bearings(
    truth: np.ndarray,
    sensors: Sequence[SensorConfig],
    rng: np.random.Generator,
    *,
    noise: bool = True,
    labelled: bool = True,
    run: int = 0,
) -> list[BearingReport]:
    """Biased, noisy bearing reports ordered by (k, sensor, target)."""
    theta = true_bearings(truth, sensors)
    K, S, N = theta.shape
    sigma = np.array([s.sigma_theta for s in sensors])[None, :, None]
    bias = np.array([s.true_bias for s in sensors])[None, :, None]
    w = rng.standard_normal((K, S, N)) * sigma if noise else 0.0
    z = wrap_angle(theta + bias + w)
    return [
        BearingReport(sensor=sensors[s].id, k=k, bearing=float(z[k, s, t]), target=t if labelled else None, run=run)
        for k in range(K)
        for s in range(S)
        for t in range(N)
    ]


def apply_detection_and_clutter(
    reports: Sequence[BearingReport],
    clutter: ClutterModel,
    rng: np.random.Generator,
    sensor_ids: Optional[Sequence[int]] = None,
    return_origin: bool = False,
):
    """Thin reports by ``p_d``, add Poisson(lam * V) uniform clutter per sensor scan, strip labels.

    Each (k, sensor) scan is returned sorted by bearing. With ``return_origin``
    the true target of every detection (None for clutter) comes back alongside.
    """
    scans: dict[tuple[int, int], list[tuple[float, Optional[int], int]]] = {}
    ks = sorted({r.k for r in reports})
    ids = list(sensor_ids) if sensor_ids is not None else sorted({r.sensor for r in reports})
    for k in ks:
        for s in ids:
            scans[(k, s)] = []
    run = reports[0].run if reports else 0
    keep = rng.uniform(size=len(reports)) < clutter.p_d
    for r, kept in zip(reports, keep):
        if kept:
            scans[(r.k, r.sensor)].append((r.bearing, r.target, r.run))
    for key in scans:
        m = rng.poisson(clutter.mean_false_alarms)
        for b in rng.uniform(-math.pi, math.pi, size=m):
            scans[key].append((float(wrap_angle(b)), None, run))
    out, origin = [], []
    for (k, s), items in sorted(scans.items()):
        for bearing, target, rr in sorted(items, key=lambda it: it[0]):
            out.append(BearingReport(sensor=s, k=k, bearing=bearing, target=None, run=rr))
            origin.append(target)
    return (out, origin) if return_origin else out


@dataclass
class _Candidate:
    k: int
    reports: tuple[BearingReport, ...]
    position: np.ndarray
    cov: np.ndarray
    score: float
    chain: int = -1


def _pack(picks: np.ndarray, sizes: Sequence[int], weight: np.ndarray, exact: bool = False):
    """Indices of the disjoint candidate set of largest total weight.

    Set packing: each detection joins at most one candidate. Solved exactly as
    a small integer program; a full set of true combinations then wins over
    sets that borrow a detection from a neighbouring target. With ``exact``
    every detection must be covered once (set partitioning); None is returned
    when no such partition exists.
    """
    C = len(picks)
    if C <= 1 and not exact:
        return np.arange(C)
    if C == 0:
        return None
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    rows = (picks + offsets[None]).ravel()
    cols = np.repeat(np.arange(C), picks.shape[1])
    A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(int(sum(sizes)), C))
    res = milp(
        -weight,
        constraints=LinearConstraint(A, 1.0 if exact else -np.inf, 1.0),
        integrality=np.ones(C),
        bounds=Bounds(0.0, 1.0),
    )
    if res.x is None and exact:
        return None
    if res.x is None:
        logger.debug("set packing failed (%s); falling back to greedy", res.message)
        used = [set() for _ in sizes]
        keep = []
        for c in np.argsort(-weight, kind="stable"):
            if all(int(p) not in u for p, u in zip(picks[c], used)):
                keep.append(c)
                for p, u in zip(picks[c], used):
                    u.add(int(p))
        return np.array(keep, dtype=int)
    return np.flatnonzero(res.x > 0.5)


def _step_candidates(
    dets_by_sensor, plan: PairingPlan, sensors, ids, gate, var_gate, region, exhaustive: bool = False
) -> list[_Candidate]:
    lists = [dets_by_sensor.get(s, []) for s in ids]
    if any(len(lst) == 0 for lst in lists):
        return []
    grids = np.meshgrid(*[np.arange(len(lst)) for lst in lists], indexing="ij")
    combo = np.stack([g.ravel() for g in grids], axis=1)  # (C, S)
    bearings = np.stack([np.array([r.bearing for r in lst])[combo[:, n]] for n, lst in enumerate(lists)], axis=1)
    col = {s: n for n, s in enumerate(ids)}
    ok = np.ones(len(combo), dtype=bool)
    gated = np.ones(len(combo), dtype=bool)
    score = np.zeros(len(combo))
    pts, covs = [], []
    for (i, j), (m, n) in plan.differences:
        pair_pts = []
        for a, b in ((i, j), (m, n)):
            sa, sb = sensors[a], sensors[b]
            ta, tb = bearings[:, col[a]], bearings[:, col[b]]
            x, y, valid = triangulate_arrays(sa.x, sa.y, sb.x, sb.y, ta, tb)
            # the intersection must lie ahead of both sensors, not behind
            for sc, th in ((sa, ta), (sb, tb)):
                valid &= (x - sc.x) * np.cos(th) + (y - sc.y) * np.sin(th) > 0
            if region is not None:
                x0, x1, y0, y1 = region
                with np.errstate(invalid="ignore"):
                    valid &= (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)
            c = pair_covariance_arrays(sa.x, sa.y, sb.x, sb.y, x, y, var_gate[a], var_gate[b])
            ok &= valid
            pair_pts.append((np.stack([x, y], axis=-1), c))
        (p1, c1), (p2, c2) = pair_pts
        zb = p1 - p2
        Rw = c1 + c2
        with np.errstate(invalid="ignore"):
            d2 = np.einsum("ci,cij,cj->c", zb, np.linalg.inv(np.nan_to_num(Rw) + 1e-9 * np.eye(2)), zb)
            gated &= d2 < gate
        ok &= np.isfinite(d2)
        score += np.where(np.isfinite(d2), d2, np.inf)
        pts += [p1, p2]
        covs += [c1, c2]
    sizes = [len(lst) for lst in lists]
    chosen = None
    if exhaustive and len(set(sizes)) == 1:
        # every detection is a target: partition them at least total cost, no gate
        idx = np.flatnonzero(ok)
        sel = _pack(combo[idx], sizes, -score[idx], exact=True)
        chosen = None if sel is None else idx[sel]
    if chosen is None:
        idx = np.flatnonzero(ok & gated)
        idx = idx[np.argsort(score[idx], kind="stable")]
        weight = len(plan.differences) * gate - score[idx]
        chosen = idx[_pack(combo[idx], sizes, weight)]
    out = []
    for c in chosen:
        picks = combo[c]
        infos = [np.linalg.inv(cv[c]) for cv in covs]
        cov = np.linalg.inv(sum(infos))
        position = cov @ sum(w @ p[c] for w, p in zip(infos, pts))
        reps = tuple(lists[n][int(picks[n])] for n in range(len(ids)))
        out.append(_Candidate(reps[0].k, reps, position, cov, float(score[c])))
    return out


def prune_and_associate(
    detections: Sequence[BearingReport],
    plan: PairingPlan,
    sensors: Mapping[int, SensorConfig],
    persistence: int = 3,
    *,
    gate_prob: float = 0.99,
    bias_bound: float = 0.05,
    max_speed: float = 20.0,
    max_gap: int = 10,
    T: float = 1.0,
    bias=None,
    bias_slack: float = 0.0,
    track_q: float = 0.1,
    region: Optional[tuple[float, float, float, float]] = None,
    exhaustive: bool = False,
) -> list[BearingReport]:
    """Recover provisionally labelled reports from unlabelled detection scans.

    Per step, every combination of one detection per planned sensor is
    triangulated pair by pair; combinations whose pair positions agree within
    the ``gate_prob`` chi-square gate (bearing variance widened by the bias
    prior ``bias_bound**2 / 3``) and lie ahead of every sensor are kept; the
    disjoint subset with the largest total gate margin is selected. Surviving
    candidates are chained across steps (gaps up to ``max_gap``, speed up to
    ``max_speed``); chains with fewer than ``persistence`` members are dropped.
    The chain index becomes the provisional target label.

    With ``exhaustive`` (no clutter, no missed detections) a step whose sensors
    all report the same number of bearings is partitioned completely at least
    total gate statistic, without the gate; other steps fall back to gating.
    """
    ids = plan.sensor_ids
    if region is None:
        xs = [sensors[s].x for s in ids]
        ys = [sensors[s].y for s in ids]
        region = (min(xs), max(xs), min(ys), max(ys))
    gate = float(chi2.ppf(gate_prob, 2))
    if bias is None:
        var_gate = {s: sensors[s].sigma_theta ** 2 + bias_bound**2 / 3.0 for s in ids}
        offsets = {s: 0.0 for s in ids}
    else:
        offsets = bias.as_dict() if isinstance(bias, BiasVector) else dict(bias)
        var_gate = {s: sensors[s].sigma_theta ** 2 + bias_slack**2 for s in ids}
    # gating runs on de-biased bearings; the emitted reports keep the raw ones
    by_k: dict[int, dict[int, list[BearingReport]]] = {}
    raw: dict[int, BearingReport] = {}
    for r in detections:
        if r.sensor in var_gate:
            shifted = replace(r, bearing=float(wrap_angle(r.bearing - offsets[r.sensor])))
            raw[id(shifted)] = r
            by_k.setdefault(r.k, {}).setdefault(r.sensor, []).append(shifted)

    model = MotionModel(T, track_q, track_q)
    chains: list[list[_Candidate]] = []
    states: list[TrackState] = []
    for k in sorted(by_k):
        cands = _step_candidates(by_k[k], plan, sensors, ids, gate, var_gate, region, exhaustive)
        live = [n for n, ch in enumerate(chains) if 0 < k - ch[-1].k <= max_gap]
        predicted = {}
        for n in live:
            st = states[n]
            for _ in range(k - chains[n][-1].k):
                st = kf_predict(st, model)
            predicted[n] = st
        pairs = []
        for ci, cand in enumerate(cands):
            for n in live:
                st = predicted[n]
                S = H_POS @ st.covariance @ H_POS.T + cand.cov
                d = cand.position - H_POS @ st.mean
                d2 = float(d @ np.linalg.solve(S, d))
                if d2 < gate:
                    pairs.append((d2, ci, n))
        taken_c, taken_n = set(), set()
        for d2, ci, n in sorted(pairs):
            if ci in taken_c or n in taken_n:
                continue
            taken_c.add(ci)
            taken_n.add(n)
            cands[ci].chain = n
            chains[n].append(cands[ci])
            states[n] = kf_update(predicted[n], cands[ci].position, cands[ci].cov)
        for cand in cands:
            if cand.chain < 0:
                cand.chain = len(chains)
                chains.append([cand])
                # a new chain knows its position; its velocity only up to max_speed
                P = np.zeros((4, 4))
                P[np.ix_([0, 2], [0, 2])] = cand.cov
                P[1, 1] = P[3, 3] = max_speed**2
                states.append(TrackState(np.array([cand.position[0], 0.0, cand.position[1], 0.0]), P))

    confirmed = [n for n, ch in enumerate(chains) if len(ch) >= persistence]
    out = []
    for label, n in enumerate(confirmed):
        for cand in chains[n]:
            out.extend(replace(raw[id(r)], target=label) for r in cand.reports)
    out.sort(key=lambda r: (r.k, r.target, r.sensor))
    return out


def simulate(cfg: ScenarioConfig, rng: np.random.Generator, *, run: int = 0):
    """Truth, labelled reports and (centralized mode only) unlabelled detections.

    Returns ``(truth, reports, detections)`` with ``detections`` None in
    distributed mode. Draws from ``rng`` in a fixed order, so a given
    generator state always yields the same data.
    """
    truth = generate_truth(cfg, rng)
    reports = generate_bearings(truth, cfg.sensors, rng, noise=cfg.noise, run=run)
    dets = None
    if cfg.mode == "centralized":
        dets = apply_detection_and_clutter(reports, cfg.clutter, rng, sensor_ids=[s.id for s in cfg.sensors])
    return truth, reports, dets


def register_centralized(
    detections: Sequence[BearingReport],
    plan: PairingPlan,
    sensors: Mapping[int, SensorConfig],
    settings: GASettings = GASettings(),
    persistence: int = 3,
    *,
    max_passes: int = 6,
    tol: float = 1e-3,
    bias_slack: float = 0.005,
    **association,
) -> tuple[BiasEstimate, list[BearingReport]]:
    """Alternate association and gated bias estimation on unlabelled detections.

    The first pass gates with the bias prior; later passes de-bias the
    bearings with the current estimate and gate with ``sigma_theta**2 +
    bias_slack**2``. Stops when no bias component moves by ``tol`` or more.
    Returns the final estimate and the labelled reports it used.
    """
    ids = plan.sensor_ids
    bias = None
    est = None
    labelled: list[BearingReport] = []
    for n in range(max_passes):
        labelled = prune_and_associate(
            detections, plan, sensors, persistence, bias=bias, bias_slack=bias_slack if bias else 0.0, **association
        )
        Z = build_pseudo_measurements(labelled, plan, sensors)
        new = estimate_bias_gated(Z, sensors, settings, sensor_ids=ids)
        moved = np.inf if est is None else float(np.max(np.abs(new.bias.as_array() - est.bias.as_array())))
        est, bias = new, new.bias
        logger.debug("centralized pass %d: %d pseudo-measurements, moved %.2e", n, len(Z), moved)
        if moved < tol:
            break
    return est, labelled


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass
class RunResult:
    run: int
    seed: int
    bias_hat: Optional[np.ndarray]
    bias_true: np.ndarray
    sqrt_crlb: np.ndarray
    err_uncorrected: np.ndarray  # (N, K)
    err_corrected: np.ndarray  # (N, K)
    noise_floor: np.ndarray  # (N, K)
    nll: float = math.nan
    n_pseudo: int = 0
    seconds: float = 0.0
    error: Optional[str] = None
    estimates: list = field(default_factory=list)
    tracks: Optional[dict] = None


@dataclass
class MonteCarloResult:
    sensor_ids: tuple[int, ...]
    runs: list[RunResult]

    @property
    def ok_runs(self) -> list[RunResult]:
        return [r for r in self.runs if r.error is None]

    @property
    def failures(self) -> int:
        return len(self.runs) - len(self.ok_runs)

    def bias_errors(self) -> np.ndarray:
        return np.array([r.bias_hat - r.bias_true for r in self.ok_runs]).reshape(-1, len(self.sensor_ids))

    def bias_rmse(self) -> np.ndarray:
        return np.sqrt(np.mean(self.bias_errors() ** 2, axis=0))

    def sqrt_crlb(self) -> np.ndarray:
        return np.nanmean(np.array([r.sqrt_crlb for r in self.ok_runs]), axis=0)

    def _curve(self, attr, target=None):
        e = np.array([getattr(r, attr) for r in self.ok_runs])  # (runs, N, K)
        if target is not None:
            e = e[:, target]
        else:
            e = e.reshape(-1, e.shape[-1])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return np.sqrt(np.nanmean(e**2, axis=0))

    def rmse_uncorrected(self, target=None) -> np.ndarray:
        return self._curve("err_uncorrected", target)

    def rmse_corrected(self, target=None) -> np.ndarray:
        return self._curve("err_corrected", target)

    def noise_floor(self, target=None) -> np.ndarray:
        return self._curve("noise_floor", target)

    def seconds(self) -> np.ndarray:
        return np.array([r.seconds for r in self.runs])


def run_seed(master_seed: int, run: int) -> np.random.SeedSequence:
    """Seed sequence of Monte Carlo run ``run``; children of the master seed."""
    return np.random.SeedSequence(master_seed, spawn_key=(run,))


def _fused_floor(truth, sensors, plan, variances) -> np.ndarray:
    """sqrt(trace) of the information-fused pair covariance at the true positions."""
    px, py = truth[..., 0], truth[..., 2]
    info = np.zeros(px.shape + (2, 2))
    for i, j in plan.pairs:
        si, sj = sensors[i], sensors[j]
        c = pair_covariance_arrays(si.x, si.y, sj.x, sj.y, px, py, variances[i], variances[j])
        info += np.linalg.inv(c)
    cov = np.linalg.inv(info)
    return np.sqrt(cov[..., 0, 0] + cov[..., 1, 1])


def run_once(
    cfg: ScenarioConfig,
    seed: np.random.SeedSequence,
    settings: GASettings = GASettings(),
    *,
    run: int = 0,
    track: bool = True,
    keep_tracks: bool = False,
) -> RunResult:
    """Simulate one scenario realisation and push it through registration and tracking."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    ga_seed = int(seed.generate_state(1)[0])
    settings = replace(settings, seed=ga_seed)
    sensors = cfg.sensor_map
    ids = tuple(sensors)
    plan = cfg.plan
    b_true = np.array([sensors[s].true_bias for s in ids])
    N, K = len(cfg.targets), cfg.K
    nan_nk = np.full((N, K), np.nan)
    result = RunResult(run, ga_seed, None, b_true, np.full(len(ids), np.nan), nan_nk, nan_nk.copy(), nan_nk.copy())
    try:
        truth, reports, dets = simulate(cfg, rng, run=run)
        reg_reports = reports
        est = None
        if dets is not None:
            if cfg.clutter.lam > 0 or cfg.clutter.p_d < 1:
                est, reg_reports = register_centralized(dets, plan, sensors, settings, cfg.persistence, T=cfg.T)
                result.estimates = [est]
            else:
                # without clutter or misses every detection is a target; plain ML applies
                reg_reports = prune_and_associate(dets, plan, sensors, cfg.persistence, T=cfg.T, exhaustive=True)
        Z = build_pseudo_measurements(reg_reports, plan, sensors)
        result.n_pseudo = len(Z)
        if est is not None:
            pass
        elif settings.window_size:
            ests = estimate_bias_windowed(Z, sensors, settings, sensor_ids=ids)
            est = ests[-1]
            result.estimates = ests
        else:
            est = estimate_bias_batch(Z, sensors, settings, sensor_ids=ids)
            result.estimates = [est]
        result.bias_hat = est.bias.as_array()
        result.nll = est.nll

        try:
            bound: Optional[CrlbResult] = crlb(fim(sensors, truth, b_true, plan))
            result.sqrt_crlb = bound.sqrt_diagonal
        except UnobservableBiasError as exc:
            logger.warning("run %d: %s", run, exc)
            bound = None

        if track and cfg.mode == "distributed":
            model = MotionModel(cfg.T, cfg.tracker_q, cfg.tracker_q)
            raw = run_tracker(reports, plan, sensors, model)
            corrected_reports = correct_bearings(reports, est.bias, bound, cfg.crlb_scale, sensors)
            fixed = run_tracker(corrected_reports, plan, sensors, model)
            result.err_uncorrected = position_errors(raw, truth)
            result.err_corrected = position_errors(fixed, truth)
            extra = bound.covariance_bound.diagonal() if bound is not None else np.zeros(len(ids))
            variances = {s: sensors[s].sigma_theta ** 2 + cfg.crlb_scale * extra[n] for n, s in enumerate(ids)}
            result.noise_floor = _fused_floor(truth, sensors, plan, variances)
            if keep_tracks:
                result.tracks = {"uncorrected": raw, "corrected": fixed, "truth": truth}
    except BearingRegError as exc:
        result.error = f"{type(exc).__name__}: {exc}"
        logger.warning("run %d failed: %s", run, result.error)
    result.seconds = time.perf_counter() - t0
    return result


def default_workers() -> int:
    n = os.cpu_count() or 1
    cap = os.environ.get("BEARING_REG_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            logger.warning("ignoring non-integer BEARING_REG_THREADS=%r", cap)
    return n


def _run_job(args):
    cfg, master, run, settings, track, keep_tracks = args
    return run_once(cfg, run_seed(master, run), settings, run=run, track=track, keep_tracks=keep_tracks)


def monte_carlo(
    cfg: ScenarioConfig,
    runs: int,
    settings: GASettings = GASettings(),
    *,
    workers: Optional[int] = None,
    track: bool = True,
    keep_tracks: bool = False,
) -> MonteCarloResult:
    """Independent runs seeded from ``cfg.seed``; failures are recorded, not raised."""
    if runs < 1:
        raise InvalidArgumentError("runs must be >= 1")
    workers = default_workers() if workers is None else max(1, workers)
    jobs = [(cfg, cfg.seed, r, settings, track, keep_tracks) for r in range(runs)]
    if workers == 1 or runs == 1:
        results = [_run_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, runs)) as pool:
            results = list(pool.map(_run_job, jobs))
    return MonteCarloResult(tuple(s.id for s in cfg.sensors), results)
