"""Scenario JSON files and CSV dumps.

Angles are radians throughout. CSV files carry a header row and use the
csv module's default (RFC 4180 style) quoting.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, InvalidArgumentError
from .geometry import SensorConfig
from .reports import BearingReport
from .simulator import ClutterModel, ScenarioConfig

_SCENARIO_KEYS = {
    "sensors",
    "targets",
    "biases",
    "K",
    "T",
    "truth_q",
    "tracker_q",
    "mode",
    "clutter",
    "persistence",
    "noise",
    "crlb_scale",
    "seed",
}


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "sensors": [
            {"id": s.id, "position": list(s.position), "sigma_theta": s.sigma_theta, "true_bias": s.true_bias}
            for s in cfg.sensors
        ],
        "targets": [list(t) for t in cfg.targets],
        "K": cfg.K,
        "T": cfg.T,
        "truth_q": cfg.truth_q,
        "tracker_q": cfg.tracker_q,
        "mode": cfg.mode,
        "clutter": asdict(cfg.clutter),
        "persistence": cfg.persistence,
        "noise": cfg.noise,
        "crlb_scale": cfg.crlb_scale,
        "seed": cfg.seed,
    }


def scenario_from_dict(data: dict) -> ScenarioConfig:
    """Build a scenario from its JSON form.

    ``biases`` (one value per sensor, in sensor order) overrides the
    ``true_bias`` of each sensor entry when present.
    """
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("sensors", "targets"):
        if key not in data:
            raise ConfigError(f"scenario is missing {key!r}")
    try:
        sensors = [
            SensorConfig(
                id=int(s["id"]),
                position=(float(s["position"][0]), float(s["position"][1])),
                sigma_theta=float(s["sigma_theta"]),
                true_bias=float(s.get("true_bias", 0.0)),
            )
            for s in data["sensors"]
        ]
        biases = data.get("biases")
        if biases is not None:
            if len(biases) != len(sensors):
                raise ConfigError("'biases' needs one value per sensor")
            sensors = [
                SensorConfig(s.id, s.position, s.sigma_theta, float(b)) for s, b in zip(sensors, biases)
            ]
        clutter = ClutterModel(**data.get("clutter", {}))
        extra = {k: data[k] for k in ("K", "T", "truth_q", "tracker_q", "mode", "persistence", "noise", "crlb_scale", "seed") if k in data}
        for k in ("K", "persistence", "seed"):
            if k in extra:
                if isinstance(extra[k], bool) or int(extra[k]) != extra[k]:
                    raise ConfigError(f"{k!r} must be an integer")
                extra[k] = int(extra[k])
        if "noise" in extra and not isinstance(extra["noise"], bool):
            raise ConfigError("'noise' must be true or false")
        return ScenarioConfig(sensors=tuple(sensors), targets=tuple(tuple(t) for t in data["targets"]), clutter=clutter, **extra)
    except ConfigError:
        raise
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def load_scenario(path) -> ScenarioConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"scenario file not found: {p}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from exc
    return scenario_from_dict(data)


def save_scenario(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(cfg), indent=2) + "\n")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> int:
    """Write rows under a header; returns the number of data rows."""
    n = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
            n += 1
    return n


REPORT_HEADER = ("run", "k", "sensor", "target_or_null", "bearing_rad")


def write_reports(path, reports: Iterable[BearingReport]) -> int:
    return write_csv(path, REPORT_HEADER, ((r.run, r.k, r.sensor, r.target, r.bearing) for r in reports))


def read_reports(path, run: Optional[int] = None) -> list[BearingReport]:
    """Reports from a dump; ``run`` keeps only that Monte Carlo run."""
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"report file not found: {p}")
    out = []
    with open(p, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or list(reader.fieldnames) != list(REPORT_HEADER):
            raise ConfigError(f"{p}: expected header {','.join(REPORT_HEADER)}")
        for line, row in enumerate(reader, start=2):
            try:
                r = BearingReport(
                    sensor=int(row["sensor"]),
                    k=int(row["k"]),
                    bearing=float(row["bearing_rad"]),
                    target=int(row["target_or_null"]) if row["target_or_null"] not in ("", None) else None,
                    run=int(row["run"]),
                )
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{p}:{line}: {exc}") from exc
            if run is None or r.run == run:
                out.append(r)
    return out


def write_truth(path, runs: Iterable[tuple[int, np.ndarray]]) -> int:
    """Truth states from ``(run, truth)`` pairs, truth shaped (N, K, 4)."""
    rows = (
        (run, t, k, *truth[t, k])
        for run, truth in runs
        for t in range(truth.shape[0])
        for k in range(truth.shape[1])
    )
    return write_csv(path, ("run", "target", "k", "x", "vx", "y", "vy"), rows)


def check_output_dir(path) -> Path:
    p = Path(path)
    if p.exists() and not p.is_dir():
        raise InvalidArgumentError(f"output path {p} is not a directory")
    p.mkdir(parents=True, exist_ok=True)
    return p
