"""Bearing reports exchanged between the simulator, registration and tracker."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional


@dataclass(frozen=True)
class BearingReport:
    """One associated measurement report (or raw detection when ``target`` is None).

    ``variance`` overrides the sensor's nominal sigma_theta**2 once bias
    correction has inflated it.
    """

    sensor: int
    k: int
    bearing: float
    target: Optional[int] = None
    variance: Optional[float] = None
    run: int = 0


def group_by_time_target(reports: Iterable[BearingReport]) -> dict[tuple[int, int], dict[int, BearingReport]]:
    """Index labelled reports as ``{(k, target): {sensor: report}}``; unlabelled ones are ignored.

    A duplicate (k, target, sensor) keeps the first report.
    """
    groups: dict[tuple[int, int], dict[int, BearingReport]] = defaultdict(dict)
    for r in reports:
        if r.target is None:
            continue
        groups[(r.k, r.target)].setdefault(r.sensor, r)
    return dict(sorted(groups.items()))
