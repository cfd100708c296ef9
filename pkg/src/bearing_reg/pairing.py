"""Assignment of sensors into triangulation pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

from .errors import InsufficientSensorsError, InvalidArgumentError

Pair = tuple[int, int]


@dataclass(frozen=True)
class PairingPlan:
    """Sensor pairs used for triangulation.

    ``differences`` lists the (pair, pair) combinations whose triangulations
    are subtracted to form bias pseudo-measurements: consecutive pairs, so a
    four-sensor plan yields exactly one difference, ``((1, 2), (3, 4))``.
    """

    mode: Literal["even", "odd"]
    pairs: tuple[Pair, ...]

    def __post_init__(self):
        if len(self.pairs) < 2:
            raise InvalidArgumentError("a pairing plan needs at least two pairs")
        ids = [s for p in self.pairs for s in p]
        if any(a == b for a, b in self.pairs):
            raise InvalidArgumentError("a sensor cannot be paired with itself")
        if self.mode == "even":
            if len(set(ids)) != len(ids):
                raise InvalidArgumentError("even pairing must use each sensor once")
        elif self.mode == "odd":
            shared = set(self.pairs[0]) & set(self.pairs[1])
            if len(shared) != 1:
                raise InvalidArgumentError("odd pairing: first two pairs must share one sensor")
            rest = [s for p in self.pairs[2:] for s in p]
            if len(set(rest)) != len(rest) or set(rest) & set(self.pairs[0] + self.pairs[1]):
                raise InvalidArgumentError("odd pairing: remaining pairs must be disjoint")
        else:
            raise InvalidArgumentError(f"unknown pairing mode {self.mode!r}")

    @property
    def sensor_ids(self) -> tuple[int, ...]:
        seen: dict[int, None] = {}
        for p in self.pairs:
            for s in p:
                seen.setdefault(s, None)
        return tuple(seen)

    @property
    def differences(self) -> tuple[tuple[Pair, Pair], ...]:
        return tuple(zip(self.pairs[:-1], self.pairs[1:]))


def plan_pairing(sensor_ids: Sequence[int]) -> PairingPlan:
    ids = list(sensor_ids)
    if len(set(ids)) != len(ids):
        raise InvalidArgumentError("duplicate sensor ids")
    if len(ids) < 3:
        raise InsufficientSensorsError(
            f"{len(ids)} sensor(s): at least two sensor pairs (three sensors) are "
            "needed to make offset biases observable"
        )
    if len(ids) % 2 == 0:
        pairs = [(ids[k], ids[k + 1]) for k in range(0, len(ids), 2)]
        return PairingPlan("even", tuple(pairs))
    pairs = [(ids[0], ids[1]), (ids[0], ids[2])]
    pairs += [(ids[k], ids[k + 1]) for k in range(3, len(ids), 2)]
    return PairingPlan("odd", tuple(pairs))
