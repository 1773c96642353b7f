"""The scanblue experiment series: identifiers and Alice's bias angles.

41 experiments, scanblue110 through scanblue151; scanblue138 duplicated
scanblue137 and is omitted.  Bob's settings are fixed; Alice's bias angle
steps by 0.05 pi across the series.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .quantum import ExperimentGeometry, geometry_for_experiment


# scanblue139 carries the same angle as scanblue137 (the 138 slot was a
# duplicate run); build the table explicitly to match the published list.
_IDS = [f"scanblue{n}" for n in range(110, 152) if n != 138]
_THETAS_OVER_PI = [round(-1.00 + 0.05 * k, 2) for k in range(28)]          # 110..137
_THETAS_OVER_PI += [round(0.35 + 0.05 * k, 2) for k in range(13)]          # 139..151
SCAN_SERIES: tuple[tuple[str, float], ...] = tuple(zip(_IDS, _THETAS_OVER_PI))


@dataclass(frozen=True)
class ScanExperiment:
    experiment_id: str
    theta_over_pi: float

    @property
    def theta(self) -> float:
        return self.theta_over_pi * np.pi

    def geometry(self) -> ExperimentGeometry:
        return geometry_for_experiment(self.theta)


def scan_series(n_experiments: int | None = None) -> list[ScanExperiment]:
    """The experiment descriptors, optionally truncated to the first n."""
    if n_experiments is None:
        n_experiments = len(SCAN_SERIES)
    if not 1 <= n_experiments <= len(SCAN_SERIES):
        raise InvalidInputError(f"n_experiments must be 1..{len(SCAN_SERIES)}")
    return [ScanExperiment(eid, t) for eid, t in SCAN_SERIES[:n_experiments]]


def theta_for(experiment_id: str) -> float:
    for eid, t in SCAN_SERIES:
        if eid == experiment_id:
            return t * np.pi
    raise InvalidInputError(f"unknown experiment id {experiment_id!r}")
