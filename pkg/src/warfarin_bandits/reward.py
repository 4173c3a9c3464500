"""Reward tables over (true bucket, chosen bucket)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .dataset import DoseBucket
from .errors import ConfigurationError, DomainError

LABELS = ("standard", "reshaped", "custom")


@dataclass(frozen=True)
class RewardTable:
    """3x3 rewards indexed ``entries[true, chosen]``; the diagonal must dominate each row."""

    entries: np.ndarray
    label: str = "custom"

    def __post_init__(self):
        entries = np.array(self.entries, dtype=np.float64)
        if entries.shape != (3, 3) or not np.all(np.isfinite(entries)):
            raise ConfigurationError("reward table must be a finite 3x3 matrix")
        if self.label not in LABELS:
            raise ConfigurationError(f"unknown reward table label {self.label!r}")
        for i in range(3):
            others = np.delete(entries[i], i)
            if not np.all(others < entries[i, i]):
                raise ConfigurationError(
                    f"row {DoseBucket(i).name}: correct dose must strictly beat every other choice"
                )
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def __call__(self, true, chosen) -> float:
        return float(self.entries[int(true), int(chosen)])


def standard_table(correct: float = 0.0, incorrect: float = -1.0) -> RewardTable:
    entries = np.full((3, 3), float(incorrect))
    np.fill_diagonal(entries, float(correct))
    return RewardTable(entries, "standard")


def reshaped_table(R: float = 1.5, near_miss: str = "half") -> RewardTable:
    """Asymmetric penalties: high-need patient given low is -2R, low-need given high is -R.

    Every other wrong choice scores -R/2 (``near_miss="half"``) or -R**2
    (``near_miss="square"``).
    """
    R = float(R)
    if not R > 0:
        raise DomainError(f"R must be positive, got {R}")
    if near_miss == "half":
        other = -R / 2.0
    elif near_miss == "square":
        other = -R * R
    else:
        raise ConfigurationError(f"near_miss must be 'half' or 'square', got {near_miss!r}")
    entries = np.full((3, 3), other)
    np.fill_diagonal(entries, 0.0)
    entries[DoseBucket.LOW, DoseBucket.HIGH] = -R
    entries[DoseBucket.HIGH, DoseBucket.LOW] = -2.0 * R
    return RewardTable(entries, "reshaped")


def reward(table: RewardTable, true, chosen) -> float:
    return table(true, chosen)


def table_from_cells(cells: Mapping[str, float]) -> RewardTable:
    """Custom table from nine cells labeled ``<true>_<chosen>``, e.g. ``high_low``."""
    entries = np.empty((3, 3))
    expected = {f"{t.name.lower()}_{c.name.lower()}": (t, c) for t in DoseBucket for c in DoseBucket}
    missing = sorted(set(expected) - set(cells))
    extra = sorted(set(cells) - set(expected))
    if missing or extra:
        raise ConfigurationError(f"custom reward table: missing cells {missing}, unknown cells {extra}")
    for key, (t, c) in expected.items():
        try:
            entries[t, c] = float(cells[key])
        except (TypeError, ValueError):
            raise ConfigurationError(f"custom reward cell {key}={cells[key]!r} is not a number") from None
    return RewardTable(entries, "custom")
