"""Containers shared across modules."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np


@dataclass
class TimeSeries:
    """An ordered real-valued sample with optional dates and provenance."""

    values: np.ndarray
    dates: list | None = None
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.dates is not None and len(self.dates) != len(self.values):
            raise ValueError("dates and values differ in length")

    def __len__(self) -> int:
        return len(self.values)

    def head(self, n: int) -> TimeSeries:
        dates = None if self.dates is None else list(self.dates[:n])
        return TimeSeries(self.values[:n].copy(), dates, dict(self.meta))


def as_array(series) -> np.ndarray:
    """Float vector view of a ``TimeSeries`` or any 1-d array-like."""
    if isinstance(series, TimeSeries):
        return series.values
    x = np.asarray(series, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-d series, got shape {x.shape}")
    return x
