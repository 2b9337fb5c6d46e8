import bisect
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import UsageError

__all__ = ["SCALAR_COLUMNS", "Trajectory", "checkpoint_grid"]

logger = logging.getLogger(__name__)

SCALAR_COLUMNS = ("q", "p", "C", "D", "D_count")

CSV_FLOAT_FORMAT = "%.17g"


@dataclass
class Trajectory:
    """Time-stamped observations of one run

    Checkpoint times are strictly increasing and a trajectory recorded from a fresh state starts
    at ``t = 0``. ``snapshots`` holds a graph or graphon per checkpoint when they were requested.
    """

    columns: tuple[str, ...]
    times: list[float] = field(default_factory=list)
    rows: list[tuple[float, ...]] = field(default_factory=list)
    snapshots: list[Any] | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def append(self, t: float, record: Mapping[str, float], snapshot: Any = None) -> None:
        if self.times and t <= self.times[-1]:
            raise UsageError(f"checkpoint times must increase, got {t} after {self.times[-1]}")
        self.times.append(float(t))
        self.rows.append(tuple(float(record[name]) for name in self.columns))
        if snapshot is not None:
            if self.snapshots is None:
                self.snapshots = []
            self.snapshots.append(snapshot)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def time_array(self) -> NDArray[np.float64]:
        return np.asarray(self.times, dtype=np.float64)

    def column(self, name: str) -> NDArray[np.float64]:
        try:
            index = self.columns.index(name)
        except ValueError as e:
            raise UsageError(f"trajectory has no column {name!r}; columns are {self.columns}") from e
        return np.array([row[index] for row in self.rows], dtype=np.float64)

    def value_at(self, name: str, t: float) -> float:
        """Value at the last checkpoint at or before ``t``"""
        position = bisect.bisect_right(self.times, t) - 1
        if position < 0:
            raise UsageError(f"time {t} precedes the first checkpoint {self.times[0]}")
        return self.rows[position][self.columns.index(name)]

    def snapshot_at(self, t: float) -> Any:
        if self.snapshots is None:
            raise UsageError("trajectory was recorded without snapshots")
        position = bisect.bisect_right(self.times, t) - 1
        if position < 0:
            raise UsageError(f"time {t} precedes the first checkpoint {self.times[0]}")
        return self.snapshots[position]

    def to_frame(self, columns: Sequence[str] | None = None) -> pd.DataFrame:
        frame = pd.DataFrame(self.rows, columns=list(self.columns))
        frame.insert(0, "t", self.times)
        if columns is not None:
            frame = frame[["t", *columns]]
        return frame

    def to_csv(self, path: str | Path, columns: Sequence[str] | None = None) -> None:
        self.to_frame(columns).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, metadata: dict[str, Any] | None = None) -> "Trajectory":
        if "t" not in frame.columns:
            raise UsageError("trajectory table needs a 't' column")
        columns = tuple(str(c) for c in frame.columns if c != "t")
        trajectory = cls(columns=columns, metadata=dict(metadata or {}))
        for t, row in zip(frame["t"].tolist(), frame[list(columns)].itertuples(index=False), strict=True):
            trajectory.append(t, dict(zip(columns, row, strict=True)))
        return trajectory

    @classmethod
    def from_csv(cls, path: str | Path, metadata: dict[str, Any] | None = None) -> "Trajectory":
        return cls.from_frame(pd.read_csv(path), metadata)


def checkpoint_grid(
    horizon: float, checkpoints: ArrayLike | int | None = None, start: float = 0.0
) -> list[float]:
    """Validated checkpoint times; an integer asks for that many evenly spaced intervals"""
    if not horizon > start:
        raise UsageError(f"horizon must exceed the start time {start}, got {horizon}")
    if checkpoints is None:
        checkpoints = 100
    if isinstance(checkpoints, int):
        if checkpoints < 1:
            raise UsageError("need at least one checkpoint interval")
        return np.linspace(start, horizon, checkpoints + 1).tolist()
    grid = [float(t) for t in np.asarray(checkpoints, dtype=np.float64).reshape(-1)]
    if not grid or grid[0] != start:
        raise UsageError(f"the first checkpoint must be the start time {start}")
    if any(b <= a for a, b in zip(grid, grid[1:], strict=False)):
        raise UsageError("checkpoint times must be strictly increasing")
    if grid[-1] > horizon:
        raise UsageError(f"checkpoint {grid[-1]} lies beyond the horizon {horizon}")
    return grid
