"""Path metrics and path functionals on piecewise-constant paths

All integrals are evaluated exactly piece by piece. A path holds its last value after its final
breakpoint.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import Any, Literal, NamedTuple

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from coevonet.exceptions import UsageError
from coevonet.graphon import ColouredGraphon, density_vector, embed, projected_density_vector
from coevonet.model import ColouredGraph
from coevonet.motifs import MotifCatalog
from coevonet.trajectory import Trajectory

__all__ = [
    "DEFAULT_HORIZON",
    "SampledPath",
    "PathDistance",
    "d_m",
    "d_m_tilde",
    "occupation_time",
    "AbsorptionEstimate",
    "absorption_estimate",
    "homogenisation_gap",
]

logger = logging.getLogger(__name__)

DEFAULT_HORIZON = 10.0

PathKind = Literal["scalar", "vector", "graphon"]

Metric = Callable[[Any, Any], float]


@dataclass(frozen=True)
class SampledPath:
    """Piecewise-constant path: ``values[i]`` holds on ``[breakpoints[i], breakpoints[i + 1])``"""

    breakpoints: NDArray[np.float64]
    values: Any
    kind: PathKind = "scalar"

    def __post_init__(self) -> None:
        breakpoints = np.asarray(self.breakpoints, dtype=np.float64).reshape(-1)
        if breakpoints.size == 0 or breakpoints[0] != 0.0:
            raise UsageError("a path starts with a breakpoint at t = 0")
        if np.any(np.diff(breakpoints) <= 0):
            raise UsageError("path breakpoints must be strictly increasing")
        if self.kind == "scalar":
            values: Any = np.asarray(self.values, dtype=np.float64).reshape(-1)
        elif self.kind == "vector":
            values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        elif self.kind == "graphon":
            values = list(self.values)
        else:
            raise UsageError(f"unknown path kind {self.kind!r}")
        if len(values) != breakpoints.size:
            raise UsageError(f"{breakpoints.size} breakpoints but {len(values)} values")
        object.__setattr__(self, "breakpoints", breakpoints)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_trajectory(cls, trajectory: Trajectory, column: str | Sequence[str]) -> "SampledPath":
        """Scalar path for one column, vector path for several"""
        times = trajectory.time_array
        if isinstance(column, str):
            return cls(times, trajectory.column(column), "scalar")
        return cls(times, np.column_stack([trajectory.column(name) for name in column]), "vector")

    @classmethod
    def from_snapshots(cls, trajectory: Trajectory) -> "SampledPath":
        """Graphon path of the embedded graph snapshots"""
        if not trajectory.snapshots:
            raise UsageError("trajectory was recorded without snapshots")
        graphons = [embed(s) if isinstance(s, ColouredGraph) else s for s in trajectory.snapshots]
        return cls(trajectory.time_array, graphons, "graphon")

    def at(self, t: float) -> Any:
        index = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        return self.values[max(index, 0)]

    def shifted(self, h: float) -> "SampledPath":
        """The path ``t -> x(t + h)``"""
        if h < 0:
            raise UsageError(f"shift must be non-negative, got {h}")
        if h == 0:
            return self
        first = int(np.searchsorted(self.breakpoints, h, side="right")) - 1
        breakpoints = np.concatenate([[0.0], self.breakpoints[first + 1 :] - h])
        values = self.values[first:]
        return SampledPath(breakpoints, values, self.kind)


class PathDistance(NamedTuple):
    value: float
    tail_bound: float


def _default_metric(kind: PathKind) -> Metric:
    if kind == "scalar":
        return lambda a, b: abs(float(a) - float(b))
    if kind == "vector":
        return lambda a, b: float(np.max(np.abs(np.asarray(a) - np.asarray(b))))

    catalog = MotifCatalog.build(3)

    def subgraph_distance(a: ColouredGraphon, b: ColouredGraphon) -> float:
        difference = density_vector(a, catalog.motifs) - density_vector(b, catalog.motifs)
        return float(np.sum(catalog.weights * np.abs(difference)))

    return subgraph_distance


def _pieces(
    x: SampledPath, y: SampledPath, metric: Metric | None, horizon: float | None
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Truncated distances and ``exp(-t)`` weights on the merged partition"""
    if x.kind != y.kind:
        raise UsageError(f"cannot compare a {x.kind} path with a {y.kind} path")
    metric = metric or _default_metric(x.kind)
    starts = np.union1d(x.breakpoints, y.breakpoints)
    if horizon is not None:
        if not horizon > 0:
            raise UsageError(f"horizon must be positive, got {horizon}")
        starts = starts[starts < horizon]
        ends = np.append(starts[1:], horizon)
        end_weights = np.exp(-ends)
    else:
        end_weights = np.append(np.exp(-starts[1:]), 0.0)
    weights = np.exp(-starts) - end_weights
    distances = np.array([min(1.0, metric(x.at(t), y.at(t))) for t in starts])
    return distances, weights


def d_m(
    x: SampledPath, y: SampledPath, metric: Metric | None = None, horizon: float | None = DEFAULT_HORIZON
) -> PathDistance:
    """``int (1 ^ r(x_t, y_t)) exp(-t) dt`` over ``[0, horizon]``

    The tail bound is ``exp(-horizon)``. ``horizon=None`` integrates to infinity with both paths
    held constant after their last breakpoint, and the tail bound is 0.
    """
    distances, weights = _pieces(x, y, metric, horizon)
    tail = 0.0 if horizon is None else math.exp(-horizon)
    return PathDistance(float(np.sum(distances * weights)), tail)


def d_m_tilde(x: SampledPath, y: SampledPath, metric: Metric | None = None) -> float:
    """Smallest ``eps`` with ``int 1[r(x_t, y_t) > eps] exp(-t) dt <= eps`` over all times

    The exceedance mass is a non-increasing step function of ``eps`` that is constant between
    consecutive distance levels, so the search bisects over the sorted levels.
    """
    distances, weights = _pieces(x, y, metric, None)
    levels = np.unique(np.append(distances, 0.0))
    order = np.argsort(distances)
    sorted_distances = distances[order]
    # mass strictly above each level
    cumulative = np.concatenate([[0.0], np.cumsum(weights[order])])
    above = cumulative[-1] - cumulative[np.searchsorted(sorted_distances, levels, side="right")]
    upper = np.append(levels[1:], np.inf)

    low, high = 0, len(levels) - 1
    while low < high:
        middle = (low + high) // 2
        if above[middle] <= upper[middle]:
            high = middle
        else:
            low = middle + 1
    return float(max(levels[low], above[low]))


def occupation_time(path: SampledPath, a: float, b: float, u: float) -> float:
    """Time in ``[a, b]`` that a scalar path spends at or below ``u``"""
    if path.kind != "scalar":
        raise UsageError("occupation time needs a scalar path")
    if not 0 <= a < b:
        raise UsageError(f"need 0 <= a < b, got a={a}, b={b}")
    if not 0 < u < 1:
        raise UsageError(f"level must lie in (0, 1), got {u}")
    starts = np.clip(path.breakpoints, a, b)
    ends = np.clip(np.append(path.breakpoints[1:], np.inf), a, b)
    below = path.values <= u
    return float(np.sum((ends - starts)[below]))


class AbsorptionEstimate(NamedTuple):
    p_zero: float
    p_one: float
    stderr_zero: float
    stderr_one: float

    @property
    def p_interior(self) -> float:
        return 1.0 - self.p_zero - self.p_one


def absorption_estimate(
    trajectories: Sequence[Trajectory], t: float, column: str = "q"
) -> AbsorptionEstimate:
    """Frequencies of runs sitting exactly at q = 0 and q = 1 at time ``t``, with binomial errors"""
    if not trajectories:
        raise UsageError("need at least one trajectory")
    values = np.array([trajectory.value_at(column, t) for trajectory in trajectories])
    runs = values.size
    p_zero = float(np.mean(values == 0.0))
    p_one = float(np.mean(values == 1.0))
    return AbsorptionEstimate(
        p_zero=p_zero,
        p_one=p_one,
        stderr_zero=math.sqrt(p_zero * (1 - p_zero) / runs),
        stderr_one=math.sqrt(p_one * (1 - p_one) / runs),
    )


def homogenisation_gap(trajectory: Trajectory, max_size: int = 3) -> pd.DataFrame:
    """Truncated subgraph distance between each snapshot and its projection

    Returns
    -------
        pd.DataFrame: columns t, gap
    """
    if not trajectory.snapshots:
        raise UsageError("homogenisation gap needs graph snapshots")
    catalog = MotifCatalog.build(max_size)
    motifs = catalog.motifs
    gaps = []
    for snapshot in trajectory.snapshots:
        graphon = embed(snapshot) if isinstance(snapshot, ColouredGraph) else snapshot
        difference = density_vector(graphon, motifs) - projected_density_vector(graphon, motifs)
        gaps.append(float(np.sum(catalog.weights * np.abs(difference))))
    return pd.DataFrame({"t": trajectory.times, "gap": gaps})
