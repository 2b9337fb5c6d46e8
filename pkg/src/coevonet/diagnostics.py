"""Random-walk mixing, connectivity monitoring and exact laws of tiny chains"""

import itertools
import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.stats
from numpy.typing import ArrayLike

from coevonet.exceptions import UsageError
from coevonet.model import BLACK, WHITE, ColouredGraph, ModelParams
from coevonet.trajectory import Trajectory

__all__ = [
    "MIXING_MAX_SIZE",
    "mixing_check",
    "ConnectivityReport",
    "connectivity_regime",
    "monitor_connectivity",
    "exact_chain_distribution",
    "chain_chi_square",
    "observed_counts",
]

logger = logging.getLogger(__name__)

MIXING_MAX_SIZE = 512
EXACT_CHAIN_MAX_SIZE = 4


def mixing_check(
    graph: ColouredGraph, eta: float, times: ArrayLike, max_size: int = MIXING_MAX_SIZE
) -> pd.DataFrame:
    """Exact total-variation distance to uniform of the rate-``eta`` walk against ``exp(-eta nu^2 n t)``

    The walk jumps along each incident edge at rate ``eta``. Rows report the worst start vertex.

    Returns
    -------
        pd.DataFrame: columns t, tv, bound, holds
    """
    n = graph.n
    if n > max_size:
        raise UsageError(
            f"exact mixing check is limited to n <= {max_size}; got n={n}, estimate by sampling walks instead"
        )
    nu = graph.connectivity_nu()
    adjacency = graph.adjacency.astype(np.float64)
    generator = eta * (adjacency - np.diag(adjacency.sum(axis=1)))
    rows = []
    for t in np.asarray(times, dtype=np.float64).reshape(-1):
        law = scipy.linalg.expm(generator * t)
        tv = float((0.5 * np.abs(law - 1.0 / n).sum(axis=1)).max())
        bound = math.exp(-eta * nu**2 * n * t)
        rows.append({"t": float(t), "tv": tv, "bound": bound, "holds": tv <= bound})
        if tv > bound:
            logger.warning("mixing bound violated at t=%g: tv=%g > %g", t, tv, bound)
    return pd.DataFrame(rows, columns=["t", "tv", "bound", "holds"])


def connectivity_regime(params: ModelParams) -> str:
    """Which connectivity guarantee the switching rates admit

    ``frozen_or_growing`` when no edge is ever removed, ``recurrent`` when every absent pair can
    reconnect, and ``decaying`` otherwise.
    """
    z0 = min(params.s_c0, params.s_d0)
    z1 = max(params.s_c1, params.s_d1)
    if z1 == 0:
        return "frozen_or_growing"
    if z0 > 0:
        return "recurrent"
    return "decaying"


@dataclass
class ConnectivityReport:
    nu0: float
    min_nu: float
    argmin_t: float
    regime: str
    equilibrium_p: float | None
    hypothesis_met: bool
    thresholds: list[float] = field(default_factory=list)
    nu: list[float] = field(default_factory=list)
    violations: int = 0


def monitor_connectivity(trajectory: Trajectory, params: ModelParams) -> ConnectivityReport:
    """Track the common-neighbour density along graph snapshots against the guarantee for the regime

    Thresholds per checkpoint are ``nu0 / 2 * exp(-2 rho t)`` when absent pairs cannot reconnect,
    ``nu0**3 / 2`` when every pair can (and the switching equilibrium exceeds ``nu0``), and
    ``nu0`` itself when edges are never removed.
    """
    if not trajectory.snapshots:
        raise UsageError("connectivity monitoring needs graph snapshots")
    nus = [graph.connectivity_nu() for graph in trajectory.snapshots]
    nu0 = nus[0]
    regime = connectivity_regime(params)
    z0 = min(params.s_c0, params.s_d0)
    z1 = max(params.s_c1, params.s_d1)
    p_eq = z0 / (z0 + z1) if z0 + z1 > 0 else None

    times = trajectory.times
    if regime == "frozen_or_growing":
        thresholds = [nu0] * len(times)
        hypothesis_met = True
    elif regime == "recurrent":
        thresholds = [0.5 * nu0**3] * len(times)
        hypothesis_met = p_eq is not None and p_eq > nu0
    else:
        thresholds = [0.5 * nu0 * math.exp(-2 * params.rho * t) for t in times]
        hypothesis_met = True

    violations = sum(1 for nu, bound in zip(nus, thresholds, strict=True) if nu < bound)
    position = int(np.argmin(nus))
    return ConnectivityReport(
        nu0=nu0,
        min_nu=nus[position],
        argmin_t=times[position],
        regime=regime,
        equilibrium_p=p_eq,
        hypothesis_met=hypothesis_met,
        thresholds=thresholds,
        nu=nus,
        violations=violations,
    )


def _all_states(n: int) -> list[ColouredGraph]:
    pairs = list(itertools.combinations(range(n), 2))
    states = []
    for colours in itertools.product((BLACK, WHITE), repeat=n):
        for mask in range(1 << len(pairs)):
            edges = [pair for bit, pair in enumerate(pairs) if mask >> bit & 1]
            states.append(ColouredGraph.from_edges(colours, edges))
    return states


def exact_chain_distribution(initial: ColouredGraph, params: ModelParams, t: float) -> dict[bytes, float]:
    """Law at time ``t`` over every labelled state of a tiny graph, by matrix exponential

    Keys are ``ColouredGraph.state_key`` values.
    """
    n = initial.n
    if n > EXACT_CHAIN_MAX_SIZE:
        raise UsageError(f"exact chain law is limited to n <= {EXACT_CHAIN_MAX_SIZE}, got {n}")
    states = _all_states(n)
    index = {state.state_key(): i for i, state in enumerate(states)}
    generator = np.zeros((len(states), len(states)))
    for i, state in enumerate(states):
        for u in range(n):
            rate = params.eta * state.vertex_flip_rate(u)
            if rate > 0:
                generator[i, index[state.copy().flip(u).state_key()]] += rate
        for u, v in itertools.combinations(range(n), 2):
            rate = params.rho * state.edge_switch_rate(u, v, params)
            if rate > 0:
                generator[i, index[state.copy().toggle(u, v).state_key()]] += rate
        generator[i, i] = -generator[i].sum()
    start = np.zeros(len(states))
    start[index[initial.state_key()]] = 1.0
    law = start @ scipy.linalg.expm(generator * t)
    return {state.state_key(): float(law[i]) for i, state in enumerate(states)}


def chain_chi_square(
    observed: Mapping[bytes, int], truth: Mapping[bytes, float], min_expected: float = 5.0
) -> float:
    """p-value of a chi-square goodness-of-fit test, pooling states with small expected counts"""
    runs = sum(observed.values())
    unknown = set(observed) - set(truth)
    if unknown:
        raise UsageError(f"{len(unknown)} observed states are not in the state space")
    expected, counts = [], []
    pooled_expected, pooled_count = 0.0, 0
    for key, probability in truth.items():
        e = probability * runs
        if e < min_expected:
            pooled_expected += e
            pooled_count += observed.get(key, 0)
        else:
            expected.append(e)
            counts.append(observed.get(key, 0))
    if pooled_expected > 0:
        expected.append(pooled_expected)
        counts.append(pooled_count)
    result = scipy.stats.chisquare(np.asarray(counts, dtype=np.float64), np.asarray(expected))
    return float(result.pvalue)


def observed_counts(states: Sequence[ColouredGraph]) -> dict[bytes, int]:
    counts: dict[bytes, int] = {}
    for state in states:
        key = state.state_key()
        counts[key] = counts.get(key, 0) + 1
    return counts
