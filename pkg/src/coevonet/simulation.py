"""Exact event-driven simulation of the co-evolving voter chain

Each event is drawn with the direct method: an exponential waiting time from the total rate
``2 eta D + rho * sum(s * N)``, then a flip or one of the four pair categories in proportion to
its rate, then a uniform member of that category. Flip targets come from a prefix-sum tree over
discordant degrees and pair draws from four swap-with-last index sets, so apart from the O(n)
bookkeeping of a flip each event costs O(log n).
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import UsageError
from coevonet.graphon import ColouredGraphon, graph_density, sample_graph
from coevonet.model import BLACK, WHITE, ColouredGraph, ModelParams, PairCounts
from coevonet.motifs import Motif
from coevonet.streams import UniformBuffer, make_generator
from coevonet.trajectory import SCALAR_COLUMNS, Trajectory, checkpoint_grid

__all__ = [
    "Observer",
    "ScalarObserver",
    "ConnectivityObserver",
    "MotifObserver",
    "PrefixSumTree",
    "PairCategoryIndex",
    "DiscordantDegreeSampler",
    "SimState",
    "simulate",
    "init_distance_kernel",
    "distance_kernel_graphon",
    "init_from_graphon",
]

logger = logging.getLogger(__name__)


class Observer(Protocol):
    columns: tuple[str, ...]

    def observe(self, graph: ColouredGraph) -> dict[str, float]: ...


class ScalarObserver:
    columns = SCALAR_COLUMNS

    def observe(self, graph: ColouredGraph) -> dict[str, float]:
        q, p, concordant, discordant, count = graph.summary()
        return {"q": q, "p": p, "C": concordant, "D": discordant, "D_count": count}


class ConnectivityObserver:
    columns = ("nu",)

    def observe(self, graph: ColouredGraph) -> dict[str, float]:
        return {"nu": graph.connectivity_nu()}


class MotifObserver:
    """Regular motif densities of the embedded graph, one column per canonical motif id"""

    def __init__(self, motifs: Sequence[Motif]) -> None:
        self.motifs = tuple(m.canonical() for m in motifs)
        self.columns = tuple(m.label for m in self.motifs)

    def observe(self, graph: ColouredGraph) -> dict[str, float]:
        return {m.label: graph_density(graph, m) for m in self.motifs}


class PrefixSumTree:
    """Fenwick tree over non-negative integer weights

    Point updates and weighted search both cost O(log n). ``add`` takes batches so a flip can
    refresh all of its touched vertices with a handful of vectorised passes.
    """

    def __init__(self, weights: ArrayLike) -> None:
        self.weights = np.array(weights, dtype=np.int64)
        size = self.weights.size
        self.size = size
        index = np.arange(1, size + 1)
        cumulative = np.concatenate(([0], np.cumsum(self.weights)))
        self._tree = np.zeros(size + 1, dtype=np.int64)
        self._tree[1:] = cumulative[index] - cumulative[index - (index & -index)]
        self._total = int(cumulative[-1])
        self._top = 1 << (size.bit_length() - 1) if size else 0

    @property
    def total(self) -> int:
        return self._total

    def add(self, indices: ArrayLike, deltas: ArrayLike) -> None:
        indices = np.asarray(indices, dtype=np.int64)
        deltas = np.asarray(deltas, dtype=np.int64)
        changed = deltas != 0
        indices, deltas = indices[changed], deltas[changed]
        if indices.size == 0:
            return
        np.add.at(self.weights, indices, deltas)
        self._total += int(deltas.sum())
        position = indices + 1
        while position.size:
            np.add.at(self._tree, position, deltas)
            position = position + (position & -position)
            inside = position <= self.size
            position, deltas = position[inside], deltas[inside]

    def set(self, indices: ArrayLike, values: ArrayLike) -> None:
        """Overwrite the weights at distinct ``indices``"""
        indices = np.asarray(indices, dtype=np.int64)
        self.add(indices, np.asarray(values, dtype=np.int64) - self.weights[indices])

    def prefix(self, count: int) -> int:
        """Sum of the first ``count`` weights"""
        total = 0
        while count > 0:
            total += int(self._tree[count])
            count -= count & -count
        return total

    def find(self, target: float) -> int:
        """Index ``i`` with ``prefix(i) <= target < prefix(i + 1)``; zero weights are never returned"""
        if self._total <= 0:
            raise UsageError("cannot draw from a tree with zero total weight")
        remaining = min(target, self._total - 1)
        position = 0
        step = self._top
        tree = self._tree
        while step:
            following = position + step
            if following <= self.size and tree[following] <= remaining:
                position = following
                remaining -= tree[following]
            step >>= 1
        return position


class DiscordantDegreeSampler:
    """Vertex draws proportional to discordant degree

    The owner reports each flip and toggle so only the touched vertices are refreshed. A graph
    changed without notice is caught through ``graph.version`` and the tree is rebuilt.
    """

    def __init__(self, graph: ColouredGraph) -> None:
        self.graph = graph
        self._rebuild()

    def _rebuild(self) -> None:
        self.tree = PrefixSumTree(self.graph.discordant_degree)
        self._version = self.graph.version

    def _refresh(self, vertices: NDArray[np.int64], bumps: int) -> None:
        if self.graph.version != self._version + bumps:
            self._rebuild()
            return
        self.tree.set(vertices, self.graph.discordant_degree[vertices])
        self._version = self.graph.version

    def flipped(self, u: int) -> None:
        self._refresh(np.append(np.flatnonzero(self.graph.adjacency[u]), u), 1)

    def toggled(self, u: int, v: int, discordant: bool) -> None:
        self._refresh(np.array([u, v], dtype=np.int64), int(discordant))

    def draw(self, uniform: float) -> int:
        if self._version != self.graph.version:
            self._rebuild()
        return self.tree.find(uniform * self.tree.total)


class PairCategoryIndex:
    """Vertex pairs held in four swap-with-last arrays, one per category

    Pairs are keyed by ``u * n + v`` with ``u < v``. Category codes follow the c0, c1, d0, d1
    order of ``ColouredGraph.edge_category_rates``: bit 0 is edge presence, bit 1 discordance.
    A toggle moves one pair; a flip moves the ``n - 1`` pairs at the flipped vertex.
    """

    def __init__(self, graph: ColouredGraph) -> None:
        n = graph.n
        self.n = n
        rows, cols = np.triu_indices(n, 1)
        pair_ids = rows * n + cols
        discordant = graph.colours[rows] != graph.colours[cols]
        codes = 2 * discordant.astype(np.int64) + graph.adjacency[rows, cols]
        self.code = np.full(n * n, -1, dtype=np.int8)
        self.code[pair_ids] = codes
        self.position = np.full(n * n, -1, dtype=np.int64)
        self.members = np.zeros((4, pair_ids.size), dtype=np.int64)
        self.sizes = np.zeros(4, dtype=np.int64)
        for code in range(4):
            chosen = pair_ids[codes == code]
            self.members[code, : chosen.size] = chosen
            self.position[chosen] = np.arange(chosen.size)
            self.sizes[code] = chosen.size

    def pair_id(self, u: int, v: int) -> int:
        return u * self.n + v if u < v else v * self.n + u

    def counts(self) -> PairCounts:
        return PairCounts(*(int(size) for size in self.sizes))

    def category(self, code: int) -> NDArray[np.int64]:
        return self.members[code, : self.sizes[code]]

    def member(self, code: int, index: int) -> tuple[int, int]:
        u, v = divmod(int(self.members[code, index]), self.n)
        return u, v

    def _remove_one(self, code: int, pair: int) -> None:
        index = int(self.position[pair])
        last_index = int(self.sizes[code]) - 1
        last = int(self.members[code, last_index])
        self.members[code, index] = last
        self.position[last] = index
        self.sizes[code] = last_index

    def _insert_one(self, code: int, pair: int) -> None:
        size = int(self.sizes[code])
        self.members[code, size] = pair
        self.position[pair] = size
        self.sizes[code] = size + 1
        self.code[pair] = code

    def _remove(self, code: int, pairs: NDArray[np.int64]) -> None:
        size = int(self.sizes[code])
        kept = size - pairs.size
        positions = self.position[pairs]
        holes = positions[positions < kept]
        leaving = np.zeros(pairs.size, dtype=bool)
        leaving[positions[positions >= kept] - kept] = True
        survivors = self.members[code, kept:size][~leaving]
        self.members[code, holes] = survivors
        self.position[survivors] = holes
        self.sizes[code] = kept

    def _insert(self, code: int, pairs: NDArray[np.int64]) -> None:
        size = int(self.sizes[code])
        self.members[code, size : size + pairs.size] = pairs
        self.position[pairs] = np.arange(size, size + pairs.size)
        self.sizes[code] = size + pairs.size
        self.code[pairs] = code

    def toggled(self, u: int, v: int) -> None:
        pair = self.pair_id(u, v)
        code = int(self.code[pair])
        self._remove_one(code, pair)
        self._insert_one(code ^ 1, pair)

    def flipped(self, u: int) -> None:
        n = self.n
        others = np.delete(np.arange(n, dtype=np.int64), u)
        pairs = np.where(others < u, others * n + u, u * n + others)
        codes = self.code[pairs]
        groups = [pairs[codes == code] for code in range(4)]
        for code, group in enumerate(groups):
            self._remove(code, group)
        for code, group in enumerate(groups):
            self._insert(code ^ 2, group)


@dataclass
class SimState:
    """A graph together with the clock, event counter and random stream driving it

    Only ``fire`` should mutate ``graph`` during a run; the samplers are resynchronised at the
    start of ``run_until`` if the graph was changed in between.
    """

    graph: ColouredGraph
    params: ModelParams
    seed: int
    stream: int = 0
    clock: float = 0.0
    event_count: int = 0
    _uniforms: UniformBuffer = field(init=False, repr=False)
    _edges: PairCategoryIndex = field(init=False, repr=False)
    _flips: DiscordantDegreeSampler = field(init=False, repr=False)
    _seen_version: int = field(init=False, repr=False, default=0)

    def __post_init__(self) -> None:
        self._uniforms = UniformBuffer(make_generator(self.seed, self.stream))
        self._edges = PairCategoryIndex(self.graph)
        self._flips = DiscordantDegreeSampler(self.graph)
        self._seen_version = self.graph.version

    @property
    def flip_rate(self) -> float:
        return self.graph.total_flip_rate(self.params)

    @property
    def edge_category_rates(self) -> tuple[float, float, float, float]:
        return self.graph.edge_category_rates(self.params)

    @property
    def total_rate(self) -> float:
        return self.flip_rate + sum(self.edge_category_rates)

    def _sync(self) -> None:
        graph = self.graph
        if graph.version != self._seen_version or self._edges.counts() != graph.pair_counts:
            logger.debug("samplers out of step with the graph, rebuilding")
            self._edges = PairCategoryIndex(graph)
            self._flips = DiscordantDegreeSampler(graph)

    def _flip(self) -> None:
        u = self._flips.draw(self._uniforms.next())
        self.graph.flip(u)
        self._flips.flipped(u)
        self._edges.flipped(u)

    def _toggle(self, code: int) -> None:
        edges = self._edges
        u, v = edges.member(code, self._uniforms.below(int(edges.sizes[code])))
        self.graph.toggle(u, v)
        edges.toggled(u, v)
        self._flips.toggled(u, v, discordant=code >= 2)

    def fire(self, uniform: float) -> None:
        """Select and apply one event, using ``uniform`` to choose between flips and pair categories"""
        flip_rate = self.flip_rate
        category_rates = self.edge_category_rates
        r = uniform * (flip_rate + sum(category_rates))
        if r < flip_rate:
            self._flip()
            return
        r -= flip_rate
        chosen = None
        for code, rate in enumerate(category_rates):
            if rate <= 0:
                continue
            # rounding can leave r past the last non-empty category, which is then kept
            chosen = code
            if r < rate:
                break
            r -= rate
        if chosen is None:
            self._flip()
            return
        self._toggle(chosen)

    def run_until(
        self,
        until: float,
        checkpoints: Sequence[float] = (),
        record: Callable[[float], None] | None = None,
    ) -> None:
        """Advance the chain to time ``until``, calling ``record`` at each checkpoint

        A checkpoint sees the state left by the last event at or before it. The event that would
        overshoot ``until`` is discarded and the clock stops at ``until``; by memorylessness the
        continuation is unaffected.
        """
        self._sync()
        index = 0
        uniforms = self._uniforms
        while True:
            total = self.total_rate
            if total <= 0:
                t_next = math.inf
            else:
                t_next = self.clock + uniforms.exponential(total)
            while index < len(checkpoints) and checkpoints[index] < t_next and checkpoints[index] <= until:
                if record is not None:
                    record(checkpoints[index])
                index += 1
            if t_next > until:
                break
            self.fire(uniforms.next())
            self.clock = t_next
            self.event_count += 1
        self.clock = until
        self._seen_version = self.graph.version


def simulate(
    state: SimState,
    horizon: float,
    checkpoints: ArrayLike | int | None = None,
    observers: Sequence[Observer] | None = None,
    record_snapshots: bool = False,
) -> Trajectory:
    """Run the chain from ``state.clock`` to ``horizon`` and record observers at the checkpoints

    If the total rate drops to zero the state is absorbing and the remaining checkpoints repeat it.
    """
    grid = checkpoint_grid(horizon, checkpoints, start=state.clock)
    observers = list(observers) if observers is not None else [ScalarObserver()]
    columns = tuple(column for observer in observers for column in observer.columns)
    trajectory = Trajectory(
        columns=columns,
        metadata={
            "params": state.params.as_dict(),
            "seed": state.seed,
            "stream": state.stream,
            "n": state.graph.n,
        },
    )

    def record(t: float) -> None:
        values: dict[str, float] = {}
        for observer in observers:
            values.update(observer.observe(state.graph))
        trajectory.append(t, values, state.graph.copy() if record_snapshots else None)

    logger.info(
        "simulating n=%d to t=%g (seed=%d, stream=%d)", state.graph.n, horizon, state.seed, state.stream
    )
    state.run_until(horizon, grid, record)
    trajectory.metadata["event_count"] = state.event_count
    logger.info("finished stream %d after %d events", state.stream, state.event_count)
    return trajectory


def init_distance_kernel(n: int, seed: int, stream: int = 0) -> ColouredGraph:
    """Initial graph in conflict with the dynamics

    Vertices sit at positions ``i / n``; the first ``ceil(n / 2)`` are black. Concordant pairs at
    distance ``d`` connect with probability ``0.1 * (1 - d)``, discordant pairs with ``0.9 * (1 - d)``.
    """
    if n < 2:
        raise UsageError(f"need at least two vertices, got {n}")
    colours = np.full(n, WHITE, dtype=np.int8)
    colours[: math.ceil(n / 2)] = BLACK
    positions = np.arange(n) / n
    distance = np.abs(positions[:, None] - positions[None, :])
    concordant = colours[:, None] == colours[None, :]
    probability = np.where(concordant, 0.1, 0.9) * (1.0 - distance)
    rng = make_generator(seed, stream)
    upper = np.triu(rng.random((n, n)) < probability, 1)
    return ColouredGraph(colours, upper | upper.T)


def init_from_graphon(graphon: ColouredGraphon, n: int, seed: int, stream: int = 0) -> ColouredGraph:
    return sample_graph(graphon, n, seed, stream)


def distance_kernel_graphon(m: int = 64) -> ColouredGraphon:
    """Step-function version of the conflict initialisation on ``m`` cells

    Cells whose midpoint lies below 1/2 are black. The kernel takes the connection probabilities of
    ``init_distance_kernel`` at the cell midpoints.
    """
    if m < 2:
        raise UsageError(f"need at least two cells, got {m}")
    midpoints = (np.arange(m) + 0.5) / m
    colour = (midpoints >= 0.5).astype(np.float64)
    distance = np.abs(midpoints[:, None] - midpoints[None, :])
    concordant = colour[:, None] == colour[None, :]
    return ColouredGraphon(np.where(concordant, 0.1, 0.9) * (1.0 - distance), colour)
