"""Coloured graphs and the rates of the co-evolving voter chain

A vertex flips at rate ``eta`` times its discordant degree. A pair switches its edge status at rate
``rho * s``, where ``s`` is one of ``s_c0, s_c1, s_d0, s_d1`` picked by whether the endpoints agree
and whether the edge is present.
"""

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import UsageError

__all__ = [
    "BLACK",
    "WHITE",
    "ModelParams",
    "Flip",
    "Toggle",
    "Event",
    "PairCounts",
    "GraphSummary",
    "ColouredGraph",
]

logger = logging.getLogger(__name__)

BLACK = 0
WHITE = 1


@dataclass(frozen=True)
class ModelParams:
    """The six rate constants of the co-evolving voter dynamics

    A vertex flips at rate ``eta`` times its number of discordant neighbours. A pair of vertices
    switches its edge status at rate ``rho`` times one of the four dimensionless switching rates,
    selected by whether the pair is concordant (``c``) or discordant (``d``) and whether the
    edge is absent (``0``) or present (``1``).
    """

    eta: float
    rho: float
    s_c0: float
    s_c1: float
    s_d0: float
    s_d1: float

    def __post_init__(self) -> None:
        if not self.eta > 0:
            raise UsageError(f"eta must be positive, got {self.eta}")
        if not self.rho > 0:
            raise UsageError(f"rho must be positive, got {self.rho}")
        for name in ("s_c0", "s_c1", "s_d0", "s_d1"):
            value = getattr(self, name)
            if not value >= 0:
                raise UsageError(f"{name} must be non-negative, got {value}")

    @property
    def s_bar(self) -> float:
        """Largest of the four switching rates"""
        return max(self.s_c0, self.s_c1, self.s_d0, self.s_d1)

    def switch_rate(self, concordant: bool, present: bool) -> float:
        """Dimensionless switching rate for a pair in the given category"""
        if concordant:
            return self.s_c1 if present else self.s_c0
        return self.s_d1 if present else self.s_d0

    def replace(self, **changes: float) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)

    @classmethod
    def consensus_profile(cls) -> "ModelParams":
        """Rates of the run that drifts to consensus while rewiring towards p = 0.75"""
        return cls(eta=1.0, rho=1.1, s_c0=1.5, s_c1=0.5, s_d0=0.7, s_d1=2.0)

    @classmethod
    def polarisation_profile(cls) -> "ModelParams":
        """Rates of the run where edges only die and colours freeze before consensus"""
        return cls(eta=1.0, rho=2.0, s_c0=0.0, s_c1=1.0, s_d0=0.0, s_d1=1.0)


@dataclass(frozen=True, slots=True)
class Flip:
    """Flip the colour of vertex ``u``"""

    u: int


@dataclass(frozen=True, slots=True)
class Toggle:
    """Switch the status of the edge between ``u`` and ``v``"""

    u: int
    v: int


Event = Flip | Toggle


class PairCounts(NamedTuple):
    """Number of unordered vertex pairs in each (colour match, edge status) category"""

    c0: int
    c1: int
    d0: int
    d1: int


class GraphSummary(NamedTuple):
    q: float
    p: float
    C: float
    D: float
    discordant_count: int


class ColouredGraph:
    """A simple graph on ``n`` vertices with binary vertex colours (0 = black, 1 = white)

    Discordant degrees, degrees and the four pair-category counts are cached and kept in
    step with every flip and toggle. Flips cost O(n) vectorised work, toggles O(1).
    Mutating methods act in place.
    """

    def __init__(self, colours: ArrayLike, adjacency: ArrayLike | None = None) -> None:
        """Instantiates a ColouredGraph.

        Args:
            colours (ArrayLike): n values in {0, 1}.
            adjacency (ArrayLike | None): symmetric n x n boolean matrix with empty diagonal.
                    Defaults to the empty graph.
        """
        colours_array = np.array(colours, dtype=np.int8).reshape(-1)
        if colours_array.size and not np.isin(colours_array, (BLACK, WHITE)).all():
            raise UsageError("colours must be 0 (black) or 1 (white)")
        n = colours_array.size

        if adjacency is None:
            adjacency_array = np.zeros((n, n), dtype=bool)
        else:
            adjacency_array = np.array(adjacency, dtype=bool)
        if adjacency_array.shape != (n, n):
            raise UsageError(f"adjacency must have shape ({n}, {n}), got {adjacency_array.shape}")
        if not np.array_equal(adjacency_array, adjacency_array.T):
            raise UsageError("adjacency must be symmetric")
        if adjacency_array.diagonal().any():
            raise UsageError("self-loops are not allowed")

        self.n = n
        self.colours = colours_array
        self.adjacency = adjacency_array
        # bumped whenever any discordant degree changes; samplers key their caches on it
        self.version = 0
        self._recount()

    @classmethod
    def from_edges(cls, colours: ArrayLike, edges: ArrayLike) -> "ColouredGraph":
        colours_array = np.asarray(colours)
        n = colours_array.size
        adjacency = np.zeros((n, n), dtype=bool)
        edge_array = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if edge_array.size:
            if (edge_array < 0).any() or (edge_array >= n).any():
                raise UsageError("edge endpoint out of range")
            if (edge_array[:, 0] == edge_array[:, 1]).any():
                raise UsageError("self-loops are not allowed")
            adjacency[edge_array[:, 0], edge_array[:, 1]] = True
            adjacency[edge_array[:, 1], edge_array[:, 0]] = True
        return cls(colours_array, adjacency)

    @classmethod
    def complete(cls, colours: ArrayLike) -> "ColouredGraph":
        n = np.asarray(colours).size
        return cls(colours, ~np.eye(n, dtype=bool))

    def _recount(self) -> None:
        adjacency = self.adjacency
        discordant = self.colours[:, None] != self.colours[None, :]
        self.degree = adjacency.sum(axis=1).astype(np.int64)
        self.discordant_degree = (adjacency & discordant).sum(axis=1).astype(np.int64)
        self.whites = int(self.colours.sum(dtype=np.int64))
        self.edge_count = int(self.degree.sum()) // 2

        discordant_edges = int(self.discordant_degree.sum()) // 2
        discordant_pairs = self.whites * (self.n - self.whites)
        self.n_d1 = discordant_edges
        self.n_d0 = discordant_pairs - discordant_edges
        self.n_c1 = self.edge_count - discordant_edges
        self.n_c0 = self.n_pairs - discordant_pairs - self.n_c1

    @property
    def n_pairs(self) -> int:
        return self.n * (self.n - 1) // 2

    @property
    def discordant_count(self) -> int:
        """Number of present discordant edges"""
        return self.n_d1

    @property
    def pair_counts(self) -> PairCounts:
        return PairCounts(self.n_c0, self.n_c1, self.n_d0, self.n_d1)

    def _check_vertex(self, u: int) -> None:
        if not 0 <= u < self.n:
            raise UsageError(f"vertex {u} out of range for a graph on {self.n} vertices")

    def _check_pair(self, u: int, v: int) -> None:
        self._check_vertex(u)
        self._check_vertex(v)
        if u == v:
            raise UsageError(f"a pair needs two distinct vertices, got ({u}, {v})")

    # rates

    def vertex_flip_rate(self, u: int) -> int:
        """Number of neighbours of ``u`` with the opposite colour; the flip rate is eta times this"""
        self._check_vertex(u)
        return int(self.discordant_degree[u])

    def edge_switch_rate(self, u: int, v: int, params: ModelParams) -> float:
        """Switching rate of the pair ``{u, v}``; the edge switch rate is rho times this"""
        self._check_pair(u, v)
        concordant = bool(self.colours[u] == self.colours[v])
        return params.switch_rate(concordant, bool(self.adjacency[u, v]))

    def total_flip_rate(self, params: ModelParams) -> float:
        return params.eta * 2 * self.n_d1

    def edge_category_rates(self, params: ModelParams) -> tuple[float, float, float, float]:
        """Total edge-switch rate of each pair category, in (c0, c1, d0, d1) order"""
        rho = params.rho
        return (
            rho * params.s_c0 * self.n_c0,
            rho * params.s_c1 * self.n_c1,
            rho * params.s_d0 * self.n_d0,
            rho * params.s_d1 * self.n_d1,
        )

    def total_edge_rate(self, params: ModelParams) -> float:
        return sum(self.edge_category_rates(params))

    # transitions

    def flip(self, u: int) -> "ColouredGraph":
        self._check_vertex(u)
        colour = int(self.colours[u])
        neighbours = np.flatnonzero(self.adjacency[u])
        same = self.colours[neighbours] == colour
        same_present = int(same.sum())
        other_present = neighbours.size - same_present
        class_size = self.whites if colour == WHITE else self.n - self.whites
        same_absent = class_size - 1 - same_present
        other_absent = self.n - class_size - other_present

        self.discordant_degree[neighbours[same]] += 1
        self.discordant_degree[neighbours[~same]] -= 1
        self.discordant_degree[u] = same_present

        self.n_c1 += other_present - same_present
        self.n_d1 += same_present - other_present
        self.n_c0 += other_absent - same_absent
        self.n_d0 += same_absent - other_absent

        self.colours[u] = 1 - colour
        self.whites += 1 if colour == BLACK else -1
        self.version += 1
        return self

    def toggle(self, u: int, v: int) -> "ColouredGraph":
        self._check_pair(u, v)
        present = bool(self.adjacency[u, v])
        step = -1 if present else 1
        self.adjacency[u, v] = self.adjacency[v, u] = not present
        self.degree[u] += step
        self.degree[v] += step
        self.edge_count += step
        if self.colours[u] != self.colours[v]:
            self.discordant_degree[u] += step
            self.discordant_degree[v] += step
            self.n_d1 += step
            self.n_d0 -= step
            self.version += 1
        else:
            self.n_c1 += step
            self.n_c0 -= step
        return self

    def apply(self, event: Event) -> "ColouredGraph":
        """Apply a flip or a toggle in place and return the graph"""
        match event:
            case Flip(u):
                return self.flip(u)
            case Toggle(u, v):
                return self.toggle(u, v)
        raise UsageError(f"unknown event {event!r}")

    # statistics

    def summary(self) -> GraphSummary:
        """White fraction, edge density and the concordant/discordant split of the edge density"""
        if self.n == 0:
            raise UsageError("summary statistics need at least one vertex")
        pairs = self.n_pairs
        if pairs == 0:
            return GraphSummary(self.whites / self.n, 0.0, 0.0, 0.0, 0)
        return GraphSummary(
            q=self.whites / self.n,
            p=self.edge_count / pairs,
            C=self.n_c1 / pairs,
            D=self.n_d1 / pairs,
            discordant_count=self.n_d1,
        )

    def connectivity_nu(self) -> float:
        """Minimum over ordered vertex pairs (i = j included) of common neighbours divided by n"""
        if self.n < 2:
            raise UsageError("connectivity needs at least two vertices")
        # float32 products are exact for counts below 2**24
        adjacency = self.adjacency.astype(np.float32)
        common = adjacency @ adjacency
        return float(common.min()) / self.n

    def counts_consistent(self) -> bool:
        """Compare the cached counts against a recount from scratch"""
        fresh = ColouredGraph(self.colours, self.adjacency)
        return (
            fresh.pair_counts == self.pair_counts
            and fresh.whites == self.whites
            and fresh.edge_count == self.edge_count
            and np.array_equal(fresh.degree, self.degree)
            and np.array_equal(fresh.discordant_degree, self.discordant_degree)
        )

    # conversions

    def copy(self) -> "ColouredGraph":
        return ColouredGraph(self.colours.copy(), self.adjacency.copy())

    def permuted(self, order: ArrayLike) -> "ColouredGraph":
        """Graph whose vertex ``i`` is vertex ``order[i]`` of this graph"""
        index = np.asarray(order, dtype=np.int64)
        if sorted(index.tolist()) != list(range(self.n)):
            raise UsageError("order must be a permutation of the vertices")
        return ColouredGraph(self.colours[index], self.adjacency[np.ix_(index, index)])

    def edges(self) -> NDArray[np.int64]:
        """Edge list ``[[i, j], ...]`` with ``i < j`` in lexicographic order"""
        rows, cols = np.nonzero(np.triu(self.adjacency, 1))
        return np.stack([rows, cols], axis=1).astype(np.int64)

    def state_key(self) -> bytes:
        """Compact byte key of the labelled state (colours and upper-triangle adjacency)"""
        upper = self.adjacency[np.triu_indices(self.n, 1)]
        return self.colours.tobytes() + np.packbits(upper).tobytes()

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "colours": self.colours.astype(int).tolist(),
            "edges": self.edges().tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ColouredGraph":
        try:
            n = int(data["n"])
            colours = data["colours"]
            edges = data["edges"]
        except KeyError as e:
            raise UsageError(f"graph record is missing field {e}") from e
        if len(colours) != n:
            raise UsageError(f"graph record has n={n} but {len(colours)} colours")
        return cls.from_edges(colours, edges)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "ColouredGraph":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ColouredGraph):
            return NotImplemented
        return np.array_equal(self.colours, other.colours) and np.array_equal(
            self.adjacency, other.adjacency
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"ColouredGraph(n={self.n}, whites={self.whites}, edges={self.edge_count})"
