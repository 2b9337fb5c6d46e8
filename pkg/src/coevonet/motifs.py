"""Small coloured graphs used as test functions for subgraph densities

Vertex labels are 0-based. Every motif carries a canonical key: the lexicographically smallest
byte encoding of (size, colours, upper-triangle adjacency) over all vertex relabellings. Two
motifs share a key exactly when they are coloured-isomorphic.
"""

import itertools
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

import numpy as np
from numpy.typing import NDArray

from coevonet.exceptions import UsageError
from coevonet.model import BLACK, WHITE

__all__ = [
    "K_MAX",
    "Motif",
    "SetColour",
    "FlipColour",
    "AddVertex",
    "AddEdge",
    "RemoveEdge",
    "Merge",
    "EditOp",
    "graph_edit",
    "join",
    "merged_label",
    "enumerate_motifs",
    "colourings",
    "close_under_edge_deletion",
    "MotifCatalog",
]

K_MAX = 4

Pair = tuple[int, int]


def _normalise_edges(edges: Iterable[Sequence[int]]) -> frozenset[Pair]:
    normalised = set()
    for edge in edges:
        a, b = (int(x) for x in edge)
        if a == b:
            raise UsageError(f"self-loop ({a}, {b}) in motif")
        normalised.add((min(a, b), max(a, b)))
    return frozenset(normalised)


@lru_cache(maxsize=65536)
def _canonical(colours: tuple[int, ...], edges: tuple[Pair, ...]) -> tuple[bytes, tuple[int, ...]]:
    k = len(colours)
    edge_set = set(edges)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    best_key = None
    best_order: tuple[int, ...] = tuple(range(k))
    for order in itertools.permutations(range(k)):
        colour_bytes = bytes(colours[v] for v in order)
        adjacency = bytes(
            1 if (min(order[i], order[j]), max(order[i], order[j])) in edge_set else 0 for i, j in pairs
        )
        key = bytes([k]) + colour_bytes + adjacency
        if best_key is None or key < best_key:
            best_key, best_order = key, order
    assert best_key is not None
    return best_key, best_order


@dataclass(frozen=True)
class Motif:
    """A coloured graph on ``k`` labelled vertices"""

    colours: tuple[int, ...]
    edges: frozenset[Pair] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        colours = tuple(int(c) for c in self.colours)
        if not colours:
            raise UsageError("a motif needs at least one vertex")
        if any(c not in (BLACK, WHITE) for c in colours):
            raise UsageError("motif colours must be 0 (black) or 1 (white)")
        edges = _normalise_edges(self.edges)
        if any(b >= len(colours) for _, b in edges):
            raise UsageError("motif edge references an unknown vertex")
        object.__setattr__(self, "colours", colours)
        object.__setattr__(self, "edges", edges)

    @classmethod
    def vertex(cls, colour: int) -> "Motif":
        return cls((colour,))

    @classmethod
    def edge(cls, first: int, second: int, present: bool = True) -> "Motif":
        return cls((first, second), frozenset({(0, 1)}) if present else frozenset())

    @property
    def k(self) -> int:
        return len(self.colours)

    @property
    def white_count(self) -> int:
        return sum(self.colours)

    @property
    def black_count(self) -> int:
        return self.k - self.white_count

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def sorted_edges(self) -> list[Pair]:
        return sorted(self.edges)

    def has_edge(self, a: int, b: int) -> bool:
        return (min(a, b), max(a, b)) in self.edges

    def _check_label(self, *labels: int) -> None:
        for label in labels:
            if not 0 <= label < self.k:
                raise UsageError(f"unknown vertex label {label} in a motif on {self.k} vertices")

    @cached_property
    def _canonical_form(self) -> tuple[bytes, tuple[int, ...]]:
        return _canonical(self.colours, tuple(self.sorted_edges()))

    @property
    def canonical_key(self) -> bytes:
        return self._canonical_form[0]

    @property
    def label(self) -> str:
        """Hex form of the canonical key, used as a column name in motif tables"""
        return self.canonical_key.hex()

    def canonical(self) -> "Motif":
        """The representative of this motif's isomorphism class"""
        order = self._canonical_form[1]
        position = {v: i for i, v in enumerate(order)}
        return Motif(
            tuple(self.colours[v] for v in order),
            frozenset((position[a], position[b]) for a, b in self.edges),
        )

    def isomorphic(self, other: "Motif") -> bool:
        return self.canonical_key == other.canonical_key

    def uncoloured_key(self) -> bytes:
        """Key of the underlying uncoloured graph"""
        return Motif((BLACK,) * self.k, self.edges).canonical_key

    def colour_swapped(self) -> "Motif":
        return Motif(tuple(1 - c for c in self.colours), self.edges)

    # Table-1 graph operations

    def set_colour(self, a: int, colour: int) -> "Motif":
        self._check_label(a)
        colours = list(self.colours)
        colours[a] = colour
        return Motif(tuple(colours), self.edges)

    def flip_colour(self, a: int) -> "Motif":
        self._check_label(a)
        return self.set_colour(a, 1 - self.colours[a])

    def add_vertex(self, colour: int = BLACK) -> "Motif":
        """Add an isolated vertex with the next free label ``k``"""
        return Motif((*self.colours, colour), self.edges)

    def add_edge(self, a: int, b: int) -> "Motif":
        self._check_label(a, b)
        if a == b:
            raise UsageError("cannot add a self-loop")
        return Motif(self.colours, self.edges | {(min(a, b), max(a, b))})

    def remove_edge(self, a: int, b: int) -> "Motif":
        self._check_label(a, b)
        return Motif(self.colours, self.edges - {(min(a, b), max(a, b))})

    def merge(self, a: int, b: int) -> "Motif":
        """Identify vertex ``b`` with vertex ``a``

        The merged vertex keeps the colour of ``a`` and the union of both neighbourhoods. Labels
        above ``b`` shift down by one, so the merged vertex carries ``merged_label(a, b)``.
        """
        self._check_label(a, b)
        if a == b:
            raise UsageError("merge targets must be distinct vertices")
        relabel = {v: v - (v > b) for v in range(self.k) if v != b}
        relabel[b] = relabel[a]
        colours = tuple(self.colours[v] for v in range(self.k) if v != b)
        edges = set()
        for x, y in self.edges:
            u, w = relabel[x], relabel[y]
            if u != w:
                edges.add((min(u, w), max(u, w)))
        return Motif(colours, frozenset(edges))


def merged_label(a: int, b: int) -> int:
    """Label of the merged vertex after ``merge(a, b)``"""
    return a - (a > b)


@dataclass(frozen=True)
class SetColour:
    vertex: int
    colour: int


@dataclass(frozen=True)
class FlipColour:
    vertex: int


@dataclass(frozen=True)
class AddVertex:
    colour: int = BLACK


@dataclass(frozen=True)
class AddEdge:
    a: int
    b: int


@dataclass(frozen=True)
class RemoveEdge:
    a: int
    b: int


@dataclass(frozen=True)
class Merge:
    a: int
    b: int


EditOp = SetColour | FlipColour | AddVertex | AddEdge | RemoveEdge | Merge


def graph_edit(motif: Motif, *ops: EditOp) -> Motif:
    """Apply graph operations in sequence, read from left to right"""
    for op in ops:
        match op:
            case SetColour(vertex, colour):
                motif = motif.set_colour(vertex, colour)
            case FlipColour(vertex):
                motif = motif.flip_colour(vertex)
            case AddVertex(colour):
                motif = motif.add_vertex(colour)
            case AddEdge(a, b):
                motif = motif.add_edge(a, b)
            case RemoveEdge(a, b):
                motif = motif.remove_edge(a, b)
            case Merge(a, b):
                motif = motif.merge(a, b)
            case _:
                raise UsageError(f"unknown graph operation {op!r}")
    return motif


def join(first: Motif, a: int, second: Motif, b: int) -> Motif:
    """Disjoint union of two motifs with vertex ``a`` of ``first`` identified with ``b`` of ``second``

    Vertices of ``first`` keep their labels and colours; the remaining vertices of ``second`` take
    labels ``k, ..., k + k' - 2`` in their original order.
    """
    first._check_label(a)
    second._check_label(b)
    k = first.k
    relabel = {}
    next_label = k
    for v in range(second.k):
        if v == b:
            relabel[v] = a
        else:
            relabel[v] = next_label
            next_label += 1
    colours = first.colours + tuple(second.colours[v] for v in range(second.k) if v != b)
    edges = set(first.edges)
    for x, y in second.edges:
        u, w = relabel[x], relabel[y]
        edges.add((min(u, w), max(u, w)))
    return Motif(colours, frozenset(edges))


@lru_cache(maxsize=None)
def _motifs_of_size(k: int) -> tuple[Motif, ...]:
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    found: dict[bytes, Motif] = {}
    for colours in itertools.product((BLACK, WHITE), repeat=k):
        for mask in range(1 << len(pairs)):
            edges = frozenset(pair for bit, pair in enumerate(pairs) if mask >> bit & 1)
            motif = Motif(colours, edges)
            found.setdefault(motif.canonical_key, motif.canonical())
    return tuple(found[key] for key in sorted(found))


def enumerate_motifs(k: int, max_size: int = K_MAX) -> list[Motif]:
    """One representative per coloured-isomorphism class on exactly ``k`` vertices"""
    if not 1 <= k <= max_size:
        raise UsageError(f"motif size must be between 1 and {max_size}, got {k}")
    return list(_motifs_of_size(k))


def colourings(motif: Motif) -> list[Motif]:
    """All 2**k colourings of the labelled underlying graph of ``motif``"""
    return [Motif(colours, motif.edges) for colours in itertools.product((BLACK, WHITE), repeat=motif.k)]


def close_under_edge_deletion(motifs: Iterable[Motif]) -> list[Motif]:
    """Input motifs (canonicalised, in order) followed by any missing edge-deleted descendants"""
    closed: dict[bytes, Motif] = {}
    queue = [m.canonical() for m in motifs]
    while queue:
        motif = queue.pop(0)
        if motif.canonical_key in closed:
            continue
        closed[motif.canonical_key] = motif
        queue.extend(motif.remove_edge(a, b).canonical() for a, b in motif.sorted_edges())
    return list(closed.values())


@dataclass(frozen=True)
class MotifCatalog:
    """Every coloured motif on 1..K vertices, ordered by (size, canonical key)"""

    max_size: int
    motifs: tuple[Motif, ...]

    @classmethod
    def build(cls, max_size: int, limit: int = K_MAX) -> "MotifCatalog":
        if not 1 <= max_size <= limit:
            raise UsageError(f"catalog size must be between 1 and {limit}, got {max_size}")
        motifs = tuple(m for k in range(1, max_size + 1) for m in enumerate_motifs(k, limit))
        return cls(max_size=max_size, motifs=motifs)

    @property
    def weights(self) -> NDArray[np.float64]:
        """Series weights 2**-i for the i-th motif, i starting at 1"""
        return 0.5 ** np.arange(1, len(self.motifs) + 1, dtype=np.float64)

    @property
    def truncation_bound(self) -> float:
        """Total weight of the motifs beyond this catalog in the infinite series"""
        return 0.5 ** len(self.motifs)

    @property
    def labels(self) -> list[str]:
        return [m.label for m in self.motifs]

    def index(self, motif: Motif) -> int:
        key = motif.canonical_key
        for i, candidate in enumerate(self.motifs):
            if candidate.canonical_key == key:
                return i
        raise UsageError(f"motif {motif} is not in the size-{self.max_size} catalog")

    def __len__(self) -> int:
        return len(self.motifs)

    def __iter__(self) -> Iterator[Motif]:
        return iter(self.motifs)
