"""Generator coefficients for coloured subgraph densities

A colour flip or an edge switch moves each motif density by amounts that are again motif densities,
so drift and diffusion coefficients are sums of densities over signed multisets of motifs built by
small graph edits. An exhaustive oracle evaluates the generator of the chain on any function of a
small graph, which is the reference every coefficient formula is checked against.
"""

import enum
import itertools
import logging
from collections.abc import Callable, Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Literal, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import UsageError
from coevonet.graphon import (
    GRAPH_DENSITY_MAX_SIZE,
    ColouredGraphon,
    embed,
    graph_density,
    motif_density,
    motif_density_injective,
    projected_density_vector,
    uncoloured_density,
)
from coevonet.model import BLACK, WHITE, ColouredGraph, ModelParams
from coevonet.motifs import (
    AddEdge,
    AddVertex,
    FlipColour,
    Merge,
    Motif,
    colourings,
    enumerate_motifs,
    graph_edit,
    join,
    merged_label,
)
from coevonet.streams import make_generator

__all__ = [
    "ORACLE_MAX_SIZE",
    "SignedMotifMultiset",
    "MultisetKind",
    "PairKind",
    "build_multiset",
    "build_T",
    "DensityCache",
    "Coefficients",
    "coefficients",
    "exact_generator_oracle",
    "density_functional",
    "SmoothFunction",
    "Expansion",
    "generator_expansion",
    "ProjectedGenerator",
    "projected_generator",
    "ColourSumReport",
    "verify_colour_sums",
    "random_graph",
    "all_graphs",
    "verification_report",
]

logger = logging.getLogger(__name__)

ORACLE_MAX_SIZE = 64

# fitted constants C = n * residual must not grow with n beyond this relative slack
C_RELATIVE_SLACK = 1e-9

# every coloured graph is checked up to this size; larger sizes are sampled
EXHAUSTIVE_MAX_N = 4

INJECTIVE_TOLERANCE = 1e-9


class SignedMotifMultiset:
    """Isomorphism classes of motifs with integer multiplicities

    Entries are keyed by canonical key, so isomorphic motifs merge on insertion and cancel
    structurally. Zero multiplicities are dropped.
    """

    def __init__(self, motifs: Iterable[Motif] = ()) -> None:
        self._counts: dict[bytes, int] = {}
        self._representatives: dict[bytes, Motif] = {}
        for motif in motifs:
            self.add(motif)

    def add(self, motif: Motif, multiplicity: int = 1) -> None:
        key = motif.canonical_key
        count = self._counts.get(key, 0) + multiplicity
        if count == 0:
            self._counts.pop(key, None)
            self._representatives.pop(key, None)
        else:
            self._counts[key] = count
            self._representatives.setdefault(key, motif.canonical())

    def copy(self) -> "SignedMotifMultiset":
        result = SignedMotifMultiset()
        result._counts = dict(self._counts)
        result._representatives = dict(self._representatives)
        return result

    def _combined(self, other: "SignedMotifMultiset", sign: int) -> "SignedMotifMultiset":
        if not isinstance(other, SignedMotifMultiset):
            return NotImplemented
        result = self.copy()
        for motif, count in other.items():
            result.add(motif, sign * count)
        return result

    def __add__(self, other: "SignedMotifMultiset") -> "SignedMotifMultiset":
        return self._combined(other, 1)

    def __sub__(self, other: "SignedMotifMultiset") -> "SignedMotifMultiset":
        return self._combined(other, -1)

    def __neg__(self) -> "SignedMotifMultiset":
        return SignedMotifMultiset() - self

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignedMotifMultiset):
            return NotImplemented
        return self._counts == other._counts

    __hash__ = None  # type: ignore[assignment]

    def __len__(self) -> int:
        return len(self._counts)

    def __bool__(self) -> bool:
        return bool(self._counts)

    def items(self) -> Iterator[tuple[Motif, int]]:
        for key in sorted(self._counts):
            yield self._representatives[key], self._counts[key]

    def multiplicity(self, motif: Motif) -> int:
        return self._counts.get(motif.canonical_key, 0)

    def dump(self) -> list[tuple[str, int]]:
        """(canonical key in hex, multiplicity) pairs in key order"""
        return [(motif.label, count) for motif, count in self.items()]

    def density_sum(self, density: Callable[[Motif], Any]) -> Any:
        total: Any = 0
        for motif, count in self.items():
            total += count * density(motif)
        return total

    def apply(self, build: Callable[[Motif], "SignedMotifMultiset"]) -> "SignedMotifMultiset":
        """Linear extension of a per-motif construction"""
        result = SignedMotifMultiset()
        for motif, count in self.items():
            for image, image_count in build(motif).items():
                result.add(image, count * image_count)
        return result

    def __repr__(self) -> str:
        return f"SignedMotifMultiset({self.dump()})"


class MultisetKind(enum.Enum):
    S_PLUS = "S+"
    S_MINUS = "S-"
    S = "S"
    S_CIRC_PLUS = "So+"
    S_CIRC_MINUS = "So-"
    S_CIRC = "So"
    S_DIAMOND_PLUS = "Sd+"
    S_DIAMOND_MINUS = "Sd-"
    S_DIAMOND = "Sd"
    # same-colour, non-adjacent merges F(a=b)
    S_DIAMOND_MERGE = "Sd="
    # merge corrections of the regular-density vertex drift
    S_DIAMOND_REGULAR = "Sd_reg"


class PairKind(enum.Enum):
    T_EQ_PLUS = "T=+"
    T_EQ_MINUS = "T=-"
    T_NE_PLUS = "T!=+"
    T_NE_MINUS = "T!=-"
    T = "T"


def _attach_same_then_flip(motif: Motif, vertex: int, colour: int) -> Motif:
    """Add a vertex of ``colour`` attached to ``vertex``, then flip ``vertex``"""
    new = motif.k
    return graph_edit(motif, AddVertex(colour), AddEdge(vertex, new), FlipColour(vertex))


def _attach(motif: Motif, vertex: int, colour: int) -> Motif:
    new = motif.k
    return graph_edit(motif, AddVertex(colour), AddEdge(vertex, new))


def _s_plus(motif: Motif) -> list[Motif]:
    return [_attach_same_then_flip(motif, p, motif.colours[p]) for p in range(motif.k)]


def _s_minus(motif: Motif) -> list[Motif]:
    return [_attach(motif, p, 1 - motif.colours[p]) for p in range(motif.k)]


def _ordered_pairs(motif: Motif, same_colour: bool) -> Iterator[tuple[int, int]]:
    for p, q in itertools.permutations(range(motif.k), 2):
        if (motif.colours[p] == motif.colours[q]) == same_colour:
            yield p, q


def _s_circ_plus(motif: Motif) -> list[Motif]:
    return [graph_edit(motif, FlipColour(p), AddEdge(p, q)) for p, q in _ordered_pairs(motif, True)]


def _s_circ_minus(motif: Motif) -> list[Motif]:
    return [graph_edit(motif, AddEdge(p, q)) for p, q in _ordered_pairs(motif, False)]


def _mergeable(motif: Motif, same_colour: bool) -> Iterator[tuple[int, int]]:
    for a, b in _ordered_pairs(motif, same_colour):
        if not motif.has_edge(a, b):
            yield a, b


def _merge_attach_flip(motif: Motif, a: int, b: int) -> Motif:
    merged = motif.merge(a, b)
    return _attach_same_then_flip(merged, merged_label(a, b), motif.colours[a])


def _s_diamond_plus(motif: Motif) -> list[Motif]:
    return [_merge_attach_flip(motif, a, b) for a, b in _mergeable(motif, True)]


def _s_diamond_minus(motif: Motif) -> list[Motif]:
    return [_merge_attach_flip(motif, a, b) for a, b in _mergeable(motif, False)]


def _s_diamond_merge(motif: Motif) -> list[Motif]:
    return [graph_edit(motif, Merge(a, b)) for a, b in _mergeable(motif, True)]


def _s_diamond_regular(motif: Motif) -> SignedMotifMultiset:
    """Corrections from tuples that place one flipped vertex at two positions of the motif

    An unordered same-colour pair contributes the flipped merge with a same-colour neighbour and
    the unflipped merge with an opposite-colour neighbour. An ordered mixed-colour pair contributes
    ``-1`` times its ``S◇-`` element.
    """
    result = SignedMotifMultiset()
    for a, b in _mergeable(motif, True):
        if a > b:
            continue
        merged = motif.merge(a, b)
        vertex = merged_label(a, b)
        result.add(_attach_same_then_flip(merged, vertex, motif.colours[a]))
        result.add(_attach(merged, vertex, 1 - motif.colours[a]))
    for image in _s_diamond_minus(motif):
        result.add(image, -1)
    return result


def _signed(plus: Iterable[Motif], minus: Iterable[Motif] = ()) -> SignedMotifMultiset:
    result = SignedMotifMultiset(plus)
    for motif in minus:
        result.add(motif, -1)
    return result


_BUILDERS: dict[MultisetKind, Callable[[Motif], SignedMotifMultiset]] = {
    MultisetKind.S_PLUS: lambda f: _signed(_s_plus(f)),
    MultisetKind.S_MINUS: lambda f: _signed(_s_minus(f)),
    MultisetKind.S: lambda f: _signed(_s_plus(f), _s_minus(f)),
    MultisetKind.S_CIRC_PLUS: lambda f: _signed(_s_circ_plus(f)),
    MultisetKind.S_CIRC_MINUS: lambda f: _signed(_s_circ_minus(f)),
    MultisetKind.S_CIRC: lambda f: _signed(_s_circ_plus(f), _s_circ_minus(f)),
    MultisetKind.S_DIAMOND_PLUS: lambda f: _signed(_s_diamond_plus(f)),
    MultisetKind.S_DIAMOND_MINUS: lambda f: _signed(_s_diamond_minus(f)),
    MultisetKind.S_DIAMOND: lambda f: _signed(_s_diamond_plus(f), _s_diamond_minus(f)),
    MultisetKind.S_DIAMOND_MERGE: lambda f: _signed(_s_diamond_merge(f)),
    MultisetKind.S_DIAMOND_REGULAR: _s_diamond_regular,
}

# size change of each construction
_GROWTH = {
    MultisetKind.S_CIRC_PLUS: 0,
    MultisetKind.S_CIRC_MINUS: 0,
    MultisetKind.S_CIRC: 0,
    MultisetKind.S_DIAMOND_PLUS: 0,
    MultisetKind.S_DIAMOND_MINUS: 0,
    MultisetKind.S_DIAMOND: 0,
    MultisetKind.S_DIAMOND_MERGE: -1,
    MultisetKind.S_DIAMOND_REGULAR: 0,
}


@lru_cache(maxsize=4096)
def _cached_multiset(motif: Motif, kind: MultisetKind) -> SignedMotifMultiset:
    return _BUILDERS[kind](motif)


def build_multiset(
    motif: Motif, kind: MultisetKind | str, max_size: int = GRAPH_DENSITY_MAX_SIZE
) -> SignedMotifMultiset:
    """Signed multiset of one of the drift constructions applied to ``motif``

    Raises
    ------
        UsageError: if the resulting motifs would exceed ``max_size`` vertices
    """
    kind = MultisetKind(kind)
    size = motif.k + _GROWTH.get(kind, 1)
    if size > max_size:
        raise UsageError(
            f"{kind.value}({motif.label}) has motifs on {size} vertices, above the limit {max_size}"
        )
    return _cached_multiset(motif, kind).copy()


def _t_images(first: Motif, second: Motif, same_colour: bool, flip: bool) -> list[Motif]:
    images = []
    for a in range(first.k):
        for b in range(second.k):
            if (first.colours[a] == second.colours[b]) != same_colour:
                continue
            joined = join(first, a, second, b)
            colour = first.colours[a]
            if flip:
                images.append(_attach_same_then_flip(joined, a, colour))
            else:
                images.append(_attach(joined, a, 1 - colour))
    return images


@lru_cache(maxsize=4096)
def _cached_pair(first: Motif, second: Motif, kind: PairKind) -> SignedMotifMultiset:
    if kind is PairKind.T:
        return _signed(
            _t_images(first, second, True, True) + _t_images(first, second, True, False),
            _t_images(first, second, False, True) + _t_images(first, second, False, False),
        )
    same_colour = kind in (PairKind.T_EQ_PLUS, PairKind.T_EQ_MINUS)
    flip = kind in (PairKind.T_EQ_PLUS, PairKind.T_NE_PLUS)
    return _signed(_t_images(first, second, same_colour, flip))


def build_T(
    first: Motif, second: Motif, kind: PairKind | str = PairKind.T, max_size: int = GRAPH_DENSITY_MAX_SIZE
) -> SignedMotifMultiset:
    """Join one vertex of ``first`` with one of ``second`` and attach a new vertex to the merged one

    The merged vertex keeps the colour of the ``first`` vertex. ``+`` kinds give the new vertex
    that colour and flip the merged vertex; ``-`` kinds give it the opposite colour.
    """
    kind = PairKind(kind)
    size = first.k + second.k
    if size > max_size:
        raise UsageError(
            f"{kind.value}({first.label}, {second.label}) has motifs on {size} vertices, "
            f"above the limit {max_size}"
        )
    return _cached_pair(first, second, kind).copy()


class DensityCache:
    """Memoised motif densities of one graph or graphon

    On graphons the injective density is the regular one. ``exact`` returns Fractions and is only
    available for finite graphs.
    """

    def __init__(
        self,
        source: ColouredGraph | ColouredGraphon,
        exact: bool = False,
        max_size: int = GRAPH_DENSITY_MAX_SIZE,
    ) -> None:
        if exact and not isinstance(source, ColouredGraph):
            raise UsageError("exact densities need a finite graph")
        self.source = source
        self.exact = exact
        self.max_size = max_size
        self._regular: dict[bytes, Any] = {}
        self._injective: dict[bytes, Any] = {}
        self._uncoloured: dict[bytes, Any] = {}

    @property
    def n(self) -> int | None:
        return self.source.n if isinstance(self.source, ColouredGraph) else None

    def regular(self, motif: Motif) -> Any:
        key = motif.canonical_key
        if key not in self._regular:
            if isinstance(self.source, ColouredGraph):
                self._regular[key] = graph_density(self.source, motif, exact=self.exact)
            else:
                self._regular[key] = motif_density(self.source, motif, self.max_size)
        return self._regular[key]

    def injective(self, motif: Motif) -> Any:
        if not isinstance(self.source, ColouredGraph):
            return self.regular(motif)
        key = motif.canonical_key
        if key not in self._injective:
            self._injective[key] = motif_density_injective(self.source, motif, exact=self.exact)
        return self._injective[key]

    def uncoloured(self, motif: Motif) -> Any:
        key = motif.uncoloured_key()
        if key not in self._uncoloured:
            if isinstance(self.source, ColouredGraph):
                self._uncoloured[key] = graph_density(self.source, motif, exact=self.exact, coloured=False)
            else:
                self._uncoloured[key] = uncoloured_density(self.source, motif, self.max_size)
        return self._uncoloured[key]


class _Rates(NamedTuple):
    eta: Any
    rho: Any
    s_c0: Any
    s_c1: Any
    s_d0: Any
    s_d1: Any


def _rates(params: ModelParams, exact: bool) -> _Rates:
    values = (params.eta, params.rho, params.s_c0, params.s_c1, params.s_d0, params.s_d1)
    if exact:
        return _Rates(*(Fraction(v) for v in values))
    return _Rates(*values)


def _edge_drift(motif: Motif, density: Callable[[Motif], Any], rates: _Rates) -> Any:
    total: Any = 0
    value = density(motif)
    for r, s in motif.sorted_edges():
        concordant = motif.colours[r] == motif.colours[s]
        connect = rates.s_c0 if concordant else rates.s_d0
        disconnect = rates.s_c1 if concordant else rates.s_d1
        total += connect * (density(motif.remove_edge(r, s)) - value) - disconnect * value
    return total


def _vertex_drift(motif: Motif, cache: DensityCache, n: int) -> Any:
    """Regular-density vertex drift: ``n`` times the attach sum plus the merge corrections"""
    attach = build_multiset(motif, MultisetKind.S, cache.max_size)
    corrections = build_multiset(motif, MultisetKind.S_DIAMOND_REGULAR, cache.max_size)
    return n * attach.density_sum(cache.regular) + corrections.density_sum(cache.regular)


class Coefficients(NamedTuple):
    """Vertex drift, edge drift and vertex diffusion in both density flavours

    ``mu_v_tabulated`` is the regular vertex drift in its tabulated form, kept for comparison; it
    differs from ``mu_v`` by O(1).
    """

    mu_v: Any
    mu_e: Any
    sigma_v: Any
    mu_v_injective: Any
    mu_e_injective: Any
    sigma_v_injective: Any
    mu_v_tabulated: Any


def coefficients(
    motif: Motif,
    other: Motif,
    source: ColouredGraph | ColouredGraphon | DensityCache,
    params: ModelParams,
    n: int | None = None,
    exact: bool = False,
) -> Coefficients:
    """Drift coefficients of ``motif`` and the diffusion coefficient of the pair (``motif``, ``other``)

    Args:
        motif: motif whose drift is evaluated
        other: second motif of the diffusion coefficient
        source: graph, graphon or a DensityCache over either
        params: model rates
        n: vertex count entering the vertex drift; taken from the graph when the source is finite
        exact: Fraction arithmetic, finite graphs only
    """
    cache = source if isinstance(source, DensityCache) else DensityCache(source, exact=exact)
    if cache.n is not None:
        if n is not None and n != cache.n:
            raise UsageError(f"n={n} does not match the graph size {cache.n}")
        n = cache.n
    if n is None:
        raise UsageError("vertex drift on a graphon needs an explicit n")
    rates = _rates(params, cache.exact)
    k = motif.k
    max_size = cache.max_size

    s = build_multiset(motif, MultisetKind.S, max_size)
    s_circ = build_multiset(motif, MultisetKind.S_CIRC, max_size)
    s_diamond = build_multiset(motif, MultisetKind.S_DIAMOND, max_size)
    t = build_T(motif, other, PairKind.T, max_size)

    return Coefficients(
        mu_v=_vertex_drift(motif, cache, n),
        mu_e=_edge_drift(motif, cache.regular, rates),
        sigma_v=t.density_sum(cache.regular),
        mu_v_injective=(n - k) * s.density_sum(cache.injective) + s_circ.density_sum(cache.injective),
        mu_e_injective=_edge_drift(motif, cache.injective, rates),
        sigma_v_injective=t.density_sum(cache.injective),
        mu_v_tabulated=(n - k) * s.density_sum(cache.regular)
        + s_circ.density_sum(cache.regular)
        + s_diamond.density_sum(cache.regular),
    )


def exact_generator_oracle(
    graph: ColouredGraph,
    f: Callable[[ColouredGraph], Any],
    params: ModelParams,
    exact: bool = False,
) -> Any:
    """Generator of the chain applied to ``f`` at ``graph``, by enumerating every transition"""
    if graph.n > ORACLE_MAX_SIZE:
        raise UsageError(f"oracle enumeration is limited to n <= {ORACLE_MAX_SIZE}, got {graph.n}")
    rates = _rates(params, exact)
    base = f(graph)
    total: Any = 0
    for u in range(graph.n):
        count = graph.vertex_flip_rate(u)
        if count:
            total += rates.eta * count * (f(graph.copy().flip(u)) - base)
    for u, v in itertools.combinations(range(graph.n), 2):
        concordant = graph.colours[u] == graph.colours[v]
        present = bool(graph.adjacency[u, v])
        if concordant:
            rate = rates.s_c1 if present else rates.s_c0
        else:
            rate = rates.s_d1 if present else rates.s_d0
        if rate:
            total += rates.rho * rate * (f(graph.copy().toggle(u, v)) - base)
    return total


DensityKind = Literal["regular", "injective", "projected"]


def density_functional(
    motifs: Sequence[Motif], kind: DensityKind = "regular", exact: bool = False
) -> Callable[[ColouredGraph], list[Any]]:
    """Map a graph to its densities of ``motifs``; ``projected`` evaluates them after projection"""
    if kind == "projected":
        if exact:
            raise UsageError("projected densities are evaluated in floating point only")
        return lambda graph: projected_density_vector(embed(graph), motifs).tolist()
    if kind == "injective":
        return lambda graph: [motif_density_injective(graph, m, exact=exact) for m in motifs]
    if kind == "regular":
        return lambda graph: [graph_density(graph, m, exact=exact) for m in motifs]
    raise UsageError(f"unknown density kind {kind!r}")


@dataclass(frozen=True)
class SmoothFunction:
    """A test function of a density vector with its first and second derivatives"""

    value: Callable[[NDArray[np.float64]], float]
    gradient: Callable[[NDArray[np.float64]], NDArray[np.float64]]
    hessian: Callable[[NDArray[np.float64]], NDArray[np.float64]]

    def __call__(self, y: ArrayLike) -> float:
        return self.value(np.asarray(y, dtype=np.float64))

    @classmethod
    def linear(cls, b: ArrayLike) -> "SmoothFunction":
        coefficients_ = np.asarray(b, dtype=np.float64)
        d = coefficients_.size
        return cls(
            value=lambda y: float(coefficients_ @ y),
            gradient=lambda y: coefficients_.copy(),
            hessian=lambda y: np.zeros((d, d)),
        )

    @classmethod
    def quadratic(cls, Q: ArrayLike, b: ArrayLike | None = None) -> "SmoothFunction":
        """``h(y) = y^T Q y / 2 + b^T y`` with ``Q`` symmetrised"""
        matrix = np.asarray(Q, dtype=np.float64)
        matrix = 0.5 * (matrix + matrix.T)
        linear_term = np.zeros(matrix.shape[0]) if b is None else np.asarray(b, dtype=np.float64)
        return cls(
            value=lambda y: float(0.5 * y @ matrix @ y + linear_term @ y),
            gradient=lambda y: matrix @ y + linear_term,
            hessian=lambda y: matrix.copy(),
        )


class Expansion(NamedTuple):
    first_order: float
    second_order: float

    @property
    def total(self) -> float:
        return self.first_order + self.second_order


def generator_expansion(
    graph: ColouredGraph,
    motifs: Sequence[Motif],
    h: SmoothFunction,
    params: ModelParams,
    injective: bool = True,
) -> Expansion:
    """Drift and half-diffusion terms of the generator applied to ``h`` of the density vector

    The oracle applied to ``h`` of the same densities differs from ``total`` by O(1/n).
    """
    cache = DensityCache(graph)
    density = cache.injective if injective else cache.regular
    y = np.array([density(m) for m in motifs], dtype=np.float64)
    gradient = h.gradient(y)
    hessian = h.hessian(y)
    first = 0.0
    second = 0.0
    for i, motif in enumerate(motifs):
        for j, other in enumerate(motifs):
            record = coefficients(motif, other, cache, params)
            if j == 0:
                mu_v = record.mu_v_injective if injective else record.mu_v
                mu_e = record.mu_e_injective if injective else record.mu_e
                first += (params.eta * mu_v + params.rho * mu_e) * gradient[i]
            sigma = record.sigma_v_injective if injective else record.sigma_v
            second += 0.5 * params.eta * sigma * hessian[i, j]
    return Expansion(float(first), float(second))


@dataclass
class ProjectedGenerator:
    """Main groups and remainder terms of the generator on densities of the projected graph

    Vertex groups are None when the graph is monochromatic; there are no discordant edges then, so
    colours cannot move and the generator has no vertex part.
    """

    edge_drift: float
    diagonal: float | None
    cross: float | None
    delta_c0: float
    delta_d0: float
    delta_c1: float
    delta_d1: float
    delta_ww: float | None
    delta_wb: float | None
    delta_bb: float | None
    params: ModelParams = field(repr=False)

    @property
    def applicable(self) -> bool:
        return self.diagonal is not None

    @property
    def main(self) -> float:
        return self.edge_drift + (self.diagonal or 0.0) + (self.cross or 0.0)

    @property
    def remainder(self) -> float:
        p = self.params
        edge = (
            p.s_c0 * self.delta_c0 + p.s_d0 * self.delta_d0 + p.s_c1 * self.delta_c1 + p.s_d1 * self.delta_d1
        )
        vertex = (self.delta_ww or 0.0) + (self.delta_wb or 0.0) + (self.delta_bb or 0.0)
        return p.rho * edge + p.eta * vertex

    @property
    def total(self) -> float:
        return self.main + self.remainder

    def to_dict(self) -> dict[str, Any]:
        return {
            "edge_drift": self.edge_drift,
            "diagonal": self.diagonal,
            "cross": self.cross,
            "delta_c0": self.delta_c0,
            "delta_d0": self.delta_d0,
            "delta_c1": self.delta_c1,
            "delta_d1": self.delta_d1,
            "delta_ww": self.delta_ww,
            "delta_wb": self.delta_wb,
            "delta_bb": self.delta_bb,
            "main": self.main,
            "remainder": self.remainder,
            "total": self.total,
            "applicable": self.applicable,
        }


def projected_generator(
    h: SmoothFunction, motifs: Sequence[Motif], graph: ColouredGraph, params: ModelParams
) -> ProjectedGenerator:
    """Generator applied to ``h`` of the densities of ``project(embed(graph))``, split into groups

    With ``x`` the densities of the graph and ``y`` those of its projection, the vertex part is
    ``eta * x_wb * d^2/dq^2 h(y)`` along the colour density. The main groups evaluate it and the edge
    drift at ``y``; the remainders carry the differences ``x_H - y_H``. Main plus remainder equals
    the second-order expansion exactly and the oracle up to O(1/n).
    """
    cache = DensityCache(graph)
    x_w = cache.regular(Motif.vertex(WHITE))
    x_b = 1.0 - x_w
    white_black = Motif.edge(WHITE, BLACK)
    x_wb = cache.regular(white_black)
    y_wb = x_w * x_b * cache.uncoloured(white_black)

    def y(motif: Motif) -> float:
        return x_w**motif.white_count * x_b**motif.black_count * cache.uncoloured(motif)

    def delta(motif: Motif) -> float:
        return cache.regular(motif) - y(motif)

    values = np.array([y(m) for m in motifs])
    gradient = h.gradient(values)
    hessian = h.hessian(values)
    whites = np.array([m.white_count for m in motifs], dtype=np.float64)
    blacks = np.array([m.black_count for m in motifs], dtype=np.float64)

    concordant_mass = x_w**2 + x_b**2
    discordant_mass = 2 * x_w * x_b
    connect = params.s_c0 * concordant_mass + params.s_d0 * discordant_mass
    disconnect = params.s_c1 * concordant_mass + params.s_d1 * discordant_mass

    edge_drift = 0.0
    deltas = {"c0": 0.0, "d0": 0.0, "c1": 0.0, "d1": 0.0}
    for i, motif in enumerate(motifs):
        bracket = sum(connect * (y(motif.remove_edge(r, s)) - values[i]) for r, s in motif.sorted_edges())
        bracket -= motif.edge_count * disconnect * values[i]
        edge_drift += bracket * gradient[i]

        weight = x_w**motif.white_count * x_b**motif.black_count * gradient[i]
        for r, s in motif.sorted_edges():
            for colouring in colourings(motif):
                key = "c" if colouring.colours[r] == colouring.colours[s] else "d"
                here = delta(colouring)
                deltas[f"{key}0"] += weight * (delta(colouring.remove_edge(r, s)) - here)
                deltas[f"{key}1"] -= weight * here
    edge_drift *= params.rho

    diagonal = cross = delta_ww = delta_wb = delta_bb = None
    if x_w > 0 and x_b > 0:
        slope = whites / x_w - blacks / x_b
        curvature = slope**2 - (whites / x_w**2 + blacks / x_b**2)
        diagonal = float(params.eta * y_wb * np.sum(curvature * values * gradient))
        weighted = slope * values
        cross = float(params.eta * y_wb * weighted @ hessian @ weighted)

        gap = x_wb - y_wb
        falling_w = whites * (whites - 1)
        falling_b = blacks * (blacks - 1)
        white_values = whites * values
        black_values = blacks * values
        delta_ww = float(
            gap / x_w**2 * (np.sum(falling_w * values * gradient) + white_values @ hessian @ white_values)
        )
        delta_wb = float(
            -gap
            * 2
            / (x_w * x_b)
            * (np.sum(whites * blacks * values * gradient) + white_values @ hessian @ black_values)
        )
        delta_bb = float(
            gap / x_b**2 * (np.sum(falling_b * values * gradient) + black_values @ hessian @ black_values)
        )

    return ProjectedGenerator(
        edge_drift=float(edge_drift),
        diagonal=diagonal,
        cross=cross,
        delta_c0=float(deltas["c0"]),
        delta_d0=float(deltas["d0"]),
        delta_c1=float(deltas["c1"]),
        delta_d1=float(deltas["d1"]),
        delta_ww=delta_ww,
        delta_wb=delta_wb,
        delta_bb=delta_bb,
        params=params,
    )


@dataclass
class ColourSumReport:
    mu_v_sum: Any
    sigma_sum: Any
    sigma_sum_transposed: Any
    identities: dict[str, bool]
    exact: bool

    @property
    def passed(self) -> bool:
        sums = (self.mu_v_sum, self.sigma_sum, self.sigma_sum_transposed)
        if self.exact:
            zero = all(value == 0 for value in sums)
        else:
            zero = all(abs(value) <= 1e-12 for value in sums)
        return zero and all(self.identities.values())


def _summed(motifs: Iterable[Motif], build: Callable[[Motif], SignedMotifMultiset]) -> SignedMotifMultiset:
    total = SignedMotifMultiset()
    for motif in motifs:
        total = total + build(motif)
    return total


def verify_colour_sums(
    shape: Motif, other: Motif, graph: ColouredGraph, exact: bool = True
) -> ColourSumReport:
    """Check that vertex coefficients summed over all colourings of ``shape`` vanish

    ``shape`` is read as uncoloured: its colours are ignored. Besides the three sums, the five
    multiset identities that make them vanish are checked as exact multiset equalities.
    """
    cache = DensityCache(graph, exact=exact)
    variants = colourings(shape)
    mu_v_sum: Any = 0
    sigma_sum: Any = 0
    sigma_sum_transposed: Any = 0
    for colouring in variants:
        mu_v_sum += _vertex_drift(colouring, cache, graph.n)
        sigma_sum += build_T(colouring, other).density_sum(cache.regular)
        sigma_sum_transposed += build_T(other, colouring).density_sum(cache.regular)

    def summed_multiset(kind: MultisetKind) -> SignedMotifMultiset:
        return _summed(variants, lambda m: build_multiset(m, kind))

    def summed_pair(kind: PairKind) -> SignedMotifMultiset:
        return _summed(variants, lambda m: build_T(m, other, kind))

    identities = {
        "attach": summed_multiset(MultisetKind.S_PLUS) == summed_multiset(MultisetKind.S_MINUS),
        "connect": summed_multiset(MultisetKind.S_CIRC_PLUS) == summed_multiset(MultisetKind.S_CIRC_MINUS),
        "merge": (
            summed_multiset(MultisetKind.S_DIAMOND_PLUS) == summed_multiset(MultisetKind.S_DIAMOND_MINUS)
        ),
        "join_same": summed_pair(PairKind.T_EQ_PLUS) == summed_pair(PairKind.T_NE_MINUS),
        "join_opposite": summed_pair(PairKind.T_EQ_MINUS) == summed_pair(PairKind.T_NE_PLUS),
    }
    report = ColourSumReport(mu_v_sum, sigma_sum, sigma_sum_transposed, identities, exact)
    if not report.passed:
        logger.warning(
            "colour sums do not vanish for %s against %s", shape.uncoloured_key().hex(), other.label
        )
    return report


def random_graph(n: int, rng: np.random.Generator, edge_probability: float = 0.5) -> ColouredGraph:
    colours = (rng.random(n) < 0.5).astype(np.int8)
    upper = np.triu(rng.random((n, n)) < edge_probability, 1)
    return ColouredGraph(colours, upper | upper.T)


def all_graphs(n: int) -> Iterator[ColouredGraph]:
    """Every labelled coloured graph on ``n`` vertices, ``2 ** n * 2 ** (n * (n - 1) / 2)`` of them"""
    rows, cols = np.triu_indices(n, 1)
    vertex_bits = np.arange(n)
    pair_bits = np.arange(rows.size)
    for colour_code in range(2**n):
        colours = ((colour_code >> vertex_bits) & 1).astype(np.int8)
        for edge_code in range(2**rows.size):
            present = ((edge_code >> pair_bits) & 1).astype(bool)
            adjacency = np.zeros((n, n), dtype=bool)
            adjacency[rows[present], cols[present]] = True
            yield ColouredGraph(colours, adjacency | adjacency.T)


def _fitted_constants(residuals: dict[int, float]) -> dict[int, float]:
    return {n: n * value for n, value in residuals.items()}


def _constants_stable(constants: dict[int, float]) -> bool:
    sizes = sorted(constants)
    return all(
        constants[b] <= constants[a] * (1 + C_RELATIVE_SLACK) for a, b in zip(sizes, sizes[1:])
    )


def verification_report(
    params: ModelParams,
    max_size: int = 3,
    n_values: Sequence[int] = (4, 6, 8),
    graphs: int = 200,
    seed: int = 0,
    colour_sum_graphs: int = 50,
) -> dict[str, Any]:
    """Oracle-versus-formula residuals, second-order residuals and colour-sum checks

    Sizes up to ``EXHAUSTIVE_MAX_N`` run over every coloured graph; larger sizes draw ``graphs``
    random graphs. The regular and second-order checks pass when the fitted constants
    ``n * residual`` do not increase with n.

    Returns
    -------
        dict: JSON-ready report with per-n maximal residuals, fitted constants ``n * residual`` and
        pass flags
    """
    motifs = [m for k in range(1, max_size + 1) for m in enumerate_motifs(k)]
    quadratic_motifs = [m for m in motifs if m.k <= 2][:3]
    quadratic = SmoothFunction.quadratic(np.ones((len(quadratic_motifs),) * 2))
    injective: dict[int, float] = {}
    regular: dict[int, float] = {}
    second_order: dict[int, float] = {}
    tabulated: dict[int, float] = {}
    checked: dict[int, int] = {}

    for n in n_values:
        rng = make_generator(seed, n)
        if n <= EXHAUSTIVE_MAX_N:
            population: Iterable[ColouredGraph] = all_graphs(n)
        else:
            population = (random_graph(n, rng) for _ in range(graphs))
        injective[n] = regular[n] = second_order[n] = tabulated[n] = 0.0
        checked[n] = 0
        for graph in population:
            checked[n] += 1
            cache = DensityCache(graph)
            for motif in motifs:
                record = coefficients(motif, motif, cache, params)
                truth_injective = exact_generator_oracle(
                    graph, lambda g, m=motif: motif_density_injective(g, m), params
                )
                truth_regular = exact_generator_oracle(graph, lambda g, m=motif: graph_density(g, m), params)
                formula_injective = params.eta * record.mu_v_injective + params.rho * record.mu_e_injective
                formula_regular = params.eta * record.mu_v + params.rho * record.mu_e
                formula_tabulated = params.eta * record.mu_v_tabulated + params.rho * record.mu_e
                injective[n] = max(injective[n], abs(truth_injective - formula_injective))
                regular[n] = max(regular[n], abs(truth_regular - formula_regular))
                tabulated[n] = max(tabulated[n], abs(truth_regular - formula_tabulated))
            densities = density_functional(quadratic_motifs, "injective")
            truth = exact_generator_oracle(graph, lambda g: quadratic(densities(g)), params)
            expansion = generator_expansion(graph, quadratic_motifs, quadratic, params, injective=True)
            second_order[n] = max(second_order[n], abs(truth - expansion.total))
        logger.info("generator residuals at n=%d: injective %.3g, regular %.3g", n, injective[n], regular[n])

    rng = make_generator(seed, 0)
    shapes = [Motif((BLACK,) * k, m.edges) for k in range(1, max_size + 1) for m in enumerate_motifs(k)]
    shapes = list({m.uncoloured_key(): m for m in shapes}.values())
    partners = [m for k in (1, 2) for m in enumerate_motifs(k)]
    failures = 0
    cases = 0
    for _ in range(colour_sum_graphs):
        graph = random_graph(6, rng)
        for shape in shapes:
            for other in partners:
                cases += 1
                if not verify_colour_sums(shape, other, graph, exact=True).passed:
                    failures += 1

    regular_constants = _fitted_constants(regular)
    second_constants = _fitted_constants(second_order)
    report = {
        "params": params.as_dict(),
        "max_size": max_size,
        "graphs_per_n": graphs,
        "graphs_checked": checked,
        "exhaustive_max_n": EXHAUSTIVE_MAX_N,
        "injective": {
            "residual_max": injective,
            "passed": all(value <= INJECTIVE_TOLERANCE for value in injective.values()),
        },
        "regular": {
            "residual_max": regular,
            "fitted_C": regular_constants,
            "passed": _constants_stable(regular_constants),
        },
        "regular_tabulated": {"residual_max": tabulated, "fitted_C": _fitted_constants(tabulated)},
        "second_order": {
            "residual_max": second_order,
            "fitted_C": second_constants,
            "passed": _constants_stable(second_constants),
        },
        "colour_sums": {"cases": cases, "failures": failures, "passed": failures == 0},
    }
    sections = ("injective", "regular", "second_order", "colour_sums")
    report["passed"] = all(report[name]["passed"] for name in sections)
    return report
