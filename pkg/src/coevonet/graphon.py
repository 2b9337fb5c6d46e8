"""Coloured graphons at grid resolution and the motif-density toolkit built on them"""

import itertools
import json
import logging
import math
import string
import warnings
from collections.abc import Sequence
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, NamedTuple

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from coevonet.exceptions import TruncationWarning, UsageError
from coevonet.model import WHITE, ColouredGraph
from coevonet.motifs import K_MAX, Motif, MotifCatalog
from coevonet.streams import make_generator

__all__ = [
    "GRAPH_DENSITY_MAX_SIZE",
    "ColouredGraphon",
    "embed",
    "project",
    "motif_density",
    "uncoloured_density",
    "density_vector",
    "projected_density_vector",
    "density_table",
    "homomorphism_count",
    "injective_count",
    "graph_density",
    "motif_density_injective",
    "SubgraphDistance",
    "d_sub",
    "CutNorm",
    "cut_norm",
    "colour_cut_norm",
    "CutDistance",
    "cut_distance_dbox",
    "counting_lemma_bound",
    "sample_graph",
]

logger = logging.getLogger(__name__)

# finite-graph counts are used by the generator checks on motifs up to k + k' vertices
GRAPH_DENSITY_MAX_SIZE = 8

CUT_NORM_EXACT_LIMIT = 16
PERMUTATION_EXHAUSTIVE_LIMIT = 6


class ColouredGraphon:
    """A piecewise-constant coloured graphon on an ``m``-block grid

    ``kernel[i, j]`` is the edge probability between blocks ``i`` and ``j`` and ``colour[i]``
    the probability that a vertex in block ``i`` is white.
    """

    def __init__(self, kernel: ArrayLike, colour: ArrayLike) -> None:
        kernel_array = np.array(kernel, dtype=np.float64, ndmin=2)
        colour_array = np.array(colour, dtype=np.float64).reshape(-1)
        m = colour_array.size
        if m == 0:
            raise UsageError("a graphon needs at least one block")
        if kernel_array.shape != (m, m):
            raise UsageError(f"kernel must have shape ({m}, {m}), got {kernel_array.shape}")
        if not np.array_equal(kernel_array, kernel_array.T):
            raise UsageError("kernel must be symmetric")
        if kernel_array.min() < 0 or kernel_array.max() > 1:
            raise UsageError("kernel values must lie in [0, 1]")
        if colour_array.min() < 0 or colour_array.max() > 1:
            raise UsageError("colour values must lie in [0, 1]")
        self.kernel = kernel_array
        self.colour = colour_array

    @classmethod
    def constant(cls, p: float, q: float, m: int = 1) -> "ColouredGraphon":
        return cls(np.full((m, m), float(p)), np.full(m, float(q)))

    @property
    def m(self) -> int:
        return self.colour.size

    @property
    def edge_density(self) -> float:
        return float(self.kernel.mean())

    @property
    def mean_colour(self) -> float:
        return float(self.colour.mean())

    def permuted(self, order: ArrayLike) -> "ColouredGraphon":
        """Graphon whose block ``i`` is block ``order[i]`` of this one"""
        index = np.asarray(order, dtype=np.int64)
        return ColouredGraphon(self.kernel[np.ix_(index, index)], self.colour[index])

    def colour_swapped(self) -> "ColouredGraphon":
        return ColouredGraphon(self.kernel, 1.0 - self.colour)

    def refined(self, factor: int) -> "ColouredGraphon":
        """Same step function on a grid ``factor`` times finer"""
        block = np.ones((factor, factor))
        return ColouredGraphon(np.kron(self.kernel, block), np.repeat(self.colour, factor))

    def to_dict(self) -> dict[str, Any]:
        lower = self.kernel[np.tril_indices(self.m)]
        return {"m": self.m, "kernel": lower.tolist(), "colour": self.colour.tolist()}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ColouredGraphon":
        m = int(data["m"])
        lower = np.asarray(data["kernel"], dtype=np.float64)
        if lower.size != m * (m + 1) // 2:
            raise UsageError(f"kernel lower triangle of an m={m} graphon needs {m * (m + 1) // 2} values")
        kernel = np.zeros((m, m))
        kernel[np.tril_indices(m)] = lower
        kernel = np.tril(kernel) + np.tril(kernel, -1).T
        return cls(kernel, data["colour"])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "ColouredGraphon":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def __repr__(self) -> str:
        return f"ColouredGraphon(m={self.m}, p={self.edge_density:.4g}, q={self.mean_colour:.4g})"


def embed(graph: ColouredGraph) -> ColouredGraphon:
    """Canonical graphon of a finite graph: one block per vertex"""
    if graph.n < 1:
        raise UsageError("cannot embed an empty vertex set")
    return ColouredGraphon(graph.adjacency.astype(np.float64), graph.colours.astype(np.float64))


def project(graphon: ColouredGraphon) -> ColouredGraphon:
    """Replace the colour function by its mean, keeping the kernel"""
    return ColouredGraphon(graphon.kernel, np.full(graphon.m, graphon.mean_colour))


def _einsum_expression(motif: Motif) -> str:
    letters = string.ascii_lowercase
    subscripts = [letters[i] for i in range(motif.k)]
    subscripts += [letters[a] + letters[b] for a, b in motif.sorted_edges()]
    return ",".join(subscripts) + "->"


def _contract(motif: Motif, matrix: NDArray, white: NDArray, black: NDArray, coloured: bool) -> Any:
    if coloured:
        vectors = [white if c == WHITE else black for c in motif.colours]
    else:
        ones = np.ones_like(white)
        vectors = [ones] * motif.k
    operands = vectors + [matrix] * motif.edge_count
    optimize: str | bool = "greedy" if matrix.shape[0] > 24 else False
    return np.einsum(_einsum_expression(motif), *operands, optimize=optimize)


def motif_density(graphon: ColouredGraphon, motif: Motif, max_size: int = K_MAX) -> float:
    """Coloured subgraph density of ``motif`` in ``graphon``, exact on the grid"""
    if motif.k > max_size:
        raise UsageError(f"motif on {motif.k} vertices exceeds the size limit {max_size}")
    value = _contract(motif, graphon.kernel, graphon.colour, 1.0 - graphon.colour, coloured=True)
    return float(value) / graphon.m**motif.k


def uncoloured_density(graphon: ColouredGraphon, motif: Motif, max_size: int = K_MAX) -> float:
    """Subgraph density of the underlying uncoloured graph of ``motif``"""
    if motif.k > max_size:
        raise UsageError(f"motif on {motif.k} vertices exceeds the size limit {max_size}")
    value = _contract(motif, graphon.kernel, graphon.colour, 1.0 - graphon.colour, coloured=False)
    return float(value) / graphon.m**motif.k


def density_vector(graphon: ColouredGraphon, motifs: Sequence[Motif]) -> NDArray[np.float64]:
    max_size = max((m.k for m in motifs), default=1)
    return np.array([motif_density(graphon, m, max_size) for m in motifs])


def projected_density_vector(graphon: ColouredGraphon, motifs: Sequence[Motif]) -> NDArray[np.float64]:
    """Densities in ``project(graphon)`` computed as mean-colour powers times uncoloured densities"""
    q = graphon.mean_colour
    max_size = max((m.k for m in motifs), default=1)
    shapes: dict[bytes, float] = {}
    values = []
    for motif in motifs:
        key = motif.uncoloured_key()
        if key not in shapes:
            shapes[key] = uncoloured_density(graphon, motif, max_size)
        values.append(q**motif.white_count * (1.0 - q) ** motif.black_count * shapes[key])
    return np.array(values)


def density_table(graphon: ColouredGraphon, catalog: MotifCatalog) -> pd.DataFrame:
    """Motif-density table keyed by canonical motif id"""
    return pd.DataFrame({"motif": catalog.labels, "value": density_vector(graphon, catalog.motifs)})


# finite-graph counts


@lru_cache(maxsize=None)
def _set_partitions(k: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    partitions: list[tuple[tuple[int, ...], ...]] = []

    def extend(vertex: int, blocks: list[list[int]]) -> None:
        if vertex == k:
            partitions.append(tuple(tuple(block) for block in blocks))
            return
        for block in blocks:
            block.append(vertex)
            extend(vertex + 1, blocks)
            block.pop()
        blocks.append([vertex])
        extend(vertex + 1, blocks)
        blocks.pop()

    extend(0, [])
    return tuple(partitions)


def _quotient(motif: Motif, partition: tuple[tuple[int, ...], ...], coloured: bool) -> Motif | None:
    block_of = {v: index for index, block in enumerate(partition) for v in block}
    if any(block_of[a] == block_of[b] for a, b in motif.edges):
        return None
    colours = []
    for block in partition:
        block_colours = {motif.colours[v] for v in block}
        if coloured and len(block_colours) > 1:
            return None
        colours.append(motif.colours[block[0]])
    edges = frozenset((min(block_of[a], block_of[b]), max(block_of[a], block_of[b])) for a, b in motif.edges)
    return Motif(tuple(colours), edges)


def _check_graph_size(motif: Motif) -> None:
    if motif.k > GRAPH_DENSITY_MAX_SIZE:
        raise UsageError(f"motif on {motif.k} vertices exceeds the size limit {GRAPH_DENSITY_MAX_SIZE}")


def homomorphism_count(graph: ColouredGraph, motif: Motif, coloured: bool = True) -> int:
    """Number of colour- and edge-preserving maps from ``motif`` into ``graph``"""
    _check_graph_size(motif)
    white = graph.colours.astype(np.int64)
    black = 1 - white
    adjacency = graph.adjacency.astype(np.int64)
    return int(_contract(motif, adjacency, white, black, coloured))


def injective_count(graph: ColouredGraph, motif: Motif, coloured: bool = True) -> int:
    """Number of injective colour- and edge-preserving maps, by Moebius inversion over vertex partitions"""
    _check_graph_size(motif)
    if motif.k > graph.n:
        return 0
    total = 0
    for partition in _set_partitions(motif.k):
        quotient = _quotient(motif, partition, coloured)
        if quotient is None:
            continue
        coefficient = 1
        for block in partition:
            size = len(block)
            coefficient *= (-1) ** (size - 1) * math.factorial(size - 1)
        total += coefficient * homomorphism_count(graph, quotient, coloured)
    return total


def graph_density(graph: ColouredGraph, motif: Motif, exact: bool = False, coloured: bool = True) -> Any:
    """Regular density ``t_F(embed(graph))`` from integer counts; a Fraction when ``exact``"""
    count = homomorphism_count(graph, motif, coloured)
    if exact:
        return Fraction(count, graph.n**motif.k)
    return count / graph.n**motif.k


def motif_density_injective(
    graph: ColouredGraph, motif: Motif, exact: bool = False, coloured: bool = True
) -> Any:
    """Injective density: injections divided by the falling factorial ``(n)_k``; 0 when k > n"""
    if motif.k > graph.n:
        return Fraction(0) if exact else 0.0
    count = injective_count(graph, motif, coloured)
    falling = math.perm(graph.n, motif.k)
    if exact:
        return Fraction(count, falling)
    return count / falling


# metrics


class SubgraphDistance(NamedTuple):
    value: float
    truncation_bound: float


def d_sub(
    first: ColouredGraphon, second: ColouredGraphon, catalog: MotifCatalog | int = 3
) -> SubgraphDistance:
    """Weighted l1 distance between motif-density vectors over the catalog"""
    if isinstance(catalog, int):
        catalog = MotifCatalog.build(catalog)
    x = density_vector(first, catalog.motifs)
    y = density_vector(second, catalog.motifs)
    value = float(np.sum(catalog.weights * np.abs(x - y)))
    return SubgraphDistance(value, catalog.truncation_bound)


class CutNorm(NamedTuple):
    value: float
    exact: bool


def _cut_norm_exhaustive(matrix: NDArray) -> float:
    m = matrix.shape[0]
    shifts = np.arange(m)
    best = 0.0
    chunk = 8192
    for start in range(0, 1 << m, chunk):
        subsets = np.arange(start, min(start + chunk, 1 << m))
        rows = ((subsets[:, None] >> shifts) & 1).astype(np.float64)
        column_sums = rows @ matrix
        positive = np.clip(column_sums, 0.0, None).sum(axis=1).max()
        negative = -np.clip(column_sums, None, 0.0).sum(axis=1).min()
        best = max(best, float(positive), float(negative))
    return best


def _cut_norm_local_search(matrix: NDArray, restarts: int, seed: int) -> float:
    m = matrix.shape[0]
    rng = make_generator(seed)
    best = 0.0
    for _ in range(restarts):
        for sign in (1.0, -1.0):
            signed = sign * matrix
            columns = rng.random(m) < 0.5
            value = -np.inf
            while True:
                rows = signed[:, columns].sum(axis=1) > 0
                columns = signed[rows].sum(axis=0) > 0
                candidate = float(signed[np.ix_(rows, columns)].sum())
                if candidate <= value + 1e-15:
                    break
                value = candidate
            best = max(best, value)
    return best


def cut_norm(
    matrix: ArrayLike, exact_limit: int = CUT_NORM_EXACT_LIMIT, restarts: int = 32, seed: int = 0
) -> CutNorm:
    """Cut norm of the step function with the given block values

    Optimal rectangles are unions of blocks, so for ``m <= exact_limit`` every block subset is
    tried. Larger grids fall back to alternating local search, which only gives a lower bound.
    """
    values = np.asarray(matrix, dtype=np.float64)
    m = values.shape[0]
    if m <= exact_limit:
        return CutNorm(_cut_norm_exhaustive(values) / m**2, True)
    return CutNorm(_cut_norm_local_search(values, restarts, seed) / m**2, False)


def colour_cut_norm(difference: ArrayLike) -> float:
    values = np.asarray(difference, dtype=np.float64)
    return max(float(values[values > 0].sum()), float(-values[values < 0].sum())) / values.size


class CutDistance(NamedTuple):
    """Bracket around the cut distance; ``exact`` is False when overlays were costed in L1"""

    lower: float
    upper: float
    exact: bool


def _common_grid(first: ColouredGraphon, second: ColouredGraphon) -> tuple[ColouredGraphon, ColouredGraphon]:
    if first.m == second.m:
        return first, second
    m = math.lcm(first.m, second.m)
    return first.refined(m // first.m), second.refined(m // second.m)


def cut_distance_dbox(
    first: ColouredGraphon,
    second: ColouredGraphon,
    seed: int = 0,
    exact_limit: int = CUT_NORM_EXACT_LIMIT,
    max_sweeps: int = 3,
) -> CutDistance:
    """Bracket the cut distance over grid-permutation overlays

    The lower end is the overlay-free bound from the whole-square rectangle. The upper end is the
    smallest overlay cost found: every permutation for small grids, otherwise identity and degree
    alignment refined by pairwise-swap descent. Overlay costs use exact cut norms up to
    ``exact_limit`` blocks and the L1 distance of the kernels above it, so ``upper`` always bounds
    the cut distance from above.
    """
    first, second = _common_grid(first, second)
    m = first.m
    exact = m <= exact_limit

    def cost(order: NDArray[np.int64]) -> float:
        kernel = first.kernel - second.kernel[np.ix_(order, order)]
        colour = first.colour - second.colour[order]
        if exact:
            return cut_norm(kernel, exact_limit, seed=seed).value + colour_cut_norm(colour)
        return float(np.abs(kernel).mean()) + colour_cut_norm(colour)

    if m <= PERMUTATION_EXHAUSTIVE_LIMIT:
        upper = min(cost(np.asarray(order)) for order in itertools.permutations(range(m)))
    else:
        identity = np.arange(m)
        first_rank = np.lexsort((first.colour, first.kernel.sum(axis=1)))
        second_rank = np.lexsort((second.colour, second.kernel.sum(axis=1)))
        aligned = np.empty(m, dtype=np.int64)
        aligned[first_rank] = second_rank
        candidates = [(cost(identity), identity), (cost(aligned), aligned)]
        upper, order = min(candidates, key=lambda item: item[0])
        for _ in range(max_sweeps):
            improved = False
            for i, j in itertools.combinations(range(m), 2):
                trial = order.copy()
                trial[i], trial[j] = trial[j], trial[i]
                value = cost(trial)
                if value < upper - 1e-15:
                    upper, order, improved = value, trial, True
            if not improved:
                break

    if not exact:
        warnings.warn(
            f"cut norms on a {m}-block grid are replaced by the L1 distance; the upper end is loose",
            TruncationWarning,
            stacklevel=2,
        )
    lower = abs(first.edge_density - second.edge_density) + abs(first.mean_colour - second.mean_colour)
    return CutDistance(lower=min(lower, upper), upper=upper, exact=exact)


def counting_lemma_bound(first: ColouredGraphon, second: ColouredGraphon, motif: Motif) -> float:
    """Upper bound on ``|t_F(first) - t_F(second)|`` from the cut norms of the differences

    Each edge contributes the kernel cut norm and each vertex the colour cut norm.
    """
    first, second = _common_grid(first, second)
    kernel = cut_norm(first.kernel - second.kernel).value
    colour = colour_cut_norm(first.colour - second.colour)
    return motif.edge_count * kernel + motif.k * colour


def sample_graph(graphon: ColouredGraphon, n: int, seed: int, stream: int = 0) -> ColouredGraph:
    """Random graph from i.i.d. uniform positions, independent edges and colours"""
    if n < 1:
        raise UsageError(f"sample size must be positive, got {n}")
    rng = make_generator(seed, stream)
    positions = rng.random(n)
    cells = np.minimum((positions * graphon.m).astype(np.int64), graphon.m - 1)
    colours = (rng.random(n) < graphon.colour[cells]).astype(np.int8)
    probabilities = graphon.kernel[np.ix_(cells, cells)]
    upper = np.triu(rng.random((n, n)) < probabilities, 1)
    return ColouredGraph(colours, upper | upper.T)
