import pytest
from numpy.testing import assert_allclose

from coevonet.exceptions import UsageError
from coevonet.model import BLACK, WHITE
from coevonet.motifs import (
    AddEdge,
    AddVertex,
    FlipColour,
    Merge,
    Motif,
    MotifCatalog,
    RemoveEdge,
    SetColour,
    close_under_edge_deletion,
    colourings,
    enumerate_motifs,
    graph_edit,
    join,
    merged_label,
)

W, B = WHITE, BLACK


@pytest.mark.parametrize(
    "k,expected",
    [pytest.param(1, 2, id="vertices"), pytest.param(2, 6, id="pairs"), pytest.param(3, 20, id="triples")],
)
def test_enumerate_motifs(k: int, expected: int) -> None:
    motifs = enumerate_motifs(k)
    assert len(motifs) == expected
    assert len({m.canonical_key for m in motifs}) == expected
    assert all(m.k == k for m in motifs)
    assert enumerate_motifs(k) == motifs


def test_enumerate_motifs__error() -> None:
    with pytest.raises(UsageError, match="between 1 and 4"):
        enumerate_motifs(5)


def test_canonical_key() -> None:
    assert Motif((W, B), {(0, 1)}).isomorphic(Motif((B, W), {(1, 0)}))
    assert not Motif.edge(W, W).isomorphic(Motif.edge(W, W, present=False))
    path = Motif((W, B, W), {(0, 1), (1, 2)})
    relabelled = Motif((B, W, W), {(0, 1), (0, 2)})
    assert path.canonical_key == relabelled.canonical_key
    assert path.canonical().canonical() == path.canonical()
    assert path.label == path.canonical_key.hex()


def test_motif__error() -> None:
    with pytest.raises(UsageError, match="self-loop"):
        Motif((W, W), {(1, 1)})
    with pytest.raises(UsageError, match="unknown vertex"):
        Motif((W,), {(0, 1)})
    with pytest.raises(UsageError, match="at least one vertex"):
        Motif(())


def test_add_edge__existing() -> None:
    edge = Motif.edge(W, B)
    assert edge.add_edge(1, 0) == edge


def test_merge__isolated_same_colour() -> None:
    assert Motif((B, B)).merge(0, 1) == Motif.vertex(B)


merge_data = [
    pytest.param(Motif((W, B, W), {(0, 1), (1, 2)}), 0, 2, Motif.edge(W, B), 0, id="path ends"),
    pytest.param(Motif((W, B, W), {(0, 1)}), 2, 0, Motif.edge(B, W), 1, id="merged label shifts"),
    pytest.param(Motif((W, W), {(0, 1)}), 0, 1, Motif.vertex(W), 0, id="edge collapses"),
]


@pytest.mark.parametrize("motif,a,b,expected,label", merge_data)
def test_merge(motif: Motif, a: int, b: int, expected: Motif, label: int) -> None:
    assert motif.merge(a, b) == expected
    assert merged_label(a, b) == label


def test_merge__error() -> None:
    with pytest.raises(UsageError, match="distinct"):
        Motif((W, W)).merge(1, 1)
    with pytest.raises(UsageError, match="unknown vertex label"):
        Motif((W, W)).merge(0, 2)


def test_graph_edit__sequence() -> None:
    """Attach a new vertex coloured like vertex 0, then flip vertex 0 and connect the two"""
    edge = Motif.edge(W, B)
    result = graph_edit(edge, AddVertex(), SetColour(2, edge.colours[0]), FlipColour(0), AddEdge(0, 2))
    assert result == Motif((B, B, W), {(0, 1), (0, 2)})


def test_graph_edit__remove_and_merge() -> None:
    triangle = Motif((W, W, B), {(0, 1), (0, 2), (1, 2)})
    assert graph_edit(triangle, RemoveEdge(0, 1), Merge(0, 1)) == Motif.edge(W, B)


def test_join() -> None:
    joined = join(Motif.edge(W, B), 1, Motif.edge(B, W), 0)
    assert joined == Motif((W, B, W), {(0, 1), (1, 2)})
    star = join(joined, 1, Motif.edge(B, B), 1)
    assert star.k == 4
    assert star.edge_count == 3
    assert star.colours == (W, B, W, B)


def test_colourings() -> None:
    found = colourings(Motif.edge(W, W))
    assert len(found) == 4
    assert {m.colours for m in found} == {(B, B), (B, W), (W, B), (W, W)}
    assert all(m.edges == frozenset({(0, 1)}) for m in found)


def test_close_under_edge_deletion() -> None:
    triangle = Motif((W, W, W), {(0, 1), (0, 2), (1, 2)})
    closed = close_under_edge_deletion([triangle])
    assert closed[0] == triangle.canonical()
    assert sorted(m.edge_count for m in closed) == [0, 1, 2, 3]
    assert close_under_edge_deletion([Motif.vertex(W)]) == [Motif.vertex(W)]


def test_catalog() -> None:
    catalog = MotifCatalog.build(3)
    assert len(catalog) == 28
    assert [m.k for m in catalog][:8] == [1, 1, 2, 2, 2, 2, 2, 2]
    assert catalog.truncation_bound == 0.5**28
    assert_allclose(catalog.weights.sum() + catalog.truncation_bound, 1.0)
    assert catalog.index(Motif((B, W), {(0, 1)})) == catalog.index(Motif.edge(W, B))
    assert catalog.labels[0] == catalog.motifs[0].label


def test_catalog__error() -> None:
    with pytest.raises(UsageError, match="not in the size-1 catalog"):
        MotifCatalog.build(1).index(Motif.edge(W, W))
    with pytest.raises(UsageError, match="catalog size"):
        MotifCatalog.build(0)
