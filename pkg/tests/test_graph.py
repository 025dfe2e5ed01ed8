import numpy as np
import pytest
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from penrose_rw.errors import Unreachable
from penrose_rw.graph import PenroseGraph, bfs_distances, build_graph, graph_distance, step_catalog
from penrose_rw.pentagrid import GridLine
from penrose_rw.tiling import recenter, ribbon_through


def test_adjacency_symmetric_and_steps_antisymmetric(env60):
    g = env60.graph
    for a, b in g.edges():
        sa = g.steps[a][g.nbr[a] == b]
        sb = g.steps[b][g.nbr[b] == a]
        assert len(sa) == len(sb) == 1
        assert np.abs(sa[0] + sb[0]).max() < 1e-12


def test_steps_equal_center_differences(env60):
    g = env60.graph
    m = g.nbr >= 0
    diff = g.centers[np.where(m, g.nbr, 0)] - g.centers[:, None, :]
    assert np.abs(diff[m] - g.steps[m]).max() < 1e-12


def test_origin_properties(env30):
    g = env30.graph
    o = g.origin_id
    assert tuple(g.centers[o]) == (0.0, 0.0)
    assert graph_distance(g, o) == 0
    for u, _ in g.adjacency(o):
        assert graph_distance(g, u) == 1
    assert g.degree[o] == 4


def test_edges_consecutive_on_exactly_one_ribbon(env30):
    pa, g = env30.patch, env30.graph
    ribbons = {}
    for t in range(len(pa)):
        (i, j), (p, q) = pa.key_of(t)
        for line in (GridLine(i, p), GridLine(j, q)):
            if line not in ribbons:
                rows = ribbon_through(pa, line).rows
                ribbons[line] = {frozenset(x) for x in zip(rows[:-1].tolist(), rows[1:].tolist())}
    pair_count = {}
    for pairs in ribbons.values():
        for pr in pairs:
            pair_count[pr] = pair_count.get(pr, 0) + 1
    for a, b in g.edges():
        assert pair_count.get(frozenset((int(a), int(b))), 0) == 1


def test_bfs_matches_scipy(env30):
    g = env30.graph
    src = np.repeat(np.arange(len(g)), 4)
    dst = g.nbr.ravel()
    m = dst >= 0
    A = csr_matrix((np.ones(m.sum()), (src[m], dst[m])), shape=(len(g), len(g)))
    ref = shortest_path(A, unweighted=True, indices=g.origin_id)
    assert np.array_equal(g.distances, np.where(np.isinf(ref), -1, ref).astype(int))


def test_unreachable():
    nbr = np.array([[1, -1, -1, -1], [0, -1, -1, -1], [-1, -1, -1, -1]])
    d = bfs_distances(nbr, [0])
    assert d.tolist() == [0, 1, -1]

    class _P:
        origin = 0
        centers = np.zeros((3, 2))

    g = PenroseGraph(_P(), nbr, np.zeros((3, 4, 2)))
    with pytest.raises(Unreachable):
        graph_distance(g, 2)


def test_step_catalog_saturates(env30, env60):
    a = step_catalog(env30.graph)
    b = step_catalog(env60.graph)
    assert len(a) == len(b) == 30
    assert np.allclose(a.vectors, b.vectors)
    assert abs(a.frequency.sum() - 1) < 1e-12
    for v in a.vectors:
        assert b.contains(v) and b.contains(-v)


def test_step_catalog_translation_invariant(env30):
    pa = env30.patch
    g2 = build_graph(recenter(pa, 500))
    assert np.array_equal(step_catalog(g2).vectors, step_catalog(env30.graph).vectors)


def test_boundary_distance(env60):
    g = env60.graph
    bd = g.boundary_distance
    assert (bd[~g.interior_mask] == 0).all()
    assert (bd[g.interior_mask] > 0).all()
    assert g.safe_radius > 60
