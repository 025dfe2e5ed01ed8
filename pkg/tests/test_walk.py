import math

import numpy as np
import pytest
from scipy import stats as sst

from penrose_rw.errors import BoundaryHit, MarginViolation, PathTooShort
from penrose_rw.walk import (
    WalkPath,
    check_patch_size,
    correct_path,
    scale_path,
    simulate,
    simulate_batch,
    walk_rng,
    write_batch_summary,
    write_path_csv,
)


def test_zero_steps(env30):
    g = env30.graph
    w = simulate(g, 0, seed=1)
    assert w.vertices.tolist() == [g.origin_id]


def test_determinism_and_neighbors(env60):
    g = env60.graph
    a = simulate(g, 200, seed=9, index=3)
    b = simulate(g, 200, seed=9, index=3)
    assert np.array_equal(a.vertices, b.vertices)
    assert not np.array_equal(a.vertices, simulate(g, 200, seed=9, index=4).vertices)
    for u, v in zip(a.vertices[:-1], a.vertices[1:]):
        assert v in g.nbr[u]


def test_batch_matches_single_walks(env60):
    g = env60.graph
    b = simulate_batch(g, 150, 40, master_seed=5, checkpoints=[0, 50], chunk=7)
    for i in (0, 13, 39):
        w = simulate(g, 150, seed=5, index=i)
        assert b.positions[i].tolist() == [w.vertices[0], w.vertices[50], w.vertices[150]]
    c = simulate_batch(g, 150, 40, master_seed=5, checkpoints=[0, 50], threads=3, chunk=11)
    assert np.array_equal(b.positions, c.positions)


@pytest.mark.slow
def test_one_step_frequencies(env30):
    g = env30.graph
    n = 10**6
    b = simulate_batch(g, 1, n, master_seed=11)
    o = g.origin_id
    freq = np.array([(b.endpoints == u).sum() for u in g.nbr[o]]) / n
    assert np.abs(freq - 0.25).max() <= 0.002


def test_seed_splitting_independence(env30):
    g = env30.graph
    o = g.origin_id
    first = np.array([walk_rng(3, i).integers(0, 4, size=1, dtype=np.uint8)[0] for i in range(2 * 10**5)])
    table = np.zeros((4, 4))
    np.add.at(table, (first[0::2], first[1::2]), 1)
    assert sst.chi2_contingency(table).pvalue > 0.001
    # the batch uses the same streams
    b = simulate_batch(g, 1, 20, master_seed=3)
    assert np.array_equal(b.endpoints, g.nbr[o, first[:20]])


def test_boundary_abort(env30):
    g = env30.graph
    with pytest.raises(BoundaryHit):
        for i in range(50):
            simulate(g, 20000, seed=2, index=i)
    b = simulate_batch(g, 5000, 50, master_seed=2)
    assert b.abort_count > 0
    assert b.summary()["abort_count"] == b.abort_count
    with pytest.raises(ValueError):
        check_patch_size(g, 5000)


def test_scale_path_formula(env60):
    g = env60.graph
    w = simulate(g, 100, seed=1)
    X = g.centers[w.vertices]
    s = scale_path(w, g, T=1.0, grid=200)
    assert np.array_equal(s.samples[0], [0.0, 0.0])
    assert np.allclose(s.samples[::2], X / 10.0, atol=1e-15)
    assert np.allclose(s.samples[1::2], (X[:-1] + X[1:]) / 20.0, atol=1e-15)
    with pytest.raises(PathTooShort):
        scale_path(w, g, T=2.0, grid=10)
    with pytest.raises(PathTooShort):
        scale_path(simulate(g, 0, seed=1), g, T=1.0, grid=10)


def test_correct_path(env80):
    g, c = env80.graph, env80.corrector
    w = simulate(g, 300, seed=4)
    M = correct_path(w, c, g).M
    assert np.array_equal(M[0], [0.0, 0.0])
    X = g.centers[w.vertices]
    assert np.hypot(*(M - X).T).max() <= c.norm()[w.vertices].max() + 1e-15
    edge = np.flatnonzero(~g.interior_mask)[0]
    with pytest.raises(MarginViolation):
        correct_path(WalkPath(np.array([g.origin_id, edge]), 0), c, g)


def test_martingale_monte_carlo(env80):
    g, c = env80.graph, env80.corrector
    d = g.distances
    start = int(np.flatnonzero(d == 5)[0])
    b = simulate_batch(g, 1, 10**5, master_seed=17, start=start)
    phi = g.centers + c.chi
    inc = phi[b.endpoints] - phi[start]
    se = inc.std(axis=0, ddof=1) / math.sqrt(len(inc))
    assert np.all(np.abs(inc.mean(axis=0)) <= 3 * se)


def test_outputs(env30, tmp_path):
    g = env30.graph
    w = simulate(g, 10, seed=1)
    write_path_csv(w, g, tmp_path / "p.csv")
    rows = (tmp_path / "p.csv").read_text().splitlines()
    assert rows[0] == "k,vertex_id,x,y" and len(rows) == 12
    write_batch_summary(simulate_batch(g, 5, 10, 1), tmp_path / "b.json")
    assert '"walk_count": 10' in (tmp_path / "b.json").read_text()
