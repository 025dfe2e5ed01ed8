import numpy as np
import pytest

from penrose_rw.corrector import (
    CorrectorField,
    cocycle_check,
    drift_field,
    martingale_residual,
    resolvent_scan,
    solve_harmonic,
    solve_resolvent,
    sublinearity_profile,
    write_corrector_csv,
    write_profile_csv,
)
from penrose_rw.errors import OutOfRange


def test_drift_definition(env60):
    g = env60.graph
    dr = drift_field(g)
    v = g.origin_id
    assert np.allclose(dr.at(v), g.steps[v].sum(axis=0) / 4, atol=0)
    assert np.isnan(dr.V[~g.interior_mask]).all()


def test_drift_mean_small(env80):
    dr = drift_field(env80.graph)
    assert np.linalg.norm(np.nanmean(dr.V, axis=0)) <= 0.02


def test_drift_constant_by_local_pattern(env60):
    g, pa = env60.graph, env60.patch
    V = drift_field(g).V
    inter = np.flatnonzero(g.interior_mask)
    cls = pa.rotation_classes
    keys = np.column_stack([cls[inter], cls[g.nbr[inter]]])
    groups = {}
    for row, key in zip(inter, map(tuple, keys)):
        groups.setdefault(key, []).append(row)
    assert len(groups) > 10
    for rows in groups.values():
        vals = V[rows]
        assert np.abs(vals - vals[0]).max() < 1e-12


def test_resolvent_large_epsilon(env30):
    g = env30.graph
    c = solve_resolvent(g, 1e6)
    V = drift_field(g).V
    bound = np.nanmax(np.abs(V)) / 1e6
    assert np.abs(c.raw).max() <= bound <= 2e-6
    assert tuple(c.chi[g.origin_id]) == (0.0, 0.0)
    with pytest.raises(ValueError):
        solve_resolvent(g, 0.0)


def test_resolvent_scan_decreasing(env60):
    scan = resolvent_scan(env60.graph)
    vals = [v for _, v in scan]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_resolvent_mean_square_monotone(env60):
    g = env60.graph
    ms = [(solve_resolvent(g, e).raw[g.interior_mask] ** 2).sum(axis=1).mean() for e in (1.0, 0.1, 0.01)]
    assert ms[0] <= ms[1] <= ms[2]


def test_linearity(env30):
    g = env30.graph
    V = drift_field(g).V
    a = solve_resolvent(g, 0.1)
    b = solve_resolvent(g, 0.1, drift=-2.5 * V)
    assert np.abs(b.raw + 2.5 * a.raw).max() <= 1e-9


def test_harmonic_residual(env60):
    g = env60.graph
    c = solve_harmonic(g)
    assert c.residual <= 1e-8
    assert martingale_residual(g, c.chi).max() <= 1e-8
    assert tuple(c.chi[g.origin_id]) == (0.0, 0.0)


def test_min_max_principle(env60):
    g = env60.graph
    c = solve_harmonic(g)
    phi = g.centers + c.raw
    bnd = ~g.interior_mask
    lo, hi = phi[bnd].min(axis=0), phi[bnd].max(axis=0)
    inner = phi[g.interior_mask]
    assert (inner >= lo - 1e-9).all() and (inner <= hi + 1e-9).all()


def test_constant_shift_invariance(env30):
    g = env30.graph
    a = solve_harmonic(g)
    off = np.tile([3.0, -1.5], (len(g), 1))
    b = solve_harmonic(g, boundary_offset=off)
    assert np.abs(a.chi - b.chi).max() <= 1e-8


def test_harmonic_vs_resolvent(env60):
    g = env60.graph
    h = solve_harmonic(g)
    r = solve_resolvent(g, 1e-4)
    near = (g.distances >= 0) & (np.hypot(*g.centers.T) <= 20)
    assert np.abs(h.chi[near] - r.chi[near]).max() <= 0.05


def _pairs(g, ys):
    out = []
    for y in ys:
        near = np.flatnonzero((np.hypot(*(g.centers - g.centers[y]).T) <= 10) & g.interior_mask)
        out += [(int(x), int(y)) for x in near[::7]]
    return out


def test_cocycle_self_pair(env80):
    g, c = env80.graph, env80.corrector
    assert cocycle_check(c, g, [(g.origin_id, g.origin_id)]) == 0.0


def test_cocycle_bound_and_trend(env80, env160):
    g80, g160 = env80.graph, env160.graph
    # the same tiles in both patches, addressed by key
    keys_y = [g80.patch.key_of(int(v)) for v in np.argsort(np.hypot(*g80.centers.T))[[5, 40]]]
    ys80 = [g80.patch.index[k] for k in keys_y]
    p80 = _pairs(g80, ys80)
    p160 = [(g160.patch.index[g80.patch.key_of(x)], g160.patch.index[g80.patch.key_of(y)]) for x, y in p80]
    d80 = cocycle_check(env80.corrector, g80, p80)
    d160 = cocycle_check(env160.corrector, g160, p160)
    assert d80 <= 0.1
    assert d160 < d80


def test_sublinearity_profile(env120):
    g, c = env120.graph, env120.corrector
    prof = sublinearity_profile(c, g, [15, 30, 60], ks=[5, 10, 20, 40])
    assert all(r >= 0 for r in prof.max_ratio)
    assert prof.max_ratio[2] <= 0.7 * prof.max_ratio[0]
    assert len(prof.ribbon_ratio) == 2
    for ratios in prof.ribbon_ratio:
        for a, b in zip(ratios[:-1], ratios[1:]):
            assert b <= a + 0.1
    with pytest.raises(OutOfRange):
        sublinearity_profile(c, g, [10**4])


def test_csv_exports(env30, tmp_path):
    c = env30.corrector
    write_corrector_csv(c, tmp_path / "chi.csv")
    data = np.loadtxt(tmp_path / "chi.csv", delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 1:], c.chi)
    prof = sublinearity_profile(c, env30.graph, [5, 10])
    write_profile_csv(prof, tmp_path / "n.csv", tmp_path / "k.csv")
    assert (tmp_path / "n.csv").read_text().splitlines()[0] == "n,max_ratio"
