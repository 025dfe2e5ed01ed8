import numpy as np
import pytest
from scipy import stats as sst

from penrose_rw.corrector import CorrectorField
from penrose_rw.errors import InsufficientSamples
from penrose_rw.pipeline import empirical_D_for, prepare_environment
from penrose_rw.stats import (
    DiffusionEstimate,
    agreement_test,
    corrector_influence,
    estimate_D_empirical,
    estimate_D_generator,
    gaussianity_test,
    isotropy_test,
    mean_centering_test,
    positive_definite_report,
)
from penrose_rw.walk import simulate, simulate_batch


def _est(D, se=1e-4):
    D = np.asarray(D, dtype=float)
    s = np.full((2, 2), se)
    return DiffusionEstimate(D, s, 1.96 * s, "synthetic", 1000)


def test_generator_D(env80, env160):
    a = estimate_D_generator(env80.graph, env80.corrector)
    b = estimate_D_generator(env160.graph, env160.corrector)
    assert positive_definite_report(a).verdict
    assert isotropy_test(a).verdict
    assert np.abs(a.D - b.D).max() <= 0.03 * a.trace / 2
    assert np.allclose(a.D, a.D.T)
    assert (a.halfwidth >= 0).all()


def test_isotropy_synthetic():
    assert isotropy_test(_est(0.3 * np.eye(2))).verdict
    assert not isotropy_test(_est(np.diag([1.0, 2.0]), se=1e-6)).verdict
    assert not isotropy_test(_est([[1.0, 0.1], [0.1, 1.0]], se=1e-6)).verdict


def test_positive_definite_synthetic():
    assert positive_definite_report(_est(np.diag([1.0, 0.5]))).verdict
    assert not positive_definite_report(_est(np.diag([1.0, 0.01]))).verdict


def test_agreement_synthetic():
    a = _est(np.eye(2), se=0.01)
    assert agreement_test(a, _est(np.eye(2) + 0.03, se=0.01)).verdict
    assert not agreement_test(a, _est(np.eye(2) + 0.05, se=0.01)).verdict
    assert agreement_test(a, _est(np.eye(2) + 0.05, se=0.01), slack_fraction=0.05).verdict


def test_empirical_degenerate_and_small():
    z = estimate_D_empirical(np.zeros((1000, 2)), 0)
    assert np.array_equal(z.D, np.zeros((2, 2)))
    with pytest.raises(InsufficientSamples):
        estimate_D_empirical(np.zeros((10, 2)), 5)


def test_empirical_recovers_covariance():
    rng = np.random.default_rng(0)
    C = np.array([[2.0, 0.5], [0.5, 1.0]])
    x = rng.multivariate_normal([0, 0], C * 100, size=20000)
    d = estimate_D_empirical(x, 100)
    assert np.all(np.abs(d.D - C) <= 2 * d.halfwidth)
    assert mean_centering_test(x, 100).verdict
    assert not mean_centering_test(x + 5.0, 100).verdict


def test_gaussianity_null_calibration():
    rng = np.random.default_rng(1)
    ps = []
    for _ in range(40):
        r = gaussianity_test(rng.normal(size=(5000, 2)) @ np.array([[1.0, 0.3], [0.0, 0.7]]))
        ps.append(r.statistic)
    assert np.mean([p >= 0.01 for p in ps]) >= 0.9
    assert sst.kstest(ps, "uniform").pvalue > 0.001


def test_gaussianity_rejects_uniform():
    rng = np.random.default_rng(2)
    r = gaussianity_test(rng.uniform(-1, 1, size=(5000, 2)))
    assert not r.verdict
    assert np.all(np.abs(np.array(r.metadata["excess_kurtosis"]) + 1.2) < 0.2)
    with pytest.raises(InsufficientSamples):
        gaussianity_test(rng.normal(size=(100, 2)))


def test_corrector_influence_zero_chi(env60):
    g = env60.graph
    zero = CorrectorField(np.zeros((len(g), 2)), 0.0, 0.0)
    paths = [simulate(g, 400, seed=1, index=i) for i in range(20)]
    r = corrector_influence(paths, zero, g, ladder=[100, 400])
    assert r.statistic == 0 and r.verdict
    b = simulate_batch(g, 400, 20, 1, checkpoints=[100], track=zero.norm())
    assert corrector_influence(b, ladder=[100, 400]).verdict
    with pytest.raises(ValueError):
        corrector_influence(simulate_batch(g, 10, 5, 1))


def test_corrector_influence_paths_match_batch(env60):
    g, c = env60.graph, env60.corrector
    paths = [simulate(g, 300, seed=8, index=i) for i in range(30)]
    b = simulate_batch(g, 300, 30, 8, checkpoints=[75], track=c.norm())
    a = corrector_influence(paths, c, g, ladder=[75, 300])
    assert a.metadata["percentiles"] == pytest.approx(corrector_influence(b, ladder=[75, 300]).metadata["percentiles"])


@pytest.fixture(scope="module")
def env150():
    return prepare_environment(42, 150)


def test_quenched_same_seed_identical(env150):
    a = empirical_D_for(env150, 500, 2000, master_seed=1)
    b = empirical_D_for(prepare_environment(42, 150), 500, 2000, master_seed=1)
    assert np.array_equal(a.D, b.D) and np.array_equal(a.halfwidth, b.halfwidth)


def test_walk_seed_reshuffle_within_width(env150):
    a = empirical_D_for(env150, 500, 4000, master_seed=1)
    b = empirical_D_for(env150, 500, 4000, master_seed=2)
    assert agreement_test(a, b).verdict
