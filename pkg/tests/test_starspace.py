import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rvstar.errors import OriginPoint, ShapeMismatch
from rvstar.starspace import (
    Euclidean,
    PathSup,
    SnowflakeGauge,
    WeightedHilbert,
    gauge_modulus,
    polar_batch,
    polar_decompose,
    reconstruct,
    seq_metric,
    seq_metric_truncation_bound,
    space_from_config,
    validate_axioms,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
lam = st.floats(1e-3, 1e3)


def test_polar_of_3_4():
    p = polar_decompose(Euclidean(2), [3.0, 4.0])
    assert p.r == 5.0
    np.testing.assert_allclose(p.theta, [0.6, 0.8], rtol=1e-15)


def test_polar_unit_point_is_fixed():
    x = np.array([0.6, -0.8])
    p = polar_decompose(Euclidean(2), x)
    assert p.r == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_allclose(p.theta, x, rtol=1e-15)


def test_polar_origin_raises():
    with pytest.raises(OriginPoint):
        polar_decompose(Euclidean(2), [0.0, 0.0])
    with pytest.raises(OriginPoint):
        polar_batch(Euclidean(2), np.array([[1.0, 0.0], [0.0, 0.0]]))


@given(arrays(float, 3, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-6))
def test_polar_round_trip(x):
    space = Euclidean(3)
    p = polar_decompose(space, x)
    np.testing.assert_allclose(reconstruct(space, p), x, rtol=1e-12, atol=1e-12)
    assert space.modulus(p.theta) == pytest.approx(1.0, rel=1e-12)


@given(arrays(float, 16, elements=finite).filter(lambda v: np.abs(v).max() > 1e-6), lam)
def test_path_sup_homogeneity_is_exact_for_powers_of_two(x, scale):
    space = PathSup(16)
    c = 2.0 ** round(math.log2(scale))
    assert space.modulus(space.scale(c, x)) == c * space.modulus(x)


@given(arrays(float, 2, elements=finite), lam)
def test_euclidean_modulus_homogeneity(x, c):
    space = Euclidean(2)
    assert space.modulus(space.scale(c, x)) == pytest.approx(c * space.modulus(x), rel=1e-14, abs=1e-300)


def test_gauge_snowflake_recovers_norm():
    space = SnowflakeGauge(2, beta=0.5)
    x = np.array([9.0, 0.0])
    assert space.dist(x, space.origin) == pytest.approx(3.0)
    assert gauge_modulus(space, x) == pytest.approx(9.0, rel=1e-12)


def test_gauge_at_origin_is_zero():
    assert gauge_modulus(SnowflakeGauge(2), np.zeros(2)) == 0.0


def test_gauge_of_norm_metric_is_norm():
    assert gauge_modulus(Euclidean(2), [3.0, 4.0]) == pytest.approx(5.0, rel=1e-12)


@given(arrays(float, 2, elements=finite).filter(lambda v: np.linalg.norm(v) > 1e-3), st.floats(0.2, 1.0))
def test_gauge_snowflake_matches_closed_form(x, beta):
    space = SnowflakeGauge(2, beta=beta)
    assert gauge_modulus(space, x) == pytest.approx(np.linalg.norm(x), rel=1e-10)


@pytest.mark.parametrize(
    "space, power",
    [(Euclidean(3), 1.0), (PathSup(16), 1.0), (SnowflakeGauge(2, 0.5), 2.0)],
    ids=["euclidean", "path_sup", "snowflake_gauge"],
)
def test_builtin_spaces_pass_axioms(space, power):
    rep = validate_axioms(space, n_samples=10_000, seed=1)
    assert rep.passed, rep.to_dict()
    assert not rep.neighbourhood_flagged
    # inf of the modulus over {d(x, 0) >= eps} is eps**power analytically
    for e in rep.neighbourhood:
        assert e.sampled_inf >= e.epsilon**power * (1 - 1e-9)


def test_weighted_hilbert_is_flagged_with_basis_witness():
    rep = validate_axioms(WeightedHilbert(100), n_samples=10_000, seed=0)
    assert rep.neighbourhood_flagged
    at_one = next(e for e in rep.neighbourhood if e.epsilon == 1.0)
    assert at_one.flagged
    assert at_one.witness_modulus == pytest.approx(0.1, abs=1e-9)
    assert at_one.witness_dist == pytest.approx(1.0, abs=1e-9)
    assert np.flatnonzero(at_one.witness).tolist() == [99]


def test_weighted_hilbert_modulus_of_basis_vectors():
    space = WeightedHilbert(100)
    e = np.eye(100)
    np.testing.assert_allclose(space.modulus(e), 1 / np.sqrt(np.arange(1, 101)), rtol=1e-15)
    np.testing.assert_allclose(space.dist(e, space.origin), 1.0)


def test_seq_metric_examples():
    sp = Euclidean(1)
    x = np.array([[0.0]])
    assert seq_metric(sp, x, x) == 0.0
    assert seq_metric(sp, x, np.array([[1.0]])) == 0.5
    a = np.zeros((3, 1))
    assert seq_metric(sp, a, a + 1.0) == pytest.approx(1.0, abs=0)
    assert seq_metric_truncation_bound(3) == 0.25


def test_seq_metric_rejects_even_windows():
    with pytest.raises(ShapeMismatch):
        seq_metric(Euclidean(1), np.zeros((2, 1)), np.zeros((2, 1)))


windows = arrays(float, (5, 2), elements=finite)


@given(windows, windows, windows)
def test_seq_metric_is_a_bounded_metric(x, y, z):
    sp = Euclidean(2)
    dxy, dyx = seq_metric(sp, x, y), seq_metric(sp, y, x)
    assert dxy == pytest.approx(dyx, abs=1e-15)
    assert dxy <= seq_metric(sp, x, z) + seq_metric(sp, z, y) + 1e-12
    assert 0 <= dxy < 3.0


def test_space_from_config_round_trip():
    for sp in (Euclidean(2, p=1), PathSup(8), SnowflakeGauge(3, 0.25), WeightedHilbert(10)):
        assert space_from_config(sp.descriptor()) == sp
