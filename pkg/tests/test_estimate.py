import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rvstar.errors import InsufficientData, InvalidParameter, NoExceedances, NonPositiveThreshold, ShapeMismatch
from rvstar.estimate import (
    SummarySpec,
    ThresholdRule,
    compare_spectral,
    empirical_spectral,
    extremogram,
    hill,
    pareto_mle,
    spectral_summaries,
)
from rvstar.models import ar1_positive, iid_pareto, true_forward_spectral
from rvstar.rng import stream
from rvstar.series import SeriesPath
from rvstar.starspace import Euclidean


@pytest.fixture(scope="module")
def ar1_alpha1():
    return simulate_cached(ar1_positive(0.5, 1), 1_000_000, 21)


@pytest.fixture(scope="module")
def iid_path():
    return simulate_cached(iid_pareto(1), 1_000_000, 22)


def simulate_cached(model, n, seed):
    from rvstar.models import simulate

    return simulate(model, n, seed)


def test_hill_arithmetic():
    est = hill(np.exp([3.0, 2.0, 1.0, 0.0]), 3)
    assert est.alpha_hat == pytest.approx(0.5, rel=1e-15)
    assert est.threshold == 1.0


def test_hill_exact_pareto_two():
    z = stream(2024, "hill-oracle").pareto(2.0, 100_000) + 1.0
    est = hill(z, 1000)
    assert 1.8 <= est.alpha_hat <= 2.2


@pytest.mark.parametrize("k", [0, 4, 5])
def test_hill_needs_k_below_n(k):
    with pytest.raises(InsufficientData):
        hill(np.arange(1.0, 5.0), k)


def test_hill_rejects_zero_threshold():
    with pytest.raises(NonPositiveThreshold):
        hill(np.array([0.0, 0.0, 3.0, 4.0]), 2)


@given(st.floats(0.5, 4.0), st.floats(0.1, 100.0))
def test_hill_is_scale_invariant(alpha, c):
    z = stream(1, "scale").pareto(alpha, 2000) + 1.0
    a, b = hill(z, 200), hill(c * z, 200)
    assert a.alpha_hat == pytest.approx(b.alpha_hat, rel=1e-9)


def test_pareto_mle():
    assert pareto_mle(np.exp([1.0, 1.0])) == pytest.approx(1.0)


def test_threshold_rule():
    x = np.arange(1.0, 101.0)
    assert ThresholdRule(u=5.0).resolve(x) == 5.0
    assert ThresholdRule(k=10).resolve(x) == 90.0
    assert ThresholdRule().resolve(x) == x[-math.ceil(100**0.7) - 1]
    assert ThresholdRule(quantile=0.5).resolve(x) == pytest.approx(50.5)
    with pytest.raises(InvalidParameter):
        ThresholdRule(u=1.0, k=3)
    with pytest.raises(NonPositiveThreshold):
        ThresholdRule(u=-1.0)
    with pytest.raises(InvalidParameter):
        ThresholdRule.from_config({"level": 3})
    assert ThresholdRule.from_config(2) == ThresholdRule(u=2.0)


def test_spectral_draws_have_unit_center(ar1_alpha1):
    emp = empirical_spectral(ar1_alpha1, 2, ThresholdRule(quantile=0.999))
    np.testing.assert_allclose(emp.draws.modulus(0), 1.0, rtol=1e-14)
    assert emp.n == np.count_nonzero(ar1_alpha1.moduli()[2:-2] > emp.u)
    assert np.all(emp.ratio > 1.0)


def test_iid_lag_one_exceedance_vanishes_with_threshold(iid_path):
    fracs = []
    for q in (0.9, 0.99, 0.999):
        emp = empirical_spectral(iid_path, 1, ThresholdRule(quantile=q))
        fracs.append(float(np.mean(emp.draws.modulus(1) > 0.5)))
    assert fracs[0] > fracs[1] > fracs[2]
    assert fracs[2] < 0.01


def test_spectral_needs_exceedances():
    path = SeriesPath(np.ones(10), Euclidean(1))
    with pytest.raises(NoExceedances):
        empirical_spectral(path, 1, ThresholdRule(u=2.0))
    with pytest.raises(InsufficientData):
        empirical_spectral(SeriesPath(np.ones(2), Euclidean(1)), 1, ThresholdRule(u=0.5))


def test_extremogram_lag_zero_and_ar1(ar1_alpha1):
    curve = extremogram(ar1_alpha1, [0, 1], ThresholdRule(quantile=0.999))
    assert curve.values[0] == 1.0
    assert abs(curve.values[1] - 0.5) <= 3 * curve.se[1]
    assert np.all((curve.values >= 0) & (curve.values <= 1))


def test_extremogram_iid_is_marginal_rate(iid_path):
    curve = extremogram(iid_path, [3], ThresholdRule(quantile=0.99))
    assert abs(curve.values[0] - 0.01) <= 4 * math.sqrt(0.01 * 0.99 / curve.n_exceed)


def test_compare_iid_zero_mass_at_lag_one(iid_path):
    emp = empirical_spectral(iid_path, 1, ThresholdRule(quantile=0.999))
    law = true_forward_spectral(iid_pareto(1))
    rep = compare_spectral(emp, law, [SummarySpec("zero_mass", 1)], n_law=20_000)
    row = rep.rows[0]
    assert row["law"] == 1.0
    assert row["empirical"] > 0.97
    assert rep.passed


def test_compare_ar1_moment_at_lag_one(ar1_alpha1):
    emp = empirical_spectral(ar1_alpha1, 1, ThresholdRule(quantile=0.999))
    law = true_forward_spectral(ar1_positive(0.5, 1))
    rep = compare_spectral(emp, law, [SummarySpec("capped_moment", 1)], n_law=20_000)
    row = rep.rows[0]
    assert row["law"] == pytest.approx(0.5)
    assert row["empirical"] == pytest.approx(0.5, abs=0.01)
    assert rep.passed, rep.to_dict()


def test_compare_ar1_default_battery(ar1_alpha1):
    emp = empirical_spectral(ar1_alpha1, 2, ThresholdRule(quantile=0.999))
    law = true_forward_spectral(ar1_positive(0.5, 1))
    rep = compare_spectral(emp, law, n_law=50_000)
    assert rep.passed, rep.to_dict()


@pytest.mark.parametrize("model", [ar1_positive(0.5, 2), iid_pareto(1)], ids=lambda m: m.label())
def test_compare_law_with_itself(model):
    law = true_forward_spectral(model)
    rep = compare_spectral(law, law, n_law=20_000, seed=3)
    assert rep.max_abs_z <= 4, rep.to_dict()


def test_compare_rejects_space_mismatch(ar1_alpha1):
    emp = empirical_spectral(ar1_alpha1, 1, ThresholdRule(quantile=0.999))
    with pytest.raises(ShapeMismatch):
        compare_spectral(emp, true_forward_spectral(iid_pareto(1, Euclidean(2))))


def test_zero_mass_bias_shrinks_with_threshold(iid_path):
    # the law puts all lag -1 mass at the origin; finite thresholds leak below it
    spec = [SummarySpec("zero_mass", -1)]
    gaps = []
    for q in (0.99, 0.999, 0.9999):
        emp = empirical_spectral(iid_path, 1, ThresholdRule(quantile=q))
        gaps.append(1.0 - spectral_summaries(emp, spec)["zero_mass[-1]"].value)
    assert gaps[0] > gaps[1] > gaps[2]
