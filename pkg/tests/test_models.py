import numpy as np
import pytest

from rvstar.errors import InvalidParameter
from rvstar.estimate import ThresholdRule, empirical_spectral
from rvstar.models import (
    ar1_positive,
    iid_pareto,
    max_moving_average,
    model_from_config,
    path_amplitude,
    simulate,
    true_extremogram,
    true_forward_spectral,
    true_moment,
)
from rvstar.starspace import Euclidean


def test_iid_pareto_support():
    path = simulate(iid_pareto(1.0), 3, seed=11)
    assert len(path) == 3
    assert np.all(path.moduli() >= 1.0)


def test_same_seed_same_path():
    a = simulate(ar1_positive(0.5, 2), 1000, seed=5)
    b = simulate(ar1_positive(0.5, 2), 1000, seed=5)
    assert np.array_equal(a.points, b.points)
    c = simulate(ar1_positive(0.5, 2), 1000, seed=6)
    assert not np.array_equal(a.points, c.points)


def test_worker_count_does_not_change_paths():
    model = iid_pareto(1.5, Euclidean(2))
    a = simulate(model, 200_000, seed=3, workers=1)
    b = simulate(model, 200_000, seed=3, workers=4)
    assert np.array_equal(a.points, b.points)


def test_max_moving_average_dominates_innovation():
    path = simulate(max_moving_average((1, 1), 1), 300_000, seed=2)
    x = path.points[:, 0]
    assert np.all(x >= 1.0)
    # X_t == X_{t+1} exactly when Z_t is the largest of Z_{t-1}, Z_t, Z_{t+1}
    ties = np.mean(x[1:] == x[:-1])
    assert abs(ties - 1 / 3) < 4 * np.sqrt(2 / 9 / x.size) * 2


def test_ar1_burn_in_is_geometric():
    assert ar1_positive(0.5, 1).default_burn_in() == 40
    assert iid_pareto(1).default_burn_in() == 0


@pytest.mark.parametrize("bad", [dict(phi=1.0), dict(phi=0.0), dict(phi=-0.2)])
def test_ar1_rejects_phi_outside_unit_interval(bad):
    with pytest.raises(InvalidParameter):
        ar1_positive(bad["phi"], 1)


def test_invalid_alpha():
    with pytest.raises(InvalidParameter):
        iid_pareto(0.0)


def test_model_from_config():
    m = model_from_config({"kind": "max_moving_average", "coefficients": [1, 0.5], "alpha": 2})
    assert m.label() == "mma(1,0.5;2)"
    with pytest.raises(InvalidParameter):
        model_from_config({"kind": "garch", "alpha": 1})


def test_iid_theta_one_is_origin():
    w = true_forward_spectral(iid_pareto(1)).sample(1000, 2, np.random.default_rng(0))
    assert w.is_zero(1).all() and w.is_zero(2).all()
    np.testing.assert_allclose(w.modulus(0), 1.0)


def test_ar1_theta_three():
    w = true_forward_spectral(ar1_positive(0.5, 1)).sample(100, 3, np.random.default_rng(0))
    np.testing.assert_allclose(w.modulus(3), 0.125, rtol=1e-15)


def test_mma_dominating_lag_split():
    w = true_forward_spectral(max_moving_average((1, 1), 1)).sample(100_000, 1, np.random.default_rng(0))
    rho = w.modulus(1)
    assert set(np.unique(rho)) == {0.0, 1.0}
    assert abs(rho.mean() - 0.5) < 3 * 0.5 / np.sqrt(rho.size)


def test_closed_forms():
    assert true_extremogram(ar1_positive(0.5, 1), 1) == 0.5
    assert true_extremogram(iid_pareto(1), 2) == 0.0
    for model in (ar1_positive(0.5, 2), iid_pareto(1), max_moving_average((1, 1), 1)):
        assert true_extremogram(model, 0) == 1.0
        assert true_moment(model, 0) == 1.0
    assert true_moment(max_moving_average((1, 0.5, 0.25), 2), 1) == pytest.approx((0.25 + 0.0625) / 1.3125)
    assert true_moment(ar1_positive(0.5, 2), 3) == 0.5**6


def test_path_amplitude_points_are_scaled_template():
    model = path_amplitude(1.0)
    path = simulate(model, 50, seed=0)
    psi = np.asarray(model.path)
    np.testing.assert_allclose(path.points / path.moduli()[:, None], np.broadcast_to(psi, path.points.shape))


@pytest.mark.slow
def test_ar1_empirical_spectral_concentrates_at_phi_cubed():
    # oracle: the simulated path alone, with no reference to the closed-form sampler
    path = simulate(ar1_positive(0.5, 1), 10_000_000, seed=8)
    emp = empirical_spectral(path, 3, ThresholdRule(quantile=0.9999))
    assert abs(float(np.median(emp.draws.modulus(3))) - 0.125) < 0.01


def test_mma_empirical_lag_one_split():
    path = simulate(max_moving_average((1, 1), 1), 1_000_000, seed=4)
    emp = empirical_spectral(path, 1, ThresholdRule(quantile=0.999))
    rho = emp.draws.modulus(1)
    near_one = np.mean(rho > 0.5)
    assert abs(near_one - 0.5) < 4 * 0.5 / np.sqrt(emp.n)
