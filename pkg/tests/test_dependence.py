from __future__ import annotations

import math

import numpy as np
import pytest

from maxstab.dependence import (
    cube_sites,
    decay_threshold,
    estimate_cz,
    estimate_nu,
    estimate_nu_curve,
    estimate_theta_areal,
    fit_decay,
    local_slopes,
    mixing_alpha_bound,
    nu_from_maxima,
    theta_closed_form,
    theta_from_maxima,
)
from maxstab.errors import EstimationError, InputError
from maxstab.models import BrownResnickModel, GridSpec, SimulationControl, SmithModel
from maxstab.simulate import FieldSimulator
from oracles import pair_scale_br, theta_pair

SMITH = SmithModel(np.eye(2))
BR = BrownResnickModel.power(1.0, 1.0)


def test_closed_form_limits_and_value():
    assert theta_closed_form(SMITH, [0.0, 0.0]) == 1.0
    assert theta_closed_form(SMITH, [200.0, 0.0]) == pytest.approx(2.0, abs=1e-12)
    assert theta_closed_form(SMITH, [2.0, 0.0]) == pytest.approx(1.68269, abs=1e-5)
    for r in (0.5, 1, 2, 4, 8):
        assert theta_closed_form(BR, [r, 0.0]) == pytest.approx(theta_pair(pair_scale_br(1, 1, [r, 0])), abs=1e-12)


def test_closed_form_vectorized_and_monotone():
    lags = np.linspace(0, 10, 41)[:, None] * np.array([[1.0, 0.0]])
    vals = theta_closed_form(BR, lags)
    assert vals.shape == (41,) and np.all(np.diff(vals) > 0)


def test_decay_threshold():
    assert decay_threshold(2, 1.0) == 6.0
    assert decay_threshold(2, 4.0) == 4.0
    with pytest.raises(InputError):
        decay_threshold(2, 0.0)


def test_theta_from_maxima_independent_frechet():
    # the maximum of k independent unit Frechet variables is Frechet with scale k
    rng = np.random.default_rng(0)
    z = 1.0 / rng.exponential(size=(50_000, 3))
    est = theta_from_maxima(z.max(axis=1))
    assert abs(est.value - 3.0) <= 3 * est.std_error


def test_single_site_theta_and_cz_are_one():
    sim = FieldSimulator(BR, SimulationControl(seed=1))
    t = estimate_theta_areal(sim, [[0.3, 0.1]], 20_000)
    assert abs(t.value - 1.0) <= 3 * t.std_error
    c = estimate_cz(sim, [[0.3, 0.1]], 20_000)
    assert abs(c.value - 1.0) <= 3 * c.std_error


def test_areal_theta_and_cz_monotone_in_the_set():
    sim = FieldSimulator(SMITH, SimulationControl(seed=2))
    small = cube_sites([0.0, 0.0], 0.5)
    big = np.vstack([small, small + [2.0, 0.0]])
    a, b = estimate_theta_areal(sim, small, 20_000), estimate_theta_areal(sim, big, 20_000)
    assert a.value <= b.value + 3 * math.hypot(a.std_error, b.std_error)
    c1, c2 = estimate_cz(sim, small, 20_000), estimate_cz(sim, big, 20_000)
    assert c1.value <= c2.value + 3 * math.hypot(c1.std_error, c2.std_error)


def test_areal_theta_accepts_grid():
    sim = FieldSimulator(SMITH, SimulationControl(seed=3))
    est = estimate_theta_areal(sim, GridSpec((0.0, 0.0), 0.5, (2, 2)), 1000)
    assert 1.0 <= est.value <= 4.0
    with pytest.raises(InputError):
        estimate_theta_areal(sim, [[0.0, 0.0]], 10)


def test_cube_sites():
    s = cube_sites([1.0, 2.0], 0.25)
    assert s.shape == (16, 2)
    assert s.min() == 1.125 and s.max() == 2.875
    with pytest.raises(InputError):
        cube_sites([0.0], 0.3)


def test_nu_identity_is_exact_with_common_random_numbers():
    rng = np.random.default_rng(4)
    za, zb = 1.0 / rng.exponential(size=5000), 1.0 / rng.exponential(size=5000)
    est = nu_from_maxima(za, zb)
    direct = theta_from_maxima(za).value + theta_from_maxima(zb).value - theta_from_maxima(np.maximum(za, zb)).value
    assert abs(est.value - direct) <= 1e-12


def test_nu_for_complete_dependence_equals_cube_theta():
    sim = FieldSimulator(BrownResnickModel.power(1e-8, 1.0), SimulationControl(seed=5))
    est = estimate_nu(sim, (2, 0), 0.5, 5000)
    # the two cube suprema coincide, so nu = theta(A) = theta(A u B) ~ 1
    assert abs(est.value - 1.0) <= max(3 * est.std_error, 1e-3)


def test_nu_vanishes_for_distant_cubes():
    sim = FieldSimulator(SMITH, SimulationControl(seed=6))
    est = estimate_nu(sim, (20, 0), 0.25, 20_000)
    assert abs(est.value) <= 3 * est.std_error


def test_nu_dominates_pairwise_surrogate():
    sim = FieldSimulator(BR, SimulationControl(seed=7))
    est = estimate_nu(sim, (8, 0), 0.25, 10_000)
    pair = 2.0 - theta_pair(pair_scale_br(1, 1, [8, 0]))
    assert pair == pytest.approx(0.157, abs=1e-3)
    assert est.value >= pair - 3 * est.std_error


def test_nu_rejects_bad_lags():
    sim = FieldSimulator(SMITH, SimulationControl(seed=1))
    with pytest.raises(InputError):
        estimate_nu(sim, (0, 0), 0.5, 100)
    with pytest.raises(InputError):
        estimate_nu(sim, (1.5, 0), 0.5, 100)
    with pytest.raises(InputError):
        estimate_nu(sim, (1, 0, 0), 0.5, 100)


def test_fit_decay_exact_power_law():
    r = np.arange(2.0, 9.0)
    fit = fit_decay(r, r ** -5.0, np.full(r.size, 1e-9), dim=2)
    assert fit.b_hat == pytest.approx(5.0, abs=1e-9)
    assert not fit.passed and fit.threshold == 6.0
    fit = fit_decay(r, 3.0 * r ** -7.0, np.full(r.size, 1e-12), dim=2)
    assert fit.passed and fit.K_hat == pytest.approx(3.0, rel=1e-9)


def test_fit_decay_exponential_steepens_with_window():
    r = np.arange(1.0, 21.0)
    nu = np.exp(-r)
    se = np.full(r.size, 1e-15)
    slopes = [fit_decay(r[:k], nu[:k], se[:k], dim=2).b_hat for k in (5, 10, 20)]
    assert slopes[0] < slopes[1] < slopes[2]
    assert np.all(np.diff(local_slopes(r, nu)) > 0)


def test_fit_decay_excludes_noise_and_clamps():
    r = np.arange(2.0, 9.0)
    nu = np.array([1.0, 0.5, 0.3, 0.2, 0.01, -0.02, 0.005])
    se = np.full(r.size, 0.02)
    fit = fit_decay(r, nu, se, dim=2)
    assert max(fit.used) <= 5.0
    with pytest.raises(EstimationError):
        fit_decay(r, nu, se, dim=2, min_snr=100)
    clamped = fit_decay(r, nu, se, dim=2, min_snr=0)
    assert 7.0 in clamped.clamped


def test_nu_curve_reports_both_norms():
    sim = FieldSimulator(SMITH, SimulationControl(seed=8))
    curve = estimate_nu_curve(sim, [(1, 0), (1, 1), (2, 0), (2, 2), (3, 0)], 0.5, 4000, min_snr=3)
    d = curve.to_dict()
    assert [row["chebyshev"] for row in d["lags"]] == [1, 1, 2, 2, 3]
    assert d["lags"][1]["euclidean"] == pytest.approx(math.sqrt(2))
    assert np.all(curve.nu >= -3 * curve.std_error)


def test_mixing_bound():
    assert mixing_alpha_bound(2.0).alpha_bound == 0.0
    assert mixing_alpha_bound(1.0).alpha_bound == 2.0
    assert mixing_alpha_bound(1.68269).alpha_bound == pytest.approx(0.63462, abs=1e-9)
    with pytest.warns(RuntimeWarning):
        assert mixing_alpha_bound(2.02).alpha_bound == 0.0
    with pytest.raises(InputError):
        mixing_alpha_bound(2.5)


def test_mixing_bound_vanishes_with_distance():
    bounds = [mixing_alpha_bound(theta_closed_form(BR, [r, 0.0])).alpha_bound for r in (1, 4, 16, 64, 256)]
    assert np.all(np.diff(bounds) < 0) and bounds[-1] < 1e-6
