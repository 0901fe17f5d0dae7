from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from maxstab import rng as rngmod
from maxstab.clt import (
    clt_experiment,
    clt_report,
    decompose_boundary,
    estimate_sigma2_cubes,
    estimate_sigma2_integral,
    normality_stats,
    normalized_integral,
    qq_points,
    run_replicates,
)
from maxstab.errors import InputError
from maxstab.functionals import CostFunctional
from maxstab.models import FieldRealization, GridSpec, SimulationControl, SmithModel
from maxstab.regions import Box, van_hove_squares
from maxstab.simulate import FieldSimulator
from oracles import deductible_mean, deductible_second_moment

SMITH = SmithModel(np.eye(2))
F_E = CostFunctional("deductible-log", u=math.e)


def _field(seed=0, side=10.0, spacing=0.25):
    grid = GridSpec.covering([0.0, 0.0], [side, side], spacing)
    return FieldSimulator(SMITH, SimulationControl(seed=seed)).sample_grid(grid)


def test_normalized_integral_matches_brute_force():
    f = _field()
    mu = F_E.mean()
    V = Box.square(10.0)
    total = 0.0
    for i in range(40):
        for j in range(40):
            total += (math.log(max(f.values[i, j], math.e)) - 1.0 - mu) * 0.0625
    assert normalized_integral(f, F_E, mu, V) == pytest.approx(total / 10.0, abs=1e-12)


def test_normalized_integral_centred_and_linear():
    g = GridSpec((0.0, 0.0), 0.5, (8, 8))
    f = FieldRealization(g, np.full((8, 8), math.e**2))
    V = Box.square(4.0)
    assert normalized_integral(f, F_E, 1.0, V) == 0.0
    f = _field(seed=1)
    V = Box.square(6.0, offset=1.0)
    a, b = normalized_integral(f, F_E, 0.0, V), normalized_integral(f, F_E, 0.7, V)
    assert (a - b) / 0.7 == pytest.approx(math.sqrt(V.volume), rel=1e-12)


def test_decomposition_on_cell_union_has_no_remainder():
    f = _field(seed=2)
    V = Box.square(8.0, offset=1.0)
    inner, outer = decompose_boundary(f, F_E, F_E.mean(), V)
    assert outer == 0.0
    assert inner == pytest.approx(normalized_integral(f, F_E, F_E.mean(), V), abs=1e-12)


def test_decomposition_with_partial_cells():
    f = _field(seed=3, side=10.5, spacing=0.5)
    V = Box.square(10.5)
    inner, outer = decompose_boundary(f, F_E, F_E.mean(), V)
    assert inner + outer == pytest.approx(normalized_integral(f, F_E, F_E.mean(), V), abs=1e-12)
    assert V.volume - V.unit_cells().volume == pytest.approx(10.25)


def test_normality_stats_null_and_rejections():
    p = stats.qmc.Sobol(1, scramble=True, seed=0).random(2**13).ravel()
    ok = normality_stats(stats.norm.ppf(p), 0.0, 1.0, n_mc=999)
    assert ok["ks_statistic"] < 0.02 and ok["ad_pvalue"] > 0.01
    const = normality_stats(np.full(500, 0.3), 0.0, 1.0, n_mc=999)
    assert const["ks_pvalue"] < 1e-6 and const["ad_pvalue"] <= 0.002
    heavy = normality_stats(1.0 / np.random.default_rng(0).exponential(size=500), 0.0, 1.0, n_mc=999)
    assert heavy["ad_pvalue"] < 0.01
    with pytest.raises(InputError):
        normality_stats(np.zeros(5), 0.0, 1.0)


def test_qq_points():
    q = qq_points([3.0, 1.0, 2.0], 4.0)
    np.testing.assert_array_equal(q[:, 1], [1.0, 2.0, 3.0])
    assert q[1, 0] == 0.0 and q[2, 0] == pytest.approx(2 * stats.norm.ppf(5 / 6))


def test_cubes_single_cell_window_is_cube_variance():
    sim = FieldSimulator(SMITH, SimulationControl(seed=4))
    est = estimate_sigma2_cubes(sim, F_E, 0.5, 2000, extent=0)
    assert est.n_lags == 0 and est.value == est.zero_lag
    full = estimate_sigma2_cubes(sim, F_E, 0.5, 2000, extent=3)
    assert full.value >= est.value - 3 * full.std_error


class _Constant:
    """A constant integrand (diagnostic only: not a valid cost functional)."""

    def __call__(self, z):
        return np.full(np.shape(z), 2.0)

    def mean(self):
        return 2.0


def test_constant_functional_has_zero_long_run_variance():
    sim = FieldSimulator(SMITH, SimulationControl(seed=5))
    assert estimate_sigma2_cubes(sim, _Constant(), 0.5, 200, extent=2).value == 0.0


def test_zero_lag_term_matches_variance_oracle():
    sim = FieldSimulator(SMITH, SimulationControl(seed=6))
    est = estimate_sigma2_integral(sim, F_E, 0.5, 20_000, radius=0.0)
    var = deductible_second_moment(math.e) - deductible_mean(math.e) ** 2
    assert est.value / 0.25 == pytest.approx(var, rel=0.1)


def test_sigma2_shrinks_with_correlation_length():
    vals = []
    for s in (0.5, 0.25):
        sim = FieldSimulator(SmithModel(np.eye(2) * s**2), SimulationControl(seed=7))
        est = estimate_sigma2_integral(sim, F_E, 0.25, 1000, radius=2.0, ring_width=0.5)
        assert est.positive
        vals.append(est)
    assert vals[1].value < vals[0].value - 3 * math.hypot(vals[0].std_error, vals[1].std_error)


def test_run_replicates_identities():
    sim = FieldSimulator(SMITH, SimulationControl(seed=8))
    seq = van_hove_squares(2, [2, 4, 6], offset=0.5)
    t = run_replicates(sim, F_E, seq, 0.5, 30)
    assert t.integral.shape == (30, 3)
    assert t.decomposition_error() <= 1e-12
    assert t.loss_identity_error() <= 1e-12
    assert np.all(t.loss >= 0)


class _IidSimulator:
    """Mock simulator with independent Frechet values in every cell."""

    model = SMITH
    method = "iid-surrogate"
    seed = 31
    last_meta: dict = {}

    def sample_grids(self, grid, n, first=0, workers=1):
        out = np.empty((n,) + grid.counts)
        for i in range(n):
            out[i] = 1.0 / rngmod.stream(self.seed, first + i).exponential(size=grid.counts)
        return out


def test_iid_surrogate_passes_normality():
    F = CostFunctional("deductible-log", u=1.0)
    var = deductible_second_moment(1.0) - deductible_mean(1.0) ** 2
    spacing = 0.5
    rep = clt_experiment(_IidSimulator(), F, van_hove_squares(2, [2, 4, 8], offset=0.0), spacing, 300,
                         sigma2=var * spacing**2)
    assert rep.asymptotics_reached
    assert rep.regions[-1]["variance_ratio"] == pytest.approx(1.0, abs=0.25)


def test_tiny_region_is_flagged_without_crash():
    sim = FieldSimulator(SMITH, SimulationControl(seed=9))
    rep = clt_experiment(sim, F_E, van_hove_squares(2, [2], offset=0.5), 0.25, 200, sigma2=11.0)
    assert rep.asymptotics_reached is False
    assert rep.to_dict()["report"] == "clt"
    assert "asymptotics reached" in rep.summary()
    with pytest.raises(InputError):
        clt_experiment(sim, F_E, van_hove_squares(2, [2]), 0.25, 50, sigma2=11.0)


def test_plug_in_mean_shift_is_exact():
    sim = FieldSimulator(SMITH, SimulationControl(seed=10))
    seq = van_hove_squares(2, [2, 4], offset=0.5)
    t = run_replicates(sim, F_E, seq, 0.5, 40)
    rep = clt_report(sim, F_E, t, 11.0, plug_in_mean=True)
    assert rep.mu_source == "plug-in"
    assert rep.table.loss_identity_error() <= 1e-12
    assert rep.decomposition_error <= 1e-12


@pytest.mark.slow
def test_sigma2_stable_under_grid_refinement():
    sim = FieldSimulator(SMITH, SimulationControl(seed=11))
    coarse = estimate_sigma2_integral(sim, F_E, 0.5, 1000, radius=8.0)
    fine = estimate_sigma2_integral(sim, F_E, 0.25, 1000, radius=8.0)
    assert abs(fine.value - coarse.value) / fine.value < 0.10
