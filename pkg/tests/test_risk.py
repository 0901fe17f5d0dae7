from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import stats

from maxstab.clt import normalized_integral, run_replicates
from maxstab.errors import InputError
from maxstab.functionals import CostFunctional
from maxstab.models import FieldRealization, GridSpec, SimulationControl, SmithModel
from maxstab.regions import Box, van_hove_squares
from maxstab.risk import (
    gaussian_approx,
    homogeneity_slope,
    normalized_loss,
    risk_experiment,
    risk_report,
    synthetic_losses,
)
from maxstab.simulate import FieldSimulator

SMITH = SmithModel(np.eye(2))
MU_E = 0.33663146166986313


def test_normalized_loss_trivial_fields():
    g = GridSpec((0.0, 0.0), 0.5, (8, 8))
    V = Box.square(4.0)
    assert normalized_loss(FieldRealization(g, np.full((8, 8), 2.0)), 2.5, V) == 0.0
    assert normalized_loss(FieldRealization(g, np.full((8, 8), math.e * 2.5)), 2.5, V) == pytest.approx(1.0)


def test_normalized_loss_identity_and_brute_force():
    grid = GridSpec((0.0, 0.0), 0.25, (40, 40))
    f = FieldSimulator(SMITH, SimulationControl(seed=3)).sample_grid(grid)
    V = Box.square(10.0)
    loss = normalized_loss(f, math.e, V)
    brute = sum(max(math.log(z) - 1.0, 0.0) for z in f.values.ravel()) * 0.0625 / 100.0
    assert loss == pytest.approx(brute, abs=1e-12)
    F = CostFunctional("deductible-log", u=math.e)
    assert math.sqrt(V.volume) * (loss - MU_E) == pytest.approx(normalized_integral(f, F, MU_E, V), abs=1e-12)


def test_loss_non_increasing_in_deductible():
    grid = GridSpec((0.0, 0.0), 0.5, (8, 8))
    f = FieldSimulator(SMITH, SimulationControl(seed=4)).sample_grid(grid)
    V = Box.square(4.0)
    losses = [normalized_loss(f, u, V) for u in (1.0, 2.0, 4.0, 8.0)]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_small_deductible_warns():
    grid = GridSpec((0.0, 0.0), 0.5, (2, 2))
    f = FieldRealization(grid, np.ones((2, 2)))
    with pytest.warns(RuntimeWarning):
        normalized_loss(f, 0.5, Box.square(1.0))


def test_gaussian_approx():
    assert gaussian_approx(100.0, 0.3, 11.0, 0.5) == pytest.approx(0.3)
    d1 = gaussian_approx(100.0, 0.3, 11.0, 0.95) - 0.3
    d4 = gaussian_approx(400.0, 0.3, 11.0, 0.95) - 0.3
    assert d4 == pytest.approx(d1 / 2)
    assert gaussian_approx(1e12, 0.3, 11.0, 0.99) == pytest.approx(0.3, abs=1e-4)
    with pytest.raises(InputError):
        gaussian_approx(1.0, 0.0, 1.0, 1.0)


def test_homogeneity_slope_exact():
    v = np.array([100.0, 400.0, 1600.0])
    slope, _ = homogeneity_slope(v, 3.0 * v**-0.5)
    assert slope == pytest.approx(-0.5, abs=1e-12)
    assert homogeneity_slope([100.0], [0.1]) is None
    assert homogeneity_slope(v, [0.1, -0.1, 0.2]) is None


def test_synthetic_null_slope():
    vols = [100.0, 400.0, 1600.0]
    losses = synthetic_losses(MU_E, 11.0, vols, 20_000, seed=1)
    rep = risk_report(losses, vols, math.e, MU_E, 11.0, [0.95])
    assert rep.slope(0.95) == pytest.approx(-0.5, abs=0.02)


def test_single_region_flag():
    losses = synthetic_losses(MU_E, 11.0, [100.0], 500, seed=2)
    rep = risk_report(losses, [100.0], math.e, MU_E, 11.0, [0.9, 0.95])
    assert rep.slope(0.95) is None
    assert any("single region" in f for f in rep.flags)


def test_nonpositive_deviation_flagged():
    losses = np.tile(np.array([[0.0, 0.0]]), (100, 1))
    rep = risk_report(losses, [100.0, 400.0], math.e, MU_E, 11.0, [0.9])
    assert rep.slope(0.9) is None and rep.flags


def test_var_monotone_and_es_dominates():
    vols = [100.0, 400.0]
    rep = risk_report(synthetic_losses(MU_E, 11.0, vols, 2000, seed=3), vols, math.e, MU_E, 11.0,
                      [0.99, 0.9, 0.95])
    for r in rep.regions:
        var = [lv["empirical_var"] for lv in r["levels"]]
        assert var == sorted(var)
        for lv in r["levels"]:
            assert lv["expected_shortfall"] >= lv["empirical_var"]
            z = stats.norm.ppf(lv["level"])
            assert lv["gaussian_var"] == pytest.approx(MU_E + z * math.sqrt(11.0 / r["volume"]))
    with pytest.raises(InputError):
        risk_report(np.zeros((10, 2)), vols, math.e, MU_E, 11.0, [1.0])


def test_risk_experiment_small():
    sim = FieldSimulator(SMITH, SimulationControl(seed=5))
    rep = risk_experiment(sim, math.e, van_hove_squares(2, [2, 4], offset=0.5), 0.5, 60, [0.9], 11.0)
    assert rep.mu_analytic == pytest.approx(MU_E)
    assert len(rep.rows()) == 2
    d = rep.to_dict()
    assert d["report"] == "risk" and d["schema_version"] == 1
    assert "homogeneity slope" in rep.summary()


def test_table_and_loss_agree():
    sim = FieldSimulator(SMITH, SimulationControl(seed=6))
    F = CostFunctional("deductible-log", u=math.e)
    t = run_replicates(sim, F, van_hove_squares(2, [2, 4], offset=0.5), 0.5, 10)
    assert np.all(t.loss >= 0)
