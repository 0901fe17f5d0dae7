from __future__ import annotations

import numpy as np
import pytest

from maxstab.errors import InputError, InvariantError
from maxstab.models import (
    BrownResnickModel,
    FieldRealization,
    GridSpec,
    SimulationControl,
    SmithModel,
    model_from_dict,
)


def test_grid_sites_row_major_midpoints():
    g = GridSpec((0.0, 10.0), 0.5, (2, 3))
    s = g.sites()
    assert s.shape == (6, 2)
    np.testing.assert_allclose(s[:3], [[0.25, 10.25], [0.25, 10.75], [0.25, 11.25]])
    assert g.size == 6 and g.cell_volume == 0.25
    np.testing.assert_allclose(g.upper, [1.0, 11.5])


def test_grid_covering_requires_exact_tiling():
    g = GridSpec.covering([0.5, 0.5], [10.5, 10.5], 0.25)
    assert g.counts == (40, 40)
    with pytest.raises(InputError):
        GridSpec.covering([0.0], [1.0], 0.3)


@pytest.mark.parametrize("kwargs", [
    {"origin": (0.0,), "spacing": 0.0, "counts": (3,)},
    {"origin": (0.0, 0.0), "spacing": 1.0, "counts": (3,)},
    {"origin": (0.0,) * 4, "spacing": 1.0, "counts": (2,) * 4},
    {"origin": (0.0,), "spacing": 1.0, "counts": (0,)},
])
def test_grid_validation(kwargs):
    with pytest.raises(InputError):
        GridSpec(**kwargs)


def test_smith_model_validation():
    with pytest.raises(InputError):
        SmithModel([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(InputError):
        SmithModel([[1.0, 2.0], [2.0, 1.0]])
    with pytest.warns(RuntimeWarning):
        SmithModel(np.diag([1.0, 1e-7]))


def test_smith_fmax():
    m = SmithModel(np.diag([4.0, 1.0]))
    assert m.f_max == pytest.approx(1 / (2 * np.pi * 2.0))
    assert m.density(np.zeros(2)) == pytest.approx(m.f_max)


def test_model_round_trip():
    for m in (SmithModel(np.eye(2) * 2.0), BrownResnickModel.power(1.0, 1.5)):
        assert model_from_dict(m.describe()) == m


def test_control_method_compatibility():
    c = SimulationControl()
    assert c.method_for(SmithModel(np.eye(2))) == "smith-exact"
    assert c.method_for(BrownResnickModel.power(1, 1)) == "br-threshold"
    with pytest.raises(InputError):
        SimulationControl(method="br-extremal").method_for(SmithModel(np.eye(2)))
    with pytest.raises(InputError):
        SimulationControl(quantile_bound=1.0)
    with pytest.raises(InputError):
        SimulationControl(max_spectral_draws=0)


def test_realization_must_be_positive():
    g = GridSpec((0.0,), 1.0, (3,))
    with pytest.raises(InvariantError):
        FieldRealization(g, [1.0, 0.0, 2.0])
