from __future__ import annotations

import numpy as np
import pytest

from maxstab.errors import InputError
from maxstab.models import GridSpec
from maxstab.regions import Box, VanHoveSequence, check_unit_lattice, region_slices, van_hove_squares


def test_boundary_ratio_arithmetic():
    assert Box.square(10.0).boundary_ratio(1.0) == pytest.approx((12**2 - 8**2) / 10**2)
    # (102^2 - 98^2) / 100^2 = 800 / 10000
    assert Box.square(100.0).boundary_ratio(1.0) == pytest.approx(0.08)


def test_boundary_ratios_decrease():
    seq = van_hove_squares(2, [10, 20, 40, 80])
    r = seq.boundary_ratios(1.0)
    assert all(b < a for a, b in zip(r, r[1:]))
    assert seq.volumes == [100.0, 400.0, 1600.0, 6400.0]


def test_sequence_validation():
    with pytest.raises(InputError):
        van_hove_squares(2, [10, 10])
    with pytest.raises(InputError):
        van_hove_squares(2, [0, 10])
    with pytest.raises(InputError):
        VanHoveSequence((Box.square(10.0, offset=0.0), Box.square(20.0, offset=5.0)))


def test_unit_cells():
    assert Box.square(10.5).unit_cells() == Box((0.0, 0.0), (10.0, 10.0))
    assert Box.square(10.0, offset=0.5).unit_cells() == Box((1.0, 1.0), (10.0, 10.0))
    assert Box.square(0.5, offset=0.25).unit_cells() is None
    v = Box.square(10.5)
    assert v.volume - v.unit_cells().volume == pytest.approx(10.25)


def test_region_slices():
    grid = GridSpec((0.0, 0.0), 0.25, (40, 40))
    sl = region_slices(grid, Box((1.0, 2.0), (3.0, 2.5)))
    assert sl == (slice(4, 12), slice(8, 10))
    with pytest.raises(InputError):
        region_slices(grid, Box((0.1, 0.0), (1.0, 1.0)))
    with pytest.raises(InputError):
        region_slices(grid, Box((0.0, 0.0), (11.0, 1.0)))


def test_unit_lattice_check():
    check_unit_lattice(GridSpec((0.5, 0.5), 0.25, (4, 4)))
    with pytest.raises(InputError):
        check_unit_lattice(GridSpec((0.0, 0.0), 0.3, (4, 4)))
    with pytest.raises(InputError):
        check_unit_lattice(GridSpec((0.1, 0.0), 0.25, (4, 4)))


def test_box_contains():
    assert Box.square(10.0).contains(Box.square(5.0, offset=2.0))
    assert not Box.square(5.0).contains(Box.square(10.0))
    np.testing.assert_array_equal(Box((0.0, 1.0), (2.0, 4.0)).sides, [2.0, 3.0])
