"""Axis-aligned observation regions and their placement on simulation grids."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .models import GridSpec

_TOL = 1e-9


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lower, upper]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in np.atleast_1d(self.lower))
        hi = tuple(float(x) for x in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or not lo:
            raise InputError("box corners must have the same positive dimension")
        if not all(math.isfinite(a) and math.isfinite(b) and b > a for a, b in zip(lo, hi)):
            raise InputError(f"invalid box [{lo}, {hi}]")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def square(cls, side: float, dim: int = 2, offset: float = 0.0) -> "Box":
        return cls((offset,) * dim, (offset + side,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @property
    def sides(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    def contains(self, other: "Box") -> bool:
        return all(a <= c + _TOL and d <= b + _TOL
                   for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper))

    def boundary_ratio(self, r: float = 1.0) -> float:
        """``vol(N(boundary, r)) / vol`` for the sup-norm tube of width ``r``
        around the boundary: ``(prod(s + 2r) - prod((s - 2r)_+)) / prod(s)``."""
        s = self.sides
        return float((np.prod(s + 2 * r) - np.prod(np.maximum(s - 2 * r, 0.0))) / np.prod(s))

    def unit_cells(self) -> "Box | None":
        """Union of the integer cells ``[h, h + 1]`` contained in the box, or
        ``None`` when there is none."""
        lo = np.ceil(np.asarray(self.lower) - _TOL)
        hi = np.floor(np.asarray(self.upper) + _TOL)
        if np.any(hi <= lo):
            return None
        return Box(tuple(lo), tuple(hi))

    def to_dict(self) -> dict:
        return {"lower": list(self.lower), "upper": list(self.upper), "volume": self.volume}


@dataclass(frozen=True)
class VanHoveSequence:
    regions: tuple

    def __post_init__(self):
        regs = tuple(self.regions)
        if not regs:
            raise InputError("empty region sequence")
        for a, b in zip(regs, regs[1:]):
            if not b.contains(a) or not b.volume > a.volume:
                raise InputError("regions must be nested with strictly increasing volume")
        object.__setattr__(self, "regions", regs)

    @property
    def volumes(self) -> list[float]:
        return [r.volume for r in self.regions]

    @property
    def largest(self) -> Box:
        return self.regions[-1]

    def boundary_ratios(self, r: float = 1.0) -> list[float]:
        return [b.boundary_ratio(r) for b in self.regions]

    def __len__(self):
        return len(self.regions)

    def __iter__(self):
        return iter(self.regions)


def van_hove_squares(dim: int, sides, offset: float = 0.0) -> VanHoveSequence:
    """Nested cubes ``[offset, offset + L]^dim`` for increasing ``L``."""
    sides = [float(x) for x in sides]
    if not sides or any(s <= 0 for s in sides):
        raise InputError("side lengths must be positive")
    if any(b <= a for a, b in zip(sides, sides[1:])):
        raise InputError("side lengths must be strictly increasing")
    if dim not in (1, 2, 3):
        raise InputError("dimension must be 1, 2 or 3")
    return VanHoveSequence(tuple(Box.square(s, dim, offset) for s in sides))


def _index(grid: GridSpec, x: float, axis: int) -> int:
    k = (x - grid.origin[axis]) / grid.spacing
    kr = round(k)
    if abs(k - kr) > 1e-6:
        raise InputError(f"coordinate {x} is not on a grid line (spacing {grid.spacing})")
    return int(kr)


def region_slices(grid: GridSpec, box: Box) -> tuple:
    """Index slices of the grid cells that tile ``box``.

    The box must lie within the grid extent and its faces on grid lines.
    """
    if box.dim != grid.dim:
        raise InputError(f"box dimension {box.dim} != grid dimension {grid.dim}")
    out = []
    for i in range(grid.dim):
        a, b = _index(grid, box.lower[i], i), _index(grid, box.upper[i], i)
        if a < 0 or b > grid.counts[i]:
            raise InputError(f"region {box.lower}..{box.upper} exceeds the grid extent")
        out.append(slice(a, b))
    return tuple(out)


def check_unit_lattice(grid: GridSpec):
    """Integer cells must be unions of grid cells: the spacing divides 1 and
    grid lines pass through the integers."""
    k = 1.0 / grid.spacing
    if abs(k - round(k)) > 1e-9:
        raise InputError(f"spacing {grid.spacing} must divide 1")
    for o in grid.origin:
        t = o / grid.spacing
        if abs(t - round(t)) > 1e-6:
            raise InputError(f"grid origin {grid.origin} is not aligned with the integer lattice")
