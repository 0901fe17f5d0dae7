"""Model parameters, grids and realizations of simple max-stable fields."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InputError, InvariantError
from .gaussian import PowerVariogram

METHODS = ("smith-exact", "br-threshold", "br-extremal")


@dataclass(frozen=True)
class GridSpec:
    """Regular grid of cell midpoints covering an axis-aligned box.

    The box is ``[origin, origin + counts * spacing]``; sites sit at cell
    midpoints ``origin + (k + 1/2) * spacing`` and are enumerated in
    row-major order (last axis fastest).  Riemann sums over the grid use
    the midpoint rule with cell volume ``spacing ** dim``.
    """

    origin: tuple
    spacing: float
    counts: tuple

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "counts", counts)
        if len(origin) != len(counts):
            raise InputError("origin and counts must have the same length")
        if len(counts) not in (1, 2, 3):
            raise InputError(f"grid dimension must be 1, 2 or 3, got {len(counts)}")
        if any(c < 1 for c in counts):
            raise InputError("counts must be positive")
        if not (np.isfinite(self.spacing) and self.spacing > 0):
            raise InputError("spacing must be > 0")
        if not all(np.isfinite(origin)):
            raise InputError("origin must be finite")

    @classmethod
    def covering(cls, lo, hi, spacing: float) -> "GridSpec":
        """Grid whose cells tile the box ``[lo, hi]`` exactly."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = (hi - lo) / spacing
        counts = np.rint(n).astype(int)
        if np.any(np.abs(n - counts) > 1e-9) or np.any(counts < 1):
            raise InputError(f"box sides {hi - lo} are not positive multiples of spacing {spacing}")
        return cls(tuple(lo), float(spacing), tuple(counts))

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return self.lower + self.spacing * np.asarray(self.counts)

    def axis(self, i: int) -> np.ndarray:
        return self.origin[i] + (np.arange(self.counts[i]) + 0.5) * self.spacing

    def sites(self) -> np.ndarray:
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.dim)], indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "spacing": self.spacing, "counts": list(self.counts)}


@dataclass(frozen=True)
class SmithModel:
    """Smith field: moving maxima of Gaussian densities with covariance ``sigma``."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InputError("sigma must be a square matrix")
        if not np.all(np.isfinite(s)):
            raise InputError("sigma must be finite")
        if np.max(np.abs(s - s.T)) > 1e-12:
            raise InputError("sigma must be symmetric")
        w = np.linalg.eigvalsh(s)
        if w.min() <= 0:
            raise InputError("sigma must be positive definite")
        if w.max() / w.min() > 1e6:
            warnings.warn(
                f"sigma has condition number {w.max() / w.min():.3g} > 1e6; "
                "simulation accuracy is untested in this regime",
                RuntimeWarning,
                stacklevel=3,
            )
        s = 0.5 * (s + s.T)
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.sigma)

    @property
    def max_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.sigma).max())

    @property
    def f_max(self) -> float:
        """Value of the storm density at its mode."""
        return float((2 * np.pi) ** (-self.dim / 2) / np.sqrt(np.linalg.det(self.sigma)))

    def density(self, offsets) -> np.ndarray:
        x = np.asarray(offsets, dtype=float)
        q = np.einsum("...i,ij,...j->...", x, self.precision, x)
        return self.f_max * np.exp(-0.5 * q)

    def mahalanobis(self, h) -> np.ndarray:
        h = np.asarray(h, dtype=float)
        return np.sqrt(np.einsum("...i,ij,...j->...", h, self.precision, h))

    def describe(self) -> dict:
        return {"kind": "smith", "sigma": self.sigma.tolist()}

    def __eq__(self, other):
        return isinstance(other, SmithModel) and np.array_equal(self.sigma, other.sigma)

    def __hash__(self):
        return hash(self.sigma.tobytes())


@dataclass(frozen=True)
class BrownResnickModel:
    """Brown-Resnick field built from a fractional Brownian field."""

    variogram: PowerVariogram

    @classmethod
    def power(cls, eta: float, alpha: float) -> "BrownResnickModel":
        return cls(PowerVariogram(eta, alpha))

    def pair_scale(self, h) -> np.ndarray:
        """``sqrt(gamma(h))``, the bivariate Husler-Reiss parameter."""
        return np.sqrt(self.variogram(h))

    def describe(self) -> dict:
        return {"kind": "brown-resnick", "eta": self.variogram.eta, "alpha": self.variogram.alpha}


Model = Union[SmithModel, BrownResnickModel]


def model_from_dict(d: dict) -> Model:
    if d["kind"] == "smith":
        return SmithModel(np.asarray(d["sigma"], dtype=float))
    if d["kind"] == "brown-resnick":
        return BrownResnickModel.power(d["eta"], d["alpha"])
    raise InputError(f"unknown model kind {d['kind']!r}")


@dataclass(frozen=True)
class SimulationControl:
    """Knobs of the simulators.

    ``padding`` enlarges the Smith storm-centre window (default
    ``6 * sqrt(max eigenvalue of sigma)``); ``quantile_bound`` is the
    pilot quantile of ``sup Y`` used by the Brown-Resnick threshold
    stopping rule; ``max_spectral_draws`` caps the Poisson points consumed
    per replicate.
    """

    seed: int = 0
    method: str | None = None
    padding: float | None = None
    quantile_bound: float = 0.999
    max_spectral_draws: int = 1_000_000
    pilot_draws: int = 1000
    anchor: str = "center"

    def __post_init__(self):
        if self.method is not None and self.method not in METHODS:
            raise InputError(f"method must be one of {METHODS}, got {self.method!r}")
        if not 0 < self.quantile_bound < 1:
            raise InputError("quantile_bound must lie in (0, 1)")
        if self.max_spectral_draws < 1:
            raise InputError("max_spectral_draws must be >= 1")
        if self.padding is not None and not self.padding >= 0:
            raise InputError("padding must be >= 0")
        if self.pilot_draws < 1:
            raise InputError("pilot_draws must be >= 1")
        if self.anchor not in ("center", "origin"):
            raise InputError("anchor must be 'center' or 'origin'")
        if self.seed < 0:
            raise InputError("seed must be >= 0")

    def method_for(self, model: Model) -> str:
        if isinstance(model, SmithModel):
            if self.method not in (None, "smith-exact"):
                raise InputError(f"method {self.method!r} does not apply to the Smith model")
            return "smith-exact"
        if self.method == "smith-exact":
            raise InputError("smith-exact does not apply to the Brown-Resnick model")
        return self.method or "br-threshold"

    def padding_for(self, model: SmithModel) -> float:
        if self.padding is not None:
            return float(self.padding)
        return 6.0 * math.sqrt(model.max_eigenvalue)


@dataclass
class FieldRealization:
    """One field on a grid; ``values`` has shape ``grid.counts``.

    ``margin`` is ``"frechet"`` for simulated fields (all values > 0) and
    ``"gumbel"`` after :func:`maxstab.simulate.gumbel_transform`.
    """

    grid: GridSpec
    values: np.ndarray
    margin: str = "frechet"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.grid.counts)
        if self.margin == "frechet" and not np.all(self.values > 0):
            raise InvariantError("simple max-stable realizations must be positive everywhere")
