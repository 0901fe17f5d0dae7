"""Centred Gaussian fields with stationary increments and power variogram.

The field ``W`` satisfies ``W(0) = 0`` and
``Cov(W(x), W(y)) = eta/2 * (|x|^alpha + |y|^alpha - |x - y|^alpha)``
(a Levy fractional Brownian field with Hurst index ``alpha / 2``).
Samples are drawn from a dense Cholesky factor of that covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import blas

from .errors import InputError, NumericalError
from .rng import stream

MAX_SITES = 20_000
JITTERS = (1e-12, 1e-11, 1e-10, 1e-9, 1e-8)


@dataclass(frozen=True)
class PowerVariogram:
    """Power variogram ``gamma(h) = eta * |h|^alpha`` with ``0 < alpha <= 2``."""

    eta: float
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise InputError(f"eta must be > 0, got {self.eta}")
        if not (np.isfinite(self.alpha) and 0 < self.alpha <= 2):
            raise InputError(f"alpha must lie in (0, 2], got {self.alpha}")

    def __call__(self, h) -> np.ndarray | float:
        h = np.asarray(h, dtype=float)
        r = np.linalg.norm(h, axis=-1) if h.ndim else np.abs(h)
        return self.eta * r**self.alpha

    def of_distance(self, r) -> np.ndarray | float:
        return self.eta * np.asarray(r, dtype=float) ** self.alpha


def as_sites(sites, dim: int | None = None) -> np.ndarray:
    """Validate a site set and return it as a float array of shape (m, d)."""
    arr = np.asarray(sites, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InputError(f"sites must have shape (m, d) with m, d >= 1, got {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InputError(f"sites have dimension {arr.shape[1]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise InputError("site coordinates must be finite")
    return arr


def fbf_covariance(v: PowerVariogram, x, y) -> float:
    """Covariance of the field at two points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    a = v.alpha
    return 0.5 * v.eta * (
        np.linalg.norm(x) ** a + np.linalg.norm(y) ** a - np.linalg.norm(x - y) ** a
    )


def fbf_covariance_matrix(v: PowerVariogram, sites) -> np.ndarray:
    s = as_sites(sites)
    r = np.linalg.norm(s, axis=1) ** v.alpha
    diff = np.linalg.norm(s[:, None, :] - s[None, :, :], axis=-1) ** v.alpha
    return 0.5 * v.eta * (r[:, None] + r[None, :] - diff)


def cholesky_with_jitter(cov: np.ndarray) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of ``cov``, adding diagonal jitter if needed.

    Jitter is relative to the mean diagonal and escalates through
    ``JITTERS``.  Returns the factor and the jitter that was used.
    """
    scale = float(np.mean(np.diag(cov))) or 1.0
    eye = np.eye(cov.shape[0])
    for jitter in (0.0,) + JITTERS:
        try:
            factor = linalg.cholesky(cov + jitter * scale * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        return factor, jitter
    w = np.linalg.eigvalsh(cov)
    cond = float(np.abs(w).max() / max(abs(w.min()), np.finfo(float).tiny))
    raise NumericalError(
        "covariance factorization failed after jitter escalation",
        {"size": cov.shape[0], "min_eigenvalue": float(w.min()), "condition_estimate": cond},
    )


class FBFSampler:
    """Reusable sampler of the field at a fixed site set.

    Duplicate sites are factorized once and replicated on output; sites at
    the origin are pinned to exactly 0.  For ``alpha == 2`` the covariance is
    ``eta * <x, y>`` and the field is drawn exactly as the linear form
    ``sqrt(eta) * <x, G>`` with ``G`` standard normal in ``R^d``.
    """

    def __init__(self, variogram: PowerVariogram, sites):
        s = as_sites(sites)
        if s.shape[0] > MAX_SITES:
            raise InputError(f"at most {MAX_SITES} sites supported by dense factorization, got {s.shape[0]}")
        self.variogram = variogram
        self.sites = s
        self.jitter = 0.0
        uniq, inverse = np.unique(s, axis=0, return_inverse=True)
        self._inverse = inverse.reshape(-1)
        nonzero = np.any(uniq != 0.0, axis=1)
        self._keep = np.flatnonzero(nonzero)
        self._uniq = uniq
        self._linear = variogram.alpha == 2.0
        self._factor = None
        self._factor32 = None
        if not self._linear and self._keep.size:
            cov = fbf_covariance_matrix(variogram, uniq[self._keep])
            factor, self.jitter = cholesky_with_jitter(cov)
            self._factor = np.asfortranarray(factor)
        self._identity = (self._keep.size == s.shape[0]
                          and np.array_equal(self._inverse, np.arange(s.shape[0])))

    @property
    def n_sites(self) -> int:
        return self.sites.shape[0]

    @property
    def n_normals(self) -> int:
        """Number of standard normals consumed per sample."""
        return self.sites.shape[1] if self._linear else int(self._keep.size)

    def normals(self, rng: np.random.Generator, size: int, dtype=np.float64) -> np.ndarray:
        return rng.standard_normal((size, self.n_normals), dtype=dtype)

    def transform(self, z: np.ndarray) -> np.ndarray:
        """Map standard normals from :meth:`normals` to field values.

        Float32 input is transformed in single precision, which halves the
        cost of the dense product for large site sets.
        """
        single = z.dtype == np.float32
        dtype = np.float32 if single else np.float64
        if self._linear:
            out = (np.sqrt(self.variogram.eta) * z) @ self._uniq.T.astype(dtype)
        elif self._keep.size:
            # W^T = L Z^T with a triangular product; Z^T of a C-ordered
            # array is Fortran-ordered, so no copy is made
            trmm = blas.strmm if single else blas.dtrmm
            zt = np.ascontiguousarray(z, dtype=dtype).T
            wt = trmm(1.0, self._factor_as(dtype), zt, lower=1, overwrite_b=1)
            if self._identity:
                return wt.T
            out = np.zeros((z.shape[0], self._uniq.shape[0]), dtype=dtype)
            out[:, self._keep] = wt.T
        else:
            out = np.zeros((z.shape[0], self._uniq.shape[0]), dtype=dtype)
        return out[:, self._inverse]

    def _factor_as(self, dtype):
        if dtype == np.float64:
            return self._factor
        if self._factor32 is None:
            self._factor32 = np.asfortranarray(self._factor, dtype=np.float32)
        return self._factor32

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Return ``size`` independent samples, shape ``(size, m)``."""
        return self.transform(self.normals(rng, size))


@dataclass
class GaussianSample:
    sites: np.ndarray
    values: np.ndarray


def sample_fbf(v: PowerVariogram, sites, seed: int, size: int | None = None) -> GaussianSample:
    """Sample the field at ``sites``.

    With ``size=None`` the values have shape ``(m,)``; otherwise
    ``(size, m)``.  Output is a pure function of ``(v, sites, seed, size)``.
    """
    sampler = FBFSampler(v, sites)
    values = sampler.draw(stream(seed), 1 if size is None else size)
    return GaussianSample(sampler.sites, values[0] if size is None else values)
