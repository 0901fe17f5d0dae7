"""Extremal coefficients, the cube-pair dependence curve and its decay fit.

For a simple max-stable field ``1 / sup_S Z`` is exponential with rate
``theta(S)``, the areal extremal coefficient of ``S``.  The dependence
between two unit cubes ``A = [0, 1]^d`` and ``B = A + h`` is summarised by

    nu(h) = theta(A) + theta(B) - theta(A u B) = E[min(sup_A Y, sup_B Y)],

whose polynomial decay in ``|h|`` drives the central limit theorem for
integrals of the field.  Suprema over cubes are taken over the simulation
grid, so every estimate here refers to the discretized cube.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import rng as rngmod
from .errors import EstimationError, InputError, InvariantError
from .gaussian import as_sites
from .models import BrownResnickModel, GridSpec, Model, SmithModel


# --------------------------------------------------------------------------
# closed forms


def pair_scale(model: Model, h) -> np.ndarray:
    """Husler-Reiss parameter of the pair ``{0, h}``: ``sqrt(h' Sigma^-1 h)``
    for Smith, ``sqrt(gamma(h))`` for Brown-Resnick."""
    if isinstance(model, SmithModel):
        return model.mahalanobis(h)
    if isinstance(model, BrownResnickModel):
        return model.pair_scale(h)
    raise InputError(f"unsupported model {type(model).__name__}")


def theta_closed_form(model: Model, h) -> np.ndarray | float:
    """Pairwise extremal coefficient ``theta({0, h}) = 2 Phi(a(h) / 2)``.

    ``h`` may be a single lag or an array of lags along the last axis.
    """
    val = 2.0 * special.ndtr(0.5 * pair_scale(model, h))
    return float(val) if np.ndim(val) == 0 else val


def decay_threshold(dim: int, delta: float = 1.0) -> float:
    """Smallest admissible decay exponent ``d * max(2, (2 + delta) / delta)``."""
    if delta <= 0:
        raise InputError("delta must be > 0")
    return dim * max(2.0, (2.0 + delta) / delta)


# --------------------------------------------------------------------------
# extremal coefficients


@dataclass(frozen=True)
class ThetaEstimate:
    value: float
    std_error: float
    n_replicates: int

    def to_dict(self) -> dict:
        return asdict(self)


def _reciprocal_maxima(maxima) -> np.ndarray:
    m = np.asarray(maxima, dtype=float).ravel()
    if m.size == 0:
        raise InputError("no replicates")
    if not np.all(m > 0):
        raise InvariantError("suprema of a simple max-stable field must be positive")
    return 1.0 / m


def theta_from_maxima(maxima) -> ThetaEstimate:
    """``theta_hat = n / sum(1 / M_i)`` with a delta-method standard error."""
    r = _reciprocal_maxima(maxima)
    mean = r.mean()
    value = 1.0 / mean
    se = value**2 * r.std(ddof=1) / math.sqrt(r.size) if r.size > 1 else math.inf
    return ThetaEstimate(float(value), float(se), int(r.size))


def cube_sites(corner, spacing: float) -> np.ndarray:
    """Grid points (cell midpoints at ``spacing``) of the unit cube at ``corner``."""
    corner = np.atleast_1d(np.asarray(corner, dtype=float))
    k = 1.0 / spacing
    if abs(k - round(k)) > 1e-9:
        raise InputError(f"spacing {spacing} must divide 1")
    return GridSpec(tuple(corner), spacing, (int(round(k)),) * corner.size).sites()


def _site_dim(simulator) -> int | None:
    model = simulator.model
    return model.dim if isinstance(model, SmithModel) else None


def estimate_theta_areal(simulator, sites, n: int, key=0) -> ThetaEstimate:
    """Areal extremal coefficient of a finite site set (or grid) by simulation.

    ``sites`` is an ``(m, d)`` array or a :class:`GridSpec`.
    """
    if n < 100:
        raise InputError("estimate_theta_areal needs n >= 100")
    s = sites.sites() if isinstance(sites, GridSpec) else as_sites(sites, _site_dim(simulator))
    z = simulator.sample_sites(s, n, key=rngmod.lag_key(rngmod.THETA_KEY, np.atleast_1d(key)))
    return theta_from_maxima(z.max(axis=1))


def estimate_theta_pair(simulator, h, n: int, key=0) -> ThetaEstimate:
    """``theta({0, h})`` from ``n`` two-site replicates."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    return estimate_theta_areal(simulator, np.stack([np.zeros_like(h), h]), n, key=key)


# --------------------------------------------------------------------------
# nu(h)


@dataclass(frozen=True)
class NuEstimate:
    lag: tuple
    value: float
    std_error: float
    n_replicates: int
    theta_a: ThetaEstimate
    theta_b: ThetaEstimate
    theta_union: ThetaEstimate

    @property
    def euclidean(self) -> float:
        return float(np.linalg.norm(self.lag))

    @property
    def chebyshev(self) -> float:
        return float(np.max(np.abs(self.lag)))


def nu_from_maxima(max_a, max_b, lag=()) -> NuEstimate:
    """``nu_hat = theta_hat(A) + theta_hat(B) - theta_hat(A u B)`` from cube
    suprema of the same replicates.

    The standard error uses the joint influence function of the three
    reciprocal means, so it accounts for their (strong) correlation.
    """
    ra, rb = _reciprocal_maxima(max_a), _reciprocal_maxima(max_b)
    if ra.size != rb.size:
        raise InputError("max_a and max_b must have the same length")
    ru = np.minimum(ra, rb)
    ta, tb, tu = theta_from_maxima(max_a), theta_from_maxima(max_b), theta_from_maxima(np.maximum(max_a, max_b))
    value = ta.value + tb.value - tu.value
    infl = -(ra - ra.mean()) * ta.value**2 - (rb - rb.mean()) * tb.value**2 + (ru - ru.mean()) * tu.value**2
    se = float(infl.std(ddof=1) / math.sqrt(ra.size)) if ra.size > 1 else math.inf
    return NuEstimate(tuple(lag), float(value), se, int(ra.size), ta, tb, tu)


def estimate_nu(simulator, h, spacing: float, n: int) -> NuEstimate:
    """``nu(h)`` for the unit cubes ``[0, 1]^d`` and ``[h, h + 1]^d``.

    Both cubes are discretized at ``spacing`` and simulated jointly, so the
    three extremal coefficients share their replicates.
    """
    h = np.atleast_1d(np.asarray(h))
    if not np.all(h == np.round(h)):
        raise InputError("cube lags must be integer vectors")
    h = h.astype(int)
    if not np.any(h):
        raise InputError("lag must be nonzero")
    dim = _site_dim(simulator)
    if dim is not None and dim != h.size:
        raise InputError(f"lag dimension {h.size} != model dimension {dim}")
    a = cube_sites(np.zeros(h.size), spacing)
    z = simulator.sample_sites(np.vstack([a, a + h]), n, key=rngmod.lag_key(rngmod.NU_KEY, h))
    m = a.shape[0]
    return nu_from_maxima(z[:, :m].max(axis=1), z[:, m:].max(axis=1), lag=tuple(int(k) for k in h))


# --------------------------------------------------------------------------
# decay fit


@dataclass
class DecayFit:
    """Least-squares fit of ``log nu = log K - b log |h|`` on usable lags."""

    K_hat: float
    b_hat: float
    threshold: float
    passed: bool
    norm: str
    window: tuple
    used: list
    clamped: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def fit_decay(distances, nu, std_error, dim: int, delta: float = 1.0, min_snr: float = 3.0,
              norm: str = "euclidean", min_lags: int = 4) -> DecayFit:
    """Fit ``nu(h) ~ K |h|^-b`` by least squares in log-log scale.

    Lags with ``nu <= min_snr * std_error`` are excluded.  With
    ``min_snr <= 0`` nothing is excluded and nonpositive estimates are
    clamped to their standard error (listed in ``clamped``).
    """
    r = np.asarray(distances, dtype=float)
    v = np.asarray(nu, dtype=float)
    se = np.broadcast_to(np.asarray(std_error, dtype=float), v.shape)
    if not (r.shape == v.shape and r.ndim == 1):
        raise InputError("distances and nu must be 1-d arrays of equal length")
    if np.any(r <= 0):
        raise InputError("lag distances must be positive")
    clamped = []
    if min_snr > 0:
        use = v > min_snr * se
    else:
        use = np.ones(v.shape, dtype=bool)
        bad = v <= 0
        clamped = [float(x) for x in r[bad]]
        v = np.where(bad, np.maximum(se, np.finfo(float).tiny), v)
    if np.count_nonzero(use) < min_lags or np.unique(r[use]).size < 2:
        raise EstimationError(
            f"decay fit needs at least {min_lags} lags with nu > {min_snr} SE",
            {"usable": int(np.count_nonzero(use)), "distances": r.tolist(), "nu": v.tolist()},
        )
    x, y = np.log(r[use]), np.log(v[use])
    slope, intercept = np.polyfit(x, y, 1)
    b = -float(slope)
    thr = decay_threshold(dim, delta)
    return DecayFit(float(math.exp(intercept)), b, thr, b > thr, norm,
                    (float(r[use].min()), float(r[use].max())), [float(t) for t in r[use]], clamped)


def local_slopes(distances, nu) -> np.ndarray:
    """Successive log-log slopes ``-d log nu / d log |h|`` between lags."""
    r = np.log(np.asarray(distances, dtype=float))
    v = np.asarray(nu, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -np.diff(np.log(v)) / np.diff(r)


@dataclass
class NuCurve:
    lags: list
    nu: np.ndarray
    std_error: np.ndarray
    n_replicates: int
    spacing: float
    delta: float
    fit: DecayFit | None
    fit_chebyshev: DecayFit | None
    fit_error: str | None = None

    @property
    def euclidean(self) -> np.ndarray:
        return np.array([np.linalg.norm(h) for h in self.lags])

    @property
    def chebyshev(self) -> np.ndarray:
        return np.array([np.max(np.abs(h)) for h in self.lags], dtype=float)

    @property
    def fit_window(self):
        return self.fit.window if self.fit else None

    def rows(self) -> list[dict]:
        rows = []
        for h, r, c, v, s in zip(self.lags, self.euclidean, self.chebyshev, self.nu, self.std_error):
            row = {f"h{i + 1}": int(k) for i, k in enumerate(h)}
            row.update(euclidean=float(r), chebyshev=float(c), nu=float(v), std_error=float(s),
                       n=self.n_replicates)
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "spacing": self.spacing,
            "delta": self.delta,
            "n_replicates": self.n_replicates,
            "lags": self.rows(),
            "local_slopes": [None if not np.isfinite(x) else float(x)
                             for x in local_slopes(self.euclidean, self.nu)],
            "fit": self.fit.to_dict() if self.fit else None,
            "fit_chebyshev": self.fit_chebyshev.to_dict() if self.fit_chebyshev else None,
            "fit_error": self.fit_error,
        }


def estimate_nu_curve(simulator, lags, spacing: float, n: int, delta: float = 1.0,
                      min_snr: float = 3.0, progress=None) -> NuCurve:
    """``nu`` at each integer lag, with decay fits in both the Euclidean and
    the Chebyshev norm of the lag."""
    lags = [tuple(int(k) for k in np.atleast_1d(h)) for h in lags]
    if not lags:
        raise InputError("no lags given")
    ests = []
    for h in lags:
        ests.append(estimate_nu(simulator, h, spacing, n))
        if progress:
            progress(f"nu{h} = {ests[-1].value:.6g} +- {ests[-1].std_error:.2g}")
    nu = np.array([e.value for e in ests])
    se = np.array([e.std_error for e in ests])
    dim = len(lags[0])
    curve = NuCurve(lags, nu, se, n, spacing, delta, None, None)
    try:
        curve.fit = fit_decay(curve.euclidean, nu, se, dim, delta, min_snr, "euclidean")
        curve.fit_chebyshev = fit_decay(curve.chebyshev, nu, se, dim, delta, min_snr, "chebyshev")
    except EstimationError as exc:
        curve.fit_error = str(exc)
    return curve


# --------------------------------------------------------------------------
# mixing bound and C^Z


@dataclass(frozen=True)
class MixingBound:
    theta: float
    alpha_bound: float
    lag: tuple | None = None
    provenance: str = "alpha-mixing of {0},{h} <= 2 (2 - theta({0, h}))"

    def to_dict(self) -> dict:
        return asdict(self)


def mixing_alpha_bound(theta_pair: float, lag=None, tol: float = 0.05) -> MixingBound:
    """Upper bound ``2 (2 - theta)`` on the alpha-mixing coefficient between
    two sites, from their pairwise extremal coefficient.

    Estimates slightly outside ``[1, 2]`` (within ``tol``) are clamped with
    a warning; anything further out is rejected.
    """
    t = float(theta_pair)
    if not (1 - tol <= t <= 2 + tol) or not math.isfinite(t):
        raise InputError(f"pairwise extremal coefficient {t} outside [1, 2]")
    if not 1 <= t <= 2:
        warnings.warn(f"clamping extremal coefficient {t} to [1, 2]", RuntimeWarning, stacklevel=2)
        t = min(max(t, 1.0), 2.0)
    return MixingBound(t, 2.0 * (2.0 - t), None if lag is None else tuple(lag))


@dataclass(frozen=True)
class CzEstimate:
    value: float
    std_error: float
    n_replicates: int


def estimate_cz(simulator, sites, n: int, key=0) -> CzEstimate:
    """``E[sup_S 1/Z]`` by simulation over the site set ``S``."""
    if n < 100:
        raise InputError("estimate_cz needs n >= 100")
    s = sites.sites() if isinstance(sites, GridSpec) else as_sites(sites, _site_dim(simulator))
    z = simulator.sample_sites(s, n, key=rngmod.lag_key(rngmod.CZ_KEY, np.atleast_1d(key)))
    r = 1.0 / z.min(axis=1)
    return CzEstimate(float(r.mean()), float(r.std(ddof=1) / math.sqrt(n)), int(n))
