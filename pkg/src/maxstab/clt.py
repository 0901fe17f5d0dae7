"""Central limit behaviour of integrals of ``X = F(Z)`` over growing regions.

For a region ``V`` the normalized integral is

    I(V) = (1 / sqrt(vol V)) * sum_{x in V, grid} (F(Z(x)) - mu) * spacing^d,

a midpoint Riemann sum of ``vol(V)^-1/2 int_V (X - mu)``.  Its limiting
variance is ``sigma2 = int Cov(X(0), X(x)) dx``, estimated here in two
independent ways:

* ``estimate_sigma2_integral`` sums simulated covariances of ``X`` over a
  lattice of lags, ring by ring;
* ``estimate_sigma2_cubes`` sums the lattice covariances of the unit-cube
  integrals ``X~(h) = int_{[h, h+1]} X``, shell by shell.

Both stop when three consecutive rings contribute less than their own
standard error, unless a truncation radius is given.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng as rngmod
from .dependence import cube_sites
from .errors import EstimationError, InputError
from .functionals import CostFunctional
from .models import FieldRealization, GridSpec, SmithModel
from .regions import Box, VanHoveSequence, check_unit_lattice, region_slices

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# region integrals


def _values(f) -> tuple[GridSpec, np.ndarray]:
    if not isinstance(f, FieldRealization):
        raise InputError("expected a FieldRealization")
    if f.margin != "frechet":
        raise InputError("cost functionals apply to Frechet-scale fields")
    return f.grid, f.values


def normalized_integral(f: FieldRealization, F: CostFunctional, mu: float, V: Box) -> float:
    """``vol(V)^-1/2 * sum_{cells in V} (F(Z) - mu) * spacing^d``."""
    grid, values = _values(f)
    x = F(values[region_slices(grid, V)]) - mu
    return float(x.sum() * grid.cell_volume / math.sqrt(V.volume))


def decompose_boundary(f: FieldRealization, F: CostFunctional, mu: float, V: Box) -> tuple[float, float]:
    """Split the normalized integral into the part over whole unit cells
    inside ``V`` and the part over the remainder."""
    grid, values = _values(f)
    check_unit_lattice(grid)
    sl = region_slices(grid, V)
    x = F(values[sl]) - mu
    inner = np.zeros(x.shape, dtype=bool)
    cells = V.unit_cells()
    if cells is not None:
        cl = region_slices(grid, cells)
        inner[tuple(slice(c.start - s.start, c.stop - s.start) for c, s in zip(cl, sl))] = True
    scale = grid.cell_volume / math.sqrt(V.volume)
    return float(x[inner].sum() * scale), float(x[~inner].sum() * scale)


# --------------------------------------------------------------------------
# normality


def normality_stats(samples, mu0: float, var0: float, seed: int = 0, n_mc: int = 9999) -> dict:
    """One-sample tests of ``samples`` against the fully specified ``N(mu0, var0)``.

    The Anderson-Darling p-value is a Monte Carlo p-value under the
    specified null (resolution ``1 / (n_mc + 1)``), seeded for
    reproducibility.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 20:
        raise InputError("normality_stats needs at least 20 samples")
    if not var0 > 0 or not math.isfinite(var0):
        raise InputError("null variance must be > 0")
    sd = math.sqrt(var0)
    ks = stats.kstest(x, stats.norm(mu0, sd).cdf)
    ad = stats.goodness_of_fit(stats.norm, x, known_params={"loc": mu0, "scale": sd}, statistic="ad",
                               n_mc_samples=n_mc, rng=rngmod.stream(seed, rngmod.NORMALITY, x.size))
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        skew = float(stats.skew(x))
        kurt = float(stats.kurtosis(x))
    return {
        "n": int(x.size),
        "ks_statistic": float(ks.statistic),
        "ks_pvalue": float(ks.pvalue),
        "ad_statistic": float(ad.statistic),
        "ad_pvalue": float(ad.pvalue),
        "skewness": skew if math.isfinite(skew) else None,
        "excess_kurtosis": kurt if math.isfinite(kurt) else None,
    }


def qq_points(samples, var0: float) -> np.ndarray:
    """``(theoretical, empirical)`` quantile pairs against ``N(0, var0)``."""
    x = np.sort(np.asarray(samples, dtype=float))
    p = (np.arange(1, x.size + 1) - 0.5) / x.size
    return np.column_stack([stats.norm.ppf(p) * math.sqrt(var0), x])


# --------------------------------------------------------------------------
# sigma^2


@dataclass
class Shell:
    radius: float
    n_lags: int
    contribution: float
    std_error: float


@dataclass
class Sigma2Estimate:
    """Lattice estimate of ``sigma2`` with a per-replicate standard error.

    Replicate ``i`` of every lag (and of the zero lag) is combined into one
    total ``T_i``; lags use independent streams, so the ``T_i`` are i.i.d.
    and ``std_error = sd(T) / sqrt(n)``.
    """

    value: float
    std_error: float
    method: str
    spacing: float
    truncation: float
    n_replicates: int
    n_lags: int
    zero_lag: float
    converged: bool
    shells: list = field(default_factory=list)

    @property
    def positive(self) -> bool:
        return self.value > 3 * self.std_error

    def to_dict(self) -> dict:
        d = asdict(self)
        d["positive"] = self.positive
        return d


def _model_dim(simulator, dim: int | None) -> int:
    if isinstance(simulator.model, SmithModel):
        if dim is not None and dim != simulator.model.dim:
            raise InputError("dim does not match the Smith model")
        return simulator.model.dim
    return 2 if dim is None else int(dim)


def _half_space(k: np.ndarray) -> np.ndarray:
    """Rows whose first nonzero coordinate is positive (one of each +-k pair)."""
    nz = k != 0
    first = np.argmax(nz, axis=1)
    lead = k[np.arange(k.shape[0]), first]
    return nz.any(axis=1) & (lead > 0)


def _ring_lags(dim: int, spacing: float, inner: float, outer: float) -> np.ndarray:
    """Integer vectors ``k`` in the half space with ``inner < |k spacing| <= outer``."""
    kmax = int(math.floor(outer / spacing + 1e-9))
    axes = [np.arange(-kmax, kmax + 1)] * dim
    k = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    r = np.linalg.norm(k, axis=1) * spacing
    keep = _half_space(k) & (r > inner + 1e-12) & (r <= outer + 1e-12)
    return k[keep]


def _shell_lags(dim: int, j: int) -> np.ndarray:
    """Integer vectors in the half space with sup-norm exactly ``j``."""
    axes = [np.arange(-j, j + 1)] * dim
    k = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    keep = _half_space(k) & (np.abs(k).max(axis=1) == j)
    return k[keep]


def _lattice_sum(simulator, n, zero, shells, pair, tag, truncation, max_shells, progress):
    """Shared engine: ``zero()`` gives the zero-lag term per replicate,
    ``shells(j)`` the lags of shell ``j`` and ``pair(k)`` the per-replicate
    (already weighted) covariance term of lag ``k``."""
    total = zero()
    zero_val = float(total.mean())
    out_shells = []
    n_lags = 0
    quiet = 0
    converged = truncation is not None
    j = 0
    while True:
        j += 1
        if truncation is None and j > max_shells:
            break
        radius, lags = shells(j)
        if truncation is not None and radius > truncation + 1e-9:
            break
        shell = np.zeros(n)
        for k in lags:
            shell += pair(k)
        total += shell
        n_lags += len(lags)
        c, se = float(shell.mean()), float(shell.std(ddof=1) / math.sqrt(n))
        out_shells.append(Shell(float(radius), len(lags), c, se))
        if progress:
            progress(f"{tag} shell {j} radius {radius:g}: {c:.5g} +- {se:.2g}")
        if truncation is None:
            quiet = quiet + 1 if abs(c) < se else 0
            if quiet >= 3:
                converged = True
                break
    return total, zero_val, out_shells, n_lags, converged


def _finish(total, method, spacing, zero_val, shells, n_lags, converged, n) -> Sigma2Estimate:
    value = float(total.mean())
    se = float(total.std(ddof=1) / math.sqrt(n))
    est = Sigma2Estimate(value, se, method, spacing, shells[-1].radius if shells else 0.0, n, n_lags,
                         zero_val, converged, shells)
    if value < -3 * se:
        raise EstimationError(f"{method} estimate of sigma2 is negative beyond 3 SE",
                              {"value": value, "std_error": se, "truncation": est.truncation})
    return est


def estimate_sigma2_integral(simulator, F: CostFunctional, spacing: float, n: int,
                             radius: float | None = None, ring_width: float = 1.0,
                             max_radius: float = 100.0, mu: float | None = None,
                             dim: int | None = None, progress=None) -> Sigma2Estimate:
    """``sum_k Cov(X(0), X(k spacing)) spacing^d`` over lattice lags.

    Each lag is simulated as an independent two-site configuration (half of
    the lattice, doubled by symmetry).  Rings have width ``ring_width``.
    """
    if n < 2 or spacing <= 0 or ring_width <= 0:
        raise InputError("need n >= 2, spacing > 0 and ring_width > 0")
    d = _model_dim(simulator, dim)
    mu = F.mean() if mu is None else float(mu)
    w = spacing**d
    origin = np.zeros((1, d))

    def zero():
        z = simulator.sample_sites(origin, n, key=rngmod.lag_key(rngmod.COV_KEY, [0] * d))
        return w * (F(z[:, 0]) - mu) ** 2

    def shells(j):
        return j * ring_width, _ring_lags(d, spacing, (j - 1) * ring_width, j * ring_width)

    def pair(k):
        sites = np.vstack([origin, k * spacing])
        z = simulator.sample_sites(sites, n, key=rngmod.lag_key(rngmod.COV_KEY, k))
        x = F(z) - mu
        return 2.0 * w * x[:, 0] * x[:, 1]

    max_shells = int(math.ceil(max_radius / ring_width))
    out = _lattice_sum(simulator, n, zero, shells, pair, "integral", radius, max_shells, progress)
    return _finish(*out[:1], "integral", spacing, *out[1:], n=n)


def estimate_sigma2_cubes(simulator, F: CostFunctional, spacing: float, n: int,
                          extent: int | None = None, max_extent: int = 100,
                          mu: float | None = None, dim: int | None = None,
                          progress=None) -> Sigma2Estimate:
    """``sum_h Cov(X~(0), X~(h))`` over integer lags ``h``, with ``X~`` the
    Riemann integral of ``X`` over a unit cube at ``spacing``.

    Shell ``j`` holds the lags of sup-norm ``j``; ``extent`` fixes the window
    ``[-M, M]^d``.
    """
    if n < 2:
        raise InputError("need n >= 2")
    d = _model_dim(simulator, dim)
    mu = F.mean() if mu is None else float(mu)
    cube = cube_sites(np.zeros(d), spacing)
    m = cube.shape[0]
    w = spacing**d

    def zero():
        z = simulator.sample_sites(cube, n, key=rngmod.lag_key(rngmod.CUBE_KEY, [0] * d))
        return (w * F(z).sum(axis=1) - mu) ** 2

    def shells(j):
        return float(j), _shell_lags(d, j)

    def pair(k):
        z = simulator.sample_sites(np.vstack([cube, cube + k]), n, key=rngmod.lag_key(rngmod.CUBE_KEY, k))
        fz = F(z)
        a = w * fz[:, :m].sum(axis=1) - mu
        b = w * fz[:, m:].sum(axis=1) - mu
        return 2.0 * a * b

    out = _lattice_sum(simulator, n, zero, shells, pair, "cubes", extent, max_extent, progress)
    return _finish(*out[:1], "cubes", spacing, *out[1:], n=n)


# --------------------------------------------------------------------------
# the experiment


@dataclass
class ReplicateTable:
    """Per-replicate, per-region quantities of one experiment run.

    Arrays have shape ``(replicates, regions)``.  ``integral`` is computed
    directly; ``inner + outer`` is its boundary split and ``loss`` the mean
    of ``F`` over the region, each from its own accumulation.
    """

    sequence: VanHoveSequence
    spacing: float
    mu: float
    integral: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    loss: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def volumes(self) -> np.ndarray:
        return np.asarray(self.sequence.volumes)

    @property
    def replicates(self) -> int:
        return self.integral.shape[0]

    def decomposition_error(self) -> float:
        return float(np.max(np.abs(self.inner + self.outer - self.integral)))

    def loss_identity_error(self) -> float:
        lhs = np.sqrt(self.volumes) * (self.loss - self.mu)
        return float(np.max(np.abs(lhs - self.integral)))


def normalized_loss_values(f: FieldRealization, F: CostFunctional, V: Box) -> float:
    grid, values = _values(f)
    return float(F(values[region_slices(grid, V)]).sum() * grid.cell_volume / V.volume)


def run_replicates(simulator, F: CostFunctional, sequence: VanHoveSequence, spacing: float,
                   replicates: int, mu: float | None = None, workers: int = 1, batch: int = 25,
                   progress=None) -> ReplicateTable:
    """Simulate ``replicates`` fields on the grid covering the largest region
    and evaluate every region on each of them."""
    if replicates < 2:
        raise InputError("need at least 2 replicates")
    grid = GridSpec.covering(sequence.largest.lower, sequence.largest.upper, spacing)
    check_unit_lattice(grid)
    mu = F.mean() if mu is None else float(mu)
    shape = (replicates, len(sequence))
    integral, inner, outer, loss = (np.empty(shape) for _ in range(4))
    for start in range(0, replicates, batch):
        size = min(batch, replicates - start)
        fields = simulator.sample_grids(grid, size, first=start, workers=workers)
        for i in range(size):
            f = FieldRealization(grid, fields[i])
            for j, V in enumerate(sequence):
                r = start + i
                integral[r, j] = normalized_integral(f, F, mu, V)
                inner[r, j], outer[r, j] = decompose_boundary(f, F, mu, V)
                loss[r, j] = normalized_loss_values(f, F, V)
        if progress:
            progress(f"replicates {start + size}/{replicates}")
    meta = {"grid": grid.to_dict(), "simulation": dict(simulator.last_meta)}
    return ReplicateTable(sequence, spacing, mu, integral, inner, outer, loss, meta)


@dataclass
class CltReport:
    functional: dict
    model: dict
    method: str
    seed: int
    spacing: float
    mu: float
    mu_source: str
    sigma2: float
    sigma2_estimate: dict | None
    sigma2_cubes: dict | None
    regions: list
    replicates: int
    asymptotics_reached: bool
    boundary_share_decreasing: bool
    decomposition_error: float
    loss_identity_error: float
    table: ReplicateTable | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("table")
        return {"schema_version": SCHEMA_VERSION, "report": "clt", **d}

    def summary(self) -> str:
        lines = [
            f"CLT experiment: {self.model.get('kind')} / {self.functional.get('kind')}, "
            f"{self.replicates} replicates, spacing {self.spacing:g}",
            f"mu = {self.mu:.8g} ({self.mu_source}), sigma2 = {self.sigma2:.6g}",
            f"{'side':>8} {'volume':>10} {'mean':>10} {'var':>10} {'var/s2':>8} "
            f"{'KS p':>8} {'AD p':>8} {'bdry':>8}",
        ]
        for r in self.regions:
            lines.append(
                f"{r['side']:>8.4g} {r['volume']:>10.5g} {r['mean']:>10.4g} {r['variance']:>10.4g} "
                f"{r['variance_ratio']:>8.4f} {r['normality']['ks_pvalue']:>8.4f} "
                f"{r['normality']['ad_pvalue']:>8.4f} {r['boundary_share']:>8.4f}"
            )
        lines.append(f"asymptotics reached (AD p > 0.01 at the largest region): {self.asymptotics_reached}")
        lines.append(f"boundary variance share decreasing: {self.boundary_share_decreasing}")
        lines.append(f"max |I1 + I2 - I| = {self.decomposition_error:.3g}, "
                     f"max |sqrt(vol)(L - mu) - I| = {self.loss_identity_error:.3g}")
        return "\n".join(lines)

    def qq_rows(self) -> list[dict]:
        rows = []
        for j, r in enumerate(self.regions):
            for t, e in qq_points(self.table.integral[:, j], self.sigma2):
                rows.append({"region": j, "side": r["side"], "theoretical": float(t), "empirical": float(e)})
        return rows

    def replicate_rows(self) -> list[dict]:
        t = self.table
        rows = []
        for i in range(t.replicates):
            for j, r in enumerate(self.regions):
                rows.append({"replicate": i, "region": j, "side": r["side"], "integral": float(t.integral[i, j]),
                             "inner": float(t.inner[i, j]), "outer": float(t.outer[i, j]),
                             "loss": float(t.loss[i, j])})
        return rows


def _decreasing_trend(x, allowed_inversions: int = 0) -> bool:
    return int(np.sum(np.diff(x) >= 0)) <= allowed_inversions


def clt_report(simulator, F: CostFunctional, table: ReplicateTable, sigma2, sigma2_cubes=None,
               plug_in_mean: bool = False, seed: int | None = None) -> CltReport:
    """Summarise a :class:`ReplicateTable` against the normal law ``N(0, sigma2)``.

    ``sigma2`` is a float or a :class:`Sigma2Estimate`.  With
    ``plug_in_mean`` the integrals are recentred at the empirical mean of
    ``F`` over the largest region instead of the analytic mean.
    """
    est = sigma2 if isinstance(sigma2, Sigma2Estimate) else None
    s2 = float(est.value if est else sigma2)
    if not s2 > 0:
        raise EstimationError("sigma2 must be positive for the normality comparison", {"sigma2": s2})
    seed = simulator.seed if seed is None else seed
    mu, source = table.mu, "analytic"
    integral, inner, outer = table.integral, table.inner, table.outer
    if plug_in_mean:
        mu_hat = float(table.loss[:, -1].mean())
        vols = table.volumes
        shift = (mu_hat - mu) / np.sqrt(vols)
        cells = np.array([c.volume if (c := V.unit_cells()) is not None else 0.0 for V in table.sequence])
        integral = integral - shift * vols
        inner = inner - shift * cells
        outer = outer - shift * (vols - cells)
        mu, source = mu_hat, "plug-in"
    regions = []
    shares = []
    for j, V in enumerate(table.sequence):
        x = integral[:, j]
        var = float(x.var(ddof=1))
        share = float(outer[:, j].var(ddof=1) / var) if var > 0 else float("nan")
        shares.append(share)
        regions.append({
            "side": float(V.sides[0]),
            "lower": list(V.lower),
            "upper": list(V.upper),
            "volume": V.volume,
            "boundary_ratio": V.boundary_ratio(1.0),
            "mean": float(x.mean()),
            "variance": var,
            "variance_ratio": var / s2,
            "boundary_share": share,
            "normality": normality_stats(x, 0.0, s2, seed=seed + j),
        })
    reached = regions[-1]["normality"]["ad_pvalue"] > 0.01
    for r in regions:
        r["gated"] = r is regions[-1]
    t = ReplicateTable(table.sequence, table.spacing, mu, integral, inner, outer, table.loss, table.meta)
    return CltReport(
        functional=F.describe(),
        model=simulator.model.describe(),
        method=simulator.method,
        seed=simulator.seed,
        spacing=table.spacing,
        mu=mu,
        mu_source=source,
        sigma2=s2,
        sigma2_estimate=est.to_dict() if est else None,
        sigma2_cubes=sigma2_cubes.to_dict() if isinstance(sigma2_cubes, Sigma2Estimate) else None,
        regions=regions,
        replicates=table.replicates,
        asymptotics_reached=bool(reached),
        boundary_share_decreasing=_decreasing_trend(shares),
        decomposition_error=table.decomposition_error(),
        loss_identity_error=t.loss_identity_error(),
        table=t,
    )


def clt_experiment(simulator, F: CostFunctional, sequence: VanHoveSequence, spacing: float,
                   replicates: int, sigma2, sigma2_cubes=None, plug_in_mean: bool = False,
                   workers: int = 1, progress=None) -> CltReport:
    """Simulate, integrate and test: the full CLT check for one model."""
    if replicates < 200:
        raise InputError("the CLT experiment needs at least 200 replicates per region")
    table = run_replicates(simulator, F, sequence, spacing, replicates, workers=workers, progress=progress)
    return clt_report(simulator, F, table, sigma2, sigma2_cubes, plug_in_mean)
