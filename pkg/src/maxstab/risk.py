"""Spatial risk of a deductible loss over growing regions.

The loss per unit surface over a region ``V`` is

    L(V) = (1 / vol V) * int_V log(Z(x) / u)_+ dx,

and for large regions ``L(V)`` is approximately ``N(mu, sigma2 / vol V)``
with ``mu = E[log(Z / u)_+]``.  The Value-at-Risk deviation ``VaR_p - mu``
therefore shrinks like ``vol(V)^-1/2``; :func:`homogeneity_slope` reports
the fitted exponent of that decay.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import rng as rngmod
from .clt import SCHEMA_VERSION, Sigma2Estimate, normalized_loss_values, run_replicates
from .errors import InputError
from .functionals import CostFunctional, deductible_loss, expected_loss_analytic
from .models import FieldRealization
from .regions import Box, VanHoveSequence

__all__ = [
    "deductible_loss",
    "expected_loss_analytic",
    "normalized_loss",
    "gaussian_approx",
    "homogeneity_slope",
    "risk_report",
    "risk_experiment",
    "synthetic_losses",
    "RiskReport",
]

SLOPE_CONVENTION = (
    "slope of log(VaR_p - mu) against log(volume); -1/2 is the Gaussian "
    "deviation scaling, i.e. order -1 in the variance-based convention"
)


def _deductible(u: float) -> CostFunctional:
    if not u > 0:
        raise InputError("deductible u must be > 0")
    if u < 1:
        warnings.warn(f"deductible u = {u} < 1 (negative log-deductible)", RuntimeWarning, stacklevel=3)
    return CostFunctional("deductible-log", u=u)


def normalized_loss(f: FieldRealization, u: float, V: Box) -> float:
    """Riemann-sum loss per unit surface ``L(V)`` of one realization."""
    return normalized_loss_values(f, _deductible(u), V)


def gaussian_approx(volume: float, mu: float, sigma2: float, p: float) -> float:
    """Value-at-Risk at level ``p`` of ``N(mu, sigma2 / volume)``."""
    if not 0 < p < 1:
        raise InputError("level p must lie in (0, 1)")
    if not sigma2 > 0 or not volume > 0:
        raise InputError("sigma2 and volume must be > 0")
    return float(mu + stats.norm.ppf(p) * math.sqrt(sigma2 / volume))


def homogeneity_slope(volumes, deviations) -> tuple[float, float] | None:
    """Least-squares ``(slope, intercept)`` of ``log(deviation)`` on
    ``log(volume)``; ``None`` with fewer than two regions or any
    nonpositive deviation."""
    v = np.asarray(volumes, dtype=float)
    d = np.asarray(deviations, dtype=float)
    if v.size < 2 or np.any(d <= 0) or np.unique(v).size < 2:
        return None
    slope, intercept = np.polyfit(np.log(v), np.log(d), 1)
    return float(slope), float(intercept)


@dataclass
class RiskReport:
    u: float
    mu_analytic: float
    mu_hat: float
    sigma2: float
    levels: list
    regions: list
    slopes: dict
    flags: list = field(default_factory=list)
    replicates: int = 0
    source: str = "simulation"
    convention: str = SLOPE_CONVENTION

    def slope(self, p: float) -> float | None:
        return self.slopes.get(_level_key(p))

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "report": "risk", **asdict(self)}

    def rows(self) -> list[dict]:
        out = []
        for r in self.regions:
            for lv in r["levels"]:
                out.append({"side": r["side"], "volume": r["volume"], **lv})
        return out

    def summary(self) -> str:
        lines = [f"Risk assessment ({self.source}): u = {self.u:.6g}, mu = {self.mu_analytic:.8g} "
                 f"(sample {self.mu_hat:.6g}), sigma2 = {self.sigma2:.6g}, {self.replicates} replicates",
                 f"{'side':>8} {'level':>6} {'VaR':>10} {'approx':>10} {'ES':>10}"]
        for r in self.regions:
            for lv in r["levels"]:
                lines.append(f"{r['side']:>8.4g} {lv['level']:>6.3f} {lv['empirical_var']:>10.5g} "
                             f"{lv['gaussian_var']:>10.5g} {lv['expected_shortfall']:>10.5g}")
        for k, s in self.slopes.items():
            lines.append(f"homogeneity slope at p={k}: {'undefined' if s is None else f'{s:.4f}'}")
        lines.extend(f"flag: {f}" for f in self.flags)
        return "\n".join(lines)


def _level_key(p: float) -> str:
    return f"{p:g}"


def risk_report(losses, volumes, u: float, mu: float, sigma2, levels, sides=None,
                source: str = "simulation") -> RiskReport:
    """Empirical and Gaussian-approximate risk measures from per-replicate
    losses of shape ``(replicates, regions)``."""
    x = np.asarray(losses, dtype=float)
    vols = np.asarray(volumes, dtype=float)
    if x.ndim != 2 or x.shape[1] != vols.size:
        raise InputError("losses must have shape (replicates, regions)")
    levels = sorted(float(p) for p in levels)
    if not levels or any(not 0 < p < 1 for p in levels):
        raise InputError("levels must lie in (0, 1)")
    s2 = float(sigma2.value if isinstance(sigma2, Sigma2Estimate) else sigma2)
    sides = list(sides) if sides is not None else [float(v ** (1 / 2)) for v in vols]
    regions, flags = [], []
    deviations = {p: [] for p in levels}
    for j, vol in enumerate(vols):
        col = x[:, j]
        rows = []
        for p in levels:
            var = float(np.quantile(col, p))
            es = float(col[col >= var].mean())
            rows.append({"level": p, "empirical_var": var, "gaussian_var": gaussian_approx(vol, mu, s2, p),
                         "expected_shortfall": es, "deviation": var - mu})
            deviations[p].append(var - mu)
        regions.append({"side": float(sides[j]), "volume": float(vol), "mean": float(col.mean()),
                        "variance": float(col.var(ddof=1)), "levels": rows})
    slopes = {}
    for p in levels:
        fit = homogeneity_slope(vols, deviations[p])
        if vols.size < 2:
            flags.append(f"p={p:g}: single region, slope undefined")
        elif fit is None:
            flags.append(f"p={p:g}: nonpositive VaR deviation, excluded from the slope fit")
        slopes[_level_key(p)] = None if fit is None else fit[0]
    return RiskReport(float(u), float(mu), float(x[:, -1].mean()), s2, levels, regions, slopes, flags,
                      int(x.shape[0]), source)


def risk_experiment(simulator, u: float, sequence: VanHoveSequence, spacing: float, replicates: int,
                    levels, sigma2, workers: int = 1, progress=None) -> RiskReport:
    """Simulate the loss per unit surface over each region and compare its
    empirical quantiles with the Gaussian approximation."""
    F = _deductible(u)
    table = run_replicates(simulator, F, sequence, spacing, replicates, workers=workers, progress=progress)
    return risk_report_from_table(table, u, sigma2, levels)


def risk_report_from_table(table, u: float, sigma2, levels) -> RiskReport:
    sides = [float(V.sides[0]) for V in table.sequence]
    return risk_report(table.loss, table.volumes, u, table.mu, sigma2, levels, sides)


def synthetic_losses(mu: float, sigma2: float, volumes, n: int, seed: int = 0) -> np.ndarray:
    """Losses drawn exactly from ``N(mu, sigma2 / volume)``; shape ``(n, regions)``."""
    vols = np.asarray(volumes, dtype=float)
    g = rngmod.stream(seed, rngmod.SYNTHETIC)
    return mu + g.standard_normal((n, vols.size)) * np.sqrt(sigma2 / vols)
