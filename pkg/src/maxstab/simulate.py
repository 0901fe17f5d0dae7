"""Simulation of simple max-stable fields (Smith and Brown-Resnick).

All simulators build ``Z = max_i U_i Y_i`` from the points ``U_i`` of a
Poisson process with intensity ``u^-2 du``, generated in decreasing order as
``U_i = c / Gamma_i`` with ``Gamma_i`` the arrival times of a unit-rate
Poisson process.

* ``smith-exact``: storms ``U_i f(x - C_i)`` with centres uniform on the
  site box enlarged by ``padding``.  Generation stops once
  ``U_i * f_max`` falls below the current minimum of the field, after
  which no later storm can change any value.
* ``br-threshold``: spectral functions ``exp(W - gamma/2)``; the stopping
  rule uses a pilot quantile of ``sup Y`` in place of the (unbounded)
  supremum, so it is approximate.  A heuristic bound on the expected number
  of missed influential spectral functions is reported.
* ``br-extremal``: exact simulation through extremal functions, one
  conditioned spectral family per site.  Cost grows like ``m`` factorizations
  of size ``m``; intended for small site sets.
"""

from __future__ import annotations

import math
import zlib
from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np
from scipy import stats

from . import rng as rngmod
from .errors import InputError, InvariantError, SimulationError
from .gaussian import FBFSampler, as_sites
from .models import (
    BrownResnickModel,
    FieldRealization,
    GridSpec,
    Model,
    SimulationControl,
    SmithModel,
)

CHUNK = 1024          # replicates per random stream for site-set simulation
BLOCK_ELEMENTS = 4_000_000
MAX_BLOCK = 64        # spectral functions per replicate and round
SINGLE_PRECISION_SITES = 512   # Gaussian transform in float32 above this size
DRIFT_TABLE_SITES = 4096


class _Streams:
    """Random streams, each serving a contiguous group of replicates."""

    def __init__(self, rngs, sizes):
        self.rngs = list(rngs)
        self.group = np.repeat(np.arange(len(self.rngs)), sizes)

    def groups(self, active: np.ndarray):
        """Yield ``(rng, positions)`` for the active replicates of each stream,
        ``positions`` indexing into ``active``."""
        g = self.group[active]
        cuts = np.flatnonzero(np.diff(g)) + 1
        starts = np.concatenate(([0], cuts))
        stops = np.concatenate((cuts, [g.size]))
        for a, b in zip(starts, stops):
            yield self.rngs[g[a]], np.arange(a, b)

    def draw(self, active: np.ndarray, fn):
        g = self.group[active]
        cuts = np.flatnonzero(np.diff(g)) + 1
        starts = np.concatenate(([0], cuts))
        stops = np.concatenate((cuts, [g.size]))
        parts = [fn(self.rngs[g[a]], b - a) for a, b in zip(starts, stops)]
        if len(parts) == 1:
            return parts[0]
        if isinstance(parts[0], tuple):
            return tuple(np.concatenate(p) for p in zip(*parts))
        return np.concatenate(parts)


def _site_key(sites: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(sites).tobytes())


def _check_cap(used: np.ndarray, cap: int, z: np.ndarray, method: str):
    if np.any(used > cap):
        bad = int(np.flatnonzero(used > cap)[0])
        raise SimulationError(
            f"{method}: spectral-draw cap {cap} reached before the stopping rule held",
            {
                "method": method,
                "cap": cap,
                "draws_used": int(used[bad]),
                "partial_min": float(z[bad].min()),
                "partial_max": float(z[bad].max()),
            },
        )


# --------------------------------------------------------------------------
# Smith


def smith_padding_bound(model: SmithModel, padding: float) -> float:
    """Per-site bound on the probability that storms centred outside the
    padded window would change the value at a site inside the grid box."""
    sd = np.sqrt(np.diag(model.sigma))
    return float(np.sum(2 * stats.norm.sf(padding / sd)))


@numba.njit(cache=True, nogil=True)
def _storm_sites(logz, logzmin, sites, box_lo, box_hi, centres, log_tops, prec, inv2lam, done):
    """Apply blocks of storms to the log-field of each active replicate.

    ``logz`` has one row per active replicate; storm ``k`` of replicate
    ``i`` has log-height ``log_tops[i, k]`` and centre ``centres[i, k]``.
    A replicate is marked ``done`` at the first storm whose height falls
    below its current minimum.  Storms whose distance to the site bounding
    box rules out any exceedance of the minimum are skipped.
    """
    cnt, block = log_tops.shape
    m, d = sites.shape
    for i in range(cnt):
        for k in range(block):
            lt = log_tops[i, k]
            if lt < logzmin[i]:
                done[i] = True
                break
            dist2 = 0.0
            for a in range(d):
                c = centres[i, k, a]
                if c < box_lo[a]:
                    dist2 += (box_lo[a] - c) ** 2
                elif c > box_hi[a]:
                    dist2 += (c - box_hi[a]) ** 2
            if lt - dist2 * inv2lam < logzmin[i]:
                continue
            changed = False
            for j in range(m):
                q = 0.0
                for a in range(d):
                    da = sites[j, a] - centres[i, k, a]
                    q += prec[a, a] * da * da
                    for b in range(a + 1, d):
                        q += 2.0 * prec[a, b] * da * (sites[j, b] - centres[i, k, b])
                v = lt - 0.5 * q
                if v > logz[i, j]:
                    logz[i, j] = v
                    changed = True
            if changed:
                low = logz[i, 0]
                for j in range(1, m):
                    if logz[i, j] < low:
                        low = logz[i, j]
                logzmin[i] = low


def _smith_sites(model: SmithModel, sites, streams: _Streams, n: int, control: SimulationControl):
    d = model.dim
    pad = control.padding_for(model)
    lo = sites.min(axis=0) - pad
    hi = sites.max(axis=0) + pad
    log_scale = math.log(float(np.prod(hi - lo)) * model.f_max)
    prec = np.ascontiguousarray(model.precision)
    inv2lam = 0.5 / model.max_eigenvalue
    box_lo, box_hi = sites.min(axis=0), sites.max(axis=0)
    sites = np.ascontiguousarray(sites, dtype=float)
    block = 16

    logz = np.full((n, sites.shape[0]), -np.inf)
    logzmin = np.full(n, -np.inf)
    gamma = np.zeros(n)
    used = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        e, c = streams.draw(
            active,
            lambda g, cnt: (g.exponential(size=(cnt, block)), g.uniform(lo, hi, size=(cnt, block, d))),
        )
        arrivals = gamma[active, None] + np.cumsum(e, axis=1)
        lz, lzmin = logz[active], logzmin[active]
        done = np.zeros(active.size, dtype=np.bool_)
        _storm_sites(lz, lzmin, sites, box_lo, box_hi, c, log_scale - np.log(arrivals),
                     prec, inv2lam, done)
        logz[active], logzmin[active] = lz, lzmin
        gamma[active] = arrivals[:, -1]
        used[active] += block
        _check_cap(used, control.max_spectral_draws, np.exp(logz), "smith-exact")
        active = active[~done]
    return np.exp(logz), {"storms_mean": float(used.mean()), "padding": pad,
                          "padding_bound": smith_padding_bound(model, pad)}


@numba.njit(cache=True, nogil=True)
def _storm_block(z, axes, ndim, origin, step, centres, tops, prec, lam2, zmin, used, check_every):
    """Apply storms ``tops[k] * exp(-q(x - centres[k]) / 2)`` in order to the
    3-d array ``z`` (trailing axes of length 1 pad lower dimensions).

    Each storm only visits sites within ``sqrt(2 lam log(top / zmin))`` of
    its centre along every axis, outside of which it cannot exceed the
    current minimum.  Returns ``(storms consumed, zmin, stopped)``.
    """
    n = z.shape
    lo = np.zeros(3, np.int64)
    hi = np.zeros(3, np.int64)
    for k in range(tops.size):
        top = tops[k]
        if top <= zmin:
            return k, zmin, True
        used += 1
        empty = False
        for i in range(3):
            lo[i] = 0
            hi[i] = n[i]
        if zmin > 0.0:
            # logs avoid overflow of top / zmin when zmin is subnormal
            r = math.sqrt(lam2 * (math.log(top) - math.log(zmin)))
            for i in range(ndim):
                a = (centres[k, i] - r - origin[i]) / step - 0.5
                b = (centres[k, i] + r - origin[i]) / step - 0.5
                lo[i] = 0 if a <= 0.0 else min(int(math.ceil(a)), n[i])
                hi[i] = n[i] if b >= n[i] - 1 else max(int(math.floor(b)) + 1, 0)
                if hi[i] <= lo[i]:
                    empty = True
        if not empty:
            for i0 in range(lo[0], hi[0]):
                d0 = axes[0, i0] - centres[k, 0]
                q0 = prec[0, 0] * d0 * d0
                for i1 in range(lo[1], hi[1]):
                    d1 = axes[1, i1] - centres[k, 1]
                    q1 = q0 + 2.0 * prec[0, 1] * d0 * d1 + prec[1, 1] * d1 * d1
                    for i2 in range(lo[2], hi[2]):
                        d2 = axes[2, i2] - centres[k, 2]
                        q = q1 + 2.0 * (prec[0, 2] * d0 + prec[1, 2] * d1) * d2 + prec[2, 2] * d2 * d2
                        v = top * math.exp(-0.5 * q)
                        if v > z[i0, i1, i2]:
                            z[i0, i1, i2] = v
        if zmin == 0.0 or used % check_every == 0:
            zmin = z.min()
    return tops.size, zmin, False


def _smith_grid(model: SmithModel, grid: GridSpec, control: SimulationControl, rng: np.random.Generator):
    """One realization on a grid; each storm only touches the sites where it
    can exceed the current field minimum."""
    d = grid.dim
    if model.dim != d:
        raise InputError(f"model dimension {model.dim} != grid dimension {d}")
    pad = control.padding_for(model)
    lo = grid.lower - pad
    hi = grid.upper + pad
    area = float(np.prod(hi - lo))
    fmax = model.f_max
    lam2 = 2.0 * model.max_eigenvalue
    prec = np.zeros((3, 3))
    prec[:d, :d] = model.precision
    counts = tuple(grid.counts) + (1,) * (3 - d)
    axes = np.zeros((3, max(counts)))
    for i in range(d):
        axes[i, :counts[i]] = grid.axis(i)
    origin = np.zeros(3)
    origin[:d] = grid.lower

    z = np.zeros(counts)
    gamma = 0.0
    zmin = 0.0
    used = 0
    block = 64
    while True:
        e = rng.exponential(size=block)
        centres = np.zeros((block, 3))
        centres[:, :d] = rng.uniform(lo, hi, size=(block, d))
        arrivals = gamma + np.cumsum(e)
        gamma = arrivals[-1]
        tops = area / arrivals * fmax
        k, zmin, stopped = _storm_block(z, axes, d, origin, grid.spacing, centres, tops,
                                        prec, lam2, zmin, used, 4)
        used += k
        if stopped:
            meta = {"storms": used, "padding": pad, "padding_bound": smith_padding_bound(model, pad)}
            return z.reshape(grid.counts), meta
        if used > control.max_spectral_draws:
            raise SimulationError(
                f"smith-exact: storm cap {control.max_spectral_draws} reached before stopping",
                {"method": "smith-exact", "cap": control.max_spectral_draws, "draws_used": used,
                 "partial_min": float(z.min()), "partial_max": float(z.max())},
            )


# --------------------------------------------------------------------------
# Brown-Resnick


class _BRField:
    """Log spectral functions of the Brown-Resnick field at a site set.

    One factorization of ``W`` (pinned at ``anchor``) serves every
    re-anchoring: ``W(x) - W(x_j)`` has the law of ``W`` pinned at ``x_j``.
    """

    def __init__(self, model: BrownResnickModel, sites: np.ndarray, anchor: np.ndarray):
        self.variogram = model.variogram
        self.sites = sites
        self.sampler = FBFSampler(model.variogram, sites - anchor)
        m = sites.shape[0]
        self.dtype = np.float32 if m > SINGLE_PRECISION_SITES else np.float64
        self._drift = None
        if m <= DRIFT_TABLE_SITES:
            self._drift = (0.5 * self.variogram(sites[None, :, :] - sites[:, None, :])).astype(self.dtype)

    def drift(self, j) -> np.ndarray:
        if self._drift is not None:
            return self._drift[j]
        return (0.5 * self.variogram(self.sites[None, :, :] - self.sites[j][:, None, :])).astype(self.dtype)

    def log_from_normals(self, normals: np.ndarray, j) -> np.ndarray:
        """``log Y`` for spectral functions pinned at site(s) ``j``:
        ``W(x) - W(x_j) - gamma(x - x_j) / 2``."""
        count = normals.shape[0]
        w = self.sampler.transform(normals)
        j = np.broadcast_to(np.asarray(j), (count,))
        w -= w[np.arange(count), j][:, None]
        w -= self.drift(j)
        return w

    def log_anchored(self, g: np.random.Generator, count: int, j) -> np.ndarray:
        return self.log_from_normals(self.sampler.normals(g, count, self.dtype), j)


class _BRThreshold:
    """Threshold stopping with random-anchor, mean-normalized spectral
    functions ``Y_T(x) / mean_k Y_T(x_k)``, ``T`` uniform over the sites.

    The normalization keeps the law of the field on the site set and bounds
    ``sup Y`` by the number of sites, which makes the pilot quantile far
    smaller than for a fixed anchor.  When the quantile reaches that bound
    the stopping rule is exact.
    """

    def __init__(self, model: BrownResnickModel, sites: np.ndarray, control: SimulationControl):
        if control.anchor == "center":
            anchor = 0.5 * (sites.min(axis=0) + sites.max(axis=0))
        else:
            anchor = np.zeros(sites.shape[1])
        self.sites = sites
        self.field = _BRField(model, sites, anchor)
        pilot = rngmod.stream(control.seed, rngmod.PILOT, _site_key(sites))
        sups = self.draw(pilot, control.pilot_draws).max(axis=1)
        m = sites.shape[0]
        self.bound = min(float(np.quantile(sups, control.quantile_bound)), float(m))
        self.exact = self.bound >= m
        self.tail_excess = float(np.mean(np.maximum(sups - self.bound, 0.0)))
        self.control = control

    def draw(self, g: np.random.Generator, count: int) -> np.ndarray:
        j = g.integers(0, self.sites.shape[0], size=count)
        return self.normalize(self.field.log_anchored(g, count, j))

    @staticmethod
    def normalize(ly: np.ndarray) -> np.ndarray:
        ly -= ly.max(axis=1, keepdims=True)
        y = np.exp(ly, out=ly)
        y /= y.mean(axis=1, keepdims=True)
        return y

    def _block(self, gamma: np.ndarray, zmin: np.ndarray) -> int:
        # about half the typical number of arrivals still needed; a function
        # of the stream's own replicates only, so results do not depend on
        # how replicates are batched
        if np.any(zmin <= 0):
            return int(min(MAX_BLOCK, max(1, math.ceil(self.bound))))
        remaining = float(np.median(self.bound / zmin - gamma))
        return int(min(MAX_BLOCK, max(1, math.ceil(0.5 * remaining))))

    def run(self, streams: _Streams, n: int):
        m = self.sites.shape[0]
        z = np.zeros((n, m))
        gamma = np.zeros(n)
        used = np.zeros(n, dtype=np.int64)
        active = np.arange(n)
        while active.size:
            es, js, zs, sizes = [], [], [], []
            for g, pos in self.streams_blocks(streams, active, gamma, z):
                rows, b = pos
                es.append(g.exponential(size=(rows.size, b)))
                js.append(g.integers(0, m, size=rows.size * b))
                zs.append(self.field.sampler.normals(g, rows.size * b, self.field.dtype))
                sizes.append(np.full(rows.size, b))
            sizes = np.concatenate(sizes)
            starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
            y = self.normalize(self.field.log_from_normals(np.concatenate(zs), np.concatenate(js)))
            arrivals = np.concatenate([np.cumsum(e, axis=1).ravel() for e in es])
            arrivals += np.repeat(gamma[active], sizes)
            y /= arrivals[:, None].astype(y.dtype)
            zk = np.maximum(z[active], np.maximum.reduceat(y, starts, axis=0))
            z[active] = zk
            gamma[active] = arrivals[starts + sizes - 1]
            used[active] += sizes
            _check_cap(used, self.control.max_spectral_draws, z, "br-threshold")
            done = self.bound / gamma[active] < zk.min(axis=1)
            active = active[~done]
        zmin = z.min(axis=1)
        return z, {
            "quantile_bound": self.control.quantile_bound,
            "sup_bound": self.bound,
            "draws_mean": float(used.mean()),
            # expected number of spectral functions missed by the stopping
            # rule that would have raised the field somewhere
            "missed_bound": 0.0 if self.exact else float(np.mean(self.tail_excess / zmin)),
            "approximate": not self.exact,
        }

    def streams_blocks(self, streams: _Streams, active, gamma, z):
        for g, pos in streams.groups(active):
            rows = active[pos]
            yield g, (rows, self._block(gamma[rows], z[rows].min(axis=1)))


class _BRExtremal:
    def __init__(self, model: BrownResnickModel, sites: np.ndarray, control: SimulationControl):
        self.sites = sites
        self.field = _BRField(model, sites, sites[0])
        self.control = control

    def run(self, streams: _Streams, n: int):
        m = self.sites.shape[0]
        z = np.zeros((n, m))
        used = np.zeros(n, dtype=np.int64)
        everyone = np.arange(n)
        for j in range(m):
            gamma = streams.draw(everyone, lambda g, cnt: g.exponential(size=cnt))
            active = everyone[1.0 / gamma > z[:, j]]
            while active.size:
                ly, e = streams.draw(
                    active,
                    lambda g, cnt: (self.field.log_anchored(g, cnt, j), g.exponential(size=cnt)),
                )
                cand = np.exp(ly) / gamma[active, None]
                ok = np.all(cand[:, :j] < z[active, :j], axis=1)
                rows = active[ok]
                z[rows] = np.maximum(z[rows], cand[ok])
                used[active] += 1
                _check_cap(used, self.control.max_spectral_draws, z, "br-extremal")
                gamma[active] += e
                active = active[1.0 / gamma[active] > z[active, j]]
        return z, {"draws_mean": float(used.mean()), "approximate": False}


# --------------------------------------------------------------------------


class FieldSimulator:
    """Simulator bound to a model and a control block.

    Factorizations and pilot statistics are cached per site set, so repeated
    calls on the same sites are cheap.  Site-set simulation draws replicate
    chunk ``c`` of call key ``key`` from stream ``(seed, SITES, key, c)``;
    grid replicate ``r`` uses stream ``(seed, GRID, r)``.
    """

    def __init__(self, model: Model, control: SimulationControl | None = None):
        self.model = model
        self.control = control or SimulationControl()
        self.method = self.control.method_for(model)
        self._engines: dict = {}
        self.last_meta: dict = {}

    @property
    def seed(self) -> int:
        return self.control.seed

    def _engine(self, sites: np.ndarray):
        key = (sites.shape, sites.tobytes())
        eng = self._engines.get(key)
        if eng is None:
            if self.method == "br-threshold":
                eng = _BRThreshold(self.model, sites, self.control)
            elif self.method == "br-extremal":
                eng = _BRExtremal(self.model, sites, self.control)
            else:
                eng = None
            if len(self._engines) > 64:
                self._engines.clear()
            self._engines[key] = eng
        return eng

    def _run(self, sites, streams, n):
        if self.method == "smith-exact":
            return _smith_sites(self.model, sites, streams, n, self.control)
        return self._engine(sites).run(streams, n)

    def sample_sites(self, sites, n: int, key=0) -> np.ndarray:
        """``n`` joint replicates of the field at ``sites``; shape ``(n, m)``.

        ``key`` (a non-negative integer or a tuple of them) selects the random
        streams, so distinct keys give independent samples.
        """
        key = tuple(key) if isinstance(key, (tuple, list)) else (key,)
        dim = self.model.dim if isinstance(self.model, SmithModel) else None
        sites = as_sites(sites, dim)
        if n < 1:
            raise InputError("n must be >= 1")
        out = np.empty((n, sites.shape[0]))
        metas = []
        for c, start in enumerate(range(0, n, CHUNK)):
            size = min(CHUNK, n - start)
            streams = _Streams([rngmod.stream(self.seed, rngmod.SITES, *key, c)], [size])
            out[start:start + size], meta = self._run(sites, streams, size)
            metas.append(meta)
        self.last_meta = metas[0]
        return out

    def sample_grid(self, grid: GridSpec, replicate: int = 0) -> FieldRealization:
        values = self.sample_grids(grid, 1, first=replicate)[0]
        return FieldRealization(grid, values, meta=self._meta(grid, replicate))

    def sample_grids(self, grid: GridSpec, n: int, first: int = 0, workers: int = 1) -> np.ndarray:
        """Replicates ``first .. first + n - 1`` on ``grid``; shape ``(n, *counts)``."""
        if self.method == "smith-exact":
            def one(r):
                z, meta = _smith_grid(self.model, grid, self.control, rngmod.stream(self.seed, rngmod.GRID, r))
                return z, meta

            reps = range(first, first + n)
            if workers > 1:
                with ThreadPoolExecutor(workers) as pool:
                    results = list(pool.map(one, reps))
            else:
                results = [one(r) for r in reps]
            self.last_meta = dict(results[0][1])
            self.last_meta["storms_mean"] = float(np.mean([m["storms"] for _, m in results]))
            return np.stack([z for z, _ in results])

        sites = grid.sites()
        eng = self._engine(sites)
        m = sites.shape[0]
        batch = max(1, BLOCK_ELEMENTS // (MAX_BLOCK * m))
        out = np.empty((n, m))
        for start in range(0, n, batch):
            size = min(batch, n - start)
            streams = _Streams(
                [rngmod.stream(self.seed, rngmod.GRID, first + start + i) for i in range(size)],
                [1] * size,
            )
            out[start:start + size], self.last_meta = eng.run(streams, size)
        return out.reshape((n,) + grid.counts)

    def _meta(self, grid, replicate) -> dict:
        meta = {"model": self.model.describe(), "method": self.method, "seed": self.seed,
                "replicate": replicate}
        meta.update(self.last_meta)
        return meta


def sample_smith(model: SmithModel, grid: GridSpec, control: SimulationControl | None = None,
                 replicate: int = 0) -> FieldRealization:
    """Simulate the Smith field on ``grid`` (exact up to the padding window)."""
    control = control or SimulationControl()
    if control.method_for(model) != "smith-exact":
        raise InputError("sample_smith requires method smith-exact")
    return FieldSimulator(model, control).sample_grid(grid, replicate)


def sample_brown_resnick(model: BrownResnickModel, grid: GridSpec,
                         control: SimulationControl | None = None,
                         replicate: int = 0) -> FieldRealization:
    """Simulate the Brown-Resnick field on ``grid``."""
    control = control or SimulationControl(method="br-threshold")
    if control.method_for(model) not in ("br-threshold", "br-extremal"):
        raise InputError("sample_brown_resnick requires method br-threshold or br-extremal")
    return FieldSimulator(model, control).sample_grid(grid, replicate)


def gumbel_transform(f: FieldRealization) -> FieldRealization:
    """``log Z``: maps standard Frechet margins to standard Gumbel margins."""
    if f.margin != "frechet":
        raise InvariantError("gumbel_transform expects a Frechet realization")
    if not np.all(f.values > 0):
        raise InvariantError("values must be positive")
    return FieldRealization(f.grid, np.log(f.values), margin="gumbel", meta=dict(f.meta))


class MarginCheck(dict):
    """KS distance of a sample against the standard Frechet law."""

    __getattr__ = dict.__getitem__


def margin_check(samples, level: float = 0.01) -> MarginCheck:
    """Kolmogorov-Smirnov test of ``samples`` against ``exp(-1/z)``.

    ``samples`` is the vector of values of one site across replicates (or a
    list of realizations together with ``site`` via :func:`site_values`).
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size < 100:
        raise InputError("margin_check needs at least 100 replicates")
    res = stats.kstest(x, stats.invweibull(c=1).cdf)
    crit = stats.kstwo.ppf(1 - level, x.size)
    return MarginCheck(statistic=float(res.statistic), pvalue=float(res.pvalue),
                       critical=float(crit), level=level, n=int(x.size),
                       passed=bool(res.pvalue > level))


def site_values(replicates, site_index) -> np.ndarray:
    """Values at one grid site (flat row-major index or tuple) across realizations."""
    out = []
    for f in replicates:
        v = f.values if isinstance(f, FieldRealization) else np.asarray(f)
        out.append(v.reshape(-1)[site_index] if np.isscalar(site_index) else v[tuple(site_index)])
    return np.asarray(out)
