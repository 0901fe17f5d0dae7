"""Command-line runner.

    maxstab <command> --config <path> --out <dir> [--reproducible] [--threads N]

Every run writes ``report.json`` (with ``schema_version``), ``summary.txt``,
command-specific CSV tables, the normalised ``config.ini`` and a
``manifest.json`` with the SHA-256 of every file.  A failed run writes
``error.json`` instead of the report.  Exit statuses: 0 success, 2
configuration error, 3 numerical/simulation error, 4 I/O error, 1 any
other failure.

The worker count is ``--threads``, else ``$MAXSTAB_THREADS``, else
``[control] threads``, else the number of CPUs.  Results never depend on
it: every replicate draws from its own keyed random stream.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from . import rng as rngmod
from .clt import clt_report, estimate_sigma2_cubes, estimate_sigma2_integral, run_replicates
from .config import COMMANDS, ConfigError, ExperimentConfig, load_config
from .dependence import decay_threshold, estimate_nu_curve, estimate_theta_pair, theta_closed_form
from .errors import InputError, MaxStabError
from .functionals import CostFunctional
from .models import BrownResnickModel, FieldRealization, GridSpec, SimulationControl
from .regions import van_hove_squares
from .risk import risk_report_from_table
from .simulate import FieldSimulator, margin_check

log = logging.getLogger("maxstab")

EXIT_OK, EXIT_OTHER, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4
REPORT_SCHEMA_VERSION = 1
CLT_REPLICATE_BUDGET = 200


def _threads(arg: int | None, cfg: ExperimentConfig | None) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("MAXSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring MAXSTAB_THREADS=%r (not an integer)", env)
    if cfg is not None and cfg.control.get("threads"):
        return cfg.control["threads"]
    return os.cpu_count() or 1


class Run:
    """Output directory bookkeeping for one command."""

    def __init__(self, out: Path, cfg: ExperimentConfig, workers: int):
        self.out = out
        self.cfg = cfg
        self.workers = workers
        self.files: list[str] = []

    def json(self, name: str, obj: dict) -> None:
        mio.write_json(self.out / name, obj)
        self.files.append(name)

    def csv(self, name: str, rows: list[dict], columns: list[str] | None = None) -> None:
        mio.write_csv(self.out / name, rows, columns)
        self.files.append(name)

    def text(self, name: str, text: str) -> None:
        (self.out / name).write_text(text if text.endswith("\n") else text + "\n")
        self.files.append(name)

    def report(self, body: dict, summary: str) -> None:
        report = {"schema_version": REPORT_SCHEMA_VERSION, "command": self.cfg.command,
                  "package_version": __version__, "config": self.cfg.to_dict(), **body,
                  "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
        self.json("report.json", report)
        self.text("summary.txt", summary)


def _simulator(cfg: ExperimentConfig, method: str | None = None) -> FieldSimulator:
    control = cfg.build_control()
    if method is not None:
        control = SimulationControl(**{**control.__dict__, "method": method})
    return FieldSimulator(cfg.build_model(), control)


# --------------------------------------------------------------------------
# commands


def cmd_simulate(run: Run) -> None:
    cfg, o = run.cfg, run.cfg.options
    dim = cfg.dim
    extent = cfg.grid["extent"] * (dim if len(cfg.grid["extent"]) == 1 else 1)
    origin = cfg.grid["origin"] or [0.0]
    origin = origin * (dim if len(origin) == 1 else 1)
    grid = GridSpec.covering(origin, np.add(origin, extent), cfg.grid["spacing"])
    sim = _simulator(cfg)
    n = cfg.control["replicates"]
    picks = rngmod.stream(sim.seed, rngmod.SITE_PICK).choice(grid.size, min(o["margin_sites"], grid.size),
                                                            replace=False)
    picks = np.sort(picks)
    site_vals = np.empty((n, picks.size))
    stats_rows = []
    saved = 0
    fields_dir = run.out / "fields"
    batch = 50
    for start in range(0, n, batch):
        size = min(batch, n - start)
        z = sim.sample_grids(grid, size, first=start, workers=run.workers)
        flat = z.reshape(size, -1)
        site_vals[start:start + size] = flat[:, picks]
        for i in range(size):
            r = start + i
            stats_rows.append({"replicate": r, "min": float(flat[i].min()), "max": float(flat[i].max()),
                               "mean_log": float(np.log(flat[i]).mean())})
            if o["format"] != "none" and saved < o["save"]:
                fields_dir.mkdir(exist_ok=True)
                name = f"fields/field_{r:05d}.{'csv' if o['format'] == 'csv' else 'bin'}"
                f = FieldRealization(grid, z[i], meta=sim._meta(grid, r))
                mio.save_realization(f, run.out / name, o["format"])
                run.files.append(name)
                saved += 1
        log.info("simulated %d/%d fields", start + size, n)
    sites = grid.sites()[picks]
    margins = []
    for k, idx in enumerate(picks):
        row = {"site_index": int(idx), **{f"x{i + 1}": float(c) for i, c in enumerate(sites[k])}}
        if n >= 100:
            row.update({key: val for key, val in margin_check(site_vals[:, k]).items()})
        row["fraction_below_1"] = float(np.mean(site_vals[:, k] <= 1.0))
        margins.append(row)
    run.csv("margins.csv", margins)
    run.csv("fields_summary.csv", stats_rows)
    body = {"report": "simulate", "model": sim.model.describe(), "method": sim.method, "seed": sim.seed,
            "grid": grid.to_dict(), "replicates": n, "saved_fields": saved, "margins": margins,
            "margins_passed": all(m.get("passed", True) for m in margins) if n >= 100 else None}
    lines = [f"simulated {n} fields of {sim.model.describe()['kind']} ({sim.method}) on "
             f"{'x'.join(map(str, grid.counts))} cells of spacing {grid.spacing:g}"]
    for m in margins:
        ks = f"KS p = {m['pvalue']:.4f} ({'pass' if m['passed'] else 'FAIL'})" if "pvalue" in m else "KS skipped (n < 100)"
        lines.append(f"site {m['site_index']}: P(Z <= 1) = {m['fraction_below_1']:.4f} "
                     f"(exact {math.exp(-1):.4f}), {ks}")
    run.report(body, "\n".join(lines))


def cmd_theta(run: Run) -> None:
    cfg, o = run.cfg, run.cfg.options
    sim = _simulator(cfg)
    n = cfg.control["replicates"]
    check = None
    if o["extremal_check"] and isinstance(sim.model, BrownResnickModel):
        other = "br-extremal" if sim.method == "br-threshold" else "br-threshold"
        check = _simulator(cfg, other)
    rows = []
    for i, h in enumerate(o["lags"]):
        est = estimate_theta_pair(sim, h, n, key=i)
        exact = theta_closed_form(sim.model, h)
        row = {**{f"h{k + 1}": float(x) for k, x in enumerate(h)}, "norm": float(np.linalg.norm(h)),
               "theta": est.value, "std_error": est.std_error, "closed_form": exact,
               "z_score": (est.value - exact) / est.std_error if est.std_error > 0 else None}
        if check is not None:
            alt = estimate_theta_pair(check, h, n, key=i)
            comb = math.hypot(est.std_error, alt.std_error)
            row.update({"cross_method": check.method, "cross_theta": alt.value,
                        "cross_std_error": alt.std_error,
                        "cross_z_score": (est.value - alt.value) / comb if comb > 0 else None})
        rows.append(row)
        log.info("theta at lag %s: %.5f +- %.2g (closed form %.5f)", h, est.value, est.std_error, exact)
    body = {"report": "theta", "model": sim.model.describe(), "method": sim.method, "seed": sim.seed,
            "n_replicates": n, "lags": rows,
            "within_3se": all(r["z_score"] is not None and abs(r["z_score"]) <= 3 for r in rows)}
    run.csv("theta.csv", rows)
    lines = [f"pairwise extremal coefficients, {sim.method}, n = {n}"]
    lines += [f"|h| = {r['norm']:<8.4g} theta = {r['theta']:.5f} +- {r['std_error']:.2g}  "
              f"exact {r['closed_form']:.5f}  z = {r['z_score']:+.2f}"
              + (f"  {r['cross_method']} {r['cross_theta']:.5f} (z = {r['cross_z_score']:+.2f})"
                 if "cross_method" in r else "") for r in rows]
    run.report(body, "\n".join(lines))


def cmd_nu_decay(run: Run) -> None:
    cfg, o = run.cfg, run.cfg.options
    sim = _simulator(cfg)
    curve = estimate_nu_curve(sim, o["lags"], cfg.grid["spacing"], cfg.control["replicates"], o["delta"],
                              o["min_snr"], progress=log.info)
    d = curve.to_dict()
    body = {"report": "nu-decay", "model": sim.model.describe(), "method": sim.method, "seed": sim.seed,
            "threshold": decay_threshold(cfg.dim, o["delta"]), **d}
    run.csv("nu_curve.csv", curve.rows())
    lines = [f"nu decay, {sim.method}, spacing {curve.spacing:g}, n = {curve.n_replicates}"]
    lines += [f"|h| = {r['euclidean']:<8.4g} nu = {r['nu']:.5g} +- {r['std_error']:.2g}" for r in curve.rows()]
    for name, fit in (("euclidean", curve.fit), ("chebyshev", curve.fit_chebyshev)):
        if fit is not None:
            lines.append(f"{name}: b_hat = {fit.b_hat:.3f}, threshold {fit.threshold:g}, "
                         f"{'passed' if fit.passed else 'not passed'} ({len(fit.used)} lags used)")
    if curve.fit_error:
        lines.append(f"decay fit unavailable: {curve.fit_error}")
    run.report(body, "\n".join(lines))


def _sigma2(run: Run, sim: FieldSimulator, F: CostFunctional):
    """``(primary, secondary)`` long-run variance inputs for clt/risk."""
    o = run.cfg.options
    if o["sigma2"] != "auto":
        return float(o["sigma2"]), None
    spacing = o["sigma2_spacing"] or run.cfg.grid["spacing"]
    n = o["sigma2_replicates"]
    method = o["sigma2_method"]
    est = {}
    if method in ("integral", "both"):
        est["integral"] = estimate_sigma2_integral(sim, F, spacing, n, dim=run.cfg.dim, progress=log.info)
    if method in ("cubes", "both"):
        est["cubes"] = estimate_sigma2_cubes(sim, F, spacing, n, dim=run.cfg.dim, progress=log.info)
    for k, e in est.items():
        log.info("sigma2 (%s) = %.6g +- %.2g", k, e.value, e.std_error)
    if method == "both":
        return est["integral"], est["cubes"]
    return est[method], None


def _sequence(cfg: ExperimentConfig):
    return van_hove_squares(cfg.dim, cfg.options["sides"], cfg.options["offset"])


def cmd_clt(run: Run) -> None:
    cfg, o = run.cfg, run.cfg.options
    sim = _simulator(cfg)
    F = CostFunctional(o["functional"], u=cfg.deductible, level=o["level"], moment_exponent=o["delta"])
    sigma2, second = _sigma2(run, sim, F)
    n = cfg.control["replicates"]
    flags = []
    if n < CLT_REPLICATE_BUDGET:
        flags.append(f"only {n} replicates (< {CLT_REPLICATE_BUDGET}): normality tests are indicative only")
    table = run_replicates(sim, F, _sequence(cfg), cfg.grid["spacing"], n, workers=run.workers,
                           progress=log.info)
    rep = clt_report(sim, F, table, sigma2, second, o["plug_in_mean"])
    for r in rep.regions:
        log.info("region side %g: var/sigma2 = %.4f, AD p = %.4f", r["side"], r["variance_ratio"],
                 r["normality"]["ad_pvalue"])
    d = rep.to_dict()
    d.pop("schema_version")
    run.csv("qq.csv", rep.qq_rows(), ["region", "side", "theoretical", "empirical"])
    run.csv("regions.csv", [{k: v for k, v in r.items() if k not in ("normality", "lower", "upper")}
                            | r["normality"] for r in rep.regions])
    if o["write_replicates"]:
        run.csv("replicates.csv", rep.replicate_rows(),
                ["replicate", "region", "side", "integral", "inner", "outer", "loss"])
    est = sigma2 if not isinstance(sigma2, float) else None
    if est is not None:
        run.csv("sigma2_shells.csv", [{"method": est.method, **s} for s in est.to_dict()["shells"]])
    run.report({**d, "flags": flags}, rep.summary() + "".join(f"\nflag: {f}" for f in flags))


def cmd_risk(run: Run) -> None:
    cfg, o = run.cfg, run.cfg.options
    sim = _simulator(cfg)
    u = cfg.deductible
    F = CostFunctional("deductible-log", u=u)
    sigma2, _ = _sigma2(run, sim, F)
    table = run_replicates(sim, F, _sequence(cfg), cfg.grid["spacing"], cfg.control["replicates"],
                           workers=run.workers, progress=log.info)
    rep = risk_report_from_table(table, u, sigma2, o["levels"])
    d = rep.to_dict()
    d.pop("schema_version")
    d["model"] = sim.model.describe()
    d["method"] = sim.method
    d["seed"] = sim.seed
    if not isinstance(sigma2, float):
        d["sigma2_estimate"] = sigma2.to_dict()
    run.csv("risk.csv", rep.rows(),
            ["side", "volume", "level", "empirical_var", "gaussian_var", "expected_shortfall", "deviation"])
    run.report(d, rep.summary())


COMMAND_FUNCS = {"simulate": cmd_simulate, "theta": cmd_theta, "nu-decay": cmd_nu_decay,
                 "clt": cmd_clt, "risk": cmd_risk}


# --------------------------------------------------------------------------
# entry point


def _error_payload(code: int, exc: BaseException) -> dict:
    payload = {"schema_version": REPORT_SCHEMA_VERSION, "status": "error", "exit_code": code,
               "error_type": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        payload["errors"] = exc.errors
    diag = getattr(exc, "diagnostics", None)
    if diag:
        payload["diagnostics"] = diag
    return payload


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, InputError):
        return EXIT_CONFIG
    if isinstance(exc, MaxStabError):
        return EXIT_NUMERICAL
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_OTHER


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="maxstab", description="Max-stable field experiments.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="experiment configuration (INI)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--reproducible", action="store_true",
                   help="single-threaded BLAS so that reports are byte-identical across reruns")
    p.add_argument("--threads", type=int, default=None, help="worker threads (overrides MAXSTAB_THREADS)")
    p.add_argument("--quiet", action="store_true", help="only log warnings")
    return p


def run(command: str, config_path, out, reproducible: bool = False, threads: int | None = None) -> int:
    """Run one command; returns the exit status (see module docstring)."""
    out = Path(out)
    out_ok = True
    try:
        mio.ensure_writable(out)
    except OSError as exc:
        out_ok, io_exc = False, exc

    def fail(code: int, exc: BaseException) -> int:
        payload = _error_payload(code, exc)
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        if out_ok:
            try:
                mio.write_json(out / "error.json", payload)
                mio.write_manifest(out)
            except OSError:
                pass
        return code

    try:
        cfg = load_config(config_path, command)
    except ConfigError as exc:
        return fail(EXIT_CONFIG, exc)
    except OSError as exc:
        return fail(EXIT_IO, exc)
    if not out_ok:
        return fail(EXIT_IO, io_exc)

    workers = _threads(threads, cfg)
    log.info("running %s with %d worker thread(s)%s", command, workers, ", reproducible" if reproducible else "")
    t0 = time.perf_counter()
    stale = out / "error.json"
    if stale.exists():
        stale.unlink()
    try:
        r = Run(out, cfg, workers)
        r.text("config.ini", cfg.to_text())
        if reproducible:
            from threadpoolctl import threadpool_limits

            with threadpool_limits(limits=1):
                COMMAND_FUNCS[command](r)
        else:
            COMMAND_FUNCS[command](r)
        mio.write_manifest(out)
    except Exception as exc:  # noqa: BLE001 - every failure becomes a machine-readable error
        code = _exit_code(exc)
        if code == EXIT_OTHER:
            log.exception("unexpected failure")
        return fail(code, exc)
    log.info("done in %.1f s; outputs in %s", time.perf_counter() - t0, out)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    return run(args.command, args.config, args.out, args.reproducible, args.threads)


if __name__ == "__main__":
    sys.exit(main())
