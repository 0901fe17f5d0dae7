"""Experiment configuration files.

The format is INI (parsed with :mod:`configparser`).  Sections::

    [experiment]   command, schema_version
    [model]        kind = smith | brown-resnick; sigma (Smith) or eta, alpha (Brown-Resnick)
    [grid]         spacing, dim, extent, origin
    [control]      seed, method, replicates, padding, quantile_bound,
                   max_spectral_draws, pilot_draws, threads
    [simulate] | [theta] | [nu-decay] | [clt] | [risk]
                   options of the command being run (see ``COMMAND_KEYS``)

Lists are whitespace separated (``sides = 10 20 40``); lists of vectors and
matrices separate rows with ``;`` (``lags = 2 0; 4 0``, ``sigma = 1 0; 0 1``).
Parsing is strict: unknown sections and keys are errors, and every error
found is reported together, with its line number.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .models import METHODS, SimulationControl, model_from_dict

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "theta", "nu-decay", "clt", "risk")
FUNCTIONAL_KINDS = ("deductible-log", "threshold-indicator", "log-identity")


class ConfigError(InputError):
    """All problems found in a configuration; ``errors`` lists each one as a
    dict with ``line``, ``section``, ``key`` and ``message``."""

    def __init__(self, errors: list[dict]):
        self.errors = errors
        super().__init__("; ".join(_format(e) for e in errors))


def _format(e: dict) -> str:
    where = f"line {e['line']}: " if e.get("line") else ""
    key = f"[{e['section']}] {e['key']}: " if e.get("key") else (f"[{e['section']}]: " if e.get("section") else "")
    return f"{where}{key}{e['message']}"


# --------------------------------------------------------------------------
# value types


def _real(text: str) -> float:
    t = text.strip().lower()
    if t == "e":
        return math.e
    v = float(t)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(text: str) -> int:
    return int(text.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true or false")


def _reals(text: str) -> list:
    vals = [_real(t) for t in text.replace(",", " ").split()]
    if not vals:
        raise ValueError("expected at least one number")
    return vals


def _rows(text: str) -> list:
    rows = [_reals(r) for r in text.split(";") if r.strip()]
    if not rows:
        raise ValueError("expected at least one row")
    if len({len(r) for r in rows}) != 1:
        raise ValueError("rows must all have the same length")
    return rows


def _int_rows(text: str) -> list:
    rows = _rows(text)
    out = []
    for r in rows:
        if any(v != round(v) for v in r):
            raise ValueError("lags must be integer vectors")
        out.append([int(round(v)) for v in r])
    return out


def _optional(parse):
    def p(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else parse(text)

    p.optional = True
    return p


def _choice(*options):
    def p(text: str):
        t = text.strip()
        if t not in options:
            raise ValueError(f"must be one of {', '.join(options)}")
        return t

    return p


def _real_or_auto(text: str):
    return "auto" if text.strip().lower() == "auto" else _real(text)


def _show(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        if value and isinstance(value[0], list):
            return "; ".join(" ".join(_show(v) for v in row) for row in value)
        return " ".join(_show(v) for v in value)
    return str(value)


# key -> (parser, default); a default of ``...`` means required
SECTION_KEYS = {
    "experiment": {"command": (_choice(*COMMANDS), ...), "schema_version": (_int, SCHEMA_VERSION)},
    "model": {
        "kind": (_choice("smith", "brown-resnick"), ...),
        "sigma": (_optional(_rows), None),
        "eta": (_optional(_real), None),
        "alpha": (_optional(_real), None),
    },
    "grid": {
        "spacing": (_real, ...),
        "dim": (_optional(_int), None),
        "extent": (_optional(_reals), None),
        "origin": (_optional(_reals), None),
    },
    "control": {
        "seed": (_int, 0),
        "method": (_optional(_choice(*METHODS)), None),
        "replicates": (_int, ...),
        "padding": (_optional(_real), None),
        "quantile_bound": (_real, 0.999),
        "max_spectral_draws": (_int, 1_000_000),
        "pilot_draws": (_int, 1000),
        "threads": (_optional(_int), None),
    },
}

_SIGMA2_KEYS = {
    "sigma2": (_real_or_auto, "auto"),
    "sigma2_method": (_choice("integral", "cubes", "both"), "integral"),
    "sigma2_replicates": (_int, 2000),
    "sigma2_spacing": (_optional(_real), None),
}

COMMAND_KEYS = {
    "simulate": {
        "format": (_choice("binary", "csv", "none"), "binary"),
        "save": (_int, 1),
        "margin_sites": (_int, 5),
    },
    "theta": {
        "lags": (_rows, ...),
        "extremal_check": (_bool, False),
    },
    "nu-decay": {
        "lags": (_int_rows, ...),
        "delta": (_real, 1.0),
        "min_snr": (_real, 3.0),
    },
    "clt": {
        "sides": (_reals, ...),
        "offset": (_real, 0.5),
        "functional": (_choice(*FUNCTIONAL_KINDS), "deductible-log"),
        "u": (_optional(_real), None),
        "v": (_optional(_real), None),
        "level": (_real, 1.0),
        "delta": (_real, 1.0),
        "plug_in_mean": (_bool, False),
        "write_replicates": (_bool, True),
        **_SIGMA2_KEYS,
    },
    "risk": {
        "sides": (_reals, ...),
        "offset": (_real, 0.5),
        "u": (_optional(_real), None),
        "v": (_optional(_real), None),
        "levels": (_reals, [0.9, 0.95, 0.99]),
        **_SIGMA2_KEYS,
    },
}


@dataclass
class ExperimentConfig:
    """A validated experiment; every field is filled (defaults included)."""

    command: str
    model: dict
    grid: dict
    control: dict
    options: dict
    schema_version: int = SCHEMA_VERSION
    source_lines: dict = field(default_factory=dict, compare=False, repr=False)

    # -- derived objects ------------------------------------------------

    def build_model(self):
        m = self.model
        if m["kind"] == "smith":
            return model_from_dict({"kind": "smith", "sigma": m["sigma"]})
        return model_from_dict({"kind": "brown-resnick", "eta": m["eta"], "alpha": m["alpha"]})

    def build_control(self, seed: int | None = None) -> SimulationControl:
        c = self.control
        return SimulationControl(
            seed=c["seed"] if seed is None else seed,
            method=c["method"],
            padding=c["padding"],
            quantile_bound=c["quantile_bound"],
            max_spectral_draws=c["max_spectral_draws"],
            pilot_draws=c["pilot_draws"],
        )

    @property
    def dim(self) -> int:
        if self.model["kind"] == "smith":
            return len(self.model["sigma"])
        return self.grid["dim"] or 2

    @property
    def deductible(self) -> float | None:
        o = self.options
        if "u" not in o:
            return None
        if o["u"] is not None:
            return o["u"]
        if o["v"] is not None:
            return math.exp(o["v"])
        return math.e

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "command": self.command, "model": self.model,
                "grid": self.grid, "control": self.control, "options": self.options}

    def to_text(self) -> str:
        """Serialise to the INI format; ``parse_config(c.to_text()) == c``."""
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"command": self.command, "schema_version": str(self.schema_version)}
        for name, values in (("model", self.model), ("grid", self.grid), ("control", self.control),
                             (self.command, self.options)):
            cp[name] = {k: _show(v) for k, v in values.items()}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^\s=:#;\[][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    where, section = {}, None
    for no, line in enumerate(text.splitlines(), start=1):
        if m := _SECTION_RE.match(line):
            section = m.group(1).strip()
            where.setdefault((section, None), no)
        elif section and (m := _KEY_RE.match(line)) and not line[:1].isspace():
            where.setdefault((section, m.group(1).strip().lower()), no)
    return where


def parse_config(text: str, command: str | None = None) -> ExperimentConfig:
    """Parse and validate a configuration; raises :class:`ConfigError`
    listing every problem found.  ``command`` (from the command line)
    must agree with ``[experiment] command`` when both are given."""
    errors: list[dict] = []
    lines = _line_index(text)

    def err(section, key, message):
        errors.append({"line": lines.get((section, key)) or lines.get((section, None)),
                       "section": section, "key": key, "message": message})

    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",), default_section="\x00")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([{"line": getattr(exc, "lineno", None), "section": getattr(exc, "section", None),
                            "key": getattr(exc, "option", None), "message": exc.message.splitlines()[0]}])

    cmd = command
    if cp.has_section("experiment") and cp.has_option("experiment", "command"):
        file_cmd = cp.get("experiment", "command").strip()
        if command is not None and file_cmd != command:
            err("experiment", "command", f"config is for {file_cmd!r} but the command line asks for {command!r}")
            raise ConfigError(errors)
        cmd = cmd or file_cmd
    if cmd not in COMMANDS:
        err("experiment", "command", f"command must be one of {', '.join(COMMANDS)}")
        raise ConfigError(errors)

    schema = dict(SECTION_KEYS)
    schema[cmd] = COMMAND_KEYS[cmd]
    for sec in cp.sections():
        if sec not in schema:
            hint = " (options of another command)" if sec in COMMAND_KEYS else ""
            err(sec, None, f"unknown section{hint}")

    values = {}
    for sec, keys in schema.items():
        present = cp[sec] if cp.has_section(sec) else {}
        out = {}
        for key in present:
            if key not in keys:
                err(sec, key, "unknown key")
        for key, (parse, default) in keys.items():
            if key in present:
                try:
                    out[key] = parse(present[key])
                except (ValueError, TypeError) as exc:
                    err(sec, key, f"invalid value {present[key]!r}: {exc}")
            elif default is ...:
                if not (sec == "experiment" and key == "command"):
                    err(sec, key, "required key missing")
            else:
                out[key] = list(default) if isinstance(default, list) else default
        values[sec] = out
    values["experiment"]["command"] = cmd

    _validate(values, cmd, err)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(cmd, values["model"], values["grid"], values["control"], values[cmd],
                            values["experiment"]["schema_version"], source_lines=lines)


def _validate(v: dict, cmd: str, err) -> None:
    if v["experiment"].get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        err("experiment", "schema_version", f"unsupported schema version (this build reads {SCHEMA_VERSION})")

    m = v["model"]
    kind = m.get("kind")
    if kind == "smith":
        for k in ("eta", "alpha"):
            if m.get(k) is not None:
                err("model", k, "not a parameter of the Smith model")
        if m.get("sigma") is None:
            if "sigma" in m:
                err("model", "sigma", "the Smith model needs a covariance matrix sigma")
        else:
            s = np.asarray(m["sigma"], dtype=float)
            if s.shape[0] != s.shape[1]:
                err("model", "sigma", "sigma must be a square matrix")
            else:
                try:
                    model_from_dict({"kind": "smith", "sigma": s})
                except InputError as exc:
                    err("model", "sigma", str(exc))
    elif kind == "brown-resnick":
        if m.get("sigma") is not None:
            err("model", "sigma", "not a parameter of the Brown-Resnick model")
        eta, alpha = m.get("eta"), m.get("alpha")
        if eta is None:
            err("model", "eta", "the Brown-Resnick model needs eta")
        elif not eta > 0:
            err("model", "eta", f"eta must be > 0, got {eta}")
        if alpha is None:
            err("model", "alpha", "the Brown-Resnick model needs alpha")
        elif not 0 < alpha <= 2:
            err("model", "alpha", f"alpha must lie in (0, 2], got {alpha}")

    dim = None
    if kind == "smith" and m.get("sigma"):
        dim = len(m["sigma"])
    g = v["grid"]
    if g.get("dim") is not None:
        if g["dim"] not in (1, 2, 3):
            err("grid", "dim", "dim must be 1, 2 or 3")
        elif dim is not None and g["dim"] != dim:
            err("grid", "dim", f"dim {g['dim']} disagrees with the {dim}x{dim} sigma")
        dim = g["dim"]
    dim = dim or 2
    if "spacing" in g and not g["spacing"] > 0:
        err("grid", "spacing", "spacing must be > 0")
    for key in ("extent", "origin"):
        if g.get(key) is not None and len(g[key]) not in (1, dim):
            err("grid", key, f"expected 1 or {dim} numbers")
    if g.get("extent") is not None and any(e <= 0 for e in g["extent"]):
        err("grid", "extent", "extent must be > 0")
    if cmd == "simulate" and g.get("extent") is None and "spacing" in g:
        err("grid", "extent", "the simulate command needs the grid extent")

    c = v["control"]
    if "replicates" in c and c["replicates"] < 1:
        err("control", "replicates", "replicates must be >= 1")
    if c.get("seed", 0) < 0:
        err("control", "seed", "seed must be >= 0")
    if "quantile_bound" in c and not 0 < c["quantile_bound"] < 1:
        err("control", "quantile_bound", "quantile_bound must lie in (0, 1)")
    if c.get("padding") is not None and c["padding"] < 0:
        err("control", "padding", "padding must be >= 0")
    for key in ("max_spectral_draws", "pilot_draws"):
        if key in c and c[key] < 1:
            err("control", key, f"{key} must be >= 1")
    if c.get("threads") is not None and c["threads"] < 1:
        err("control", "threads", "threads must be >= 1")
    method = c.get("method")
    if method is not None and kind is not None:
        if (kind == "smith") != (method == "smith-exact"):
            err("control", "method", f"method {method} does not apply to the {kind} model")

    o = v[cmd]
    if cmd == "simulate":
        if o.get("save", 0) < 0:
            err(cmd, "save", "save must be >= 0")
        if o.get("margin_sites", 0) < 0:
            err(cmd, "margin_sites", "margin_sites must be >= 0")
    if cmd in ("theta", "nu-decay") and o.get("lags"):
        if len(o["lags"][0]) != dim:
            err(cmd, "lags", f"lags must be {dim}-vectors")
        if any(not any(x) for x in o["lags"]):
            err(cmd, "lags", "the zero lag is not allowed")
    if cmd == "nu-decay":
        if not o.get("delta", 1) > 0:
            err(cmd, "delta", "delta must be > 0")
    if cmd in ("clt", "risk"):
        sides = o.get("sides")
        if sides:
            if any(s <= 0 for s in sides) or any(b <= a for a, b in zip(sides, sides[1:])):
                err(cmd, "sides", "sides must be positive and strictly increasing")
            if any(abs(s - round(s)) > 1e-9 for s in sides) or abs(o["offset"] - round(o["offset"] * 2) / 2) > 1e-9:
                err(cmd, "sides", "sides must be integers and offset a multiple of 1/2 (regions are unions of unit cells)")
        if o.get("u") is not None and o.get("v") is not None:
            err(cmd, "u", "give either u or v = log(u), not both")
        if o.get("u") is not None and not o["u"] > 0:
            err(cmd, "u", "u must be > 0")
        s2 = o.get("sigma2")
        if s2 is not None and s2 != "auto" and not s2 > 0:
            err(cmd, "sigma2", "sigma2 must be > 0 or auto")
        if o.get("sigma2_replicates", 1) < 100:
            err(cmd, "sigma2_replicates", "sigma2_replicates must be >= 100")
        if o.get("sigma2_spacing") is not None and not o["sigma2_spacing"] > 0:
            err(cmd, "sigma2_spacing", "sigma2_spacing must be > 0")
        if cmd == "risk" and any(not 0 < p < 1 for p in o.get("levels", [])):
            err(cmd, "levels", "levels must lie strictly in (0, 1)")
        if cmd == "clt":
            if not o.get("level", 1) > 0:
                err(cmd, "level", "level must be > 0")
            if not o.get("delta", 1) > 0:
                err(cmd, "delta", "delta must be > 0")
        spacing = g.get("spacing")
        if spacing and spacing > 0:
            cells = 1.0 / spacing
            if abs(cells - round(cells)) > 1e-9:
                err("grid", "spacing", "spacing must divide 1 (regions are unions of unit cells)")


def load_config(path, command: str | None = None) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), command)
