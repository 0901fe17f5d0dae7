"""Serialization of realizations and reports.

Binary realization layout (little endian)::

    b"MXSTAB\\x00\\x01"   magic + format version
    uint32             header length in bytes
    header             UTF-8 JSON: dim, origin, spacing, counts, margin, model, seed, meta
    float64[...]       values in row-major order

The CSV form stores the same header as ``# key: json`` comment lines
followed by one value per line written with ``repr`` (shortest round-trip
representation), so both forms reload bit-exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .errors import InputError
from .models import FieldRealization, GridSpec

MAGIC = b"MXSTAB\x00\x01"


def _header(f: FieldRealization) -> dict:
    meta = dict(f.meta)
    return {
        "dim": f.grid.dim,
        "origin": list(f.grid.origin),
        "spacing": f.grid.spacing,
        "counts": list(f.grid.counts),
        "margin": f.margin,
        "model": meta.pop("model", None),
        "seed": meta.pop("seed", None),
        "meta": meta,
    }


def _from_header(h: dict, values: np.ndarray) -> FieldRealization:
    grid = GridSpec(tuple(h["origin"]), float(h["spacing"]), tuple(h["counts"]))
    if values.size != grid.size:
        raise InputError(f"expected {grid.size} values, found {values.size}")
    meta = dict(h.get("meta") or {})
    for k in ("model", "seed"):
        if h.get(k) is not None:
            meta[k] = h[k]
    return FieldRealization(grid, values.reshape(grid.counts), margin=h.get("margin", "frechet"), meta=meta)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def save_realization(f: FieldRealization, path, fmt: str | None = None) -> Path:
    """Write ``f`` as ``binary`` (default for non-``.csv`` paths) or ``csv``."""
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "binary")
    header = _jsonable(_header(f))
    values = np.ascontiguousarray(f.values, dtype="<f8").reshape(-1)
    if fmt == "binary":
        hb = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(hb)))
            fh.write(hb)
            fh.write(values.tobytes())
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            for k in sorted(header):
                fh.write(f"# {k}: {json.dumps(header[k], sort_keys=True)}\n")
            fh.write("value\n")
            fh.writelines(f"{float(v)!r}\n" for v in values)
    else:
        raise InputError(f"unknown realization format {fmt!r}")
    return path


def load_realization(path) -> FieldRealization:
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(MAGIC))
        if head == MAGIC:
            (n,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(n).decode())
            values = np.frombuffer(fh.read(), dtype="<f8").astype(float)
            return _from_header(header, values)
    header, values = {}, []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, _, val = line[2:].partition(": ")
                header[key] = json.loads(val)
            elif line and line != "value":
                values.append(float(line))
    if not header:
        raise InputError(f"{path} is not a realization file")
    return _from_header(header, np.asarray(values, dtype=float))


def dumps_report(report: dict) -> str:
    """Canonical JSON text of a report (sorted keys, fixed indentation)."""
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.write_text(dumps_report(report))
    return path


def write_csv(path, rows: list[dict], columns: list[str] | None = None) -> Path:
    path = Path(path)
    columns = columns or (list(rows[0]) if rows else [])
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    return path


def content_hash(path, exclude_keys=("generated_at",)) -> str:
    """SHA-256 of a file; for JSON files the ``exclude_keys`` fields are
    removed first, so volatile metadata does not change the hash."""
    path = Path(path)
    data = path.read_bytes()
    if path.suffix == ".json" and exclude_keys:
        try:
            obj = json.loads(data)
        except ValueError:
            obj = None
        if isinstance(obj, dict):
            for k in exclude_keys:
                obj.pop(k, None)
            data = dumps_report(obj).encode()
    return hashlib.sha256(data).hexdigest()


def write_manifest(out_dir, name: str = "manifest.json", extra: dict | None = None) -> Path:
    """List every file under ``out_dir`` with its size and content hash."""
    out_dir = Path(out_dir)
    files = []
    for p in sorted(out_dir.rglob("*")):
        if p.is_file() and p.name != name:
            files.append({"path": p.relative_to(out_dir).as_posix(), "bytes": p.stat().st_size,
                          "sha256": content_hash(p)})
    manifest = {"schema_version": 1, "files": files}
    if extra:
        manifest.update(extra)
    return write_json(out_dir / name, manifest)


def ensure_writable(out_dir) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"output directory {out_dir} is not writable")
    return out_dir
