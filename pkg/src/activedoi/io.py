"""CSV ledger, field snapshots and the run manifest."""

from __future__ import annotations

import csv
import os
from importlib import metadata
from pathlib import Path

import numpy as np

from .diagnostics import INT_COLUMNS, LEDGER_COLUMNS

LEDGER_FILE = "ledger.csv"
MANIFEST_FILE = "manifest.txt"


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_ledger(ledger, path):
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEDGER_COLUMNS)
        for row in ledger:
            w.writerow([_fmt(row[c]) for c in LEDGER_COLUMNS])
    return path


def read_ledger(path):
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != LEDGER_COLUMNS:
            raise ValueError(f"{path}: unexpected ledger header {header}")
        out = []
        for rec in r:
            out.append({c: (int(v) if c in INT_COLUMNS else float(v)) for c, v in zip(header, rec)})
    return out


def write_snapshot(snap, out_dir, grid=None):
    """One CSV per field; rows are ``i,j[,k],value`` with the first index fastest."""
    out_dir = Path(out_dir)
    paths = []
    for name, arr in snap["fields"].items():
        arr = np.asarray(arr, dtype=float)
        path = out_dir / f"{name}_{snap['step']:06d}.csv"
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# field={name}\n# step={snap['step']}\n# t={snap['t']!r}\n")
            fh.write(f"# shape={'x'.join(map(str, arr.shape))}\n")
            if grid is not None:
                fh.write(f"# hx={grid.hx!r}\n# hy={grid.hy!r}\n# bc_mode={grid.bc_mode}\n")
            idx_names = ["i", "j", "k"][: arr.ndim]
            fh.write(",".join(idx_names + [name]) + "\n")
            # x fastest: iterate the reversed index order
            for idx in np.ndindex(*arr.shape[::-1]):
                ii = idx[::-1]
                fh.write(",".join(map(str, ii)) + "," + repr(float(arr[ii])) + "\n")
        paths.append(path)
    return paths


def write_manifest(params, path, extra=None):
    lines = ["# run manifest", f"code_version = {code_version()}"]
    for k, v in params.as_dict().items():
        lines.append(f"{k} = {_fmt(v)}")
    for k, v in (extra or {}).items():
        lines.append(f"{k} = {_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return Path(path)


def read_manifest(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def write_outputs(ledger, snapshots, out_dir, params=None, grid=None, extra=None):
    """Write ledger, snapshots and manifest; I/O errors name the offending path."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(out_dir, os.W_OK):
            raise PermissionError(f"directory is not writable: {out_dir}")
        paths = [write_ledger(ledger, out_dir / LEDGER_FILE)]
        for snap in snapshots:
            paths.extend(write_snapshot(snap, out_dir, grid))
        if params is not None:
            paths.append(write_manifest(params, out_dir / MANIFEST_FILE, extra))
    except OSError as exc:
        raise OSError(f"cannot write outputs to {out_dir}: {exc}") from exc
    return paths
