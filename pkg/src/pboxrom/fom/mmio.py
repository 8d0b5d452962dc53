"""Matrix Market export/import of LTI systems with a JSON manifest.

A system directory holds one ``.mtx`` file per role and ``manifest.json``::

    {"roles": {"E": "E.mtx", "A": "A.mtx", "f": "f.mtx", "D": "D.mtx"},
     "n": 600, "m": 1, "param_names": [...], "param_values": [...]}

First-order systems use the roles E/A, second-order ones M/K. Vectors are
stored as ``n x 1`` coordinate matrices, ``D`` as ``m x n``.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .systems import FirstOrderSystem, ModelError, SecondOrderSystem

MANIFEST = "manifest.json"
SUPPORTED_SYMMETRY = ("general", "symmetric")


class SystemIOError(ModelError):
    """Unreadable or inconsistent system files."""


def write_mtx(path, X, comment="") -> None:
    """Coordinate Matrix Market file, values written as shortest round-trip decimals."""
    X = sp.coo_matrix(np.atleast_2d(X) if not sp.issparse(X) else X)
    sio.mmwrite(str(path), X, comment=comment, field="real", symmetry="general")


def read_mtx(path) -> sp.csc_matrix:
    path = Path(path)
    if not path.exists():
        raise SystemIOError(f"{path}: file not found")
    try:
        rows, cols, entries, fmt, field, symmetry = sio.mminfo(str(path))
    except (ValueError, OSError) as exc:
        raise SystemIOError(f"{path}: bad Matrix Market header: {exc}") from exc
    if fmt != "coordinate":
        raise SystemIOError(f"{path}: only coordinate format is supported, got {fmt!r}")
    if field not in ("real", "integer"):
        raise SystemIOError(f"{path}: unsupported field {field!r}")
    if symmetry not in SUPPORTED_SYMMETRY:
        raise SystemIOError(f"{path}: unsupported symmetry flag {symmetry!r}")
    try:
        X = sio.mmread(str(path))
    except ValueError as exc:
        # the reader reports "Line N: ..." on malformed entries
        raise SystemIOError(f"{path}: parse failure: {exc}") from exc
    return sp.csc_matrix(X, dtype=float)


def _roles(order):
    return ("E", "A") if order == 1 else ("M", "K")


def export_system(system, directory, param_names=(), param_values=(), extra=None) -> Path:
    """Write ``system`` and its manifest into ``directory``; returns the manifest path."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    mass_name, op_name = _roles(system.order)
    files = {mass_name: system.mass, op_name: system.operator,
             "f": np.asarray(system.f).reshape(-1, 1), "D": system.D}
    roles = {}
    for role, X in files.items():
        name = f"{role}.mtx"
        write_mtx(out / name, X)
        roles[role] = name
    manifest = {
        "order": system.order,
        "roles": roles,
        "n": int(system.n),
        "m": int(system.m),
        "param_names": [str(p) for p in param_names],
        "param_values": [float(v) for v in param_values],
        "meta": {k: v for k, v in system.meta.items() if isinstance(v, (int, float, str))},
    }
    if extra:
        manifest.update(extra)
    path = out / MANIFEST
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> tuple[dict, Path]:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST
    if not path.exists():
        raise SystemIOError(f"{path}: manifest not found")
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SystemIOError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(manifest, dict) or not isinstance(manifest.get("roles"), dict):
        raise SystemIOError(f"{path}: manifest needs a 'roles' mapping")
    return manifest, path.parent


def import_system(path) -> FirstOrderSystem | SecondOrderSystem:
    """Load a system from a manifest file or the directory holding it."""
    manifest, base = read_manifest(path)
    roles = manifest["roles"]
    if "f" not in roles:
        raise SystemIOError("load vector required")
    if "D" not in roles:
        raise SystemIOError("output matrix D required")
    if {"E", "A"} <= roles.keys():
        order, names = 1, ("E", "A")
    elif {"M", "K"} <= roles.keys():
        order, names = 2, ("M", "K")
    else:
        raise SystemIOError("manifest must name E and A, or M and K")

    mats = {role: read_mtx(base / roles[role]) for role in (*names, "f", "D")}
    f = mats["f"]
    if 1 not in f.shape:
        raise SystemIOError(f"load vector has shape {f.shape}")
    f = f.toarray().ravel()
    n = manifest.get("n", f.size)
    D = mats["D"].toarray()
    for role in names:
        if mats[role].shape != (n, n):
            raise SystemIOError(f"dimension mismatch: {role} is {mats[role].shape}, n={n}")
    if f.size != n or D.shape[1] != n:
        raise SystemIOError(f"dimension mismatch: f({f.size}) D{D.shape} n={n}")
    if "m" in manifest and D.shape[0] != manifest["m"]:
        raise SystemIOError(f"dimension mismatch: D has {D.shape[0]} rows, manifest m={manifest['m']}")
    meta = dict(manifest.get("meta", {}))
    meta["param_names"] = manifest.get("param_names", [])
    meta["param_values"] = manifest.get("param_values", [])
    cls = FirstOrderSystem if order == 1 else SecondOrderSystem
    return cls(mats[names[0]], mats[names[1]], f, D, meta)
