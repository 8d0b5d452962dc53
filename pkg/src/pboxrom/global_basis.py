"""Change of basis from local reduced coordinates to one shared space.

All local bases in scope are stacked, the leading ``r`` left singular vectors
form the global basis ``R``, and every local ROM is mapped into it with
``W = (V^T R)^{-1}`` and ``T = R^T V``. The map is a similarity
transformation, so each member keeps its transfer function.
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .fom.systems import with_matrices
from .krylov import LocalROM

log = logging.getLogger(__name__)

COND_LIMIT = 1e12


class BasisChangeError(RuntimeError):
    """Global basis could not be formed or a member could not be mapped."""


@dataclass(frozen=True)
class GlobalMember:
    system: object
    W: np.ndarray
    T: np.ndarray
    parameter_index: int | None
    parameters: tuple[float, ...] | None = None


@dataclass(frozen=True)
class GlobalROMSet:
    R: np.ndarray
    members: tuple[GlobalMember, ...]
    scope: tuple[int, ...] | None = None  # None means all training points
    singular_values: np.ndarray | None = None

    @property
    def r(self) -> int:
        return self.R.shape[1]

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(m.parameter_index for m in self.members)

    def member(self, parameter_index: int) -> GlobalMember:
        for m in self.members:
            if m.parameter_index == parameter_index:
                return m
        raise KeyError(f"training point {parameter_index} is not in this set")


def assemble_v_all(roms, selection=None) -> np.ndarray:
    """Column-block concatenation ``[V_i1, V_i2, ...]`` in selection order."""
    chosen = roms if selection is None else [roms[i] for i in selection]
    if not chosen:
        raise BasisChangeError("no local ROMs selected")
    shapes = {rom.V.shape for rom in chosen}
    if len(shapes) != 1:
        raise BasisChangeError(f"local bases have mixed shapes {sorted(shapes)}")
    return np.hstack([rom.V for rom in chosen])


def global_basis_from_svd(v_all: np.ndarray, r: int, return_singular_values=False):
    """Leading ``r`` left singular vectors, each signed so its largest entry is positive."""
    if v_all.shape[1] < r:
        raise BasisChangeError(f"v_all has {v_all.shape[1]} columns, need at least r={r}")
    U, s, _ = np.linalg.svd(v_all, full_matrices=False)
    rank_tol = max(v_all.shape) * np.finfo(float).eps * s[0]
    rank = int(np.sum(s > rank_tol))
    if rank < r:
        raise BasisChangeError(f"v_all has deficient rank {rank} < r={r}")
    R = U[:, :r].copy()
    peaks = np.argmax(np.abs(R), axis=0)
    signs = np.sign(R[peaks, np.arange(r)])
    R *= signs
    if return_singular_values:
        return R, s
    return R


def transform_member(rom: LocalROM, R: np.ndarray) -> GlobalMember:
    """Map a local ROM into the coordinates of ``R`` using LU solves only."""
    V = rom.V
    if V.shape != R.shape:
        raise BasisChangeError(f"local basis {V.shape} and global basis {R.shape} differ in shape")
    T = R.T @ V
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise BasisChangeError(
            f"training point {rom.parameter_index}: V^T R is ill-conditioned "
            f"(cond={cond:.3e}); local and global bases are inconsistent"
        )
    # W = (V^T R)^{-1} = T^{-T}; tilde X = W X T^{-1}
    lu_t = la.lu_factor(T.T)
    W = la.lu_solve(lu_t, np.eye(T.shape[0]))

    def left(X):
        return la.lu_solve(lu_t, X)

    def right_inv(X):
        return la.lu_solve(lu_t, X.T).T

    sys = rom.system
    mass = right_inv(left(sys.mass))
    op = right_inv(left(sys.operator))
    f = left(sys.f)
    D = right_inv(sys.D)
    return GlobalMember(with_matrices(sys, mass, op, f, D), W, T, rom.parameter_index, rom.parameters)


def build_global_set(roms, selection=None, r: int | None = None) -> GlobalROMSet:
    """Global basis and transformed members over ``selection`` (default all)."""
    chosen = list(range(len(roms))) if selection is None else list(selection)
    v_all = assemble_v_all(roms, chosen)
    r = roms[chosen[0]].r if r is None else r
    R, s = global_basis_from_svd(v_all, r, return_singular_values=True)
    members = tuple(transform_member(roms[i], R) for i in chosen)
    scope = None if selection is None else tuple(chosen)
    return GlobalROMSet(R, members, scope, s)


class BoxCache:
    """Per-cell global sets for box reduction, filled up front or on demand.

    Concurrent requests for the same cell build it once.
    """

    def __init__(self, grid, roms, sets=None, offline_only=False):
        self.grid = grid
        self.roms = roms
        self.offline_only = offline_only
        self._sets = dict(sets or {})
        self._lock = threading.Lock()
        self._cell_locks: dict = {}

    def __len__(self):
        return len(self._sets)

    def __contains__(self, cell):
        return tuple(cell) in self._sets

    def items(self):
        return sorted(self._sets.items())

    def get(self, cell) -> GlobalROMSet:
        cell = tuple(int(c) for c in cell)
        found = self._sets.get(cell)
        if found is not None:
            return found
        if self.offline_only:
            raise BasisChangeError(f"box {cell} is not precomputed (offline-only mode)")
        with self._lock:
            cell_lock = self._cell_locks.setdefault(cell, threading.Lock())
        with cell_lock:
            if cell not in self._sets:
                self._sets[cell] = self._build(cell)
        return self._sets[cell]

    def _build(self, cell) -> GlobalROMSet:
        corners = self.grid.cell_corners(cell)
        try:
            return build_global_set(self.roms, corners)
        except BasisChangeError as exc:
            raise BasisChangeError(f"box {cell}: {exc}") from exc

    def precompute(self, workers: int = 1) -> "BoxCache":
        cells = self.grid.cells()
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(self.get, cells))
        else:
            for cell in cells:
                self.get(cell)
        return self


def precompute_boxes(grid, roms, workers: int = 1) -> dict:
    """One global set per grid cell, keyed by the cell's lower multi-index."""
    cache = BoxCache(grid, roms).precompute(workers)
    return dict(cache.items())
