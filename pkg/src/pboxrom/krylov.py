"""Local reduction of one training point by a moment-matching Krylov basis.

The basis spans ``Kr_r((s0 E - A)^{-1} E, (s0 E - A)^{-1} f)`` for first-order
systems and the analogous subspace in ``sigma = s^2`` for second-order ones,
built with a single sparse LU of the shifted operator.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fom.systems import FirstOrderSystem, SecondOrderSystem, with_matrices

log = logging.getLogger(__name__)

BREAKDOWN_RTOL = 1e-12


class ReductionError(RuntimeError):
    """Local reduction failed (singular shift, bad dimensions, ...)."""

    def __init__(self, msg, point_index=None):
        super().__init__(msg if point_index is None else f"training point {point_index}: {msg}")
        self.point_index = point_index


@dataclass(frozen=True)
class ProjectionBasis:
    V: np.ndarray
    s0: float = 0.0
    truncated: bool = False
    requested_r: int | None = None

    @property
    def n(self) -> int:
        return self.V.shape[0]

    @property
    def r(self) -> int:
        return self.V.shape[1]


@dataclass(frozen=True)
class LocalROM:
    system: FirstOrderSystem | SecondOrderSystem
    basis: ProjectionBasis
    parameter_index: int | None = None
    parameters: tuple[float, ...] | None = field(default=None, compare=False)

    @property
    def r(self) -> int:
        return self.basis.r

    @property
    def V(self) -> np.ndarray:
        return self.basis.V


def factorize(matrix):
    """LU of a sparse or dense square matrix, returned as a solve callable."""
    if sp.issparse(matrix):
        lu = spla.splu(sp.csc_matrix(matrix))
        return lu.solve
    lu = la.lu_factor(np.asarray(matrix))
    return lambda b: la.lu_solve(lu, b, check_finite=False)


def _shifted_operator(system, s0):
    sigma = s0 if system.order == 1 else s0 * s0
    return sigma * system.mass - system.operator


def arnoldi_basis(system, r: int, s0: float = 0.0) -> ProjectionBasis:
    """Orthonormal Krylov basis by modified Gram-Schmidt, reorthogonalized once.

    On breakdown the basis stops early and is flagged ``truncated``.
    """
    if r < 1:
        raise ReductionError("r must be >= 1")
    r = min(int(r), system.n)
    op = _shifted_operator(system, s0)
    try:
        with np.errstate(all="raise"):
            solve = factorize(op)
    except (RuntimeError, la.LinAlgError, FloatingPointError) as exc:
        raise ReductionError(f"shifted operator is singular at s0={s0}: {exc}") from exc
    mass = system.mass

    V = np.zeros((system.n, r))
    v = solve(system.f)
    if not np.all(np.isfinite(v)):
        raise ReductionError(f"shifted operator is singular at s0={s0}")
    ref = np.linalg.norm(v)
    if ref == 0.0:
        raise ReductionError("load vector is zero, Krylov space is empty")
    V[:, 0] = v / ref
    count = 1
    for j in range(1, r):
        w = solve(mass @ V[:, j - 1])
        for _ in range(2):
            for i in range(j):
                w -= (V[:, i] @ w) * V[:, i]
        nw = np.linalg.norm(w)
        if nw < BREAKDOWN_RTOL * ref:
            log.warning("Krylov breakdown after %d of %d vectors", j, r)
            break
        V[:, j] = w / nw
        count += 1
    truncated = count < r
    return ProjectionBasis(V[:, :count].copy(), float(s0), truncated, r)


def project_system(system, basis: ProjectionBasis | np.ndarray, parameter_index=None, parameters=None) -> LocalROM:
    """Galerkin projection ``V^T X V``, ``V^T f``, ``D V``."""
    if not isinstance(basis, ProjectionBasis):
        basis = ProjectionBasis(np.asarray(basis, dtype=float))
    V = basis.V
    if V.shape[0] != system.n:
        raise ReductionError(f"basis has {V.shape[0]} rows, system has n={system.n}")
    mass = V.T @ np.asarray(system.mass @ V)
    op = V.T @ np.asarray(system.operator @ V)
    red = with_matrices(system, mass, op, V.T @ system.f, system.D @ V)
    return LocalROM(red, basis, parameter_index, parameters)


def reduce_point(system, r, s0=0.0, parameter_index=None, parameters=None) -> LocalROM:
    basis = arnoldi_basis(system, r, s0)
    return project_system(system, basis, parameter_index, parameters)


def reduce_training_set(grid, fom_factory, r: int, s0: float = 0.0, workers: int = 1) -> list[LocalROM]:
    """One ``LocalROM`` per grid point, index-aligned with the grid."""

    def work(i):
        params = tuple(grid.points[i])
        try:
            return reduce_point(fom_factory(params), r, s0, i, params)
        except ReductionError as exc:
            raise ReductionError(str(exc), i) from exc
        except Exception as exc:  # factory failures carry the point id too
            raise ReductionError(f"{type(exc).__name__}: {exc}", i) from exc

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(work, range(grid.k)))
    return [work(i) for i in range(grid.k)]
