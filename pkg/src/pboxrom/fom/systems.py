"""Containers for linear time-invariant full-order and reduced systems."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


class ModelError(ValueError):
    """Invalid model definition."""


def _as_matrix(X):
    if sp.issparse(X):
        return sp.csc_matrix(X, dtype=float)
    return np.atleast_2d(np.asarray(X, dtype=float))


@dataclass(frozen=True)
class FirstOrderSystem:
    """``E u' = A u + g(t) f``, ``y = D u``.

    Matrices may be scipy sparse (full-order models) or dense arrays
    (reduced models).
    """

    E: object
    A: object
    f: np.ndarray
    D: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    order = 1

    def __post_init__(self):
        E, A = _as_matrix(self.E), _as_matrix(self.A)
        f = np.asarray(self.f, dtype=float).ravel()
        D = np.atleast_2d(np.asarray(self.D.toarray() if sp.issparse(self.D) else self.D, dtype=float))
        n = f.size
        if E.shape != (n, n) or A.shape != (n, n) or D.shape[1] != n:
            raise ModelError(
                f"dimension mismatch: E{E.shape} A{A.shape} f({n},) D{D.shape}"
            )
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def mass(self):
        return self.E

    @property
    def operator(self):
        return self.A

    def transfer(self, s: complex) -> np.ndarray:
        """``D (s E - A)^{-1} f``."""
        return self.D @ _shifted_solve(self.E, self.A, s, self.f)


@dataclass(frozen=True)
class SecondOrderSystem:
    """Undamped ``M u'' = K u + g(t) f``, ``y = D u``.

    ``K`` follows this sign convention, so for a structure it is the
    negative of the conventional (positive definite) stiffness matrix.
    """

    M: object
    K: object
    f: np.ndarray
    D: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    order = 2

    def __post_init__(self):
        M, K = _as_matrix(self.M), _as_matrix(self.K)
        f = np.asarray(self.f, dtype=float).ravel()
        D = np.atleast_2d(np.asarray(self.D.toarray() if sp.issparse(self.D) else self.D, dtype=float))
        n = f.size
        if M.shape != (n, n) or K.shape != (n, n) or D.shape[1] != n:
            raise ModelError(
                f"dimension mismatch: M{M.shape} K{K.shape} f({n},) D{D.shape}"
            )
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def m(self) -> int:
        return self.D.shape[0]

    @property
    def mass(self):
        return self.M

    @property
    def operator(self):
        return self.K

    def transfer(self, s: complex) -> np.ndarray:
        """``D (s^2 M - K)^{-1} f``."""
        return self.D @ _shifted_solve(self.M, self.K, s * s, self.f)


def _shifted_solve(E, A, sigma, b):
    if sp.issparse(E) or sp.issparse(A):
        import scipy.sparse.linalg as spla

        op = sp.csc_matrix(sigma * E - A)
        return spla.spsolve(op, b.astype(op.dtype))
    return np.linalg.solve(sigma * E - A, b)


def with_matrices(system, mass, operator, f, D, **meta):
    """Same system class as ``system`` built from new matrices."""
    if system.order == 1:
        return FirstOrderSystem(mass, operator, f, D, meta)
    return SecondOrderSystem(mass, operator, f, D, meta)


def dense(X) -> np.ndarray:
    return X.toarray() if sp.issparse(X) else np.asarray(X)
