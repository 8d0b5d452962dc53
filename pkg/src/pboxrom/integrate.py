"""Fixed-step time integration of full and reduced LTI systems.

Both integrators factorize their step operator once and reuse it for every
step; ``FACTORIZATIONS`` counts those factorizations.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fom.loads import LoadSignal, evaluate_load


class IntegrationError(RuntimeError):
    pass


class _Counter:
    def __init__(self):
        self.value = 0

    def bump(self):
        self.value += 1


FACTORIZATIONS = _Counter()


@dataclass(frozen=True)
class TransientSolution:
    times: np.ndarray
    states: np.ndarray  # (steps + 1, n)
    outputs: np.ndarray  # (steps + 1, m)
    dt: float
    momenta: np.ndarray | None = None  # M v, second-order only

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    def to_csv(self, path, outputs_only=True) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            cols = self.outputs if outputs_only else self.states
            prefix = "y" if outputs_only else "u"
            writer.writerow(["t", *[f"{prefix}{j}" for j in range(cols.shape[1])]])
            for t, row in zip(self.times, cols):
                writer.writerow([repr(float(t)), *[repr(float(v)) for v in row]])

    def save_npz(self, path) -> None:
        np.savez_compressed(path, times=self.times, states=self.states, outputs=self.outputs, dt=self.dt)

    @classmethod
    def load_npz(cls, path) -> "TransientSolution":
        data = np.load(path)
        return cls(data["times"], data["states"], data["outputs"], float(data["dt"]))


def _step_count(dt, t_end):
    if not dt > 0:
        raise IntegrationError("dt must be positive")
    if t_end < 0:
        raise IntegrationError("t_end must be non-negative")
    return int(round(t_end / dt))


def _factor(matrix):
    FACTORIZATIONS.bump()
    try:
        if sp.issparse(matrix):
            lu = spla.splu(sp.csc_matrix(matrix))
            if not np.all(np.isfinite(lu.U.data)) or np.any(lu.U.diagonal() == 0):
                raise IntegrationError("step operator is singular")
            return lu.solve
        with np.errstate(all="ignore"), warnings.catch_warnings():
            # singularity is reported below as IntegrationError
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(np.asarray(matrix), check_finite=True)
        if np.any(np.diag(lu) == 0):
            raise IntegrationError("step operator is singular")
        getrs = la.get_lapack_funcs("getrs", (lu,))

        def solve(b):
            x, info = getrs(lu, piv, b)
            return x

        return solve
    except RuntimeError as exc:
        if isinstance(exc, IntegrationError):
            raise
        raise IntegrationError(f"step operator is singular: {exc}") from exc


def _signal(signal):
    return LoadSignal() if signal is None else signal


def implicit_euler(system, signal: LoadSignal | None, dt: float, t_end: float, x0=None) -> TransientSolution:
    """Backward Euler: ``(E - dt A) x_{k+1} = E x_k + dt g(t_{k+1}) f``."""
    steps = _step_count(dt, t_end)
    E, A, f, D = system.E, system.A, system.f, system.D
    solve = _factor(E - dt * A)
    times = dt * np.arange(steps + 1)
    g = np.atleast_1d(evaluate_load(_signal(signal), times))
    X = np.empty((steps + 1, system.n))
    X[0] = 0.0 if x0 is None else x0
    dtf = dt * f
    if sp.issparse(E):
        for k in range(steps):
            X[k + 1] = solve(E @ X[k] + g[k + 1] * dtf)
    else:
        # small dense systems: fold the solve into a one-step propagator
        phi = solve(np.asarray(E))
        psi = solve(dtf)
        for k in range(steps):
            X[k + 1] = phi @ X[k] + g[k + 1] * psi
    return TransientSolution(times, X, X @ D.T, dt)


def newmark(system, signal: LoadSignal | None, dt: float, t_end: float, beta: float = 0.25,
            gamma: float = 0.5, u0=None, v0=None) -> TransientSolution:
    """Newmark scheme for ``M u'' = K u + g(t) f``.

    Written in momentum form: it carries ``p = M a = K u + g f`` and
    ``q = M v`` instead of accelerations and velocities, so the initial
    acceleration never needs a separate mass solve. Each step solves

        (M - beta dt^2 K) u_{k+1} = M u_k + dt q_k + dt^2 (1/2 - beta) p_k
                                    + beta dt^2 g_{k+1} f
    """
    steps = _step_count(dt, t_end)
    M, K, f, D = system.M, system.K, system.f, system.D
    bdt2 = beta * dt * dt
    solve = _factor(M - bdt2 * K)
    if not sp.issparse(M):
        M, K = np.asarray(M), np.asarray(K)
    times = dt * np.arange(steps + 1)
    g = np.atleast_1d(evaluate_load(_signal(signal), times))
    n = system.n
    U = np.empty((steps + 1, n))
    Q = np.empty((steps + 1, n))
    U[0] = 0.0 if u0 is None else u0
    Q[0] = 0.0 if v0 is None else M @ np.asarray(v0, dtype=float)
    c_p = dt * dt * (0.5 - beta)
    dt1g, dtg = dt * (1.0 - gamma), dt * gamma
    if sp.issparse(M):
        q = Q[0].copy()
        p = K @ U[0] + g[0] * f
        c_f = bdt2 * f
        for k in range(steps):
            u = solve(M @ U[k] + dt * q + c_p * p + g[k + 1] * c_f)
            p_new = K @ u + g[k + 1] * f
            q = q + dt1g * p + dtg * p_new
            p = p_new
            U[k + 1] = u
            Q[k + 1] = q
    else:
        # small dense systems: eliminate p = K u + g f and propagate x = (u, q)
        Su = solve(M + c_p * K)
        Sq = solve(dt * np.eye(n))
        Sf = solve(f)
        KSu, KSq = K @ Su, K @ Sq
        phi = np.block([
            [Su, Sq],
            [dt1g * K + dtg * KSu, np.eye(n) + dtg * KSq],
        ])
        b_now = np.concatenate([c_p * Sf, dt1g * f + dtg * c_p * (K @ Sf)])
        b_next = np.concatenate([bdt2 * Sf, dtg * (bdt2 * (K @ Sf) + f)])
        X = np.empty((steps + 1, 2 * n))
        X[0, :n], X[0, n:] = U[0], Q[0]
        for k in range(steps):
            X[k + 1] = phi @ X[k] + g[k] * b_now + g[k + 1] * b_next
        U, Q = X[:, :n], X[:, n:]
    return TransientSolution(times, U, U @ D.T, dt, Q)


def simulate(system, signal, dt, t_end, **kw) -> TransientSolution:
    if system.order == 1:
        return implicit_euler(system, signal, dt, t_end, **kw)
    return newmark(system, signal, dt, t_end, **kw)


def back_project(reduced: TransientSolution, basis: np.ndarray, D=None) -> TransientSolution:
    """Lift reduced states with ``u = basis z``; outputs become ``D u`` if ``D`` is given."""
    basis = np.asarray(basis)
    if basis.shape[1] != reduced.states.shape[1]:
        raise IntegrationError(
            f"basis has {basis.shape[1]} columns, reduced states have {reduced.states.shape[1]}"
        )
    states = reduced.states @ basis.T
    outputs = reduced.outputs if D is None else np.asarray(states @ np.asarray(D).T)
    return TransientSolution(reduced.times, states, outputs, reduced.dt)
