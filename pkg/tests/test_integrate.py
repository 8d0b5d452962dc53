import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from conftest import random_first_order, random_second_order
from pboxrom.fom.beam import BeamSpec, build_timoshenko_beam
from pboxrom.fom.lattice import build_heat_lattice
from pboxrom.fom.loads import LoadSignal
from pboxrom.fom.systems import FirstOrderSystem, SecondOrderSystem
from pboxrom.integrate import (
    FACTORIZATIONS,
    IntegrationError,
    TransientSolution,
    back_project,
    implicit_euler,
    newmark,
    simulate,
)
from pboxrom.krylov import project_system

ZERO = LoadSignal("step", 0.0)


def test_scalar_closed_form():
    sys = FirstOrderSystem([[1.0]], [[-1.0]], [0.0], [[1.0]])
    dt = 0.01
    sol = implicit_euler(sys, ZERO, dt, 1.0, x0=[1.0])
    k = np.arange(sol.steps + 1)
    assert sol.steps == 100
    assert np.allclose(sol.states[:, 0], (1 + dt) ** -k, rtol=1e-12, atol=0)


def test_steady_state():
    sys = random_first_order(10, 3)
    sol = implicit_euler(sys, None, 0.5, 200.0)
    assert np.allclose(sol.states[-1], np.linalg.solve(sys.A, -sys.f), rtol=1e-8)


def test_rod_against_matrix_exponential():
    mask = np.zeros((2, 1, 1), dtype=int)
    heated = np.array([True, False]).reshape(2, 1, 1)
    sys = build_heat_lattice(2, 1, 1, mask, [2.0], [3.0], 5.0, heated, cell_size=0.1)
    E, A = sys.E.toarray(), sys.A.toarray()
    dt, t_end = 1e-4, 0.05
    sol = implicit_euler(sys, None, dt, t_end)
    Minv = np.linalg.solve(E, A)
    b = np.linalg.solve(E, sys.f)
    exact = np.array([(la.expm(Minv * t) - np.eye(2)) @ np.linalg.solve(Minv, b) for t in sol.times])
    err = np.abs(sol.states - exact).max() / np.abs(exact).max()
    bound = 2 * dt * np.linalg.norm(A, 2) / np.linalg.norm(E, 2)
    assert err <= bound


def sdof():
    return SecondOrderSystem([[1.0]], [[-1.0]], [0.0], [[1.0]])


def test_newmark_sdof_period():
    sol = newmark(sdof(), ZERO, 1e-3, 40.0, u0=[1.0])
    u = sol.states[:, 0]
    # upward zero crossings by linear interpolation
    k = np.flatnonzero((u[:-1] < 0) & (u[1:] >= 0))
    t = sol.times[k] - u[k] * (sol.times[k + 1] - sol.times[k]) / (u[k + 1] - u[k])
    period = np.diff(t).mean()
    assert period == pytest.approx(2 * np.pi, rel=1e-3)


def test_newmark_energy_conservation():
    sys = SecondOrderSystem([[2.0]], [[-5.0]], [0.0], [[1.0]])
    sol = newmark(sys, ZERO, 0.01, 100.0, u0=[1.0], v0=[0.3])
    assert sol.steps == 10_000
    u, q = sol.states[:, 0], sol.momenta[:, 0]
    energy = 0.5 * q**2 / 2.0 + 0.5 * 5.0 * u**2
    assert np.abs(energy / energy[0] - 1.0).max() <= 1e-6


def test_newmark_energy_multi_dof_sparse():
    sys = random_second_order(8, 4)
    sp_sys = SecondOrderSystem(sp.csc_matrix(sys.M), sp.csc_matrix(sys.K), np.zeros(8), sys.D)
    rng = np.random.default_rng(0)
    u0, v0 = rng.standard_normal(8), rng.standard_normal(8)
    for s in (sp_sys, SecondOrderSystem(sys.M, sys.K, np.zeros(8), sys.D)):
        sol = newmark(s, ZERO, 0.01, 100.0, u0=u0, v0=v0)
        v = np.linalg.solve(sys.M, sol.momenta.T).T
        e = 0.5 * np.einsum("ij,jk,ik->i", v, sys.M, v) - 0.5 * np.einsum("ij,jk,ik->i", sol.states, sys.K, sol.states)
        assert np.abs(e / e[0] - 1.0).max() <= 1e-6


def test_beam_step_response_oscillates_about_static():
    spec = BeamSpec(element_count=20)
    sys = build_timoshenko_beam(spec)
    static = (sys.D @ spla.spsolve(-sys.K.tocsc(), sys.f))[0]
    w2 = la.eigh(-sys.K.toarray(), sys.M.toarray(), eigvals_only=True, subset_by_index=[0, 0])[0]
    period = 2 * np.pi / np.sqrt(w2)
    dt = period / 2000
    sol = newmark(sys, None, dt, 10 * period)
    assert sol.outputs[:, 0].mean() == pytest.approx(static, rel=1e-2)


def test_dense_and_sparse_paths_agree():
    s1 = random_second_order(10, 2)
    s2 = SecondOrderSystem(sp.csc_matrix(s1.M), sp.csc_matrix(s1.K), s1.f, s1.D)
    sig = LoadSignal("sine", 1.0, frequency=0.3)
    a, b = newmark(s1, sig, 0.05, 5.0), newmark(s2, sig, 0.05, 5.0)
    assert np.allclose(a.states, b.states, rtol=1e-10, atol=1e-12 * np.abs(b.states).max())
    assert np.allclose(a.momenta, b.momenta, rtol=1e-10, atol=1e-12 * np.abs(b.momenta).max())
    f1 = random_first_order(10, 2)
    f2 = FirstOrderSystem(sp.csc_matrix(f1.E), sp.csc_matrix(f1.A), f1.f, f1.D)
    a, b = implicit_euler(f1, sig, 0.05, 5.0), implicit_euler(f2, sig, 0.05, 5.0)
    assert np.allclose(a.states, b.states, rtol=1e-10, atol=1e-12 * np.abs(b.states).max())


@pytest.mark.parametrize("system", [random_first_order(12, 1), random_second_order(12, 1)])
def test_one_factorization_per_run(system):
    before = FACTORIZATIONS.value
    simulate(system, None, 0.01, 1.0)
    assert FACTORIZATIONS.value - before == 1


def test_linearity_in_load():
    sys = random_second_order(10, 6)
    a = newmark(sys, LoadSignal("ramp", 1.0, t_rise=0.5), 0.02, 2.0)
    b = newmark(sys, LoadSignal("ramp", -3.0, t_rise=0.5), 0.02, 2.0)
    assert np.allclose(b.states, -3.0 * a.states, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("make", [random_first_order, random_second_order])
def test_full_basis_projection_is_exact(make):
    sys = make(14, 8)
    Q = np.linalg.qr(np.random.default_rng(1).standard_normal((14, 14)))[0]
    rom = project_system(sys, Q)
    full = simulate(sys, None, 0.01, 1.0)
    red = back_project(simulate(rom.system, None, 0.01, 1.0), Q, sys.D)
    assert np.allclose(red.states, full.states, rtol=1e-8, atol=1e-10 * np.abs(full.states).max())
    assert np.allclose(red.outputs, full.outputs, rtol=1e-8, atol=1e-10 * np.abs(full.outputs).max())


def test_back_projection_identity_and_associativity():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((5, 3))
    sol = TransientSolution(np.arange(5.0), z, z[:, :1], 1.0)
    assert np.array_equal(back_project(sol, np.eye(3)).states, z)
    R, Q = rng.standard_normal((7, 3)), rng.standard_normal((3, 3))
    lhs = back_project(sol, R @ Q).states
    rhs = back_project(TransientSolution(sol.times, z @ Q.T, sol.outputs, 1.0), R).states
    assert np.allclose(lhs, rhs, rtol=1e-12)
    with pytest.raises(IntegrationError):
        back_project(sol, np.eye(4))


def test_integration_errors():
    sing = FirstOrderSystem([[0.0]], [[0.0]], [1.0], [[1.0]])
    with pytest.raises(IntegrationError, match="singular"):
        implicit_euler(sing, None, 0.1, 1.0)
    with pytest.raises(IntegrationError):
        implicit_euler(random_first_order(3, 0), None, -0.1, 1.0)


def test_solution_csv(tmp_path):
    sol = implicit_euler(random_first_order(4, 0), None, 0.1, 0.3)
    sol.to_csv(tmp_path / "y.csv")
    lines = (tmp_path / "y.csv").read_text().splitlines()
    assert lines[0] == "t,y0" and len(lines) == 5
