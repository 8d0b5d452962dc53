import json

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from pboxrom.fom.beam import BeamSpec, build_timoshenko_beam
from pboxrom.fom.lattice import build_heat_lattice, power_module_layout
from pboxrom.fom.loads import LoadSignal, evaluate_load
from pboxrom.fom.mmio import SystemIOError, export_system, import_system, read_mtx
from pboxrom.fom.systems import FirstOrderSystem, ModelError


def cantilever_oracle(E, nu, L, t, h, F=1.0):
    """Tip deflection under a transverse tip load: bending plus shear."""
    Iy = t * h**3 / 12.0
    G = E / (2 * (1 + nu))
    kappa = 10 * (1 + nu) / (12 + 11 * nu)
    return F * L**3 / (3 * E * Iy) + F * L / (kappa * G * t * h)


# ---------------------------------------------------------------- beam


def test_beam_dimensions_and_definiteness(beam600):
    sys = beam600
    assert sys.n == 600 and sys.m == 1
    M, K = sys.M.toarray(), -sys.K.toarray()
    assert np.allclose(M, M.T, rtol=0, atol=1e-14 * np.abs(M).max())
    assert np.allclose(K, K.T, rtol=0, atol=1e-14 * np.abs(K).max())
    np.linalg.cholesky(M)
    np.linalg.cholesky(K)
    assert sys.f.sum() == 1.0 and sys.f[sys.n - 6 + 2] == 1.0
    assert sys.D[0, sys.meta["tip_dof"]] == 1.0


def test_beam_single_element():
    sys = build_timoshenko_beam(BeamSpec(element_count=1))
    assert sys.n == 6


def test_beam_scaling_in_parameters():
    base = BeamSpec(element_count=8)
    s1 = build_timoshenko_beam(base)
    s2 = build_timoshenko_beam(base.with_params(youngs_modulus=2 * base.youngs_modulus))
    s3 = build_timoshenko_beam(base.with_params(density=2 * base.density))
    assert np.allclose(s2.K.toarray(), 2 * s1.K.toarray(), rtol=1e-14, atol=0)
    assert np.allclose(s3.M.toarray(), 2 * s1.M.toarray(), rtol=1e-14, atol=0)
    assert np.array_equal(s2.M.toarray(), s1.M.toarray())


def test_beam_axial_translation_loads_only_the_clamp_neighbour(beam600):
    K = -beam600.K
    u = np.zeros(beam600.n)
    u[0::6] = 1.0
    res = K @ u
    # interior nodes are force-free; only the node next to the clamp reacts
    interior = np.abs(res[6:]).max()
    assert interior <= 1e-8 * spla.norm(K)


@pytest.mark.parametrize("ne", [1, 10, 100])
def test_beam_static_tip_deflection(ne):
    spec = BeamSpec(element_count=ne)
    sys = build_timoshenko_beam(spec)
    u = spla.spsolve(-sys.K.tocsc(), sys.f)
    expected = cantilever_oracle(spec.youngs_modulus, spec.poisson, spec.length, spec.thickness, spec.height)
    assert (sys.D @ u)[0] == pytest.approx(expected, rel=1e-2)


@pytest.mark.parametrize("bad", [dict(youngs_modulus=-1.0), dict(density=0.0), dict(poisson=0.6),
                                 dict(element_count=0)])
def test_beam_rejects_invalid(bad):
    with pytest.raises(ModelError):
        BeamSpec(**bad)


# ---------------------------------------------------------------- lattice


def rod(k=2.0, c=3.0, hconv=5.0, size=0.1):
    mask = np.zeros((2, 1, 1), dtype=int)
    heated = np.zeros((2, 1, 1), dtype=bool)
    heated[0] = True
    return build_heat_lattice(2, 1, 1, mask, [k], [c], hconv, heated, cell_size=size)


def test_single_cell_lumped_model():
    sys = build_heat_lattice(1, 1, 1, [[[0]]], [10.0], [2.0], 7.0, [[[True]]], cell_size=0.5)
    assert sys.E.toarray()[0, 0] == pytest.approx(2.0 * 0.125)
    assert sys.A.toarray()[0, 0] == pytest.approx(-7.0 * 0.25)
    assert sys.f[0] == 1.0


def test_two_cell_rod_stencil():
    k, c, hc, a = 2.0, 3.0, 5.0, 0.1
    sys = rod(k, c, hc, a)
    G, H = k * a, hc * a * a
    assert np.allclose(sys.A.toarray(), [[-G - H, G], [G, -G - H]], rtol=1e-14)
    assert np.allclose(sys.E.toarray(), c * a**3 * np.eye(2))
    assert np.array_equal(sys.f, [1.0, 0.0])


def test_harmonic_mean_interface():
    mask = np.array([0, 1]).reshape(2, 1, 1)
    sys = build_heat_lattice(2, 1, 1, mask, [1.0, 3.0], [1.0, 1.0], 1.0, mask == 0, cell_size=1.0)
    G = 2 * 1.0 * 3.0 / (1.0 + 3.0)
    assert sys.A.toarray()[0, 1] == pytest.approx(G)


def test_module_row_sums_and_definiteness():
    mask, heated = power_module_layout(8, 8, (2, 2, 1), chips_per_side=2)
    sys = build_heat_lattice(8, 8, 5, mask, [390, 150, 150, 0.5], [3e6, 1.6e6, 2.5e6, 1.5e6], 5000,
                             heated)
    A = sys.A.toarray()
    rows = A.sum(axis=1)
    idx = sys.meta["cell_index"]
    bottom = np.zeros(sys.n, dtype=bool)
    bottom[idx[:, :, 0].ravel()] = True
    assert np.all(rows <= 1e-12 * np.abs(A).max())
    assert np.allclose(rows[~bottom], 0.0, atol=1e-12 * np.abs(A).max())
    assert np.all(rows[bottom] < 0)
    assert np.allclose(A, A.T)
    assert np.all(np.linalg.eigvalsh(A) < 0)
    assert sys.f.sum() == pytest.approx(1.0)
    # steady state: heat in equals convective heat out
    u = np.linalg.solve(A, -sys.f)
    assert -(rows[bottom] @ u[bottom]) == pytest.approx(1.0, rel=1e-10)


def test_lattice_errors():
    heated = np.ones((2, 1, 1), dtype=bool)
    with pytest.raises(ModelError, match="positive"):
        build_heat_lattice(2, 1, 1, np.zeros((2, 1, 1), int), [-1.0], [1.0], 1.0, heated)
    mask = np.array([0, -1, 0]).reshape(3, 1, 1)
    with pytest.raises(ModelError, match="disconnected"):
        build_heat_lattice(3, 1, 1, mask, [1.0], [1.0], 1.0, np.ones((3, 1, 1), bool))


def test_module_layout_bodies():
    mask, heated = power_module_layout(32, 32, (3, 3, 2), chips_per_side=2, chip_fraction=0.5)
    assert mask.shape == (32, 32, 8)
    assert set(np.unique(mask)) == {0, 1, 2, 3}
    assert heated.sum() == 4 * 8 * 8
    assert np.all(mask[heated] == 1)


# ---------------------------------------------------------------- loads


def test_load_shapes():
    assert evaluate_load(LoadSignal("step"), 0.0) == 1.0
    assert evaluate_load(LoadSignal("ramp", 2.0, t_rise=1e-3), 5e-4) == pytest.approx(1.0)
    assert evaluate_load(LoadSignal("ramp", 2.0, t_rise=1e-3), 1.0) == 2.0
    assert evaluate_load(LoadSignal("sine", 1.0, frequency=100.0), 2.5e-3) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        LoadSignal("square")
    with pytest.raises(ValueError):
        LoadSignal("step", amplitude=np.nan)


# ---------------------------------------------------------------- Matrix Market


def test_export_import_roundtrip_bit_identical(tmp_path):
    sys = build_timoshenko_beam(BeamSpec(element_count=5))
    export_system(sys, tmp_path / "beam", ["E", "rho"], [210e9, 7600.0])
    back = import_system(tmp_path / "beam")
    assert back.order == 2
    assert (back.M != sys.M).nnz == 0 and (back.K != sys.K).nnz == 0
    assert np.array_equal(back.f, sys.f) and np.array_equal(back.D, sys.D)
    manifest = json.loads((tmp_path / "beam" / "manifest.json").read_text())
    assert manifest["param_values"] == [210e9, 7600.0]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1e300, 1e300, allow_nan=False, allow_infinity=False).filter(lambda v: v != 0),
                min_size=4, max_size=4))
def test_roundtrip_arbitrary_values(tmp_path_factory, vals):
    d = tmp_path_factory.mktemp("rt")
    E = sp.diags([1.0, 2.0])
    A = sp.csc_matrix(np.array(vals).reshape(2, 2))
    sys = FirstOrderSystem(E, A, np.array([vals[0], 0.0]), np.array([[1.0, vals[3]]]))
    export_system(sys, d)
    back = import_system(d)
    assert np.array_equal(back.A.toarray(), A.toarray())
    assert np.array_equal(back.D, sys.D)


def test_import_errors(tmp_path):
    sys = rod()
    export_system(sys, tmp_path / "s")
    manifest_path = tmp_path / "s" / "manifest.json"
    manifest = json.loads(manifest_path.read_text())

    broken = dict(manifest, roles={k: v for k, v in manifest["roles"].items() if k != "f"})
    manifest_path.write_text(json.dumps(broken))
    with pytest.raises(SystemIOError, match="load vector required"):
        import_system(tmp_path / "s")

    broken = dict(manifest, roles={k: v for k, v in manifest["roles"].items() if k != "D"})
    manifest_path.write_text(json.dumps(broken))
    with pytest.raises(SystemIOError, match="output matrix D required"):
        import_system(tmp_path / "s")

    manifest_path.write_text(json.dumps(dict(manifest, n=3)))
    with pytest.raises(SystemIOError, match="dimension mismatch"):
        import_system(tmp_path / "s")


def test_read_mtx_rejects_bad_files(tmp_path):
    herm = tmp_path / "h.mtx"
    herm.write_text("%%MatrixMarket matrix coordinate real skew-symmetric\n2 2 1\n2 1 1.0\n")
    with pytest.raises(SystemIOError, match="symmetry"):
        read_mtx(herm)
    bad = tmp_path / "b.mtx"
    bad.write_text("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n2 2 x\n")
    with pytest.raises(SystemIOError, match="(?i)line"):
        read_mtx(bad)
    sym = tmp_path / "s.mtx"
    sym.write_text("%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n2 1 3.0\n")
    assert read_mtx(sym).toarray().tolist() == [[1.0, 3.0], [3.0, 0.0]]
