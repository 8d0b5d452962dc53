"""Clamped-free 3D Timoshenko beam.

Two-node elements along the x axis with six DoFs per node
(ux, uy, uz, rx, ry, rz). Element stiffness and consistent mass use the
shear-deformable (interdependent interpolation) formulation, so a
cantilever under a tip load reproduces the bending-plus-shear deflection
exactly at the nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from .systems import ModelError, SecondOrderSystem

DOFS_PER_NODE = 6
UX, UY, UZ, RX, RY, RZ = range(6)


@dataclass(frozen=True)
class BeamSpec:
    length: float = 1.0
    thickness: float = 0.01
    height: float = 0.01
    density: float = 7600.0
    youngs_modulus: float = 210e9
    poisson: float = 0.3
    element_count: int = 100
    load_dof: int = UZ
    output_dof: int = UZ

    def __post_init__(self):
        for name in ("length", "thickness", "height", "density", "youngs_modulus"):
            if not getattr(self, name) > 0:
                raise ModelError(f"{name} must be positive")
        if not 0 < self.poisson < 0.5:
            raise ModelError("poisson must lie in (0, 0.5)")
        if int(self.element_count) < 1:
            raise ModelError("element_count must be >= 1")
        if self.load_dof not in range(6) or self.output_dof not in range(6):
            raise ModelError("load_dof/output_dof must be a nodal DoF in 0..5")

    def with_params(self, **kw) -> "BeamSpec":
        return replace(self, **kw)

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson))

    @property
    def shear_factor(self) -> float:
        nu = self.poisson
        return 10.0 * (1.0 + nu) / (12.0 + 11.0 * nu)

    @property
    def section(self) -> dict:
        t, h = self.thickness, self.height
        area = t * h
        # bending in the x-y plane (uy, rz) uses Iz, in x-z (uz, ry) uses Iy
        Iz = h * t**3 / 12.0
        Iy = t * h**3 / 12.0
        a, b = max(t, h), min(t, h)
        J = a * b**3 * (1.0 / 3.0 - 0.21 * (b / a) * (1.0 - b**4 / (12.0 * a**4)))
        return {"A": area, "Iy": Iy, "Iz": Iz, "J": J, "Ip": Iy + Iz}


def _plane_stiffness(EI, phi, L):
    c = EI / ((1.0 + phi) * L**3)
    return c * np.array([
        [12.0, 6 * L, -12.0, 6 * L],
        [6 * L, (4 + phi) * L**2, -6 * L, (2 - phi) * L**2],
        [-12.0, -6 * L, 12.0, -6 * L],
        [6 * L, (2 - phi) * L**2, -6 * L, (4 + phi) * L**2],
    ])


def _plane_mass(rhoA, rhoI, phi, L):
    d = (1.0 + phi) ** 2
    m11 = 13 / 35 + 7 * phi / 10 + phi**2 / 3
    m12 = (11 / 210 + 11 * phi / 120 + phi**2 / 24) * L
    m13 = 9 / 70 + 3 * phi / 10 + phi**2 / 6
    m14 = -(13 / 420 + 3 * phi / 40 + phi**2 / 24) * L
    m22 = (1 / 105 + phi / 60 + phi**2 / 120) * L**2
    m24 = -(1 / 140 + phi / 60 + phi**2 / 120) * L**2
    trans = np.array([
        [m11, m12, m13, m14],
        [m12, m22, -m14, m24],
        [m13, -m14, m11, -m12],
        [m14, m24, -m12, m22],
    ]) * (rhoA * L / d)
    r12 = (1 / 10 - phi / 2) * L
    r22 = (2 / 15 + phi / 6 + phi**2 / 3) * L**2
    r24 = (-1 / 30 - phi / 6 + phi**2 / 6) * L**2
    rot = np.array([
        [6 / 5, r12, -6 / 5, r12],
        [r12, r22, -r12, r24],
        [-6 / 5, -r12, 6 / 5, -r12],
        [r12, r24, -r12, r22],
    ]) * (rhoI / (d * L))
    return trans + rot


def element_matrices(spec: BeamSpec, L: float) -> tuple[np.ndarray, np.ndarray]:
    """12x12 stiffness (positive definite convention) and consistent mass."""
    E, G, rho = spec.youngs_modulus, spec.shear_modulus, spec.density
    s = spec.section
    kGA = spec.shear_factor * G * s["A"]
    phi_y = 12.0 * E * s["Iz"] / (kGA * L**2)
    phi_z = 12.0 * E * s["Iy"] / (kGA * L**2)

    ke = np.zeros((12, 12))
    me = np.zeros((12, 12))
    bar = np.array([[1.0, -1.0], [-1.0, 1.0]])
    lumpish = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0

    ax = [UX, 6 + UX]
    ke[np.ix_(ax, ax)] += E * s["A"] / L * bar
    me[np.ix_(ax, ax)] += rho * s["A"] * L * lumpish
    tor = [RX, 6 + RX]
    ke[np.ix_(tor, tor)] += G * s["J"] / L * bar
    me[np.ix_(tor, tor)] += rho * s["Ip"] * L * lumpish

    xy = [UY, RZ, 6 + UY, 6 + RZ]
    ke[np.ix_(xy, xy)] += _plane_stiffness(E * s["Iz"], phi_y, L)
    me[np.ix_(xy, xy)] += _plane_mass(rho * s["A"], rho * s["Iz"], phi_y, L)
    # x-z plane: ry = -dw/dx, flip the rotation sign of the planar matrices
    xz = [UZ, RY, 6 + UZ, 6 + RY]
    flip = np.diag([1.0, -1.0, 1.0, -1.0])
    ke[np.ix_(xz, xz)] += flip @ _plane_stiffness(E * s["Iy"], phi_z, L) @ flip
    me[np.ix_(xz, xz)] += flip @ _plane_mass(rho * s["A"], rho * s["Iy"], phi_z, L) @ flip
    return ke, me


def assemble_beam(spec: BeamSpec) -> tuple[sp.csc_matrix, sp.csc_matrix]:
    """Free-free stiffness and mass, ``6 (element_count + 1)`` DoFs."""
    ne = int(spec.element_count)
    L = spec.length / ne
    ke, me = element_matrices(spec, L)
    ndof = DOFS_PER_NODE * (ne + 1)
    rows, cols, kv, mv = [], [], [], []
    for e in range(ne):
        dofs = np.arange(6 * e, 6 * e + 12)
        r, c = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        kv.append(ke.ravel())
        mv.append(me.ravel())
    rows, cols = np.concatenate(rows), np.concatenate(cols)
    K = sp.coo_matrix((np.concatenate(kv), (rows, cols)), shape=(ndof, ndof)).tocsc()
    M = sp.coo_matrix((np.concatenate(mv), (rows, cols)), shape=(ndof, ndof)).tocsc()
    return K, M


def build_timoshenko_beam(spec: BeamSpec) -> SecondOrderSystem:
    """Cantilever clamped at x = 0, unit tip force, tip displacement output.

    The clamped node's DoFs are removed, leaving ``n = 6 * element_count``.
    ``K`` is returned with the ``M u'' = K u + f`` sign convention.
    """
    K_free, M_free = assemble_beam(spec)
    keep = np.arange(DOFS_PER_NODE, K_free.shape[0])
    K = K_free[keep][:, keep].tocsc()
    M = M_free[keep][:, keep].tocsc()
    n = keep.size
    tip = n - DOFS_PER_NODE
    f = np.zeros(n)
    f[tip + spec.load_dof] = 1.0
    D = np.zeros((1, n))
    D[0, tip + spec.output_dof] = 1.0
    meta = {"kind": "beam", "tip_dof": int(tip + spec.output_dof)}
    return SecondOrderSystem(M, -K, f, D, meta)


def static_tip_deflection(spec: BeamSpec, force: float = 1.0) -> float:
    """Closed-form cantilever tip deflection, bending plus shear."""
    s = spec.section
    I = s["Iy"] if spec.load_dof == UZ else s["Iz"]
    bending = force * spec.length**3 / (3.0 * spec.youngs_modulus * I)
    shear = force * spec.length / (spec.shear_factor * spec.shear_modulus * s["A"])
    return bending + shear
