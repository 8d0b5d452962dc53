"""Finite-volume heat conduction on a regular hexahedral cell lattice.

Cells carry a body id selecting their conductivity and volumetric heat
capacity; negative ids mark void cells that are left out. Neighbouring cells
exchange heat through the series (harmonic) conductance of their half cells,
the bottom face (``z = 0``) loses heat by convection and a unit total heat
load is spread over the heated cells by volume.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .systems import FirstOrderSystem, ModelError


@dataclass(frozen=True)
class LatticeSpec:
    shape: tuple[int, int, int]
    region_mask: np.ndarray  # body id per cell, indexed [ix, iy, iz]
    conductivities: tuple[float, ...]  # W/(m K) per body
    capacities: tuple[float, ...]  # J/(m^3 K) per body
    convection_h: float  # W/(m^2 K) on the bottom face
    heated_cells: np.ndarray  # boolean mask, same shape as region_mask
    cell_size: float = 1e-3
    power: float = 1.0
    output_cells: np.ndarray | None = field(default=None, compare=False)


def build_heat_lattice(nx, ny, nz, region_mask, conductivities, capacity, convection_h,
                       heated_cells, cell_size=1e-3, power=1.0, output_cells=None) -> FirstOrderSystem:
    """Assemble ``E T' = A T + f`` for the lattice.

    ``E`` is the diagonal capacity matrix, ``A`` the negative definite
    conduction-plus-convection operator. States are ordered over active
    cells in C order of ``(ix, iy, iz)``; ``meta["cell_index"]`` maps each
    cell to its state index (``-1`` for voids).
    """
    shape = (int(nx), int(ny), int(nz))
    if min(shape) < 1:
        raise ModelError("lattice dimensions must be >= 1")
    mask = np.asarray(region_mask, dtype=int).reshape(shape)
    k = np.asarray(conductivities, dtype=float)
    c = np.asarray(capacity, dtype=float)
    if np.any(k <= 0) or np.any(c <= 0):
        raise ModelError("conductivities and capacities must be positive")
    if not convection_h > 0 or not cell_size > 0:
        raise ModelError("convection_h and cell_size must be positive")
    if mask.max() >= min(k.size, c.size):
        raise ModelError(f"body id {mask.max()} has no material data")
    heated = np.asarray(heated_cells, dtype=bool).reshape(shape)

    active = mask >= 0
    index = -np.ones(shape, dtype=int)
    index[active] = np.arange(int(active.sum()))
    n = int(active.sum())
    if n == 0:
        raise ModelError("lattice has no active cells")
    if not np.any(heated & active):
        raise ModelError("no active heated cells")

    h = float(cell_size)
    area, vol = h * h, h**3
    kcell = np.where(active, k[np.clip(mask, 0, None)], 0.0)

    rows, cols, vals = [], [], []
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(0, shape[axis] - 1)
        hi[axis] = slice(1, shape[axis])
        lo, hi = tuple(lo), tuple(hi)
        both = active[lo] & active[hi]
        k1, k2 = kcell[lo][both], kcell[hi][both]
        g = area * 2.0 * k1 * k2 / (h * (k1 + k2))
        i, j = index[lo][both], index[hi][both]
        rows += [i, j, i, j]
        cols += [j, i, i, j]
        vals += [g, g, -g, -g]

    bottom = active[:, :, 0]
    conv_idx = index[:, :, 0][bottom]
    rows.append(conv_idx)
    cols.append(conv_idx)
    vals.append(np.full(conv_idx.size, -convection_h * area))

    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n, n)).tocsc()
    A.sum_duplicates()

    ncomp, labels = connected_components(A, directed=False)
    if ncomp > 1:
        raise ModelError(f"lattice is disconnected ({ncomp} components)")
    if conv_idx.size == 0:
        raise ModelError("no active cell on the convective bottom face")

    cap = c[mask[active]] * vol
    E = sp.diags(cap, format="csc")
    f = np.zeros(n)
    hot = index[heated & active]
    f[hot] = power / hot.size

    if output_cells is None:
        D = sp.csr_matrix((np.ones(hot.size) / hot.size, (np.zeros(hot.size, dtype=int), hot)), shape=(1, n))
    else:
        sel = index[np.asarray(output_cells, dtype=bool).reshape(shape) & active]
        D = sp.csr_matrix((np.ones(sel.size), (np.arange(sel.size), sel)), shape=(sel.size, n))
    meta = {"kind": "lattice", "cell_index": index, "body": mask[active]}
    return FirstOrderSystem(E, A, f, D.toarray(), meta)


def power_module_layout(nx=32, ny=32, layers=(3, 3, 2), chips_per_side=2, chip_fraction=0.5):
    """Body-id mask for a layered module: baseplate, substrate, chip layer.

    Bodies: 0 baseplate, 1 chips, 2 substrate, 3 encapsulation around the
    chips. Returns ``(mask, heated)``; the heated cells are the top cell layer
    of every chip.
    """
    nz = sum(layers)
    mask = np.zeros((nx, ny, nz), dtype=int)
    z0, z1 = layers[0], layers[0] + layers[1]
    mask[:, :, z0:z1] = 2
    mask[:, :, z1:] = 3
    chip = np.zeros((nx, ny), dtype=bool)
    px, py = nx // chips_per_side, ny // chips_per_side
    wx, wy = max(1, int(px * chip_fraction)), max(1, int(py * chip_fraction))
    for a in range(chips_per_side):
        for b in range(chips_per_side):
            x0 = a * px + (px - wx) // 2
            y0 = b * py + (py - wy) // 2
            chip[x0:x0 + wx, y0:y0 + wy] = True
    mask[:, :, z1:][chip] = 1
    heated = np.zeros_like(mask, dtype=bool)
    heated[:, :, nz - 1] = chip
    return mask, heated
