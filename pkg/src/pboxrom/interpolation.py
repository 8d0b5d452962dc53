"""Interpolation weights, matrix interpolation and the three strategies.

``classical``
    weights over every training point, one global basis for all of them.
``pbi``
    weights over a selected subset (box corners or kNN), same global basis.
``pbr``
    the subset also defines the basis change: one global set per grid cell.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fom.systems import with_matrices
from .global_basis import BoxCache, GlobalROMSet
from .param_space import HIT_RTOL, ExtrapolationError, as_point, box_corners, knn_select, normalize_minmax

KINDS = ("classical", "pbi", "pbr")
WEIGHT_FNS = ("euclidean", "tpwf")
CLUSTERINGS = ("all", "box", "knn")


class InterpolationError(ValueError):
    """Bad weights or strategy configuration."""


@dataclass(frozen=True)
class WeightVector:
    indices: tuple[int, ...]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        idx = tuple(int(i) for i in self.indices)
        if len(idx) != w.size:
            raise InterpolationError("indices and weights differ in length")
        if len(set(idx)) != len(idx):
            raise InterpolationError("duplicate indices in weight vector")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "weights", w)

    def as_dict(self) -> dict[int, float]:
        return dict(zip(self.indices, self.weights.tolist()))


def _coords(selected) -> np.ndarray:
    if len(selected) and hasattr(selected[0], "coords"):
        return np.array([s.coords for s in selected], dtype=float)
    return np.atleast_2d(np.asarray(selected, dtype=float))


def _prepare(selected, query, indices):
    pts = _coords(selected)
    if pts.size == 0:
        raise InterpolationError("empty selection")
    q = as_point(query).as_array()
    if pts.shape[1] != q.size:
        raise InterpolationError(f"selection has p={pts.shape[1]}, query has p={q.size}")
    idx = tuple(range(len(pts))) if indices is None else tuple(indices)
    span = np.ptp(np.vstack([pts, q]), axis=0)
    return pts, q, idx, span


def euclidean_weights(selected, query, indices=None) -> WeightVector:
    """Normalized inverse Euclidean distance; an exact hit takes all the weight."""
    pts, q, idx, span = _prepare(selected, query, indices)
    d = np.linalg.norm(pts - q, axis=1)
    hits = d <= HIT_RTOL * np.linalg.norm(span)
    if hits.any():
        w = hits / hits.sum()
    else:
        w = 1.0 / d
        w /= w.sum()
    return WeightVector(idx, w)


def tpwf_weights(selected, query, indices=None) -> WeightVector:
    """Tensor-product weights: per-dimension inverse distances, multiplied.

    In every dimension the local weights ``1/|d_il|`` are normalized over the
    selection; points whose coordinate coincides with the query (within
    ``HIT_RTOL`` of the axis range) take that dimension's weight alone. The
    product over dimensions is normalized once more. If the hit indicators
    leave no point with a nonzero product, the distances are floored at the
    hit tolerance instead.
    """
    pts, q, idx, span = _prepare(selected, query, indices)
    d = np.abs(pts - q)
    eps = HIT_RTOL * span
    total = _tpwf_product(d, eps, use_hits=True)
    s = total.sum()
    if s <= 0:
        # scattered selections can hit in different dimensions with different
        # points, which zeroes every product; fall back to floored distances
        total = _tpwf_product(d, eps, use_hits=False)
        s = total.sum()
    return WeightVector(idx, total / s)


def _tpwf_product(d, eps, use_hits):
    total = np.ones(d.shape[0])
    for l in range(d.shape[1]):
        hits = d[:, l] <= eps[l]
        if use_hits and hits.any():
            local = hits.astype(float)
        else:
            local = 1.0 / np.maximum(d[:, l], max(eps[l], np.finfo(float).tiny))
        total *= local / local.sum()
    return total


def compute_weights(weight_fn: str, selected, query, indices=None) -> WeightVector:
    if weight_fn == "tpwf":
        return tpwf_weights(selected, query, indices)
    if weight_fn == "euclidean":
        return euclidean_weights(selected, query, indices)
    raise InterpolationError(f"unknown weight function {weight_fn!r}")


def interpolate_system(gset: GlobalROMSet, wv: WeightVector):
    """Weighted sum of the members' transformed matrices."""
    members = {m.parameter_index: m for m in gset.members}
    missing = [i for i in wv.indices if i not in members]
    if missing:
        raise InterpolationError(f"training points {missing} are not members of the set")
    chosen = [members[i].system for i in wv.indices]
    w = wv.weights

    def mix(name):
        return sum(wi * np.asarray(getattr(s, name)) for wi, s in zip(w, chosen))

    first = chosen[0]
    mass_name, op_name = ("E", "A") if first.order == 1 else ("M", "K")
    return with_matrices(first, mix(mass_name), mix(op_name), mix("f"), mix("D"))


@dataclass(frozen=True)
class Strategy:
    kind: str = "classical"
    weight_fn: str = "tpwf"
    clustering: str = "all"
    k_nn: int = 4
    normalization: str = "none"

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise InterpolationError(f"unknown strategy kind {self.kind!r}")
        if self.weight_fn not in WEIGHT_FNS:
            raise InterpolationError(f"unknown weight function {self.weight_fn!r}")
        if self.clustering not in CLUSTERINGS:
            raise InterpolationError(f"unknown clustering {self.clustering!r}")
        if kind == "classical" and self.clustering != "all":
            raise InterpolationError("classical strategy interpolates over all points")
        if kind in ("pbi", "pbr") and self.clustering == "all":
            raise InterpolationError(f"{kind} needs box or knn clustering")
        if kind == "pbr" and self.clustering != "box":
            raise InterpolationError("pbr needs box clustering on a structured grid")
        if self.normalization not in ("none", "minmax", "zscore"):
            raise InterpolationError(f"unknown normalization {self.normalization!r}")

    @classmethod
    def classical(cls, weight_fn="tpwf", normalization="none"):
        return cls("classical", weight_fn, "all", normalization=normalization)

    @classmethod
    def pbi(cls, weight_fn="tpwf", clustering="box", k_nn=4, normalization="none"):
        return cls("pbi", weight_fn, clustering, k_nn, normalization)

    @classmethod
    def pbr(cls, weight_fn="tpwf"):
        return cls("pbr", weight_fn, "box")


@dataclass(frozen=True)
class Evaluation:
    """Interpolated reduced system plus the basis used to lift its states."""

    system: object
    basis: np.ndarray
    weights: WeightVector
    gset: GlobalROMSet


def _weights_for(strategy, grid, indices, query):
    pts = grid.points[list(indices)]
    if strategy.normalization == "minmax":
        bounds = grid.bounds()
        pts = normalize_minmax(pts, bounds)
        query = normalize_minmax(as_point(query).as_array(), bounds)[0]
    elif strategy.normalization == "zscore":
        mean, std = grid.points.mean(axis=0), grid.points.std(axis=0)
        pts = (pts - mean) / std
        query = (as_point(query).as_array() - mean) / std
    return compute_weights(strategy.weight_fn, pts, query, indices)


def select_points(strategy: Strategy, grid, query) -> tuple[int, ...]:
    if strategy.clustering == "all":
        return tuple(range(grid.k))
    if strategy.clustering == "box":
        return box_corners(grid, query).corner_indices
    return tuple(knn_select(grid.points, query, strategy.k_nn, strategy.normalization))


def evaluate(strategy: Strategy, grid, query, global_set: GlobalROMSet | None = None,
             boxes: BoxCache | None = None) -> Evaluation:
    """Interpolated reduced system at ``query``.

    ``global_set`` (over all training points) serves classical and pBI;
    ``boxes`` serves pBR.
    """
    if not grid.contains(query):
        raise ExtrapolationError(f"query {tuple(as_point(query).coords)} outside training hull")
    if strategy.kind == "pbr":
        if boxes is None:
            raise InterpolationError("pbr evaluation needs a box cache")
        box = box_corners(grid, query)
        gset = boxes.get(box.cell)
        indices = box.corner_indices
    else:
        if global_set is None:
            raise InterpolationError(f"{strategy.kind} evaluation needs the all-points global set")
        gset = global_set
        indices = select_points(strategy, grid, query)
    wv = _weights_for(strategy, grid, indices, query)
    return Evaluation(interpolate_system(gset, wv), gset.R, wv, gset)
