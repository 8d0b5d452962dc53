"""Parameter points, structured training grids and point-selection rules.

Two selection rules are provided: box clustering, which picks the training
points bracketing a query in every dimension of a structured grid, and a
k-nearest-neighbour baseline whose result depends on how the axes are
scaled.
"""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

#: Relative tolerance (times the axis range) for treating a coordinate as
#: sitting exactly on a grid value.
HIT_RTOL = 1e-12


class ParameterError(ValueError):
    """Invalid parameter-space input (bad axis, degenerate bounds, ...)."""


class ExtrapolationError(ParameterError):
    """A query lies outside the training hull."""


@dataclass(frozen=True)
class ParameterPoint:
    coords: tuple[float, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if len(coords) < 1:
            raise ParameterError("a parameter point needs at least one coordinate")
        if not all(np.isfinite(coords)):
            raise ParameterError(f"non-finite coordinate in {coords}")
        object.__setattr__(self, "coords", coords)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(coords):
                raise ParameterError("one label per coordinate required")
            object.__setattr__(self, "labels", labels)

    @property
    def p(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.coords, dtype=float)


def as_point(value, labels=None) -> ParameterPoint:
    if isinstance(value, ParameterPoint):
        return value
    return ParameterPoint(tuple(np.atleast_1d(np.asarray(value, dtype=float))), labels)


@dataclass(frozen=True)
class TrainingGrid:
    """Cartesian-product grid with row-major (last axis fastest) indexing."""

    axes: tuple[tuple[float, ...], ...]
    labels: tuple[str, ...] | None = None
    _points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        axes = []
        for l, axis in enumerate(self.axes):
            values = np.asarray(axis, dtype=float).ravel()
            if values.size < 2:
                raise ParameterError(f"axis {l} needs at least two values")
            if not np.all(np.isfinite(values)):
                raise ParameterError(f"axis {l} has non-finite values")
            if np.any(np.diff(values) <= 0):
                raise ParameterError(f"axis {l} is not strictly increasing")
            axes.append(tuple(float(v) for v in values))
        if not axes:
            raise ParameterError("grid needs at least one axis")
        object.__setattr__(self, "axes", tuple(axes))
        if self.labels is not None:
            object.__setattr__(self, "labels", tuple(self.labels))
        mesh = np.meshgrid(*[np.asarray(a) for a in axes], indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
        pts.setflags(write=False)
        object.__setattr__(self, "_points", pts)

    @property
    def p(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def k(self) -> int:
        return int(np.prod(self.shape))

    @property
    def points(self) -> np.ndarray:
        """``(k, p)`` array of training coordinates."""
        return self._points

    def point(self, index: int) -> ParameterPoint:
        return ParameterPoint(tuple(self._points[index]), self.labels)

    def index_of(self, multi_index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.shape))

    def bounds(self) -> np.ndarray:
        return np.array([[a[0], a[-1]] for a in self.axes])

    def contains(self, query) -> bool:
        q = as_point(query).as_array()
        b = self.bounds()
        tol = HIT_RTOL * (b[:, 1] - b[:, 0])
        return bool(np.all(q >= b[:, 0] - tol) and np.all(q <= b[:, 1] + tol))

    def cells(self) -> list[tuple[int, ...]]:
        """Lower multi-index of every grid cell, row-major."""
        return list(itertools.product(*[range(n - 1) for n in self.shape]))

    def cell_corners(self, cell: Sequence[int]) -> tuple[int, ...]:
        offsets = itertools.product(*[(0, 1)] * self.p)
        return tuple(self.index_of([c + o for c, o in zip(cell, off)]) for off in offsets)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            names = list(self.labels) if self.labels else [f"x_{l + 1}" for l in range(self.p)]
            writer.writerow(["index", *names])
            for i, row in enumerate(self._points):
                writer.writerow([i, *[repr(float(v)) for v in row]])


def build_grid(axes, labels=None) -> TrainingGrid:
    return TrainingGrid(tuple(tuple(a) for a in axes), labels)


@dataclass(frozen=True)
class ParameterBox:
    corner_indices: tuple[int, ...]
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    cell: tuple[int, ...]

    @property
    def degenerate_dims(self) -> tuple[int, ...]:
        return tuple(l for l, (a, b) in enumerate(zip(self.lo, self.hi)) if a == b)


def _bracket(axis: np.ndarray, x: float) -> tuple[int, int]:
    span = axis[-1] - axis[0]
    tol = HIT_RTOL * span
    hit = np.flatnonzero(np.abs(axis - x) <= tol)
    if hit.size:
        return int(hit[0]), int(hit[0])
    hi = int(np.searchsorted(axis, x))
    return hi - 1, hi


def box_corners(grid: TrainingGrid, query) -> ParameterBox:
    """Select the training points that enclose ``query`` in a box.

    Per dimension the nearest grid value below and above the query are
    taken; their Cartesian product gives the corners. A coordinate sitting on
    a grid value collapses that dimension, so the box has ``2**d`` corners
    where ``d`` counts the dimensions in which the query is strictly inside
    a grid interval.

    Raises
    ------
    ExtrapolationError
        If the query lies outside the grid hull.
    """
    q = as_point(query).as_array()
    if q.size != grid.p:
        raise ParameterError(f"query has {q.size} coordinates, grid has {grid.p}")
    if not grid.contains(q):
        raise ExtrapolationError(f"query {tuple(q)} outside training hull {grid.bounds().tolist()}")
    brackets = [_bracket(np.asarray(ax), x) for ax, x in zip(grid.axes, q)]
    choices = [sorted({lo, hi}) for lo, hi in brackets]
    corners = tuple(grid.index_of(mi) for mi in itertools.product(*choices))
    lo = tuple(grid.axes[l][b[0]] for l, b in enumerate(brackets))
    hi = tuple(grid.axes[l][b[1]] for l, b in enumerate(brackets))
    cell = tuple(min(b[0], len(ax) - 2) for b, ax in zip(brackets, grid.axes))
    return ParameterBox(corners, lo, hi, cell)


def _check_bounds(bounds) -> np.ndarray:
    b = np.asarray(bounds, dtype=float)
    if b.ndim != 2 or b.shape[1] != 2:
        raise ParameterError("bounds must be a sequence of [lo, hi] pairs")
    if np.any(b[:, 1] <= b[:, 0]) or not np.all(np.isfinite(b)):
        raise ParameterError(f"degenerate bounds {b.tolist()}")
    return b


def normalize_minmax(points, bounds) -> np.ndarray:
    b = _check_bounds(bounds)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return (pts - b[:, 0]) / (b[:, 1] - b[:, 0])


def denormalize_minmax(unit, bounds) -> np.ndarray:
    b = _check_bounds(bounds)
    return b[:, 0] + np.atleast_2d(unit) * (b[:, 1] - b[:, 0])


def _coords(points) -> np.ndarray:
    if isinstance(points, TrainingGrid):
        return points.points
    if len(points) and isinstance(points[0], ParameterPoint):
        return np.array([pt.coords for pt in points], dtype=float)
    return np.atleast_2d(np.asarray(points, dtype=float))


def knn_select(points, query, k_nn: int, normalization: str = "none") -> list[int]:
    """Indices of the ``k_nn`` nearest points; ties go to the lower index.

    ``normalization`` is applied to points and query alike before measuring
    Euclidean distance: ``"none"``, ``"minmax"`` (bounds taken from the point
    set) or ``"zscore"`` (population mean and standard deviation).
    """
    pts = _coords(points)
    if pts.size == 0:
        raise ParameterError("empty point set")
    if not 1 <= k_nn <= len(pts):
        raise ParameterError(f"k_nn={k_nn} not in [1, {len(pts)}]")
    q = as_point(query).as_array()
    if normalization == "minmax":
        bounds = np.stack([pts.min(axis=0), pts.max(axis=0)], axis=1)
        pts, q = normalize_minmax(pts, bounds), normalize_minmax(q, bounds)[0]
    elif normalization == "zscore":
        mean, std = pts.mean(axis=0), pts.std(axis=0)
        if np.any(std == 0):
            raise ParameterError("zscore normalization needs spread in every dimension")
        pts, q = (pts - mean) / std, (q - mean) / std
    elif normalization != "none":
        raise ParameterError(f"unknown normalization {normalization!r}")
    dist = np.linalg.norm(pts - q, axis=1)
    order = np.lexsort((np.arange(len(dist)), dist))
    return [int(i) for i in order[:k_nn]]


def sample_lhs(bounds, count: int, seed: int, labels=None) -> list[ParameterPoint]:
    """Latin hypercube sample, one point per equal-width stratum and dimension.

    Each point sits at its stratum midpoint plus a uniform jitter of at most
    a quarter stratum width, so neighbouring samples never touch.
    """
    b = _check_bounds(bounds)
    if count < 1:
        raise ParameterError("count must be >= 1")
    rng = np.random.default_rng(seed)
    p = len(b)
    unit = np.empty((count, p))
    for l in range(p):
        strata = rng.permutation(count)
        jitter = rng.uniform(-0.25, 0.25, size=count)
        unit[:, l] = (strata + 0.5 + jitter) / count
    coords = denormalize_minmax(unit, b)
    return [ParameterPoint(tuple(row), labels) for row in coords]
