"""Error measures, error surfaces and timing / break-even accounting."""
from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

NRMSE_FLOOR = 1e-3
MSRE_FLOOR = 1e-9


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class ErrorSeries:
    times: np.ndarray
    values: np.ndarray  # per-step error, dimensionless
    aggregate: float  # time mean
    domain_mask: np.ndarray | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "error"])
            for t, v in zip(self.times, self.values):
                writer.writerow([repr(float(t)), repr(float(v))])


def _states(sol):
    return np.asarray(sol.states if hasattr(sol, "states") else sol, dtype=float)


def _times(reference, count):
    t = getattr(reference, "times", None)
    return np.arange(count, dtype=float) if t is None else np.asarray(t, dtype=float)


def _check_aligned(ref, pred, reference, predicted):
    if ref.shape != pred.shape:
        raise MetricError(f"misaligned solutions: {ref.shape} vs {pred.shape}")
    ta, tb = getattr(reference, "times", None), getattr(predicted, "times", None)
    if ta is not None and tb is not None and not np.allclose(ta, tb, rtol=1e-12, atol=0.0):
        raise MetricError("reference and prediction use different time grids")


def nrmse(reference, predicted, tip_dof: int) -> ErrorSeries:
    """RMS state error per step over the tip displacement magnitude.

    The normalization ``|u_tip(t)|`` is floored at ``1e-3 max_t |u_tip|`` so
    zero crossings do not blow the ratio up. ``aggregate`` is the time mean.
    """
    ref, pred = _states(reference), _states(predicted)
    _check_aligned(ref, pred, reference, predicted)
    tip = np.abs(ref[:, tip_dof])
    peak = tip.max()
    if peak == 0.0:
        raise MetricError("reference tip response is identically zero")
    norm = np.maximum(tip, NRMSE_FLOOR * peak)
    values = np.sqrt(np.mean((ref - pred) ** 2, axis=1)) / norm
    return ErrorSeries(_times(reference, len(values)), values, float(values.mean()))


def msre(reference, predicted, mask=None, skip_initial=True) -> ErrorSeries:
    """Root mean square of pointwise relative errors per step.

    ``mask`` restricts the DoFs (boolean or index array). Reference values
    are floored at ``1e-9`` of the step's peak magnitude. With a zero initial
    state the first step carries no information and is left out of the
    aggregate when ``skip_initial`` is set.
    """
    ref, pred = _states(reference), _states(predicted)
    _check_aligned(ref, pred, reference, predicted)
    if mask is not None:
        sel = np.asarray(mask)
        if sel.dtype == bool:
            if sel.size != ref.shape[1]:
                raise MetricError("mask length differs from state size")
            sel = np.flatnonzero(sel)
        if sel.size == 0:
            raise MetricError("empty mask")
        ref, pred = ref[:, sel], pred[:, sel]
    else:
        sel = None
    scale = np.abs(ref).max(axis=1, keepdims=True)
    denom = np.maximum(np.abs(ref), MSRE_FLOOR * scale)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(denom > 0, (ref - pred) / np.where(denom > 0, denom, 1.0), 0.0)
    values = np.sqrt(np.mean(rel**2, axis=1))
    body = values[1:] if skip_initial and len(values) > 1 and scale[0, 0] == 0.0 else values
    return ErrorSeries(_times(reference, len(values)), values, float(body.mean()), sel)


def error_surface(points, errors, path=None, labels=None) -> np.ndarray:
    """Rows ``(x_1..x_p, aggregate_error)``; optionally written as CSV."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    err = np.asarray(errors, dtype=float).reshape(-1, 1)
    if len(pts) != len(err):
        raise MetricError("points and errors differ in length")
    table = np.hstack([pts, err])
    if path is not None:
        names = list(labels) if labels else [f"x_{j + 1}" for j in range(pts.shape[1])]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([*names, "aggregate_error"])
            for row in table:
                writer.writerow([repr(float(v)) for v in row])
    return table


INFINITE = math.inf


@dataclass(frozen=True)
class TimingReport:
    offline: dict  # stage -> seconds
    online_per_step_s: float
    fom_per_step_s: float
    speedup: float
    break_even_steps: float  # int, or math.inf when the ROM never pays off
    extra: dict = field(default_factory=dict)

    @property
    def offline_total_s(self) -> float:
        return float(sum(self.offline.values()))

    def as_dict(self) -> dict:
        be = self.break_even_steps
        return {
            "offline": dict(self.offline),
            "offline_total_s": self.offline_total_s,
            "online_per_step_s": self.online_per_step_s,
            "fom_per_step_s": self.fom_per_step_s,
            "speedup": self.speedup,
            "break_even_steps": None if math.isinf(be) else int(be),
            "break_even_finite": not math.isinf(be),
            **self.extra,
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["stage", "seconds"])
            for stage, sec in self.offline.items():
                writer.writerow([stage, repr(float(sec))])
            writer.writerow(["online_per_step", repr(self.online_per_step_s)])
            writer.writerow(["fom_per_step", repr(self.fom_per_step_s)])


def break_even(offline: float, online_step: float, fom_step: float) -> float:
    """Smallest N with ``offline + N online <= N fom``; ``inf`` if none exists."""
    if offline <= 0.0:
        return 0
    gain = fom_step - online_step
    if gain <= 0.0:
        return INFINITE
    n = math.ceil(offline / gain)
    # guard the ceiling against rounding in the division
    while n > 0 and offline + (n - 1) * online_step <= (n - 1) * fom_step:
        n -= 1
    while offline + n * online_step > n * fom_step:
        n += 1
    return n


def timing_report(offline: dict, online_per_step_s: float, fom_per_step_s: float, **extra) -> TimingReport:
    values = [*offline.values(), online_per_step_s, fom_per_step_s]
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise MetricError("durations must be finite and non-negative")
    if online_per_step_s <= 0 or fom_per_step_s <= 0:
        raise MetricError("per-step durations must be positive")
    total = float(sum(offline.values()))
    return TimingReport(dict(offline), float(online_per_step_s), float(fom_per_step_s),
                        fom_per_step_s / online_per_step_s,
                        break_even(total, online_per_step_s, fom_per_step_s), extra)


def median_time(fn, repeats: int = 5) -> float:
    """Median wall time of ``fn()`` over ``repeats`` runs (monotonic clock)."""
    samples = []
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return statistics.median(samples)
