"""Scalar time shapes ``g(t)`` multiplying the spatial load vector."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

KINDS = ("step", "ramp", "sine")


@dataclass(frozen=True)
class LoadSignal:
    kind: str = "step"
    amplitude: float = 1.0
    frequency: float = 0.0
    t_rise: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown load kind {self.kind!r}; expected one of {KINDS}")
        if not math.isfinite(self.amplitude):
            raise ValueError("load amplitude must be finite")
        if self.kind == "ramp" and not self.t_rise > 0:
            raise ValueError("ramp needs t_rise > 0")

    def scaled(self, factor: float) -> "LoadSignal":
        return LoadSignal(self.kind, self.amplitude * factor, self.frequency, self.t_rise)

    def __call__(self, t):
        return evaluate_load(self, t)


def evaluate_load(signal: LoadSignal, t):
    """Value of ``g(t)``; the step is already on at ``t = 0``."""
    t = np.asarray(t, dtype=float)
    if signal.kind == "step":
        out = np.full_like(t, signal.amplitude)
    elif signal.kind == "ramp":
        out = signal.amplitude * np.minimum(t / signal.t_rise, 1.0)
    else:
        out = signal.amplitude * np.sin(2.0 * np.pi * signal.frequency * t)
    return float(out) if out.ndim == 0 else out


def export_load_csv(signal: LoadSignal, times, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "g"])
        for t, g in zip(times, evaluate_load(signal, np.asarray(times))):
            writer.writerow([repr(float(t)), repr(float(g))])
