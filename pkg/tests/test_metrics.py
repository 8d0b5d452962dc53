import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pboxrom.integrate import TransientSolution
from pboxrom.metrics import (
    MetricError,
    break_even,
    error_surface,
    median_time,
    msre,
    nrmse,
    timing_report,
)


def field(steps=20, n=6, seed=0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 1, steps + 1)
    X = np.sin(np.outer(t, rng.uniform(1, 5, n)) + 0.3) + 1.5
    return TransientSolution(t, X, X[:, :1], t[1] - t[0])


def test_identity_is_zero():
    ref = field()
    assert nrmse(ref, ref, 3).aggregate == 0.0
    assert msre(ref, ref).aggregate == 0.0
    assert msre(ref, ref, mask=[0, 2]).aggregate == 0.0


def test_uniform_offset():
    ref = field()
    c = 0.01
    series = nrmse(ref, ref.states + c, 2)
    tip = np.abs(ref.states[:, 2])
    expected = c / np.maximum(tip, 1e-3 * tip.max())
    assert np.allclose(series.values, expected, rtol=1e-12)
    assert series.aggregate == pytest.approx(expected.mean(), rel=1e-12)


def test_nrmse_floor_at_zero_crossing():
    t = np.arange(3.0)
    ref = np.array([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0]])
    s = nrmse(TransientSolution(t, ref, ref, 1.0), ref + 1.0, 1)
    assert s.values[0] == pytest.approx(1.0 / (1e-3 * 2.0))


def test_msre_one_percent_scaling():
    ref = field(n=10, seed=2)
    s = msre(ref, 1.01 * ref.states)
    assert np.allclose(s.values, 0.01, rtol=1e-10)
    assert s.aggregate == pytest.approx(0.01, rel=1e-10)


def test_msre_skips_zero_initial_step():
    t = np.arange(3.0)
    ref = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 4.0]])
    s = msre(TransientSolution(t, ref, ref, 1.0), ref * 1.1)
    assert s.values[0] == 0.0
    assert s.aggregate == pytest.approx(0.1)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e6), st.integers(0, 1000))
def test_rescaling_invariance(scale, seed):
    ref = field(seed=seed)
    pred = ref.states * (1 + 0.02 * np.random.default_rng(seed).standard_normal(ref.states.shape))
    a = nrmse(ref.states, pred, 1).aggregate
    b = nrmse(scale * ref.states, scale * pred, 1).aggregate
    assert b == pytest.approx(a, rel=1e-9)
    assert msre(scale * ref.states, scale * pred).aggregate == pytest.approx(msre(ref.states, pred).aggregate, rel=1e-9)


def test_metric_errors():
    ref = field()
    with pytest.raises(MetricError, match="misaligned"):
        nrmse(ref, ref.states[:-1], 0)
    with pytest.raises(MetricError, match="empty"):
        msre(ref, ref, mask=np.zeros(6, dtype=bool))
    other = TransientSolution(ref.times * 2, ref.states, ref.outputs, ref.dt)
    with pytest.raises(MetricError, match="time grids"):
        msre(ref, other)


def test_error_surface_rows(tmp_path):
    pts = [[1.0, 2.0], [3.0, 4.0]]
    table = error_surface(pts, [0.1, 0.2], tmp_path / "s.csv", labels=["E", "rho"])
    assert table.tolist() == [[1.0, 2.0, 0.1], [3.0, 4.0, 0.2]]
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "E,rho,aggregate_error"
    rev = error_surface(pts[::-1], [0.2, 0.1])
    assert sorted(map(tuple, rev)) == sorted(map(tuple, table))


def test_break_even_examples():
    assert break_even(0.0, 1e-4, 1e-3) == 0
    assert math.isinf(break_even(1.0, 1e-3, 1e-3))
    assert math.isinf(break_even(1.0, 2e-3, 1e-3))
    assert break_even(1.0, 1e-4, 1e-3) == 1112


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-6, 1e3), st.floats(1e-7, 1e-2), st.floats(1e-7, 1e-2))
def test_break_even_is_smallest(offline, online, fom):
    n = break_even(offline, online, fom)
    if online >= fom:
        assert math.isinf(n)
    else:
        assert offline + n * online <= n * fom
        assert n == 0 or offline + (n - 1) * online > (n - 1) * fom


def test_timing_report_arithmetic():
    rep = timing_report({"reduction_s": 0.75, "basis_change_s": 0.25}, 1e-4, 1e-3)
    assert rep.offline_total_s == 1.0
    assert rep.speedup == pytest.approx(10.0)
    assert rep.break_even_steps == 1112
    d = rep.as_dict()
    assert d["break_even_steps"] == 1112 and d["break_even_finite"]
    never = timing_report({"reduction_s": 1.0}, 1e-3, 1e-4)
    assert never.as_dict()["break_even_steps"] is None
    with pytest.raises(MetricError):
        timing_report({"x": -1.0}, 1e-4, 1e-3)


def test_median_time_positive():
    assert median_time(lambda: sum(range(1000)), repeats=5) > 0
