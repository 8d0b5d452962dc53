"""Offline training, online evaluation, error surfaces and benchmarks.

Artifacts are plain directories::

    manifest.json          fingerprint, normalized config, grid, contents
    timings.json           wall-clock stage durations (not deterministic)
    grid.csv
    roms/point_000/        local ROM matrices, V.mtx, manifest.json
    global/                R.mtx, manifest.json, point_000/ ... members
    boxes/cell_0_0/        one global set per grid cell (pBR)
"""
from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig
from .fom.beam import BeamSpec, build_timoshenko_beam
from .fom.lattice import build_heat_lattice, power_module_layout
from .fom.mmio import export_system, import_system, read_manifest, read_mtx, write_mtx
from .fom.systems import dense, with_matrices
from .global_basis import BoxCache, GlobalMember, GlobalROMSet, build_global_set
from .integrate import back_project, simulate
from .interpolation import evaluate
from .krylov import LocalROM, ProjectionBasis, reduce_training_set
from .metrics import error_surface, median_time, msre, nrmse, timing_report
from .param_space import TrainingGrid, as_point, build_grid, sample_lhs

log = logging.getLogger(__name__)

ARTIFACT_VERSION = 1


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it for diagnostics."""

    def __init__(self, stage, exc):
        super().__init__(f"stage={stage}: {exc}")
        self.stage = stage
        self.cause = exc


# ---------------------------------------------------------------- FOM factory


class FOMFactory:
    """Builds the full-order model for a parameter point from the config binding."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.kind = config.fom["kind"]
        self.binds = [a.binds for a in config.axes]
        if self.kind == "lattice":
            opts = config.fom["lattice"]
            self._mask, self._heated = power_module_layout(
                opts["nx"], opts["ny"], tuple(opts["layers"]), opts["chips_per_side"], opts["chip_fraction"]
            )
        if self.kind == "import":
            self._imports = []
            for path in config.fom["manifests"]:
                manifest, _ = read_manifest(path)
                self._imports.append((np.asarray(manifest.get("param_values", []), dtype=float), path))

    def __call__(self, params):
        params = np.asarray(params, dtype=float)
        if params.size != len(self.binds):
            raise ConfigError(f"expected {len(self.binds)} parameters, got {params.size}")
        if self.kind == "beam":
            spec = BeamSpec(**self.config.fom["beam"]).with_params(**dict(zip(self.binds, params.tolist())))
            return build_timoshenko_beam(spec)
        if self.kind == "lattice":
            return self._lattice(params)
        for values, path in self._imports:
            if values.shape == params.shape and np.allclose(values, params, rtol=1e-9, atol=0.0):
                return import_system(path)
        raise ConfigError(f"no imported system for parameters {tuple(params)}")

    def _lattice(self, params):
        opts = self.config.fom["lattice"]
        k = list(map(float, opts["conductivities"]))
        c = list(map(float, opts["capacities"]))
        h = float(opts["convection_h"])
        for name, value in zip(self.binds, params):
            if name == "convection_h":
                h = float(value)
            else:
                which, idx = name.split("[")
                (k if which == "conductivity" else c)[int(idx[:-1])] = float(value)
        nx, ny, nz = self._mask.shape
        return build_heat_lattice(nx, ny, nz, self._mask, k, c, h, self._heated,
                                  cell_size=float(opts["cell_size"]), power=float(opts["power"]))


def training_grid(config: PipelineConfig) -> TrainingGrid:
    return build_grid([a.values for a in config.axes], config.labels)


def validation_points(config: PipelineConfig, grid: TrainingGrid | None = None) -> np.ndarray:
    """Validation points.

    ``lattice`` places ``per_axis`` points at the centres of equal slices of
    each axis, so the hull corners are never validation points.
    """
    grid = grid or training_grid(config)
    val = config.validation
    bounds = grid.bounds()
    if val["kind"] == "lattice":
        frac = (np.arange(val["per_axis"]) + 0.5) / val["per_axis"]
        axes = [lo + frac * (hi - lo) for lo, hi in bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    if val["kind"] == "lhs":
        return np.array([p.coords for p in sample_lhs(bounds, val["count"], val["seed"])])
    if val["kind"] == "grid":
        mesh = np.meshgrid(*val["axes"], indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])
    return np.asarray(val["points"], dtype=float)


# ------------------------------------------------------------------ training


@dataclass
class TrainedModel:
    config: PipelineConfig
    grid: TrainingGrid
    roms: list
    global_set: GlobalROMSet | None = None
    boxes: BoxCache | None = None
    timings: dict = field(default_factory=dict)


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (ConfigError, StageError):
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def train(config: PipelineConfig, workers: int = 1) -> TrainedModel:
    """Local reductions plus the basis change the configured strategy needs."""
    grid = training_grid(config)
    factory = FOMFactory(config)
    t0 = time.perf_counter()
    roms = _stage("reduction", reduce_training_set, grid, factory, config.r, config.s0, workers)
    t1 = time.perf_counter()
    model = TrainedModel(config, grid, roms)
    if config.strategy.kind == "pbr":
        boxes = BoxCache(grid, roms)
        if config.pbr_offline:
            _stage("basis_change", boxes.precompute, workers)
            boxes.offline_only = True
        model.boxes = boxes
    else:
        model.global_set = _stage("basis_change", build_global_set, roms)
    t2 = time.perf_counter()
    model.timings = {"reduction_s": t1 - t0, "basis_change_s": t2 - t1}
    return model


# ----------------------------------------------------------------- artifacts


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _point_dir(i):
    return f"point_{i:03d}"


def _cell_dir(cell):
    return "cell_" + "_".join(str(c) for c in cell)


def _save_set(gset: GlobalROMSet, out: Path, labels):
    out.mkdir(parents=True, exist_ok=True)
    write_mtx(out / "R.mtx", gset.R)
    for m in gset.members:
        d = out / _point_dir(m.parameter_index)
        export_system(m.system, d, labels, m.parameters or (),
                      extra={"parameter_index": m.parameter_index, "W": "W.mtx", "T": "T.mtx"})
        write_mtx(d / "W.mtx", m.W)
        write_mtx(d / "T.mtx", m.T)
    _write_json(out / "set.json", {
        "r": gset.r,
        "scope": None if gset.scope is None else list(gset.scope),
        "members": [_point_dir(m.parameter_index) for m in gset.members],
    })


def _densify(system):
    return with_matrices(system, dense(system.mass), dense(system.operator), system.f, system.D,
                         **system.meta)


def _load_set(out: Path) -> GlobalROMSet:
    info = json.loads((out / "set.json").read_text())
    R = read_mtx(out / "R.mtx").toarray()
    members = []
    for name in info["members"]:
        d = out / name
        manifest, _ = read_manifest(d)
        sys_ = _densify(import_system(d))
        members.append(GlobalMember(sys_, read_mtx(d / "W.mtx").toarray(), read_mtx(d / "T.mtx").toarray(),
                                    manifest["parameter_index"], tuple(manifest["param_values"]) or None))
    scope = None if info["scope"] is None else tuple(info["scope"])
    return GlobalROMSet(R, tuple(members), scope)


def save_artifact(model: TrainedModel, out) -> Path:
    """Write the trained model; ``manifest.json`` is byte-stable for a given config."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = model.config
    labels = cfg.labels
    rom_dirs = []
    for rom in model.roms:
        d = out / "roms" / _point_dir(rom.parameter_index)
        export_system(rom.system, d, labels, rom.parameters, extra={
            "parameter_index": rom.parameter_index, "r": rom.r, "s0": rom.basis.s0,
            "truncated": rom.basis.truncated, "requested_r": rom.basis.requested_r, "V": "V.mtx",
        })
        write_mtx(d / "V.mtx", rom.V)
        rom_dirs.append(f"roms/{_point_dir(rom.parameter_index)}")
    manifest = {
        "artifact_version": ARTIFACT_VERSION,
        "fingerprint": cfg.fingerprint(),
        "config": cfg.semantic(),
        "grid": {"labels": list(labels), "axes": [list(a) for a in model.grid.axes]},
        "roms": rom_dirs,
        "global": None,
        "boxes": [],
    }
    if model.global_set is not None:
        _save_set(model.global_set, out / "global", labels)
        manifest["global"] = "global"
    if model.boxes is not None:
        for cell, gset in model.boxes.items():
            _save_set(gset, out / "boxes" / _cell_dir(cell), labels)
            manifest["boxes"].append({"cell": list(cell), "path": f"boxes/{_cell_dir(cell)}"})
    model.grid.to_csv(out / "grid.csv")
    _write_json(out / "manifest.json", manifest)
    _write_json(out / "timings.json", model.timings)
    return out / "manifest.json"


def load_artifact(path, config: PipelineConfig | None = None) -> TrainedModel:
    """Rebuild a ``TrainedModel``; with ``config`` the fingerprints must agree."""
    path = Path(path)
    mpath = path / "manifest.json"
    if not mpath.exists():
        raise ConfigError(f"{path} is not a training artifact (no manifest.json)")
    manifest = json.loads(mpath.read_text())
    if config is not None and manifest["fingerprint"] != config.fingerprint():
        raise ConfigError("artifact was trained with a different config (fingerprint mismatch)")
    if config is None:
        from .config import config_from_dict

        config = _config_from_semantic(manifest["config"], config_from_dict)
    grid = build_grid(manifest["grid"]["axes"], manifest["grid"]["labels"])
    roms = []
    for rel in manifest["roms"]:
        d = path / rel
        info, _ = read_manifest(d)
        basis = ProjectionBasis(read_mtx(d / "V.mtx").toarray(), info["s0"], info["truncated"], info["requested_r"])
        roms.append(LocalROM(_densify(import_system(d)), basis, info["parameter_index"], tuple(info["param_values"])))
    model = TrainedModel(config, grid, roms)
    if manifest["global"]:
        model.global_set = _load_set(path / manifest["global"])
    if config.strategy.kind == "pbr":
        sets = {tuple(b["cell"]): _load_set(path / b["path"]) for b in manifest["boxes"]}
        model.boxes = BoxCache(grid, roms, sets, offline_only=config.pbr_offline)
    tpath = path / "timings.json"
    model.timings = json.loads(tpath.read_text()) if tpath.exists() else {}
    return model


def _config_from_semantic(sem, config_from_dict):
    raw = {
        "fom": sem["fom"],
        "parameters": [{"name": p["name"], "binds": p["binds"], "values": p["values"]} for p in sem["parameters"]],
        "reduction": sem["reduction"],
        "strategy": {**sem["strategy"], "offline": sem["pbr_offline"]},
        "integration": sem["integration"],
        "validation": sem["validation"],
        "metric": sem["metric"],
    }
    return config_from_dict(raw)


# ---------------------------------------------------------------- evaluation


@dataclass
class QueryResult:
    query: tuple[float, ...]
    solution: object  # back-projected TransientSolution
    reduced: object
    metrics: dict = field(default_factory=dict)
    reference: object | None = None


def predict(model: TrainedModel, query, dt=None, t_end=None):
    cfg = model.config
    q = as_point(query).as_array()
    ev = _stage("interpolation", evaluate, cfg.strategy, model.grid, q, model.global_set, model.boxes)
    red = _stage("integration", simulate, ev.system, cfg.signal, dt or cfg.dt, t_end or cfg.t_end)
    return _stage("back_projection", back_project, red, ev.basis, None), red, ev


def compute_metrics(config: PipelineConfig, reference_system, reference, predicted) -> dict:
    out = {}
    tip = reference_system.meta.get("tip_dof")
    if tip is not None:
        out["nrmse"] = nrmse(reference, predicted, tip).aggregate
    out["msre_global"] = msre(reference, predicted).aggregate
    body = reference_system.meta.get("body")
    if body is not None:
        out["msre_chips"] = msre(reference, predicted, np.asarray(body) == 1).aggregate
    out["aggregate"] = "time_mean"
    return out


def primary_metric(config: PipelineConfig, metrics: dict) -> float:
    if config.metric["kind"] == "nrmse":
        return metrics["nrmse"]
    return metrics["msre_chips" if config.metric.get("domain") == "chips" else "msre_global"]


def evaluate_query(model: TrainedModel, query, reference=False, dt=None, t_end=None) -> QueryResult:
    cfg = model.config
    sol, red, ev = predict(model, query, dt, t_end)
    res = QueryResult(tuple(as_point(query).coords), sol, red)
    if reference:
        fom = _stage("fom", FOMFactory(cfg), res.query)
        ref = _stage("fom_integration", simulate, fom, cfg.signal, dt or cfg.dt, t_end or cfg.t_end)
        res.reference = ref
        # outputs through the full-order D so both trajectories report the same quantity
        res.solution = back_project(red, ev.basis, fom.D)
        res.metrics = compute_metrics(cfg, fom, ref, res.solution)
    return res


def surface(model: TrainedModel, points=None, workers: int = 1, path=None):
    """Aggregate error of the configured metric at every validation point.

    Failing points are recorded with ``nan`` and listed in the second return
    value; they do not abort the sweep.
    """
    cfg = model.config
    pts = validation_points(cfg, model.grid) if points is None else np.atleast_2d(points)
    factory = FOMFactory(cfg)

    def one(q):
        try:
            sol, _, _ = predict(model, q)
            fom = factory(q)
            ref = simulate(fom, cfg.signal, cfg.dt, cfg.t_end)
            return primary_metric(cfg, compute_metrics(cfg, fom, ref, sol)), None
        except Exception as exc:  # recorded, not fatal
            return math.nan, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(one, pts))
    else:
        results = [one(q) for q in pts]
    errors = [r[0] for r in results]
    failures = {i: msg for i, (_, msg) in enumerate(results) if msg}
    table = error_surface(pts, errors, path, cfg.labels)
    return table, failures


# ------------------------------------------------------------------ benchmark


def bench(config: PipelineConfig, query=None, workers: int = 1):
    """Offline stage times, FOM and online per-step times, speed-up, break-even.

    Stages are timed sequentially (median of ``bench.repeats`` runs). Both
    basis-change variants are timed on the same local ROMs so that their
    offline totals can be compared without reduction-time noise.
    """
    repeats = int(config.bench.get("repeats", 5))
    grid = training_grid(config)
    factory = FOMFactory(config)
    roms = []

    def reduce_all():
        roms[:] = reduce_training_set(grid, factory, config.r, config.s0, 1)

    t_red = median_time(reduce_all, repeats)
    t_global = median_time(lambda: build_global_set(roms), repeats)
    t_boxes = median_time(lambda: BoxCache(grid, roms).precompute(1), repeats)

    model = TrainedModel(config, grid, roms)
    if config.strategy.kind == "pbr":
        model.boxes = BoxCache(grid, roms).precompute(1)
        basis_change = t_boxes
    else:
        model.global_set = build_global_set(roms)
        basis_change = t_global

    q = np.asarray(query if query is not None else grid.bounds().mean(axis=1), dtype=float)
    steps = max(1, int(round(config.t_end / config.dt)))
    fom = factory(q)
    t_fom = median_time(lambda: simulate(fom, config.signal, config.dt, config.t_end), repeats)
    t_online = median_time(lambda: predict(model, q), repeats)

    extra = {
        "steps": steps,
        "query": q.tolist(),
        "n": fom.n,
        "r": config.r,
        "strategy": config.strategy.kind,
        "basis_change_by_kind": {"global": t_global, "boxes": t_boxes},
        "offline_total_by_kind": {"classical": t_red + t_global, "pbi": t_red + t_global, "pbr": t_red + t_boxes},
        "repeats": repeats,
    }
    return timing_report({"reduction_s": t_red, "basis_change_s": basis_change},
                         t_online / steps, t_fom / steps, **extra)
