"""Pipeline configuration: YAML in, validated frozen dataclasses out.

Example::

    fom:
      kind: beam                 # beam | lattice | import
      beam: {element_count: 100}
    parameters:
      - {name: youngs_modulus, lo: 10.0e9, hi: 410.0e9, count: 2}
      - {name: density, values: [6350, 8850]}
    reduction: {r: 25, s0: 0.0}
    strategy: {kind: classical, weight_fn: tpwf}
    integration: {dt: 1.0e-6, t_end: 0.01, signal: {kind: step}}
    validation: {kind: lattice, per_axis: 5}
    metric: {kind: nrmse}

Each parameter axis ``binds`` a FOM scalar (default: its name). Beam
bindings are ``BeamSpec`` fields; lattice bindings are ``conductivity[i]``,
``capacity[i]`` or ``convection_h``.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .fom.beam import BeamSpec
from .fom.loads import LoadSignal
from .interpolation import InterpolationError, Strategy


class ConfigError(ValueError):
    """Invalid or inconsistent pipeline configuration."""


BEAM_FLOATS = {f.name for f in fields(BeamSpec)} - {"element_count", "load_dof", "output_dof"}
LATTICE_BINDING = re.compile(r"^(conductivity|capacity)\[(\d+)\]$|^convection_h$")

LATTICE_DEFAULTS = {
    "nx": 32, "ny": 32, "layers": [3, 3, 2], "chips_per_side": 2, "chip_fraction": 0.5,
    "cell_size": 1e-3, "conductivities": [390.0, 150.0, 150.0, 0.5],
    "capacities": [3.45e6, 1.66e6, 2.5e6, 1.5e6], "convection_h": 5000.0, "power": 1.0,
}
VALIDATION_KINDS = ("lattice", "lhs", "grid", "points")


@dataclass(frozen=True)
class AxisSpec:
    name: str
    binds: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class PipelineConfig:
    fom: dict
    axes: tuple[AxisSpec, ...]
    r: int = 25
    s0: float = 0.0
    strategy: Strategy = field(default_factory=Strategy)
    pbr_offline: bool = True
    dt: float = 1e-6
    t_end: float = 0.01
    signal: LoadSignal = field(default_factory=LoadSignal)
    validation: dict = field(default_factory=lambda: {"kind": "lattice", "per_axis": 5})
    metric: dict = field(default_factory=lambda: {"kind": "nrmse"})
    bench: dict = field(default_factory=lambda: {"repeats": 5})
    output_dir: str | None = None
    base_dir: str = "."

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    def semantic(self) -> dict:
        """Every field that changes results; paths and output location excluded."""
        return {
            "fom": self.fom,
            "parameters": [asdict(a) for a in self.axes],
            "reduction": {"r": self.r, "s0": self.s0},
            "strategy": asdict(self.strategy),
            "pbr_offline": self.pbr_offline,
            "integration": {"dt": self.dt, "t_end": self.t_end, "signal": asdict(self.signal)},
            "validation": self.validation,
            "metric": self.metric,
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.semantic(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_seed(self, seed: int | None) -> "PipelineConfig":
        if seed is None:
            return self
        from dataclasses import replace

        return replace(self, validation={**self.validation, "seed": int(seed)})


def _num(x, what):
    try:
        v = float(x)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: expected a number, got {x!r}") from exc
    if not np.isfinite(v):
        raise ConfigError(f"{what}: must be finite")
    return v


def _section(raw, key, default=None):
    val = raw.get(key, default)
    if val is None:
        return {} if default is None else default
    if not isinstance(val, dict):
        raise ConfigError(f"'{key}' must be a mapping")
    return val


def _axis(entry, i) -> AxisSpec:
    if not isinstance(entry, dict) or "name" not in entry:
        raise ConfigError(f"parameters[{i}] needs a name")
    name = str(entry["name"])
    if "values" in entry:
        values = [_num(v, f"parameters[{i}].values") for v in entry["values"]]
    elif {"lo", "hi", "count"} <= entry.keys():
        count = int(entry["count"])
        if count < 2:
            raise ConfigError(f"parameters[{i}].count must be >= 2")
        values = np.linspace(_num(entry["lo"], name), _num(entry["hi"], name), count).tolist()
    else:
        raise ConfigError(f"parameters[{i}] needs 'values' or 'lo', 'hi', 'count'")
    if len(values) < 2 or np.any(np.diff(values) <= 0):
        raise ConfigError(f"parameters[{i}] values must be >= 2 strictly increasing numbers")
    return AxisSpec(name, str(entry.get("binds", name)), tuple(float(v) for v in values))


def _fom(raw, base_dir) -> dict:
    sec = _section(raw, "fom")
    kind = sec.get("kind", "beam")
    if kind == "beam":
        opts = dict(sec.get("beam") or {})
        try:
            BeamSpec(**opts)
        except TypeError as exc:
            raise ConfigError(f"fom.beam: {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"fom.beam: {exc}") from exc
        return {"kind": "beam", "beam": opts}
    if kind == "lattice":
        opts = {**LATTICE_DEFAULTS, **(sec.get("lattice") or {})}
        unknown = set(opts) - set(LATTICE_DEFAULTS)
        if unknown:
            raise ConfigError(f"fom.lattice: unknown keys {sorted(unknown)}")
        for key in ("conductivities", "capacities"):
            if len(opts[key]) != 4 or any(_num(v, key) <= 0 for v in opts[key]):
                raise ConfigError(f"fom.lattice.{key} needs 4 positive values (baseplate, chips, substrate, fill)")
        return {"kind": "lattice", "lattice": opts}
    if kind == "import":
        manifests = sec.get("manifests")
        if not manifests:
            raise ConfigError("fom.import needs a list of 'manifests'")
        resolved = []
        for m in manifests:
            p = Path(m)
            p = p if p.is_absolute() else Path(base_dir) / p
            if not p.exists():
                raise ConfigError(f"imported manifest {p} does not exist")
            resolved.append(str(p))
        return {"kind": "import", "manifests": resolved}
    raise ConfigError(f"unknown fom kind {kind!r}")


def _check_bindings(fom, axes):
    for a in axes:
        if fom["kind"] == "beam" and a.binds not in BEAM_FLOATS:
            raise ConfigError(f"axis {a.name!r}: beam cannot bind {a.binds!r}; choose from {sorted(BEAM_FLOATS)}")
        if fom["kind"] == "lattice":
            m = LATTICE_BINDING.match(a.binds)
            if not m:
                raise ConfigError(f"axis {a.name!r}: lattice cannot bind {a.binds!r}")
            if m.group(2) is not None and int(m.group(2)) >= 4:
                raise ConfigError(f"axis {a.name!r}: body index out of range")


def config_from_dict(raw: dict, base_dir=".") -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    fom = _fom(raw, base_dir)
    params = raw.get("parameters")
    if not isinstance(params, list) or not params:
        raise ConfigError("'parameters' must be a non-empty list of axes")
    axes = tuple(_axis(e, i) for i, e in enumerate(params))
    _check_bindings(fom, axes)

    red = _section(raw, "reduction")
    r = int(red.get("r", 25))
    if r < 1:
        raise ConfigError("reduction.r must be >= 1")
    s0 = _num(red.get("s0", 0.0), "reduction.s0")

    st = dict(_section(raw, "strategy"))
    pbr_offline = bool(st.pop("offline", True))
    if "clustering" not in st:
        st["clustering"] = "all" if str(st.get("kind", "classical")).lower() == "classical" else "box"
    try:
        strategy = Strategy(**st)
    except (TypeError, InterpolationError) as exc:
        raise ConfigError(f"strategy: {exc}") from exc
    if strategy.kind == "pbr" and len(axes) < 1:
        raise ConfigError("pbr needs a structured grid")

    integ = _section(raw, "integration")
    dt = _num(integ.get("dt", 1e-6), "integration.dt")
    t_end = _num(integ.get("t_end", 0.01), "integration.t_end")
    if dt <= 0 or t_end < 0:
        raise ConfigError("integration needs dt > 0 and t_end >= 0")
    try:
        signal = LoadSignal(**(integ.get("signal") or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"integration.signal: {exc}") from exc

    val = dict(_section(raw, "validation", {"kind": "lattice", "per_axis": 5}))
    if val.get("kind") not in VALIDATION_KINDS:
        raise ConfigError(f"validation.kind must be one of {VALIDATION_KINDS}")
    if val["kind"] == "lhs":
        val = {"kind": "lhs", "count": int(val.get("count", 29)), "seed": int(val.get("seed", 0))}
    elif val["kind"] == "lattice":
        val = {"kind": "lattice", "per_axis": int(val.get("per_axis", 5))}
    elif val["kind"] == "grid":
        if len(val.get("axes", [])) != len(axes):
            raise ConfigError("validation.grid needs one value list per parameter")
        val = {"kind": "grid", "axes": [[_num(v, "validation.axes") for v in ax] for ax in val["axes"]]}
    else:
        pts = [[_num(v, "validation.points") for v in p] for p in val.get("points", [])]
        if not pts or any(len(p) != len(axes) for p in pts):
            raise ConfigError("validation.points must be non-empty with one value per parameter")
        val = {"kind": "points", "points": pts}

    metric = dict(_section(raw, "metric", {"kind": "nrmse"}))
    if metric.get("kind", "nrmse") not in ("nrmse", "msre"):
        raise ConfigError("metric.kind must be nrmse or msre")
    metric.setdefault("kind", "nrmse")
    if metric["kind"] == "msre":
        metric.setdefault("domain", "global")
        if metric["domain"] not in ("global", "chips"):
            raise ConfigError("metric.domain must be global or chips")

    bench = {"repeats": 5, **_section(raw, "bench")}
    if int(bench["repeats"]) < 1:
        raise ConfigError("bench.repeats must be >= 1")

    return PipelineConfig(fom, axes, r, s0, strategy, pbr_offline, dt, t_end, signal, val, metric,
                          bench, raw.get("output_dir"), str(base_dir))


def load_config(path) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(raw, base_dir=path.parent)
