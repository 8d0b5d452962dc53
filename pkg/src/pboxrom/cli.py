"""Command-line entry point: ``pboxrom {train,evaluate,surface,bench,export-fom}``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .fom.mmio import export_system
from .fom.systems import ModelError
from .param_space import ParameterError
from .pipeline import (
    FOMFactory,
    StageError,
    bench,
    evaluate_query,
    load_artifact,
    save_artifact,
    surface,
    train,
    training_grid,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("pboxrom")


def _query(text, p):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"--query must be comma-separated numbers, got {text!r}") from exc
    if len(values) != p:
        raise ConfigError(f"--query needs {p} values, got {len(values)}")
    return np.array(values)


def _out_dir(args, config):
    out = args.out or config.output_dir
    if not out:
        raise ConfigError("no output directory: pass --out or set output_dir")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _artifact_dir(args, config):
    return Path(args.artifact or args.out or config.output_dir or ".")


def _load(args):
    config = load_config(args.config).with_seed(args.seed)
    return config


def cmd_train(args):
    config = _load(args)
    out = _out_dir(args, config)
    model = train(config, workers=args.workers)
    manifest = save_artifact(model, out)
    print(json.dumps({"artifact": str(manifest.parent), "fingerprint": config.fingerprint(), **model.timings}))


def cmd_evaluate(args):
    config = _load(args)
    if args.query is None:
        raise ConfigError("evaluate needs --query")
    model = load_artifact(_artifact_dir(args, config), config)
    q = _query(args.query, len(config.axes))
    res = evaluate_query(model, q, reference=args.reference)
    out = _out_dir(args, config)
    res.solution.to_csv(out / "trajectory.csv")
    summary = {"query": list(res.query), "fingerprint": config.fingerprint(), "steps": res.solution.steps}
    if args.reference:
        summary["metrics"] = res.metrics
        res.reference.to_csv(out / "reference.csv")
    (out / "evaluation.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary))


def cmd_surface(args):
    config = _load(args)
    model = load_artifact(_artifact_dir(args, config), config)
    out = _out_dir(args, config)
    table, failures = surface(model, workers=args.workers, path=out / "surface.csv")
    summary = {
        "fingerprint": config.fingerprint(),
        "metric": config.metric,
        "aggregate": "time_mean",
        "points": len(table),
        "mean_error": float(np.nanmean(table[:, -1])) if np.isfinite(table[:, -1]).any() else None,
        "failures": {str(k): v for k, v in failures.items()},
    }
    (out / "surface.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary))


def cmd_bench(args):
    config = _load(args)
    q = _query(args.query, len(config.axes)) if args.query else None
    report = bench(config, query=q, workers=args.workers)
    out = _out_dir(args, config)
    data = {"fingerprint": config.fingerprint(), **report.as_dict()}
    (out / "timing.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    report.to_csv(out / "timing.csv")
    print(json.dumps(data))


def cmd_export_fom(args):
    config = _load(args)
    out = _out_dir(args, config)
    factory = FOMFactory(config)
    labels = config.labels
    if args.query:
        points = [_query(args.query, len(config.axes))]
        names = ["query"]
    else:
        grid = training_grid(config)
        points = list(grid.points)
        names = [f"point_{i:03d}" for i in range(grid.k)]
    written = []
    for name, p in zip(names, points):
        try:
            system = factory(p)
        except (ModelError, ValueError) as exc:
            raise StageError("fom", exc) from exc
        written.append(str(export_system(system, out / name, labels, p)))
    print(json.dumps({"manifests": written}))


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "surface": cmd_surface,
    "bench": cmd_bench,
    "export-fom": cmd_export_fom,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pboxrom", description="Parametric reduced-order models by box reduction")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML pipeline config")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--artifact", help="training artifact directory (default: --out)")
        p.add_argument("--query", help='parameter point "v1,v2,..."')
        p.add_argument("--reference", action="store_true", help="also solve the FOM and report errors")
        p.add_argument("--seed", type=int, help="override the validation sampling seed")
        p.add_argument("--workers", type=int, default=1, help="worker threads for independent units")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        COMMANDS[args.command](args)
    except (ConfigError, ParameterError, ModelError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        if isinstance(exc.cause, (ParameterError, ModelError)):
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        print(f"numeric failure: stage={args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
