"""Command-line entry point.

Subcommands::

    crnsmap surrogate CONFIG        build and write the truth field
    crnsmap explore CONFIG          run one mission
    crnsmap compare CONFIG          run a strategy x regime x field matrix
    crnsmap export-variogram ...    empirical + fitted variogram as CSV

Exit codes: 0 success, 2 validation error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from .config import (
    CELL_KEYS,
    COMPARE_KEYS,
    ConfigError,
    _check_keys,
    _require,
    build_env,
    build_field,
    build_mission,
    build_regime,
    config_hash,
    load_json,
    load_run_config,
)
from .evaluation import Cell, compare_conditions, report_json
from .exploration import RunLog, run_mission
from .field import save_rate_field
from .kriging import save_kriging_map
from .observations import ObservationRecord, load_observations_csv
from .variography import VariogramError, empirical_variogram, fit_gaussian_model, write_variogram_csv

log = logging.getLogger("crnsmap")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def tool_version():
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "0.1.0"


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, config, seeds, files):
    out_dir = Path(out_dir)
    hashed = {k: v for k, v in config.items() if k != "output_dir"}
    manifest = {
        "config_hash": config_hash(hashed),
        "config": hashed,
        "seeds": [int(s) for s in seeds],
        "tool": "crnsmap",
        "tool_version": tool_version(),
        "files": {name: _sha256(out_dir / name) for name in sorted(files)},
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return manifest


def _base_dir(path):
    return Path(path).resolve().parent


def cmd_surrogate(args):
    raw = load_json(args.config)
    field_source = _require(raw, "field", "")
    field = build_field(field_source, "field", _base_dir(args.config))
    out = Path(args.output_dir or raw.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    save_rate_field(out / "surrogate.txt", field)
    meta = {"grid": field.spec.to_dict(), "metadata": field.metadata, "source": field_source}
    (out / "surrogate.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    write_manifest(out, {"field": field_source}, [], ["surrogate.txt", "surrogate.json"])
    print(out / "surrogate.txt")
    return EXIT_OK


def cmd_explore(args):
    overrides = {"seed": args.seed, "horizon": args.horizon, "strategy": args.strategy}
    cfg = load_run_config(load_json(args.config), output_dir=args.output_dir, **overrides)
    truth = build_field(cfg.field_source, "field", _base_dir(args.config))
    run = run_mission(cfg.mission, truth)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    stem = f"run_seed{cfg.mission.seed}"
    files = [f"{stem}.jsonl", f"{stem}_trajectory.csv", "truth.txt"]
    (out / files[0]).write_text(run.to_jsonl())
    (out / files[1]).write_text(run.trajectory_csv())
    save_rate_field(out / "truth.txt", truth)
    if run.final_map is not None:
        save_kriging_map(run.final_map, out, f"{stem}_final")
        files += [f"{stem}_final_estimate.txt", f"{stem}_final_variance.txt", f"{stem}_final.json"]
    write_manifest(out, cfg.raw, [cfg.mission.seed], files)
    final = run.footer["final_mse"]
    print(
        f"{cfg.mission.strategy} {cfg.mission.regime.label}: {run.footer['n_measurements']} measurements, "
        f"distance {run.footer['distance']:.1f} m, final MSE {final if final is None else round(final, 4)}"
    )
    return EXIT_OK


def load_compare(raw, base_dir, horizon=None, seeds=None):
    _check_keys(raw, COMPARE_KEYS, "")
    env = build_env(raw.get("env"))
    fields_raw = _require(raw, "fields", "")
    if not isinstance(fields_raw, dict) or not fields_raw:
        raise ConfigError("fields", "expected a non-empty object of named fields")
    fields = {name: build_field(spec, f"fields.{name}", base_dir) for name, spec in fields_raw.items()}
    cells_raw = _require(raw, "cells", "")
    if not isinstance(cells_raw, list) or not cells_raw:
        raise ConfigError("cells", "experiment matrix is empty")
    base = dict(raw.get("mission", {}))
    h = horizon if horizon is not None else raw.get("horizon", base.get("horizon"))
    if h is None:
        raise ConfigError("horizon", "missing required key")
    base["horizon"] = h
    cells = []
    for i, c in enumerate(cells_raw):
        where = f"cells[{i}]"
        _check_keys(c, CELL_KEYS, where)
        fname = _require(c, "field", where)
        if fname not in fields:
            raise ConfigError(f"{where}.field", f"unknown field {fname!r}")
        mission = dict(base)
        mission["strategy"] = _require(c, "strategy", where)
        mission["regime"] = _require(c, "regime", where)
        mc = build_mission(mission, env, where)
        regime = build_regime(c["regime"], f"{where}.regime")
        name = c.get("name") or f"{fname}/{mc.strategy}/{regime.label}"
        cells.append(Cell(name, fname, mc))
    if seeds is None:
        seeds = raw.get("seeds", 10)
    seeds = list(range(seeds)) if isinstance(seeds, int) else [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("seeds", "no seeds")
    return fields, cells, seeds, float(h)


def cmd_compare(args):
    raw = load_json(args.config)
    fields, cells, seeds, horizon = load_compare(raw, _base_dir(args.config), args.horizon, args.seeds)
    jobs = args.jobs or int(raw.get("jobs", 1))
    report, curves, _ = compare_conditions(cells, fields, seeds, horizon, jobs)
    out = Path(args.output_dir or raw.get("output_dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    files = ["report.json"]
    (out / "report.json").write_text(report_json(report))
    for i, cell in enumerate(cells):
        for kind, curve in curves.get(cell.name, {}).items():
            name = f"curve_{i:02d}_{kind}.csv"
            (out / name).write_text(curve.to_csv())
            files.append(name)
    effective = dict(raw)
    effective["horizon"] = horizon
    effective["seeds"] = seeds
    effective.pop("jobs", None)
    write_manifest(out, effective, seeds, files)
    for name, entry in report["cells"].items():
        fm = entry.get("final_mse", {}).get("mean")
        dist = entry.get("distance", {}).get("mean")
        print(f"{name}: final MSE {fm}, distance {dist}, errors {len(entry['errors'])}")
    return EXIT_RUNTIME if report["failed"] else EXIT_OK


def cmd_export_variogram(args):
    if bool(args.observations) == bool(args.run_log):
        raise ConfigError("input", "give exactly one of --observations or --run-log")
    if args.observations:
        obs = load_observations_csv(args.observations)
    else:
        run = RunLog.from_jsonl(Path(args.run_log).read_text())
        obs = [
            ObservationRecord(m["x"], m["y"], m["duration"], m["corrected_counts"]) for m in run.measurements
        ]
    try:
        emp = empirical_variogram(obs, args.bin_width, args.max_lag)
    except VariogramError as exc:
        raise ConfigError("input", str(exc)) from None
    try:
        model = fit_gaussian_model(emp)
    except VariogramError as exc:
        log.warning("no fitted model: %s", exc)
        model = None
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_variogram_csv(out, emp, model)
    if model is not None:
        print(f"nugget={model.nugget!r} range={model.range!r} sill={model.sill!r}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="crnsmap", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("surrogate", help="build the ground-truth rate field")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_surrogate)

    p = sub.add_parser("explore", help="run one exploration mission")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--strategy", choices=["Greedy", "MonteCarlo", "AdaptiveSampling"])
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("compare", help="run an experiment matrix over seeds")
    p.add_argument("config")
    p.add_argument("--output-dir")
    p.add_argument("--seeds", type=int, help="number of seeds (0..n-1)")
    p.add_argument("--horizon", type=float)
    p.add_argument("--jobs", type=int, help="parallel missions")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("export-variogram", help="write the empirical and fitted variogram")
    p.add_argument("--observations")
    p.add_argument("--run-log")
    p.add_argument("--bin-width", type=float, default=10.0)
    p.add_argument("--max-lag", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_variogram)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (OSError, RuntimeError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
