"""Command-line entry point: ``stablespde run | replay | validate | list``.

Exit codes: 0 all enabled checks pass; 1 a check failed; 2 configuration or
manifest problem; 3 resource overflow.
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..errors import ConfigError, StableSPDEError
from . import store
from .config import RunConfig, load_config
from .experiments import EXPERIMENTS, resolve_settings

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOURCE = 0, 1, 2, 3
THREADS_ENV = "STABLESPDE_THREADS"
MANIFEST = "manifest.json"
MANIFEST_FORMAT = 1
# fields that legitimately differ between a run and its replay
VOLATILE = ("started", "finished", "elapsed_s", "threads")


def versions() -> dict:
    return {"stablespde": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _pool(threads: int):
    return ThreadPoolExecutor(max_workers=threads) if threads > 1 else None


def _write_result(out: Path, res, settings: dict, plots: bool) -> list[str]:
    base = out / res.name
    files = []
    for table, rows in res.tables.items():
        store.write_csv(base / f"{table}.csv", rows)
        files.append(f"{res.name}/{table}.csv")
    checks = [{"check": c.name, "pass": c.passed, "row": c.row} for c in res.checks]
    store.write_csv(base / "checks.csv", checks)
    files.append(f"{res.name}/checks.csv")
    if res.arrays:
        store.write_npz(base / "arrays.npz", res.arrays)
        files.append(f"{res.name}/arrays.npz")
    store.write_json(base / "record.json", {"experiment": res.name, "settings": settings,
                                            "records": res.records, "passed": res.passed})
    files.append(f"{res.name}/record.json")
    if plots:
        for table, x, ys, logx, logy in res.plots:
            svg = store.svg_plot(res.tables[table], x, ys, f"{res.name}: {table}", logx, logy)
            if svg is not None:
                store.atomic_write(base / f"{table}.svg", svg)
                files.append(f"{res.name}/{table}.svg")
    return files


def execute(cfg: RunConfig, names: list[str], out, seed: int | None = None,
            n_paths: int | None = None, threads: int = 1, plots: bool = False,
            settings_override: dict | None = None, log=print) -> tuple[int, dict]:
    """Run ``names`` into ``out`` and write the manifest; returns ``(exit code, manifest)``."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else int(seed)
    scenario_copy = "scenario.yaml"
    if cfg.source:
        store.atomic_write(out / scenario_copy, Path(cfg.source).read_bytes())
    else:
        store.write_json(out / scenario_copy, cfg.raw)
    manifest = {"format": MANIFEST_FORMAT,
                "scenario": {"name": cfg.name, "hash": cfg.hash, "file": scenario_copy},
                "seed_root": seed, "n_paths_override": n_paths, "plots": plots,
                "threads": threads, "versions": versions(), "started": _now(),
                "order": list(names), "experiments": {}, "outputs": [scenario_copy]}
    code = EXIT_OK
    pool = _pool(threads)
    try:
        for name in names:
            settings = resolve_settings(name, cfg.experiments.get(name), n_paths)
            if settings_override and name in settings_override:
                settings = {**settings, **settings_override[name]}
            entry = {"settings": settings, "outputs": []}
            t0 = time.perf_counter()
            try:
                res = EXPERIMENTS[name].fn(cfg, settings, seed, pool)
            except MemoryError as exc:
                entry.update(status="resource_overflow", error=str(exc) or "MemoryError")
                log(f"RESOURCE {name}: {entry['error']}", file=sys.stderr)
                code = EXIT_RESOURCE
            except StableSPDEError as exc:
                entry.update(status="error", error=f"{type(exc).__name__}: {exc}")
                log(f"FAILED {name}: {entry['error']}", file=sys.stderr)
                if code == EXIT_OK:
                    code = EXIT_FAIL
            else:
                entry["outputs"] = _write_result(out, res, settings, plots)
                entry["status"] = "passed" if res.passed else "failed"
                entry["checks"] = {"total": len(res.checks),
                                   "failed": sum(not c.passed for c in res.checks)}
                if not res.passed:
                    bad = res.first_failure
                    log(f"FAILED {name}: {bad.name}: "
                        f"{json.dumps(bad.row, default=store._jsonable)}", file=sys.stderr)
                    if code == EXIT_OK:
                        code = EXIT_FAIL
                else:
                    log(f"PASSED {name} ({len(res.checks)} checks)")
            entry["elapsed_s"] = round(time.perf_counter() - t0, 3)
            manifest["experiments"][name] = entry
            manifest["outputs"].extend(entry["outputs"])
    finally:
        if pool is not None:
            pool.shutdown()
    manifest["finished"] = _now()
    manifest["outputs"].append(MANIFEST)
    store.write_json(out / MANIFEST, manifest)
    return code, manifest


def cmd_run(args) -> int:
    try:
        cfg = load_config(args.scenario)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    names = args.experiment if args.experiment is not None else list(cfg.experiments)
    unknown = [n for n in names if n not in EXPERIMENTS]
    if unknown:
        print(f"config error: unknown experiment(s) {unknown}; known: {', '.join(EXPERIMENTS)}",
              file=sys.stderr)
        return EXIT_CONFIG
    code, _ = execute(cfg, names, args.out, args.seed, args.paths, args.threads, args.plots)
    return code


def _mask(obj):
    if isinstance(obj, dict):
        return {k: _mask(v) for k, v in obj.items() if k != "date"}
    if isinstance(obj, list):
        return [_mask(v) for v in obj]
    return obj


def _same_file(a: Path, b: Path) -> bool:
    if a.suffix == ".json":
        ja, jb = json.loads(a.read_text()), json.loads(b.read_text())
        if a.name == MANIFEST:
            for j in (ja, jb):
                for k in VOLATILE:
                    j.pop(k, None)
                for e in j.get("experiments", {}).values():
                    e.pop("elapsed_s", None)
        return _mask(ja) == _mask(jb)
    return a.read_bytes() == b.read_bytes()


def _compatible(rows_a: list[dict], rows_b: list[dict], n_se: float = 4.0) -> list[str]:
    """Report-level tolerance check between runs with different seeds."""
    issues = []
    for i, (ra, rb) in enumerate(zip(rows_a, rows_b)):
        for est, se in (("estimate", "se"), ("mean", "se")):
            if est not in ra or not ra[est] or not rb.get(est):
                continue
            a, b = float(ra[est]), float(rb[est])
            if se in ra and ra[se] and rb.get(se):
                tol = n_se * np.hypot(float(ra[se]), float(rb[se]))
            elif ra.get("ci_lo") and ra.get("ci_hi") and rb.get("ci_lo") and rb.get("ci_hi"):
                tol = n_se / 2.576 * np.hypot(float(ra["ci_hi"]) - float(ra["ci_lo"]),
                                              float(rb["ci_hi"]) - float(rb["ci_lo"])) / 2
            else:
                continue
            if np.isfinite(tol) and abs(a - b) > tol:
                issues.append(f"row {i}: {est} {a:.6g} vs {b:.6g} (tolerance {tol:.3g})")
            break
    return issues


def replay(manifest_path, out=None, seed: int | None = None, log=print) -> int:
    manifest_path = Path(manifest_path)
    if not manifest_path.is_file():
        log(f"replay error: manifest {manifest_path} not found", file=sys.stderr)
        return EXIT_CONFIG
    root = manifest_path.parent
    man = json.loads(manifest_path.read_text())
    missing = [f for f in man.get("outputs", []) if not (root / f).exists()]
    if missing:
        log(f"replay error: {len(missing)} recorded outputs missing, e.g. {missing[0]}",
            file=sys.stderr)
        return EXIT_CONFIG
    now = versions()
    diff = {k: (v, now.get(k)) for k, v in man.get("versions", {}).items() if now.get(k) != v}
    if diff:
        for k, (was, is_) in diff.items():
            log(f"replay refused: {k} version {was} recorded, {is_} installed", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(root / man["scenario"]["file"])
    except ConfigError as exc:
        for e in exc.errors:
            log(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    if cfg.hash != man["scenario"]["hash"]:
        log("replay refused: scenario file changed since the run", file=sys.stderr)
        return EXIT_CONFIG
    same_seed = seed is None or int(seed) == man["seed_root"]
    out = Path(out) if out is not None else root / "replay"
    # JSON objects are key-sorted on disk; the run order is kept separately
    names = man.get("order", sorted(man["experiments"]))
    overrides = {n: e["settings"] for n, e in man["experiments"].items()}
    execute(cfg, names, out, man["seed_root"] if same_seed else seed,
            man.get("n_paths_override"), man.get("threads", 1), man.get("plots", False),
            overrides, log=log)
    problems = []
    for f in man["outputs"]:
        a, b = root / f, out / f
        if not b.exists():
            problems.append(f"{f}: not produced by replay")
        elif same_seed:
            if not _same_file(a, b):
                problems.append(f"{f}: differs")
        elif f.endswith(".csv") and not f.endswith("checks.csv"):
            problems.extend(f"{f} {msg}" for msg in _compatible(store.read_csv(a),
                                                                store.read_csv(b)))
    for p in problems:
        log(f"replay mismatch: {p}", file=sys.stderr)
    if not problems:
        kind = "bit-identical" if same_seed else "statistically compatible"
        log(f"replay {kind}: {len(man['outputs'])} files")
    return EXIT_FAIL if problems else EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.scenario)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    s = cfg.scenario
    print(f"ok: {cfg.name} (hash {cfg.hash[:12]}), dim {s.dim}, alpha {s.alpha:g}, "
          f"K_F {s.K_F:.4g}, K_G {s.K_G:.4g}, experiments {list(cfg.experiments) or 'none'}")
    return EXIT_OK


def cmd_list(args) -> int:
    for name, exp in EXPERIMENTS.items():
        print(f"{name:20s} {exp.summary}")
    return EXIT_OK


def _default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stablespde", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run experiments of a scenario")
    r.add_argument("scenario")
    r.add_argument("--experiment", action="append", help="experiment name (repeatable); "
                   "defaults to the scenario's experiment list")
    r.add_argument("--out", required=True)
    r.add_argument("--paths", type=int, help="override n_paths of every experiment")
    r.add_argument("--seed", type=int, help="override the scenario seed root")
    r.add_argument("--threads", type=int, default=_default_threads(),
                   help=f"worker threads (default ${THREADS_ENV} or 1)")
    r.add_argument("--plots", action="store_true", help="also emit SVG plots")
    r.set_defaults(fn=cmd_run)
    rp = sub.add_parser("replay", help="re-execute a manifest and compare outputs")
    rp.add_argument("manifest")
    rp.add_argument("--out", help="replay directory (default <run>/replay)")
    rp.add_argument("--seed", type=int, help="altered seed root: compare statistically")
    rp.set_defaults(fn=lambda a: replay(a.manifest, a.out, a.seed))
    v = sub.add_parser("validate", help="parse and validate a scenario")
    v.add_argument("scenario")
    v.set_defaults(fn=cmd_validate)
    ls = sub.add_parser("list", help="list experiments")
    ls.set_defaults(fn=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
