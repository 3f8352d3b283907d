"""Command line entry point: run | sweep | compare | gen.

Every flag can also be supplied through an environment variable named
``PCRM_<FLAG>`` (e.g. ``PCRM_SEED=7``, ``PCRM_GRID_RS=0.5,0.7``); explicit
flags win over the environment, which wins over the config file.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from datetime import datetime
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from . import __version__
from .config import (
    DEFAULT_EPOCH,
    DEFAULT_PROJECTION,
    config_from_dict,
    config_to_dict,
    load_json,
    with_strategy,
    workload_settings,
)
from .dataio import (
    COMPARE_COLUMNS,
    SWEEP_COLUMNS,
    Projection,
    WorkloadError,
    comparison_rows,
    generate,
    ingest_csv,
    spec_from_dict,
    sweep_row,
    write_json,
    write_results,
    write_workload,
)
from .matching import STRATEGIES
from .sim import SimConfig, run

log = logging.getLogger("pcrm")

DEFAULT_GRID_RS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_GRID_PHI = (45.0, 60.0, 75.0, 90.0)
ENV_PREFIX = "PCRM_"


class CliError(Exception):
    pass


def _floats(text: str) -> Tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load(args) -> Tuple[SimConfig, dict, Optional[dict]]:
    """Config (with flag overrides), raw document, and manifest if one was given."""
    raw = load_json(args.config) if args.config else {}
    manifest = raw if "artifact_version" in raw else None
    doc = manifest["config"] if manifest else raw
    try:
        cfg = config_from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad config: {exc}")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if manifest and args.workload is None:
        args.workload = manifest["workload"]["path"]
        if Path(args.workload).exists() and _digest(args.workload) != manifest["workload"]["sha256"]:
            raise CliError(f"workload {args.workload} changed since the manifest was written")
    return cfg, (manifest["source"] if manifest else raw), manifest


def _workload(args, cfg: SimConfig, raw: dict):
    if not args.workload:
        raise CliError("no workload given (--workload)")
    path = Path(args.workload)
    if not path.is_file():
        raise CliError(f"workload not found: {path}")
    opts = workload_settings(raw)
    try:
        res = ingest_csv(path, opts["box"], opts["window"], opts["projection"], opts["columns"],
                         patience=cfg.patience, strict=opts["strict"])
    except WorkloadError as exc:
        raise CliError(str(exc))
    if res.skipped:
        log.warning("skipped %d workload rows", res.skipped)
    return res.requests


def _manifest(command: str, cfg: SimConfig, raw: dict, args, **extra) -> dict:
    return {
        "artifact_version": __version__,
        "command": command,
        "config": config_to_dict(cfg),
        "source": {k: v for k, v in raw.items() if k == "workload"},
        "workload": {"path": str(Path(args.workload).resolve()),
                     "sha256": _digest(args.workload)},
        **extra,
    }


def _run_one(cfg: SimConfig, requests):
    return run(cfg, requests).report


def _run_many(cfgs: Sequence[SimConfig], requests, jobs: int):
    if jobs <= 1 or len(cfgs) <= 1:
        return [_run_one(c, requests) for c in cfgs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_one, c, requests) for c in cfgs]
        return [f.result() for f in futures]


def _ext(fmt: str) -> str:
    return "json" if fmt == "json" else "csv"


def cmd_run(args) -> int:
    cfg, raw, _ = _load(args)
    if args.strategy:
        if len(args.strategy) != 1:
            raise CliError("run takes a single --strategy")
        cfg = with_strategy(cfg, args.strategy[0])
    requests = _workload(args, cfg, raw)
    report = _run_one(cfg, requests)
    out = Path(args.out)
    zone = cfg.strategy.zone
    write_results([sweep_row(zone.R_s, zone.phi, report)], out / f"summary.{_ext(args.format)}",
                  args.format, SWEEP_COLUMNS)
    write_results(comparison_rows(cfg.strategy.kind, report), out / f"hourly.{_ext(args.format)}",
                  args.format, COMPARE_COLUMNS)
    write_json({**report.flat(), "per_hour": {str(h): v for h, v in report.per_hour.items()},
                "config": config_to_dict(cfg)}, out / "report.json")
    write_json(_manifest("run", cfg, raw, args), out / "manifest.json")
    print(f"{cfg.strategy.kind}: UI={report.ui:.4f} MSI={report.msi:.4f} "
          f"SAI={report.sai:.4f} ICI/served={report.ici_mean:.3f}")
    return 0


def cmd_sweep(args) -> int:
    cfg, raw, manifest = _load(args)
    grid_rs = args.grid_rs or (manifest or {}).get("grid_rs") or DEFAULT_GRID_RS
    grid_phi = args.grid_phi or (manifest or {}).get("grid_phi") or DEFAULT_GRID_PHI
    requests = _workload(args, cfg, raw)
    cells = [(rs, phi) for rs in grid_rs for phi in grid_phi]
    cfgs = [with_strategy(cfg, "pcrm", R_s=rs, phi=phi) for rs, phi in cells]
    reports = _run_many(cfgs, requests, args.jobs)
    rows = [sweep_row(rs, phi, rep) for (rs, phi), rep in zip(cells, reports)]
    out = Path(args.out)
    write_results(rows, out / f"sweep.{_ext(args.format)}", args.format, SWEEP_COLUMNS)
    best = max(rows, key=lambda r: r["ui"])
    write_json(best, out / "best.json")
    write_json(_manifest("sweep", cfg, raw, args, grid_rs=list(grid_rs), grid_phi=list(grid_phi)),
               out / "manifest.json")
    print(f"best UI={best['ui']:.4f} at R_s={best['r_s']} phi={best['phi']}")
    return 0


def cmd_compare(args) -> int:
    cfg, raw, manifest = _load(args)
    strategies = args.strategy or (manifest or {}).get("strategies") or list(STRATEGIES)
    unknown = [s for s in strategies if s not in STRATEGIES]
    if unknown:
        raise CliError(f"unknown strategy {', '.join(unknown)}; choose from {', '.join(STRATEGIES)}")
    requests = _workload(args, cfg, raw)
    reports = _run_many([with_strategy(cfg, s) for s in strategies], requests, args.jobs)
    hourly, totals = [], []
    for s, rep in zip(strategies, reports):
        hourly.extend(comparison_rows(s, rep))
        totals.append({"strategy": s, "msi": rep.msi, "sai": rep.sai, "ici_total": rep.ici_total,
                       "ici_mean": rep.ici_mean, "ui": rep.ui})
    out = Path(args.out)
    ext = _ext(args.format)
    write_results(hourly, out / f"compare.{ext}", args.format, COMPARE_COLUMNS)
    write_results(totals, out / f"totals.{ext}", args.format)
    write_json(_manifest("compare", cfg, raw, args, strategies=list(strategies)),
               out / "manifest.json")
    for t in totals:
        print(f"{t['strategy']}: UI={t['ui']:.4f} MSI={t['msi']:.4f} SAI={t['sai']:.4f} "
              f"ICI/served={t['ici_mean']:.3f}")
    return 0


def cmd_gen(args) -> int:
    path = args.spec or args.config
    if not path:
        raise CliError("gen needs --spec")
    doc = load_json(path)
    if args.seed is not None:
        doc["seed"] = args.seed
    spec = spec_from_dict(doc)
    proj = Projection(**doc["projection"]) if doc.get("projection") else DEFAULT_PROJECTION
    epoch = datetime.fromisoformat(doc["epoch"]) if doc.get("epoch") else DEFAULT_EPOCH
    requests = generate(spec)
    write_workload(requests, args.out, proj, epoch)
    print(f"wrote {len(requests)} requests to {args.out}")
    return 0


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pcrm", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_help):
        sp.add_argument("--config", default=_env("config"), help="JSON config or a manifest")
        sp.add_argument("--workload", default=_env("workload"), help="trip-record CSV")
        sp.add_argument("--out", default=_env("out"), required=_env("out") is None, help=out_help)
        sp.add_argument("--format", choices=("csv", "json"), default=_env("format", "csv"))
        seed = _env("seed")
        sp.add_argument("--seed", type=int, default=int(seed) if seed is not None else None)
        jobs = _env("jobs")
        sp.add_argument("--jobs", type=int, default=int(jobs) if jobs else 1)
        strat = _env("strategy")
        sp.add_argument("--strategy", type=lambda s: [x for x in s.split(",") if x],
                        default=[x for x in strat.split(",") if x] if strat else None,
                        help="comma-separated strategy names")

    sp = sub.add_parser("run", help="single simulation")
    common(sp, "output directory")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="grid over R_s x phi")
    common(sp, "output directory")
    grs, gphi = _env("grid_rs"), _env("grid_phi")
    sp.add_argument("--grid-rs", type=_floats, default=_floats(grs) if grs else None)
    sp.add_argument("--grid-phi", type=_floats, default=_floats(gphi) if gphi else None)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("compare", help="strategies on one workload")
    common(sp, "output directory")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("gen", help="write a synthetic workload CSV")
    sp.add_argument("--spec", default=_env("spec"), help="JSON synthetic workload spec")
    sp.add_argument("--config", default=None, help=argparse.SUPPRESS)
    sp.add_argument("--out", default=_env("out"), required=_env("out") is None,
                    help="CSV path to write")
    seed = _env("seed")
    sp.add_argument("--seed", type=int, default=int(seed) if seed is not None else None)
    sp.set_defaults(func=cmd_gen)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pcrm: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
