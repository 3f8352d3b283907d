"""JSON run configuration <-> SimConfig."""

from __future__ import annotations

import json
from dataclasses import asdict, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .dataio import GeoBox, Projection
from .matching import StrategyConfig, Trapezoid
from .model import Weights, ZoneParams
from .sim import SimConfig

# anchor used when a workload section does not name one (midtown Manhattan)
DEFAULT_PROJECTION = Projection(40.758, -73.9855)
DEFAULT_EPOCH = datetime(2019, 1, 15, 0, 0, 0)


def config_to_dict(cfg: SimConfig) -> Dict[str, Any]:
    d = asdict(cfg)
    d["region"] = list(cfg.region)
    return d


def config_from_dict(d: Mapping[str, Any]) -> SimConfig:
    d = dict(d)
    d.pop("workload", None)
    strat = dict(d.pop("strategy", {}))
    zone = ZoneParams(**strat.pop("zone", {}))
    trap = Trapezoid(**strat.pop("ddm_trapezoid", {}))
    strategy = StrategyConfig(zone=zone, ddm_trapezoid=trap, **strat)
    weights = Weights(**d.pop("weights", {}))
    if "region" in d:
        d["region"] = tuple(float(v) for v in d["region"])
    return SimConfig(strategy=strategy, weights=weights, **d)


def with_strategy(cfg: SimConfig, kind: Optional[str] = None, **zone_changes) -> SimConfig:
    strat = cfg.strategy
    if kind is not None:
        strat = replace(strat, kind=kind)
    if zone_changes:
        strat = replace(strat, zone=replace(strat.zone, **zone_changes))
    return replace(cfg, strategy=strat)


def load_json(path) -> Dict[str, Any]:
    return json.loads(Path(path).read_text())


def workload_settings(raw: Mapping[str, Any]) -> Dict[str, Any]:
    """Ingestion options from the ``workload`` section of a config document."""
    w = dict(raw.get("workload") or {})
    box = GeoBox(**w["bbox"]) if w.get("bbox") else None
    if w.get("projection"):
        proj = Projection(**w["projection"])
    elif box is not None:
        proj = box.projection()
    else:
        proj = DEFAULT_PROJECTION
    start = datetime.fromisoformat(w["window_start"]) if w.get("window_start") else DEFAULT_EPOCH
    end = datetime.fromisoformat(w["window_end"]) if w.get("window_end") else None
    return {
        "box": box,
        "projection": proj,
        "window": (start, end),
        "columns": w.get("columns"),
        "strict": bool(w.get("strict", False)),
    }
