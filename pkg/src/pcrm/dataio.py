"""Trip-record ingestion, synthetic workloads and result files."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import tempfile
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .model import Point, TripRequest

log = logging.getLogger(__name__)

EARTH_RADIUS_KM = 6371.0088

# logical field -> CSV header; remap for other trip-record schemas
DEFAULT_COLUMNS = {
    "pickup_datetime": "pickup_datetime",
    "pickup_lon": "pickup_lon",
    "pickup_lat": "pickup_lat",
    "dropoff_lon": "dropoff_lon",
    "dropoff_lat": "dropoff_lat",
}

SWEEP_COLUMNS = ("r_s", "phi", "msi", "sai", "ici_total", "ici_mean", "ui")
COMPARE_COLUMNS = ("hour", "strategy", "msi", "sai", "ici_mean", "ui")


class WorkloadError(ValueError):
    pass


@dataclass(frozen=True)
class Projection:
    """Equirectangular projection about ``(lat0, lon0)``; kilometers east/north."""

    lat0: float
    lon0: float

    def to_km(self, lat: float, lon: float) -> Point:
        k = math.radians(1.0) * EARTH_RADIUS_KM
        return Point((lon - self.lon0) * k * math.cos(math.radians(self.lat0)),
                     (lat - self.lat0) * k)

    def to_latlon(self, p: Point) -> Tuple[float, float]:
        k = math.radians(1.0) * EARTH_RADIUS_KM
        return (self.lat0 + p[1] / k,
                self.lon0 + p[0] / (k * math.cos(math.radians(self.lat0))))


@dataclass(frozen=True)
class GeoBox:
    lat_min: float
    lat_max: float
    lon_min: float
    lon_max: float

    def contains(self, lat: float, lon: float) -> bool:
        return self.lat_min <= lat <= self.lat_max and self.lon_min <= lon <= self.lon_max

    def projection(self) -> Projection:
        return Projection((self.lat_min + self.lat_max) / 2, (self.lon_min + self.lon_max) / 2)


@dataclass
class IngestResult:
    requests: List[TripRequest]
    malformed: int = 0
    outside_region: int = 0
    outside_window: int = 0
    degenerate: int = 0

    @property
    def skipped(self) -> int:
        return self.malformed + self.outside_region + self.outside_window + self.degenerate


def ingest_csv(path, box: Optional[GeoBox] = None,
               window: Optional[Tuple[datetime, Optional[datetime]]] = None,
               projection: Optional[Projection] = None,
               columns: Optional[Mapping[str, str]] = None,
               patience: float = 20.0, strict: bool = False) -> IngestResult:
    """Read trip records into a release-ordered workload.

    Release times are minutes since ``window[0]`` (or the earliest pickup when
    no window is given).  Coordinates are projected about ``projection``,
    defaulting to the centroid of ``box``.  Rows that fail to parse are
    skipped with a warning unless ``strict``.
    """
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    if projection is None:
        if box is None:
            raise WorkloadError("need a bounding box or an explicit projection")
        projection = box.projection()
    res = IngestResult([])
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise WorkloadError(f"{path}: empty file")
        missing = [c for c in cols.values() if c not in reader.fieldnames]
        if missing:
            raise WorkloadError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                when = datetime.fromisoformat(row[cols["pickup_datetime"]].strip())
                plon, plat, dlon, dlat = (float(row[cols[k]]) for k in
                                          ("pickup_lon", "pickup_lat", "dropoff_lon", "dropoff_lat"))
                if not all(map(math.isfinite, (plon, plat, dlon, dlat))):
                    raise ValueError("non-finite coordinate")
            except (ValueError, TypeError, AttributeError) as exc:
                if strict:
                    raise WorkloadError(f"{path}:{lineno}: {exc}") from exc
                log.warning("%s:%d: skipping malformed row (%s)", path, lineno, exc)
                res.malformed += 1
                continue
            if box is not None and not (box.contains(plat, plon) and box.contains(dlat, dlon)):
                res.outside_region += 1
                continue
            if (plat, plon) == (dlat, dlon):
                res.degenerate += 1
                continue
            rows.append((when, plat, plon, dlat, dlon))
    if window is not None:
        start, end = window
        kept = [r for r in rows if r[0] >= start and (end is None or r[0] < end)]
        res.outside_window = len(rows) - len(kept)
        rows = kept
    else:
        start = min((r[0] for r in rows), default=None)
    if not rows:
        raise WorkloadError(f"{path}: no usable trip records")
    rows.sort(key=lambda r: r[0])
    for i, (when, plat, plon, dlat, dlon) in enumerate(rows):
        t = (when - start) / timedelta(minutes=1)
        res.requests.append(TripRequest(i, projection.to_km(plat, plon),
                                        projection.to_km(dlat, dlon), t, patience))
    if res.skipped:
        log.info("%s: kept %d rows, skipped %d", path, len(res.requests), res.skipped)
    return res


def write_workload(requests: Sequence[TripRequest], path, projection: Projection,
                   epoch: datetime, columns: Optional[Mapping[str, str]] = None) -> None:
    """Write requests in the trip-record schema ``ingest_csv`` reads."""
    cols = {**DEFAULT_COLUMNS, **(columns or {})}
    header = [cols[k] for k in DEFAULT_COLUMNS]
    rows = []
    for r in requests:
        plat, plon = projection.to_latlon(r.origin)
        dlat, dlon = projection.to_latlon(r.destination)
        when = epoch + timedelta(minutes=r.release_time)
        rows.append([when.isoformat(sep=" "), repr(plon), repr(plat), repr(dlon), repr(dlat)])
    _atomic_write(path, lambda fh: _csv_dump(fh, header, rows))


# -- synthetic workloads ----------------------------------------------------

@dataclass(frozen=True)
class Hotspot:
    x: float
    y: float
    std: float
    weight: float = 1.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Poisson arrivals with a per-hour rate (requests/minute).

    Origins and destinations are drawn from Gaussian hotspot mixtures
    (uniform over the region when a mixture is empty) and resampled until
    they fall inside the region.
    """

    rates: Tuple[float, ...]
    region: Tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    origins: Tuple[Hotspot, ...] = ()
    destinations: Optional[Tuple[Hotspot, ...]] = None
    seed: int = 0
    patience: float = 20.0
    min_trip_km: float = 0.0

    def __post_init__(self):
        if any(r < 0 for r in self.rates):
            raise ValueError("rates must be non-negative")
        for mix in (self.origins, self.destinations or ()):
            if mix and not math.isclose(sum(h.weight for h in mix), 1.0, abs_tol=1e-9):
                raise ValueError("hotspot weights must sum to 1")


def _draw_points(rng: np.random.Generator, mix: Sequence[Hotspot], region, n: int) -> np.ndarray:
    x0, y0, x1, y1 = region
    out = np.empty((n, 2))
    todo = np.arange(n)
    while todo.size:
        k = todo.size
        if not mix:
            pts = np.column_stack([rng.uniform(x0, x1, k), rng.uniform(y0, y1, k)])
        else:
            comp = rng.choice(len(mix), size=k, p=[h.weight for h in mix])
            centers = np.array([(h.x, h.y) for h in mix])[comp]
            stds = np.array([h.std for h in mix])[comp]
            pts = centers + rng.standard_normal((k, 2)) * stds[:, None]
        ok = (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)
        out[todo[ok]] = pts[ok]
        todo = todo[~ok]
    return out


def generate(spec: SyntheticSpec) -> List[TripRequest]:
    rng = np.random.default_rng(spec.seed)
    times = []
    for hour, rate in enumerate(spec.rates):
        count = rng.poisson(rate * 60.0)
        times.append(np.sort(rng.uniform(60.0 * hour, 60.0 * (hour + 1), count)))
    release = np.concatenate(times) if times else np.empty(0)
    n = release.size
    dest_mix = spec.origins if spec.destinations is None else spec.destinations
    orig = _draw_points(rng, spec.origins, spec.region, n)
    dest = _draw_points(rng, dest_mix, spec.region, n)
    # redraw destinations that are too close to their origin
    bad = np.flatnonzero(np.abs(orig - dest).sum(axis=1) <= spec.min_trip_km)
    while bad.size:
        dest[bad] = _draw_points(rng, dest_mix, spec.region, bad.size)
        sub = np.abs(orig[bad] - dest[bad]).sum(axis=1) <= spec.min_trip_km
        bad = bad[sub]
    return [TripRequest(i, Point(*map(float, orig[i])), Point(*map(float, dest[i])),
                        float(release[i]), spec.patience)
            for i in range(n)]


def spec_from_dict(d: Mapping) -> SyntheticSpec:
    def mix(items):
        return tuple(Hotspot(**h) for h in items)

    return SyntheticSpec(
        rates=tuple(d["rates"]),
        region=tuple(d.get("region", (0.0, 0.0, 10.0, 10.0))),
        origins=mix(d.get("origins", ())),
        destinations=mix(d["destinations"]) if d.get("destinations") is not None else None,
        seed=int(d.get("seed", 0)),
        patience=float(d.get("patience", 20.0)),
        min_trip_km=float(d.get("min_trip_km", 0.0)),
    )


# -- results ----------------------------------------------------------------

def _csv_dump(fh, header, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)


def _atomic_write(path, dump) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            dump(fh)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def sweep_row(r_s: float, phi: float, report) -> Dict[str, float]:
    return {"r_s": r_s, "phi": phi, "msi": report.msi, "sai": report.sai,
            "ici_total": report.ici_total, "ici_mean": report.ici_mean, "ui": report.ui}


def comparison_rows(strategy: str, report) -> List[Dict]:
    return [{"hour": h, "strategy": strategy, "msi": v["msi"], "sai": v["sai"],
             "ici_mean": v["ici_mean"], "ui": v["ui"]}
            for h, v in sorted(report.per_hour.items())]


def write_results(rows: Sequence[Mapping], path, fmt: str = "csv",
                  columns: Optional[Sequence[str]] = None) -> None:
    """Write result rows as CSV (one line per row) or a JSON array."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown format {fmt!r}")
    if columns is None:
        columns = list(rows[0]) if rows else []
    if fmt == "csv":
        body = [[row[c] for c in columns] for row in rows]
        _atomic_write(path, lambda fh: _csv_dump(fh, columns, body))
    else:
        data = [{c: row[c] for c in columns} for row in rows]
        _atomic_write(path, lambda fh: fh.write(json.dumps(data, indent=2) + "\n"))


def write_json(obj, path) -> None:
    _atomic_write(path, lambda fh: fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n"))


def read_results(path) -> List[Dict]:
    """Parse a results file back; numeric CSV cells become floats."""
    path = Path(path)
    if path.suffix == ".json":
        return json.loads(path.read_text())
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for k, v in row.items():
                try:
                    parsed[k] = float(v)
                except ValueError:
                    parsed[k] = v
            out.append(parsed)
    return out
