"""Inconvenience, mileage-saving, serving-ability and unified indexes."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

from .model import RequestState, TripRequest, Weights, manhattan_dist, single_drive_time


class MetricsError(ValueError):
    pass


def _timing(r: TripRequest, speed: float) -> Tuple[float, float, float]:
    if r.assigned_time is None or r.pickup_time is None or r.dropoff_time is None:
        raise MetricsError(f"served request {r.id} is missing timing")
    return (r.pickup_time - r.assigned_time, r.dropoff_time - r.pickup_time,
            single_drive_time(r, speed))


def served(requests: Iterable[TripRequest]):
    return [r for r in requests if r.state == RequestState.COMPLETED]


def ici(requests: Iterable[TripRequest], C_w: float, C_t: float, speed: float,
        clamp: bool = True) -> float:
    """Summed inconvenience over served requests, in weighted minutes.

    With ``clamp`` the trip-time excess never goes below zero.
    """
    total = 0.0
    for r in served(requests):
        wait, trip, solo = _timing(r, speed)
        excess = trip - solo
        if clamp:
            excess = max(0.0, excess)
        total += C_w * wait + C_t * excess
    return total


def msi(mileage: Iterable[Tuple[float, float]], n_served: Optional[int] = None) -> float:
    """Mileage saving from per-vehicle ``(single, share)`` kilometers."""
    single = share = 0.0
    for s, m in mileage:
        single += s
        share += m
    if share == 0:
        if single > 0 or n_served:
            raise MetricsError("vehicles served riders without travelling")
        return 0.0
    if n_served == 0:
        return 0.0
    return (single - share) / share


def sai(requests: Sequence[TripRequest]) -> float:
    if not requests:
        return 1.0
    return len(served(requests)) / len(requests)


def ui(msi_value: float, sai_value: float, ici_mean: float, weights: Weights) -> float:
    return weights.alpha * msi_value + weights.beta * sai_value - weights.gamma * ici_mean


@dataclass
class MetricsReport:
    total_requests: int = 0
    served: int = 0
    rejected: int = 0
    ici_total: float = 0.0
    ici_total_unclamped: float = 0.0
    ici_mean: float = 0.0
    msi: float = 0.0
    sai: float = 1.0
    ui: float = 0.0
    mean_wait_minutes: float = 0.0
    mean_extra_trip_minutes: float = 0.0
    m_single: float = 0.0
    m_share: float = 0.0
    per_hour: Dict[int, Dict[str, float]] = field(default_factory=dict)

    def flat(self) -> Dict[str, float]:
        out = asdict(self)
        out.pop("per_hour")
        return out


def summarize(requests: Sequence[TripRequest], mileage: Mapping[int, Tuple[float, float]],
              speed: float, C_w: float, C_t: float, weights: Weights) -> MetricsReport:
    """Headline indexes from final request states and per-vehicle mileage."""
    done = served(requests)
    n = len(done)
    total = ici(done, C_w, C_t, speed)
    raw = ici(done, C_w, C_t, speed, clamp=False)
    mean = total / n if n else 0.0
    m = msi(mileage.values(), n)
    s = sai(requests)
    waits = extras = 0.0
    for r in done:
        w, t, solo = _timing(r, speed)
        waits += w
        extras += t - solo
    return MetricsReport(
        total_requests=len(requests),
        served=n,
        rejected=sum(r.state == RequestState.REJECTED for r in requests),
        ici_total=total,
        ici_total_unclamped=raw,
        ici_mean=mean,
        msi=m,
        sai=s,
        ui=ui(m, s, mean, weights),
        mean_wait_minutes=waits / n if n else 0.0,
        mean_extra_trip_minutes=extras / n if n else 0.0,
        m_single=sum(v[0] for v in mileage.values()),
        m_share=sum(v[1] for v in mileage.values()),
    )


def report_from_log(log, requests: Mapping[int, TripRequest], speed: float,
                    C_w: float, C_t: float, weights: Weights) -> MetricsReport:
    """Rebuild request timing and vehicle mileage from an event log and score them.

    ``requests`` supplies only origins, destinations and patience; lifecycle
    timestamps are taken from the log.  The per-hour breakdown buckets
    requests by release hour and mileage by the hour in which each recorded
    movement ended.
    """
    replay: Dict[int, TripRequest] = {}
    single: Dict[int, float] = defaultdict(float)
    share: Dict[int, float] = defaultdict(float)
    released_at: Dict[int, float] = {}
    hour_single: Dict[int, float] = defaultdict(float)
    hour_share: Dict[int, float] = defaultdict(float)
    for ev in log:
        if ev.kind == "moved":
            share[ev.vehicle_id] += ev.distance
            hour_share[int(ev.time // 60)] += ev.distance
            continue
        rid = ev.request_id
        if ev.kind == "released":
            replay[rid] = requests[rid].fresh()
            released_at[rid] = ev.time
        elif ev.kind == "assigned":
            replay[rid].assign(ev.time, ev.vehicle_id)
        elif ev.kind == "picked_up":
            replay[rid].pick_up(ev.time)
        elif ev.kind == "dropped_off":
            r = replay[rid]
            r.drop_off(ev.time)
            d = manhattan_dist(r.origin, r.destination)
            single[ev.vehicle_id] += d
            hour_single[int(ev.time // 60)] += d
        elif ev.kind == "rejected":
            replay[rid].reject()
    vehicles = set(single) | set(share)
    mileage = {v: (single.get(v, 0.0), share.get(v, 0.0)) for v in sorted(vehicles)}
    reqs = list(replay.values())
    report = summarize(reqs, mileage, speed, C_w, C_t, weights)

    by_hour: Dict[int, list] = defaultdict(list)
    for r in reqs:
        by_hour[int(r.release_time // 60)].append(r)
    hours = sorted(set(by_hour) | set(hour_share))
    for h in hours:
        group = by_hour.get(h, [])
        done = served(group)
        mean = ici(done, C_w, C_t, speed) / len(done) if done else 0.0
        hs = hour_share.get(h, 0.0)
        m = (hour_single.get(h, 0.0) - hs) / hs if hs > 0 else 0.0
        s = sai(group)
        report.per_hour[h] = {"msi": m, "sai": s, "ici_mean": mean, "ui": ui(m, s, mean, weights),
                              "requests": len(group), "served": len(done)}
    return report
