"""Discrete-time dispatch simulation.

Each tick releases new requests, tries to match every pending request in
arrival order, expires requests past their patience, then moves vehicles
along x-then-y Manhattan legs, firing pickups and dropoffs at their exact
arrival times.  Once the horizon is reached no more assignments happen and
vehicles drain their routes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .matching import StrategyConfig, apply_decision, match, zone_factors
from .metrics import MetricsReport, report_from_log
from .model import (
    Point,
    RequestState,
    StopKind,
    TripRequest,
    Vehicle,
    Weights,
    manhattan_dist,
)

log = logging.getLogger(__name__)

EXPIRY_MODES = ("assignment", "pickup")
_ARRIVE_EPS = 1e-12


@dataclass(frozen=True)
class SimConfig:
    tick: float = 0.1
    horizon: float = 120.0
    fleet_size: int = 200
    capacity: int = 4
    speed: float = 0.35
    patience: float = 20.0
    strategy: StrategyConfig = field(default_factory=StrategyConfig)
    weights: Weights = field(default_factory=Weights)
    seed: int = 0
    # x_min, y_min, x_max, y_max in km; initial vehicle positions are drawn here
    region: Tuple[float, float, float, float] = (0.0, 0.0, 10.0, 10.0)
    expiry: str = "assignment"
    max_drain: float = 1440.0

    def __post_init__(self):
        if not self.tick > 0 or not self.horizon > 0:
            raise ValueError("tick and horizon must be positive")
        if self.fleet_size <= 0 or self.capacity <= 0:
            raise ValueError("fleet_size and capacity must be positive")
        if not self.speed > 0 or not self.patience > 0:
            raise ValueError("speed and patience must be positive")
        if self.expiry not in EXPIRY_MODES:
            raise ValueError(f"expiry must be one of {EXPIRY_MODES}")
        x0, y0, x1, y1 = self.region
        if not (x1 > x0 and y1 > y0):
            raise ValueError("region must have positive extent")


class Event(NamedTuple):
    time: float
    kind: str
    request_id: Optional[int] = None
    vehicle_id: Optional[int] = None
    # movement records only: waypoints of an x-then-y path and its length
    path: Optional[Tuple[Point, ...]] = None
    distance: float = 0.0


class EventLog:
    """Append-only, time-ordered record of everything that happened in a run."""

    def __init__(self):
        self._events: List[Event] = []

    def append(self, ev: Event) -> None:
        if self._events and ev.time < self._events[-1].time:
            raise ValueError(f"event at {ev.time} precedes {self._events[-1].time}")
        self._events.append(ev)

    def extend(self, events) -> None:
        for ev in events:
            self.append(ev)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __len__(self) -> int:
        return len(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, EventLog) and self._events == other._events

    def of_kind(self, kind: str) -> List[Event]:
        return [e for e in self._events if e.kind == kind]


class _Leg:
    """Movement toward one route head, flushed as a single record.

    A leg is monotone in x and y, so its length is the Manhattan length of
    its corner points.
    """

    __slots__ = ("target", "points")

    def __init__(self, start: Point):
        self.target = None
        self.points = [start]

    def extend(self, p: Point) -> None:
        pts = self.points
        if len(pts) >= 2:
            a, b = pts[-2], pts[-1]
            if (a[1] == b[1] == p[1]) or (a[0] == b[0] == p[0]):
                pts[-1] = p
                return
        if p != pts[-1]:
            pts.append(p)

    @property
    def distance(self) -> float:
        pts = self.points
        return sum(manhattan_dist(a, b) for a, b in zip(pts, pts[1:]))


def validate_workload(requests: Sequence[TripRequest]) -> None:
    prev = -math.inf
    seen = set()
    for r in requests:
        if r.release_time < 0 or not math.isfinite(r.release_time):
            raise ValueError(f"request {r.id}: invalid release time {r.release_time}")
        if r.release_time < prev:
            raise ValueError("workload must be sorted by release_time")
        if r.id in seen:
            raise ValueError(f"duplicate request id {r.id}")
        seen.add(r.id)
        prev = r.release_time


def initial_fleet(config: SimConfig) -> List[Vehicle]:
    rng = np.random.default_rng(config.seed)
    x0, y0, x1, y1 = config.region
    xs = rng.uniform(x0, x1, config.fleet_size)
    ys = rng.uniform(y0, y1, config.fleet_size)
    return [Vehicle(i, Point(float(x), float(y)), config.capacity, config.speed)
            for i, (x, y) in enumerate(zip(xs, ys))]


def _step_toward(pos: Point, target: Point, budget: float) -> Tuple[List[Point], float]:
    """Move up to ``budget`` km from pos toward target, x first then y.

    Returns the waypoints reached (excluding ``pos``) and the distance used.
    """
    pts = []
    used = 0.0
    x, y = pos
    dx = target[0] - x
    if dx:
        step = min(abs(dx), budget)
        x = target[0] if step == abs(dx) else x + math.copysign(step, dx)
        used += step
        budget -= step
        pts.append(Point(x, y))
    dy = target[1] - y
    if dy and budget > 0:
        step = min(abs(dy), budget)
        y = target[1] if step == abs(dy) else y + math.copysign(step, dy)
        used += step
        pts.append(Point(x, y))
    return pts, used


class Simulation:
    def __init__(self, config: SimConfig, requests: Sequence[TripRequest],
                 fleet: Optional[List[Vehicle]] = None):
        validate_workload(requests)
        self.config = config
        inside = [r.fresh() for r in requests if r.release_time < config.horizon]
        if len(inside) < len(requests):
            log.info("ignoring %d requests released after the horizon", len(requests) - len(inside))
        self.requests = inside
        self.by_id: Dict[int, TripRequest] = {r.id: r for r in inside}
        self.fleet = fleet if fleet is not None else initial_fleet(config)
        self._vehicles = {v.id: v for v in self.fleet}
        self.log = EventLog()
        self.pending: List[TripRequest] = []
        self._next = 0
        self._legs: Dict[int, _Leg] = {v.id: _Leg(v.position) for v in self.fleet}
        self.now = 0.0

    # -- per-tick phases ----------------------------------------------------

    def release(self, now: float) -> None:
        reqs = self.requests
        while self._next < len(reqs) and reqs[self._next].release_time <= now:
            r = reqs[self._next]
            self.pending.append(r)
            self.log.append(Event(now, "released", r.id))
            self._next += 1

    def _candidates(self, origins: np.ndarray) -> Optional[List[np.ndarray]]:
        reach = self.config.strategy.reach
        if reach is None or not self.pending:
            return None
        pos = np.array([v.position for v in self.fleet])
        d2 = ((origins[:, None, :] - pos[None, :, :]) ** 2).sum(axis=2)
        # conservative: the exact zone predicates run afterwards
        limit = (reach * (1 + 1e-9) + 1e-12) ** 2
        return [np.flatnonzero(row <= limit) for row in d2]

    def assign(self, now: float) -> None:
        if not self.pending:
            return
        origins = np.array([r.origin for r in self.pending])
        cands = self._candidates(origins)
        still = []
        strategy = self.config.strategy
        cache: Dict[int, Tuple[float, float]] = {}

        def factors(v: Vehicle) -> Tuple[float, float]:
            # onboard sets do not change while assigning, so one value per tick
            if v.id not in cache:
                cache[v.id] = zone_factors(v, strategy.zone, now, self.by_id)
            return cache[v.id]

        for k, r in enumerate(self.pending):
            fleet = self.fleet if cands is None else [self.fleet[i] for i in cands[k]]
            decision = match(strategy, r, fleet, now, self.by_id, factors) if fleet else None
            if decision is None:
                still.append(r)
                continue
            v = self._vehicles[decision.vehicle_id]
            apply_decision(v, r, decision)
            r.assign(now, v.id)
            self.log.append(Event(now, "assigned", r.id, v.id, distance=decision.added_distance))
        self.pending = still

    def expire(self, now: float, everything: bool = False) -> None:
        still = []
        for r in self.pending:
            if everything or now > r.deadline:
                r.reject()
                self.log.append(Event(now, "rejected", r.id))
            else:
                still.append(r)
        self.pending = still
        if self.config.expiry != "pickup":
            return
        for v in self.fleet:
            late = {s.request_id for s in v.route
                    if s.kind == StopKind.PICKUP and now > self.by_id[s.request_id].deadline}
            if not late:
                continue
            v.route = [s for s in v.route if s.request_id not in late]
            for rid in sorted(late):
                self.by_id[rid].reject()
                self.log.append(Event(now, "rejected", rid, v.id))

    def advance_vehicle(self, v: Vehicle, dt: float, now: float) -> List[Event]:
        """Move ``v`` for ``dt`` minutes, serving stops it reaches on the way."""
        events: List[Event] = []
        budget = v.speed * dt
        travelled = 0.0
        leg = self._legs[v.id]
        while v.route:
            stop = v.route[0]
            if leg.target is not stop:
                events.extend(self._flush(v, now + travelled / v.speed))
                leg = self._legs[v.id]
                leg.target = stop
            remaining = manhattan_dist(v.position, stop.location)
            if remaining <= budget + _ARRIVE_EPS:
                pts, _ = _step_toward(v.position, stop.location, math.inf)
                for q in pts:
                    leg.extend(q)
                travelled += remaining
                budget = max(0.0, budget - remaining)
                v.odometer += remaining
                v.position = stop.location
                t = min(now + travelled / v.speed, now + dt)
                events.extend(self._flush(v, t))
                v.route.pop(0)
                events.append(self._serve(v, stop, t))
                leg = self._legs[v.id]
                continue
            pts, used = _step_toward(v.position, stop.location, budget)
            if not pts:
                # budget used up exactly at the previous stop
                break
            for q in pts:
                leg.extend(q)
            travelled += used
            v.odometer += used
            v.position = pts[-1]
            break
        return events

    def _flush(self, v: Vehicle, t: float) -> List[Event]:
        leg = self._legs[v.id]
        out = []
        if len(leg.points) > 1:
            out.append(Event(t, "moved", None, v.id, tuple(leg.points), leg.distance))
        self._legs[v.id] = _Leg(v.position)
        return out

    def _serve(self, v: Vehicle, stop, t: float) -> Event:
        r = self.by_id[stop.request_id]
        if stop.kind == StopKind.PICKUP:
            r.pick_up(t)
            v.onboard.add(r.id)
            return Event(t, "picked_up", r.id, v.id)
        r.drop_off(t)
        v.onboard.discard(r.id)
        return Event(t, "dropped_off", r.id, v.id)

    def move_all(self, now: float) -> None:
        events = []
        for v in self.fleet:
            if v.route:
                events.extend(self.advance_vehicle(v, self.config.tick, now))
        events.sort(key=lambda e: e.time)
        self.log.extend(events)

    # -- driver -------------------------------------------------------------

    def run(self) -> "SimResult":
        cfg = self.config
        k = 0
        while k * cfg.tick < cfg.horizon:
            now = k * cfg.tick
            self.release(now)
            self.assign(now)
            self.expire(now)
            self.move_all(now)
            k += 1
        now = k * cfg.tick
        self.release(now)
        self.expire(now, everything=True)
        limit = cfg.horizon + cfg.max_drain
        while any(v.route for v in self.fleet):
            if now > limit:
                raise RuntimeError("vehicles failed to drain their routes")
            self.expire(now)
            self.move_all(now)
            k += 1
            now = k * cfg.tick
        events = []
        for v in self.fleet:
            events.extend(self._flush(v, now))
        events.sort(key=lambda e: e.time)
        self.log.extend(events)
        self.now = now
        zone = cfg.strategy.zone
        report = report_from_log(self.log, self.by_id, cfg.speed, zone.C_w, zone.C_t, cfg.weights)
        return SimResult(self.log, report, self.requests, self.fleet)


@dataclass
class SimResult:
    log: EventLog
    report: MetricsReport
    requests: List[TripRequest]
    fleet: List[Vehicle]

    def in_flight(self) -> int:
        return sum(r.state not in (RequestState.COMPLETED, RequestState.REJECTED)
                   for r in self.requests)


def run(config: SimConfig, requests: Sequence[TripRequest],
        fleet: Optional[List[Vehicle]] = None) -> SimResult:
    return Simulation(config, requests, fleet).run()
