"""Request-to-vehicle matchers: PCRM plus the DDM and online-greedy baselines.

All three share the same insertion conventions.  A decision ``(i, j)`` on a
route ``[s_0 .. s_{n-1}]`` inserts the pickup before ``s_i`` and the dropoff
before ``s_j`` (``i <= j``; ``i == j`` puts the dropoff right after the
pickup, ``j == n`` appends it).  Added distance is the growth of the
Manhattan route length measured from the vehicle's current position.

Candidates whose added distance differs by less than ``TIE_EPS`` are treated
as tied and resolved by lowest vehicle id, then lowest pickup index, then
lowest dropoff index.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Mapping, Optional, Sequence, Tuple

from .geometry import (
    PolarFrame,
    adaptive_factor,
    in_disk,
    in_oval_zone,
    in_trapezoid,
    in_triangle_zone,
    onboard_state,
    source_zone_toward,
)
from .model import (
    Point,
    RouteStop,
    StopKind,
    TripRequest,
    Vehicle,
    ZoneParams,
    manhattan_dist,
)

log = logging.getLogger(__name__)

TIE_EPS = 1e-9
STRATEGIES = ("pcrm", "ddm", "og")


@dataclass(frozen=True)
class MatchDecision:
    vehicle_id: int
    pickup_index: int
    dropoff_index: int
    added_distance: float


@dataclass(frozen=True)
class Trapezoid:
    near_width: float = 0.4
    far_width: float = 1.6
    depth: float = 2.0

    def __post_init__(self):
        if min(self.near_width, self.far_width, self.depth) <= 0:
            raise ValueError("trapezoid widths and depth must be positive")

    @property
    def reach(self) -> float:
        """Radius of a disk around the vehicle containing the whole trapezoid."""
        return max(math.hypot(self.depth, self.far_width / 2), self.near_width / 2)


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = "pcrm"
    zone: ZoneParams = field(default_factory=ZoneParams)
    ddm_trapezoid: Trapezoid = field(default_factory=Trapezoid)

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")

    @property
    def reach(self) -> Optional[float]:
        """Euclidean radius outside which no vehicle can accept an origin (None = unbounded)."""
        if self.kind == "pcrm":
            return self.zone.R_s
        if self.kind == "ddm":
            return self.ddm_trapezoid.reach
        return None


# -- route arithmetic -------------------------------------------------------

def route_length(pos: Point, points: Sequence[Point]) -> float:
    total = 0.0
    prev = pos
    for p in points:
        total += manhattan_dist(prev, p)
        prev = p
    return total


def _detour(a: Point, s: Point, b: Optional[Point]) -> float:
    if b is None:
        return manhattan_dist(a, s)
    return manhattan_dist(a, s) + manhattan_dist(s, b) - manhattan_dist(a, b)


def loads_before(vehicle: Vehicle) -> List[int]:
    """Occupancy while travelling toward each stop; the last entry is after the final stop."""
    load = len(vehicle.onboard)
    out = [load]
    for stop in vehicle.route:
        load += 1 if stop.kind == StopKind.PICKUP else -1
        out.append(load)
    return out


def pair_cost(pts: Sequence[Point], i: int, j: int, pickup: Point, dropoff: Point) -> float:
    """Added length for inserting pickup/dropoff at ``(i, j)``.

    ``pts`` is the vehicle position followed by the route points.
    """
    n = len(pts) - 1
    a = pts[i]
    b = pts[i + 1] if i < n else None
    if i == j:
        extra = manhattan_dist(a, pickup) + manhattan_dist(pickup, dropoff)
        if b is not None:
            extra += manhattan_dist(dropoff, b) - manhattan_dist(a, b)
        return extra
    c = pts[j + 1] if j < n else None
    return _detour(a, pickup, b) + _detour(pts[j], dropoff, c)


def cheapest_insertion(route: Sequence[Point], vehicle_pos: Point, stop: Point,
                       fixed_after: int = 0,
                       feasible: Optional[Callable[[int], bool]] = None
                       ) -> Optional[Tuple[int, float]]:
    """Single linear scan for the slot (``>= fixed_after``) adding the least length.

    Returns ``(index, added_km)`` or None when no slot is feasible.
    """
    pts = [vehicle_pos, *route]
    n = len(route)
    best = None
    for i in range(fixed_after, n + 1):
        if feasible is not None and not feasible(i):
            continue
        cost = _detour(pts[i], stop, pts[i + 1] if i < n else None)
        if best is None or cost < best[1] - TIE_EPS:
            best = (i, cost)
    return best


def apply_decision(vehicle: Vehicle, request: TripRequest, decision: MatchDecision) -> None:
    i, j = decision.pickup_index, decision.dropoff_index
    route = vehicle.route
    vehicle.route = [
        *route[:i],
        RouteStop(request.origin, StopKind.PICKUP, request.id),
        *route[i:j],
        RouteStop(request.destination, StopKind.DROPOFF, request.id),
        *route[j:],
    ]


def _better(cand: MatchDecision, best: Optional[MatchDecision]) -> bool:
    if best is None or cand.added_distance < best.added_distance - TIE_EPS:
        return True
    if cand.added_distance > best.added_distance + TIE_EPS:
        return False
    return ((cand.vehicle_id, cand.pickup_index, cand.dropoff_index)
            < (best.vehicle_id, best.pickup_index, best.dropoff_index))


def best_pair_insertion(vehicle: Vehicle, request: TripRequest) -> Optional[MatchDecision]:
    """Cheapest capacity-feasible (pickup, dropoff) slot pair for one vehicle."""
    pts = [vehicle.position, *vehicle.route_points()]
    n = len(vehicle.route)
    loads = loads_before(vehicle)
    cap = vehicle.capacity
    best = None
    for i in range(n + 1):
        peak = loads[i]
        if peak + 1 > cap:
            continue
        for j in range(i, n + 1):
            if j > i:
                peak = max(peak, loads[j])
                if peak + 1 > cap:
                    break
            cost = pair_cost(pts, i, j, request.origin, request.destination)
            cand = MatchDecision(vehicle.id, i, j, cost)
            if _better(cand, best):
                best = cand
    return best


def heading_point(vehicle: Vehicle) -> Optional[Point]:
    """First route point distinct from the vehicle position."""
    for stop in vehicle.route:
        if stop.location != vehicle.position:
            return stop.location
    return None


# -- PCRM -------------------------------------------------------------------

def zone_factors(vehicle: Vehicle, zone: ZoneParams, now: float,
                 riders: Optional[Mapping[int, TripRequest]]) -> Tuple[float, float]:
    """Adapted (n_s, n_d) for a vehicle from its onboard riders."""
    if not riders or not vehicle.onboard:
        return zone.N_s, zone.N_d
    state = onboard_state((riders[rid] for rid in vehicle.onboard), now, vehicle.speed,
                          zone.C_w, zone.C_t)
    return (adaptive_factor(zone.N_s, state, zone.C_w, zone.C_t, zone.tau),
            adaptive_factor(zone.N_d, state, zone.C_w, zone.C_t, zone.tau))


def source_gate(vehicle: Vehicle, origin: Point, R_s: float, n_s: float) -> bool:
    head = heading_point(vehicle)
    if head is None:
        return in_disk(vehicle.position, origin, R_s)
    return source_zone_toward(vehicle.position, head, origin, R_s, n_s)


def destination_slots(seq: Sequence[Point], pickup_pos: int, dest: Point,
                      n_d: float, phi: float) -> List[int]:
    """Dropoff indices (original-route convention) whose zone admits ``dest``.

    ``seq`` is the vehicle position followed by the route points *after* the
    pickup was inserted at ``seq[pickup_pos]``.
    """
    slots = []
    last = len(seq) - 1
    for k in range(pickup_pos, last):
        if in_oval_zone(seq[k], seq[k + 1], dest, n_d):
            slots.append(k - 1)
    tail = seq[last]
    prev = next((p for p in reversed(seq[:last]) if p != tail), None)
    if prev is None or in_triangle_zone(prev, tail, dest, phi):
        slots.append(last - 1)
    return slots


def pcrm_vehicle(vehicle: Vehicle, request: TripRequest, zone: ZoneParams,
                 n_s: float, n_d: float) -> Optional[MatchDecision]:
    o, d = request.origin, request.destination
    if vehicle.idle:
        if not in_disk(vehicle.position, o, zone.R_s) or vehicle.capacity < 1:
            return None
        cost = manhattan_dist(vehicle.position, o) + manhattan_dist(o, d)
        return MatchDecision(vehicle.id, 0, 0, cost)
    if not source_gate(vehicle, o, zone.R_s, n_s):
        return None
    loads = loads_before(vehicle)
    cap = vehicle.capacity
    points = vehicle.route_points()
    src = cheapest_insertion(points, vehicle.position, o,
                             feasible=lambda k: loads[k] + 1 <= cap)
    if src is None:
        return None
    i = src[0]
    pts = [vehicle.position, *points]
    seq = [*pts[:i + 1], o, *pts[i + 1:]]
    best = None
    for j in destination_slots(seq, i + 1, d, n_d, zone.phi):
        if max(loads[i:j + 1]) + 1 > cap:
            continue
        cand = MatchDecision(vehicle.id, i, j, pair_cost(pts, i, j, o, d))
        if _better(cand, best):
            best = cand
    return best


def pcrm_match(request: TripRequest, fleet: Iterable[Vehicle], zone: ZoneParams, now: float,
               riders: Optional[Mapping[int, TripRequest]] = None,
               factors: Optional[Callable[[Vehicle], Tuple[float, float]]] = None
               ) -> Optional[MatchDecision]:
    """Two-phase zone gate plus insertion; best qualifying vehicle by added distance.

    ``riders`` maps request ids to requests so onboard riders can shrink the
    zones; without it the initial factors are used.  ``factors`` may supply
    precomputed ``(n_s, n_d)`` per vehicle instead.
    """
    best = None
    for v in fleet:
        if not v.onboard:
            n_s, n_d = zone.N_s, zone.N_d
        elif factors is not None:
            n_s, n_d = factors(v)
        else:
            n_s, n_d = zone_factors(v, zone, now, riders)
        cand = pcrm_vehicle(v, request, zone, n_s, n_d)
        if cand is not None and _better(cand, best):
            best = cand
    return best


# -- baselines --------------------------------------------------------------

def ddm_gate(vehicle: Vehicle, origin: Point, trap: Trapezoid) -> bool:
    head = heading_point(vehicle)
    if head is None:
        return in_disk(vehicle.position, origin, trap.depth)
    frame = PolarFrame.toward(vehicle.position, head)
    return in_trapezoid(frame, origin, trap.near_width, trap.far_width, trap.depth)


def ddm_match(request: TripRequest, fleet: Iterable[Vehicle], config: StrategyConfig,
              now: float) -> Optional[MatchDecision]:
    best = None
    for v in fleet:
        if not ddm_gate(v, request.origin, config.ddm_trapezoid):
            continue
        cand = best_pair_insertion(v, request)
        if cand is not None and _better(cand, best):
            best = cand
    return best


def og_match(request: TripRequest, fleet: Iterable[Vehicle], now: float) -> Optional[MatchDecision]:
    best = None
    for v in fleet:
        cand = best_pair_insertion(v, request)
        if cand is not None and _better(cand, best):
            best = cand
    return best


def match(config: StrategyConfig, request: TripRequest, fleet: Iterable[Vehicle], now: float,
          riders: Optional[Mapping[int, TripRequest]] = None,
          factors: Optional[Callable[[Vehicle], Tuple[float, float]]] = None
          ) -> Optional[MatchDecision]:
    if config.kind == "pcrm":
        return pcrm_match(request, fleet, config.zone, now, riders, factors)
    if config.kind == "ddm":
        return ddm_match(request, fleet, config, now)
    return og_match(request, fleet, now)
