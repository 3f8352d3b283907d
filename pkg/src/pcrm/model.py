"""Domain types shared by the geometry, matching and simulation layers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Set


class Point(NamedTuple):
    """Planar location in kilometers (x east, y north)."""

    x: float
    y: float


def manhattan_dist(a: Point, b: Point) -> float:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def euclid_dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


class RequestState(str, enum.Enum):
    PENDING = "pending"
    ASSIGNED = "assigned"
    ON_BOARD = "on_board"
    COMPLETED = "completed"
    REJECTED = "rejected"


_ALLOWED = {
    RequestState.PENDING: {RequestState.ASSIGNED, RequestState.REJECTED},
    # assigned -> rejected only happens when patience runs until pickup
    RequestState.ASSIGNED: {RequestState.ON_BOARD, RequestState.REJECTED},
    RequestState.ON_BOARD: {RequestState.COMPLETED},
    RequestState.COMPLETED: set(),
    RequestState.REJECTED: set(),
}


class InvalidTransition(ValueError):
    pass


@dataclass
class TripRequest:
    id: int
    origin: Point
    destination: Point
    release_time: float
    patience: float
    state: RequestState = RequestState.PENDING
    assigned_time: Optional[float] = None
    pickup_time: Optional[float] = None
    dropoff_time: Optional[float] = None
    vehicle_id: Optional[int] = None

    def __post_init__(self):
        self.origin = Point(*self.origin)
        self.destination = Point(*self.destination)
        if not self.patience > 0:
            raise ValueError(f"request {self.id}: patience must be positive")
        if self.origin == self.destination:
            raise ValueError(f"request {self.id}: origin equals destination")
        if not all(math.isfinite(c) for c in (*self.origin, *self.destination)):
            raise ValueError(f"request {self.id}: non-finite coordinates")

    @property
    def deadline(self) -> float:
        return self.release_time + self.patience

    def _move(self, new: RequestState, t: Optional[float] = None,
              not_before: Optional[float] = None) -> None:
        if new not in _ALLOWED[self.state]:
            raise InvalidTransition(f"request {self.id}: {self.state.value} -> {new.value}")
        if t is not None and not_before is not None and t < not_before:
            raise InvalidTransition(f"request {self.id}: {new.value} at {t} precedes {not_before}")
        self.state = new

    def assign(self, t: float, vehicle_id: int) -> None:
        self._move(RequestState.ASSIGNED, t, self.release_time)
        self.assigned_time = t
        self.vehicle_id = vehicle_id

    def pick_up(self, t: float) -> None:
        self._move(RequestState.ON_BOARD, t, self.assigned_time)
        self.pickup_time = t

    def drop_off(self, t: float) -> None:
        self._move(RequestState.COMPLETED, t, self.pickup_time)
        self.dropoff_time = t

    def reject(self) -> None:
        self._move(RequestState.REJECTED)
        self.vehicle_id = None

    def fresh(self) -> "TripRequest":
        """Copy carrying only the immutable request data."""
        return TripRequest(self.id, self.origin, self.destination, self.release_time, self.patience)


def single_drive_time(r: TripRequest, speed: float) -> float:
    """Minutes a solo ride from origin to destination would take."""
    if not speed > 0:
        raise ValueError("speed must be positive")
    return manhattan_dist(r.origin, r.destination) / speed


class StopKind(str, enum.Enum):
    PICKUP = "pickup"
    DROPOFF = "dropoff"


class RouteStop(NamedTuple):
    location: Point
    kind: StopKind
    request_id: int


@dataclass
class Vehicle:
    id: int
    position: Point
    capacity: int = 4
    speed: float = 0.35
    route: List[RouteStop] = field(default_factory=list)
    onboard: Set[int] = field(default_factory=set)
    odometer: float = 0.0

    def __post_init__(self):
        self.position = Point(*self.position)

    @property
    def idle(self) -> bool:
        return not self.route

    def route_points(self) -> List[Point]:
        return [s.location for s in self.route]


def route_is_feasible(route, onboard, capacity: int) -> bool:
    """Replay ``route`` from the current onboard set and check capacity and precedence."""
    load = len(onboard)
    if load > capacity:
        return False
    riding = set(onboard)
    picked = set()
    dropped = set()
    for stop in route:
        rid = stop.request_id
        if stop.kind == StopKind.PICKUP:
            if rid in riding or rid in picked:
                return False
            picked.add(rid)
            riding.add(rid)
            load += 1
            if load > capacity:
                return False
        else:
            if rid not in riding or rid in dropped:
                return False
            dropped.add(rid)
            riding.discard(rid)
            load -= 1
    # every rider aboard or picked up along the way is delivered exactly once
    return not riding


@dataclass(frozen=True)
class ZoneParams:
    R_s: float = 0.7
    phi: float = 60.0
    N_s: float = 2.0
    N_d: float = 1.0
    tau: float = 20.0
    C_w: float = 1.1
    C_t: float = 1.0

    def __post_init__(self):
        if not self.R_s > 0:
            raise ValueError("R_s must be positive")
        if not 0 < self.phi <= 90:
            raise ValueError("phi must lie in (0, 90] degrees")
        if not 0 < self.N_s <= 2:
            raise ValueError("N_s must lie in (0, 2]")
        if not 0 < self.N_d <= 1:
            raise ValueError("N_d must lie in (0, 1]")
        if not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass(frozen=True)
class Weights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.1

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("weights must be non-negative")
