"""Polar frames and spatially constrained zone predicates.

Zone predicates work with straight-line distances; travel and mileage
accounting elsewhere use Manhattan distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

from .model import Point, TripRequest, single_drive_time

HALF_PI = math.pi / 2
MIN_FACTOR = 0.01


@dataclass(frozen=True)
class PolarFrame:
    pole: Point
    axis: Tuple[float, float]

    @classmethod
    def toward(cls, pole: Point, ref: Point) -> "PolarFrame":
        dx, dy = ref[0] - pole[0], ref[1] - pole[1]
        norm = math.hypot(dx, dy)
        if norm == 0:
            raise ValueError("polar frame undefined: reference point coincides with pole")
        return cls(Point(*pole), (dx / norm, dy / norm))


def signed_angle(u: Tuple[float, float], v: Tuple[float, float]) -> float:
    """Angle in [-pi, pi] rotating u onto v, via atan2(cross, dot)."""
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return math.atan2(cross, dot)


def to_polar(frame: PolarFrame, q: Point) -> Tuple[float, float]:
    dx, dy = q[0] - frame.pole[0], q[1] - frame.pole[1]
    rho = math.hypot(dx, dy)
    if rho == 0:
        return 0.0, 0.0
    return rho, signed_angle(frame.axis, (dx, dy))


def in_source_zone(frame: PolarFrame, src: Point, R_s: float, n_s: float) -> bool:
    """Source-side zone test: pole at the vehicle, axis toward its next stop."""
    return _source_zone(frame.pole, frame.axis, src, R_s, n_s)


def source_zone_toward(pole: Point, head: Point, src: Point, R_s: float, n_s: float) -> bool:
    """``in_source_zone`` with the axis given by a heading point."""
    return _source_zone(pole, (head[0] - pole[0], head[1] - pole[1]), src, R_s, n_s)


def _source_zone(pole, axis, src, R_s, n_s) -> bool:
    dx, dy = src[0] - pole[0], src[1] - pole[1]
    rho = math.hypot(dx, dy)
    if rho > R_s:
        return False
    if rho == 0:
        return True
    ax, ay = axis
    ratio = abs(math.atan2(ax * dy - ay * dx, ax * dx + ay * dy)) / n_s
    if ratio > HALF_PI:
        return False
    return rho <= R_s * math.cos(ratio)


def in_disk(center: Point, q: Point, radius: float) -> bool:
    return math.hypot(q[0] - center[0], q[1] - center[1]) <= radius


def in_oval_zone(pole: Point, nxt: Point, dest: Point, n_d: float) -> bool:
    """Destination-side lobe anchored at route point ``pole`` facing ``nxt``."""
    ax, ay = nxt[0] - pole[0], nxt[1] - pole[1]
    seg = math.hypot(ax, ay)
    if seg == 0:
        return False
    dx, dy = dest[0] - pole[0], dest[1] - pole[1]
    rho = math.hypot(dx, dy)
    if rho > seg:
        return False
    if rho == 0:
        return True
    ratio = abs(math.atan2(ax * dy - ay * dx, ax * dx + ay * dy)) / n_d
    if ratio > HALF_PI:
        return False
    return rho <= seg * (1.0 - math.sin(ratio))


def in_triangle_zone(tail_prev: Point, tail: Point, dest: Point, phi: float) -> bool:
    """Cone of half-angle ``phi`` degrees past the route tail, along tail_prev -> tail."""
    ax, ay = tail[0] - tail_prev[0], tail[1] - tail_prev[1]
    if ax == 0 and ay == 0:
        raise ValueError("triangle zone undefined for a zero-length tail segment")
    dx, dy = dest[0] - tail[0], dest[1] - tail[1]
    if dx == 0 and dy == 0:
        return True
    return abs(signed_angle((ax, ay), (dx, dy))) <= math.radians(phi)


@dataclass(frozen=True)
class AdaptiveState:
    longest_wait: float = 0.0
    longest_trip: float = 0.0
    single_time_of_longest: float = 0.0


def _delay(state: AdaptiveState, C_w: float, C_t: float) -> float:
    return C_w * state.longest_wait + C_t * max(0.0, state.longest_trip - state.single_time_of_longest)


def adaptive_factor(N: float, state: AdaptiveState, C_w: float, C_t: float, tau: float) -> float:
    """Shrunk angle adjustment factor, clamped to [0.01, N]."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    delay = _delay(state, C_w, C_t)
    if delay == 0:
        return N
    n = N - math.expm1(delay / tau)
    return min(N, max(MIN_FACTOR, n))


def onboard_state(riders: Iterable[TripRequest], now: float, speed: float,
                  C_w: float, C_t: float) -> AdaptiveState:
    """Adaptive state of the onboard rider carrying the largest combined delay.

    Waiting time is fixed at pickup; trip time runs from pickup to ``now``.
    """
    best = AdaptiveState()
    best_delay = 0.0
    for r in riders:
        cand = AdaptiveState(
            r.pickup_time - r.assigned_time, now - r.pickup_time, single_drive_time(r, speed)
        )
        d = _delay(cand, C_w, C_t)
        if d > best_delay:
            best, best_delay = cand, d
    return best


def in_trapezoid(frame: PolarFrame, q: Point, near_width: float, far_width: float,
                 depth: float) -> bool:
    """Isosceles trapezoid ahead of the pole, symmetric about the axis.

    The near edge (width ``near_width``) passes through the pole, the far edge
    (width ``far_width``) lies ``depth`` ahead.
    """
    dx, dy = q[0] - frame.pole[0], q[1] - frame.pole[1]
    along = dx * frame.axis[0] + dy * frame.axis[1]
    across = -dx * frame.axis[1] + dy * frame.axis[0]
    if along < 0 or along > depth:
        return False
    half = 0.5 * (near_width + (far_width - near_width) * along / depth)
    return abs(across) <= half
