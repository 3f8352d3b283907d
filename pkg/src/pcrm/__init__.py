"""Polar-coordinate ride matching and a discrete-time ridesharing simulator."""

from .model import Point, RouteStop, TripRequest, Vehicle, Weights, ZoneParams
from .matching import MatchDecision, StrategyConfig, Trapezoid
from .sim import SimConfig, run

__version__ = "0.1.0"

__all__ = [
    "MatchDecision",
    "Point",
    "RouteStop",
    "SimConfig",
    "StrategyConfig",
    "Trapezoid",
    "TripRequest",
    "Vehicle",
    "Weights",
    "ZoneParams",
    "run",
]
