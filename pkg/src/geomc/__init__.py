"""Geodesic Monte Carlo on embedded manifolds, with exact baseline samplers."""
from .exceptions import (
    ConfigError,
    DegenerateGeodesicError,
    DegenerateSeriesError,
    DomainError,
    GeomcError,
    InvalidPointError,
    KickError,
    NumericError,
    ParameterError,
)
from .manifolds import ManifoldSpec, PhaseState, geodesic_flow, project_to_tangent
from .sampler import GmcConfig, RunRecord, sample, sample_on_ball
from .targets import Target
from .tempering import TemperingLadder, parallel_tempering

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateGeodesicError",
    "DegenerateSeriesError",
    "DomainError",
    "GeomcError",
    "GmcConfig",
    "InvalidPointError",
    "KickError",
    "ManifoldSpec",
    "NumericError",
    "ParameterError",
    "PhaseState",
    "RunRecord",
    "Target",
    "TemperingLadder",
    "geodesic_flow",
    "parallel_tempering",
    "project_to_tangent",
    "sample",
    "sample_on_ball",
]
