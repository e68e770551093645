"""Entanglement echo of quenched free-fermion topological insulators.

The package computes, for a sudden mass quench of a two-band lattice model,
the time-dependent subsystem correlation matrix, its entanglement spectrum,
the entanglement echo and its rate, the whole-system Loschmidt rate, and
detects the singular times of these rates. A small exact many-body module
cross-checks the single-particle formalism on short chains.
"""
from .config import Config, load_config, parse_config
from .correlation import QuenchProtocol, correlation, select_pathway
from .entanglement import (
    EchoPoint,
    entanglement_echo,
    entanglement_entropy,
    entanglement_spectrum,
    momentum_resolved_echo,
    particle_number_variance,
)
from .estimator import EchoTransformer
from .exceptions import *  # noqa: F401,F403
from .loschmidt import critical_momenta, loschmidt_general, loschmidt_product
from .models import Gauge, Kind, ModelSpec
from .series import SeriesBundle, build_series, build_series_2d
from .transitions import DetectorSettings, EventKind, TransitionEvent, detect_transitions

__version__ = "0.1.0"

__all__ = [
    "Config",
    "load_config",
    "parse_config",
    "QuenchProtocol",
    "correlation",
    "select_pathway",
    "EchoPoint",
    "entanglement_echo",
    "entanglement_entropy",
    "entanglement_spectrum",
    "momentum_resolved_echo",
    "particle_number_variance",
    "EchoTransformer",
    "critical_momenta",
    "loschmidt_general",
    "loschmidt_product",
    "Gauge",
    "Kind",
    "ModelSpec",
    "SeriesBundle",
    "build_series",
    "build_series_2d",
    "DetectorSettings",
    "EventKind",
    "TransitionEvent",
    "detect_transitions",
]
