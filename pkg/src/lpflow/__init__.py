"""Littlewood-Paley tools for 2-D incompressible Euler and a norm-inflation example
in critical Triebel-Lizorkin spaces F^s_{1,inf}."""

from __future__ import annotations

from .counterexample import CounterexampleSpec, Variant, build_u0, interaction_table, mechanism_constants
from .dynamics import SimulationConfig, simulate
from .filter_bank import FilterBank, filter_bank
from .norms import norm_report, tl_norm
from .spectral_core import RealField, SpectralField, TorusGrid, forward, inverse, make_grid

__version__ = "0.1.0"

__all__ = [
    "CounterexampleSpec",
    "FilterBank",
    "RealField",
    "SimulationConfig",
    "SpectralField",
    "TorusGrid",
    "Variant",
    "build_u0",
    "filter_bank",
    "forward",
    "interaction_table",
    "inverse",
    "make_grid",
    "mechanism_constants",
    "norm_report",
    "simulate",
    "tl_norm",
]
