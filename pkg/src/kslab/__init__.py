"""Numerical laboratory for the two-dimensional Keller-Segel chemotaxis system."""

from __future__ import annotations

from .functionals import DiagnosticsRecord, ModelParams, Variant
from .grid import Grid2D, make_grid
from .kernels import KernelKind, KernelSpec
from .solver import InitPreset, PresetKind, StepControl, Termination, init_state, run, step

__all__ = [
    "DiagnosticsRecord",
    "Grid2D",
    "InitPreset",
    "KernelKind",
    "KernelSpec",
    "ModelParams",
    "PresetKind",
    "StepControl",
    "Termination",
    "Variant",
    "init_state",
    "make_grid",
    "run",
    "step",
]
