"""Gravity-capillary water waves with constant vorticity: a pseudospectral
simulator and a numerical workbench for paradifferential calculus."""

from .spectral_core import PeriodicGrid
from .waterwave_core import DiffState, PhysParams, WaveState, random_smooth, single_mode

__all__ = ["PeriodicGrid", "PhysParams", "WaveState", "DiffState", "random_smooth", "single_mode"]
