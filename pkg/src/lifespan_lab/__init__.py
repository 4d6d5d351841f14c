"""Numerical laboratory for u_tt - u_xx = |u_x|^p / <x>^a with small data.

Modules: ``model`` (problem and data), ``solver`` (characteristic-grid
evolution and lifespan estimation), ``picard`` (integral-equation
iteration), ``functionals`` (H, F, G monitors), ``odelab`` (blow-up
lemmas and their ODEs) and ``harness`` (scans, fits, output).
"""
from .model import ProblemSpec, free_solution, preset_data
from .solver import estimate_lifespan, evolve

__all__ = ["ProblemSpec", "free_solution", "preset_data", "evolve", "estimate_lifespan"]
__version__ = "0.1.0"
