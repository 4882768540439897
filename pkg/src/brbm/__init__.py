"""Desk-scale Monte Carlo and PDE toolkit for the frontier of branching
(reflected) Brownian motion: exact event-driven simulation with genealogy,
boundary-crossing analytics, quantile/regression statistics, and the
associated reaction-diffusion solvers.
"""

from ._backend import BACKEND, get_kernels

__version__ = "0.1.0"

__all__ = ["BACKEND", "get_kernels", "__version__"]
