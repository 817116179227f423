"""Numerical toolkit for bubbling and critical points at infinity in the
fractional Nirenberg problem ``P_gamma u = K u^{(n+2gamma)/(n-2gamma)}`` on S^n.

Modules
-------
geometry      sphere points, charts and quadrature
spectral      zonal harmonic expansions and the operator P_gamma
bubbles       standard bubbles, interaction quantities, constants table
curvature     curvature expressions, derivatives and critical points
functional    the Euler-Lagrange functional J and its expansions
catalog       critical points at infinity and the existence criterion
flow          reduced descent flow on bubble parameters
cli           command-line entry point
"""
from .geometry import ProblemParams
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["ProblemParams", "BACKEND", "__version__"]
