"""Nodal intersections, Grauert-tube continuation and boundary quantum ergodicity numerics."""

__version__ = "0.1.0"

from . import continuation, eigensolver, geometry, microlocal, specfun, zeros  # noqa: E402,F401

__all__ = ["__version__", "continuation", "eigensolver", "geometry", "microlocal", "specfun",
           "zeros"]
