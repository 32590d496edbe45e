"""Concentration bounds for time averages of uniformly ergodic 1-D diffusions."""

__version__ = "0.1.0"

from . import bounds, ergodicity, mc, models, poisson, quadrature  # noqa: F401
