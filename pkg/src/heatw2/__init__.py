"""Wasserstein distances between point processes and their limits, with heat-smoothing bounds."""
from .core import Domain, PointConfiguration, ReferenceMeasure, RngStream

__version__ = "0.1.0"
