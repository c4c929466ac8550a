"""Random-field mean-field spherical model.

Library and CLI for the mean-field spherical model in a random external
field: exponential-tilting analysis and phase structure, exact finite-volume
Gibbs sampling through the mixture/transport representation, quantitative
weight and Laplace asymptotics, and metastate experiments (Aizenman-Wehr
replica statistics, Newman-Stein empirical metastates, the arcsine law, and
chaotic size dependence).
"""

from .kernels import backend_name

__version__ = "0.1.0"

__all__ = ["__version__", "backend_name"]
