"""Thin-film nematic liquid crystal energetics on the five-dimensional
space of symmetric traceless 3x3 tensors.

Subpackages follow the pipeline: tensor algebra (`qtensor`), energy
densities and their zero set (`potential`), the degenerate path metric
and boundary-layer profiles (`metric`), 2D computational domains
(`domain`), discrete energies and their minimization (`solver`), the
weighted-perimeter partition functional (`gamma`), and batch scenario
drivers (`experiments`).
"""

__version__ = "0.1.0"
