"""Layout of hierarchical wiring trees around fixed pipelines on 3D grids."""

__version__ = "0.1.0"
