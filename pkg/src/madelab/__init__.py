"""Madelung hydrodynamics, Bohm streamlines and fluctuating trajectories on spectral grids."""

__version__ = "0.1.0"
