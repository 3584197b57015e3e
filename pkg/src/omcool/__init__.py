"""Sideband-cooling simulation and calibrated phonon thermometry."""

__version__ = "0.1.0"
