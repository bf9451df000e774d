"""Tunable Huygens-metasurface mmWave relay simulator."""

__version__ = "0.1.0"
