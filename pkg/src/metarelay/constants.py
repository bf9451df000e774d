"""Physical constants (SI units)."""

import math

SPEED_OF_LIGHT = 299_792_458.0          # m/s
MU_0 = 4.0e-7 * math.pi                 # H/m
EPS_0 = 8.8541878128e-12                # F/m
ETA_0 = 376.730313668                   # free-space wave impedance, ohm


def wavelength(freq_hz: float) -> float:
    """Free-space wavelength in meters."""
    return SPEED_OF_LIGHT / freq_hz
