"""Bistatic reflectivity and micro-Doppler toolkit.

Simulates drone-like scenes (point scatterers plus rotating propellers)
under bistatic geometries with OFDM illumination or VNA-style frequency
sweeps, and provides the matching processing chains: channel estimation,
slow-time extraction, Doppler line/spread analysis, and the static
reflectivity pipeline (calibration, background subtraction, time gating,
normalization).
"""

__version__ = "0.1.0"

SPEED_OF_LIGHT = 3.0e8  # m/s; matches the rounded value used by the reference results
