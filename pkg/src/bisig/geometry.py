"""Bistatic geometry primitives and closed-form Doppler relations.

Positions and velocities are plain length-3 numpy arrays (meters, m/s).
All functions are pure and operate on value types, so they are safe to
call concurrently.

Angle conventions
-----------------
The bistatic angle ``beta`` is the angle at the target between the
target->Tx and target->Rx directions (0 = monostatic, pi = forward
scattering).  The bisector is the unit vector halving those two
directions, pointing from the target toward the Tx/Rx side.

Aspect angles (phi, theta) of a velocity vector are spherical
coordinates in a local frame attached to the bisector:

* the azimuth reference axis is the *continuation* of the bisector
  through the target (i.e. minus the bisector), so phi = 0 means the
  target recedes from both antennas;
* the polar axis is a fixed perpendicular to the bisector (the global
  +z axis projected out of the bisector, falling back to +x when the
  bisector is vertical); theta is measured from that axis.

With this frame the signed point-target Doppler

    f_D = -2 |v| cos(beta/2) cos(phi) sin(theta) / wavelength

is identical to the range-rate definition -(1/lambda) d/dt(d_Tx + d_Rx),
so approaching targets produce positive Doppler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import SPEED_OF_LIGHT

__all__ = [
    "BistaticGeometry",
    "AspectAngles",
    "as_vec3",
    "bistatic_angle",
    "bistatic_bisector",
    "aspect_angles",
    "point_doppler",
    "propeller_point_doppler",
    "micro_doppler_spread",
    "far_field_distance",
]


def as_vec3(v) -> np.ndarray:
    """Validate and convert ``v`` to a float64 array of shape (3,)."""
    arr = np.asarray(v, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"expected a length-3 vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"vector components must be finite, got {arr}")
    return arr


@dataclass(frozen=True)
class BistaticGeometry:
    """Transmitter, receiver and target positions of one constellation."""

    tx_pos: np.ndarray
    rx_pos: np.ndarray
    target_pos: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", as_vec3(self.tx_pos))
        object.__setattr__(self, "rx_pos", as_vec3(self.rx_pos))
        object.__setattr__(self, "target_pos", as_vec3(self.target_pos))
        if self.d_tx == 0.0:
            raise ValueError("target coincides with the transmitter")
        if self.d_rx == 0.0:
            raise ValueError("target coincides with the receiver")

    @property
    def d_tx(self) -> float:
        """Range from the target to the transmitter in meters."""
        return float(np.linalg.norm(self.tx_pos - self.target_pos))

    @property
    def d_rx(self) -> float:
        """Range from the target to the receiver in meters."""
        return float(np.linalg.norm(self.rx_pos - self.target_pos))

    def unit_to_tx(self) -> np.ndarray:
        return (self.tx_pos - self.target_pos) / self.d_tx

    def unit_to_rx(self) -> np.ndarray:
        return (self.rx_pos - self.target_pos) / self.d_rx

    def swapped(self) -> "BistaticGeometry":
        """Same constellation with Tx and Rx roles exchanged."""
        return BistaticGeometry(self.rx_pos, self.tx_pos, self.target_pos)


@dataclass(frozen=True)
class AspectAngles:
    """Azimuth/elevation of a velocity vector in the bisector frame."""

    phi: float    # rad, in [-pi, pi]
    theta: float  # rad, in [0, pi]


def bistatic_angle(geom: BistaticGeometry) -> float:
    """Angle at the target between the Tx and Rx directions, in [0, pi]."""
    cos_beta = float(np.dot(geom.unit_to_tx(), geom.unit_to_rx()))
    return math.acos(min(1.0, max(-1.0, cos_beta)))


def bistatic_bisector(geom: BistaticGeometry) -> np.ndarray:
    """Unit vector bisecting the target->Tx and target->Rx directions.

    Undefined for exact forward scattering (beta = pi); that geometry is
    rejected because the halving direction is ambiguous.  Callers that
    need the forward-scatter case should work with path lengths directly.
    """
    s = geom.unit_to_tx() + geom.unit_to_rx()
    norm = float(np.linalg.norm(s))
    if norm < 1e-12:
        raise ValueError("bisector is undefined for forward scattering (beta = pi)")
    return s / norm


def _bisector_frame(geom: BistaticGeometry) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Right-handed frame (x, y, z): x away from the antennas, z = polar axis."""
    b = bistatic_bisector(geom)
    ref = np.array([0.0, 0.0, 1.0])
    z = ref - np.dot(ref, b) * b
    if np.linalg.norm(z) < 1e-9:
        ref = np.array([1.0, 0.0, 0.0])
        z = ref - np.dot(ref, b) * b
    z /= np.linalg.norm(z)
    x = -b
    y = np.cross(z, x)
    return x, y, z


def aspect_angles(geom: BistaticGeometry, velocity) -> AspectAngles:
    """Aspect angles of ``velocity`` relative to the bistatic bisector."""
    v = as_vec3(velocity)
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        raise ValueError("aspect angles are undefined for zero velocity")
    x, y, z = _bisector_frame(geom)
    u = v / speed
    phi = math.atan2(float(np.dot(u, y)), float(np.dot(u, x)))
    theta = math.acos(min(1.0, max(-1.0, float(np.dot(u, z)))))
    return AspectAngles(phi=phi, theta=theta)


def point_doppler(geom: BistaticGeometry, velocity, wavelength: float) -> float:
    """Signed Doppler of a point target moving at ``velocity``, in Hz.

    Evaluates the bistatic projection -2|v| cos(beta/2) cos(phi) sin(theta)
    / wavelength through the equivalent dot-product form
    v . (u_tx + u_rx) / wavelength, which stays well defined at beta = pi
    (forward scattering, where the Doppler vanishes).
    """
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    v = as_vec3(velocity)
    if not np.any(v):
        return 0.0
    s = geom.unit_to_tx() + geom.unit_to_rx()
    return float(np.dot(v, s)) / wavelength


def propeller_point_doppler(
    omega: float,
    l: float,
    phi0: float,
    t: float,
    beta: float,
    theta: float,
    wavelength: float,
) -> float:
    """Instantaneous Doppler of a blade element at radius ``l``, in Hz.

    ``omega`` is the rotation rate in rad/s, ``phi0`` the blade phase at
    t = 0, ``beta`` the bistatic angle and ``theta`` the angle between the
    rotation axis and the bisector.  Valid while the blade length is much
    smaller than both ranges.
    """
    if l < 0.0:
        raise ValueError("blade radius must be non-negative")
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    return (
        -2.0
        * omega
        * l
        * math.cos(beta / 2.0)
        * math.cos(phi0 + omega * t)
        * math.sin(theta)
        / wavelength
    )


def micro_doppler_spread(
    omega: float, L: float, beta: float, theta: float, wavelength: float
) -> float:
    """Two-sided Doppler spread of a rotating blade of length ``L``, in Hz.

    Twice the peak blade-tip Doppler: 4 omega L cos(beta/2) sin(theta) /
    wavelength.  Monotonically non-increasing in beta; zero at beta = pi.
    """
    if L < 0.0:
        raise ValueError("blade length must be non-negative")
    if wavelength <= 0.0:
        raise ValueError("wavelength must be positive")
    return 4.0 * omega * L * math.cos(beta / 2.0) * math.sin(theta) / wavelength


def far_field_distance(diameter: float, frequency: float) -> float:
    """Far-field distance 2 D^2 / lambda for an aperture of size ``diameter``."""
    if diameter < 0.0:
        raise ValueError("diameter must be non-negative")
    if frequency <= 0.0:
        raise ValueError("frequency must be positive")
    wavelength = SPEED_OF_LIGHT / frequency
    return 2.0 * diameter * diameter / wavelength
