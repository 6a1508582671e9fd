"""Target and clutter models: point scatterers, propellers, field ratios.

A :class:`Scene` is a plain container of static scatterers, rotating
propellers and background (chamber clutter) scatterers.  Propellers are
expanded on demand into per-blade-element point scatterers, which is the
only place motion enters the forward model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_vec3

__all__ = [
    "PolarimetricCoeff",
    "PointScatterer",
    "Propeller",
    "Scene",
    "POLARIZATIONS",
    "propeller_point_cloud",
    "rotate_target_about_z",
    "reflectivity",
    "rcs_from_fields",
]

#: Channel order used everywhere a polarization axis appears.
POLARIZATIONS = ("HH", "HV", "VH", "VV")

_POL_INDEX = {"H": 0, "V": 1}


@dataclass(frozen=True)
class PolarimetricCoeff:
    """2x2 complex scattering matrix indexed [receive pol, transmit pol].

    Row/column order is (H, V); e.g. element("HV") is the amplitude
    received on H for V illumination.  Values are dimensionless field
    amplitude ratios.
    """

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValueError(f"scattering matrix must be 2x2, got {m.shape}")
        if not np.all(np.isfinite(m.view(float))):
            raise ValueError("scattering matrix entries must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def scalar(cls, amplitude: complex) -> "PolarimetricCoeff":
        """Identity-scaled (polarization preserving) coefficient."""
        return cls(np.eye(2, dtype=complex) * amplitude)

    def element(self, pol: str) -> complex:
        """Entry for a two-letter channel name such as ``"HV"``."""
        try:
            rx, tx = pol[0].upper(), pol[1].upper()
            return complex(self.matrix[_POL_INDEX[rx], _POL_INDEX[tx]])
        except (KeyError, IndexError):
            raise ValueError(f"unknown polarization channel {pol!r}") from None

    def is_reciprocal(self, tol: float = 0.0) -> bool:
        return bool(abs(self.matrix[0, 1] - self.matrix[1, 0]) <= tol)

    def scaled(self, factor: complex) -> "PolarimetricCoeff":
        return PolarimetricCoeff(self.matrix * factor)


@dataclass(frozen=True)
class PointScatterer:
    """Idealized point target with position, velocity and scattering matrix."""

    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    coeff: PolarimetricCoeff = field(default_factory=lambda: PolarimetricCoeff.scalar(1.0))

    def __post_init__(self):
        object.__setattr__(self, "position", as_vec3(self.position))
        object.__setattr__(self, "velocity", as_vec3(self.velocity))


@dataclass(frozen=True)
class Propeller:
    """Rotor of ``n_blades`` straight blades spinning about ``rotation_axis``.

    Blades are equally spaced by 2 pi / n_blades, share the rotation phase
    ``phase0`` at t = 0, and are discretized into ``points_per_blade``
    elements at radii k * radius_m / points_per_blade (k = 1..points_per_blade),
    so the outermost element sits exactly at the tip.  Each element carries
    coeff / points_per_blade, keeping the summed blade return independent of
    the discretization density.
    """

    center: np.ndarray
    rotation_axis: np.ndarray
    n_blades: int
    radius_m: float
    f_rot_hz: float
    phase0_rad: float = 0.0
    points_per_blade: int = 16
    coeff: PolarimetricCoeff = field(default_factory=lambda: PolarimetricCoeff.scalar(1.0))

    def __post_init__(self):
        object.__setattr__(self, "center", as_vec3(self.center))
        axis = as_vec3(self.rotation_axis)
        norm = float(np.linalg.norm(axis))
        if norm == 0.0:
            raise ValueError("rotation axis must be a nonzero vector")
        object.__setattr__(self, "rotation_axis", axis / norm)
        if self.n_blades < 1:
            raise ValueError("n_blades must be >= 1")
        if self.radius_m <= 0.0:
            raise ValueError("radius_m must be positive")
        if self.f_rot_hz < 0.0:
            raise ValueError("f_rot_hz must be non-negative")
        if self.points_per_blade < 1:
            raise ValueError("points_per_blade must be >= 1")

    @property
    def omega(self) -> float:
        """Rotation rate in rad/s."""
        return 2.0 * math.pi * self.f_rot_hz

    @property
    def tip_speed(self) -> float:
        """Tangential speed of the blade tip in m/s."""
        return self.omega * self.radius_m

    def blade_plane(self) -> tuple[np.ndarray, np.ndarray]:
        """Deterministic orthonormal basis (e1, e2) of the rotation plane.

        (e1, e2, rotation_axis) is right-handed; e1 is derived from the
        global +z axis, or +x when the rotation axis is vertical.
        """
        n = self.rotation_axis
        ref = np.array([0.0, 0.0, 1.0])
        e1 = np.cross(ref, n)
        if np.linalg.norm(e1) < 1e-9:
            e1 = np.cross(np.array([1.0, 0.0, 0.0]), n)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        return e1, e2

    def element_radii(self) -> np.ndarray:
        k = np.arange(1, self.points_per_blade + 1, dtype=float)
        return k * self.radius_m / self.points_per_blade

    def element_angles(self, t: float) -> np.ndarray:
        """Blade angles at time ``t``, one per blade, in radians."""
        b = np.arange(self.n_blades, dtype=float)
        return self.phase0_rad + 2.0 * math.pi * b / self.n_blades + self.omega * t


@dataclass(frozen=True)
class Scene:
    """Scatterer collection split into target and chamber background."""

    static_scatterers: tuple[PointScatterer, ...] = ()
    propellers: tuple[Propeller, ...] = ()
    background_scatterers: tuple[PointScatterer, ...] = ()
    reciprocal: bool = False

    def __post_init__(self):
        object.__setattr__(self, "static_scatterers", tuple(self.static_scatterers))
        object.__setattr__(self, "propellers", tuple(self.propellers))
        object.__setattr__(self, "background_scatterers", tuple(self.background_scatterers))
        if self.reciprocal:
            for s in self.static_scatterers + self.background_scatterers:
                if not s.coeff.is_reciprocal():
                    raise ValueError("scene flagged reciprocal but a scatterer has HV != VH")
            for p in self.propellers:
                if not p.coeff.is_reciprocal():
                    raise ValueError("scene flagged reciprocal but a propeller has HV != VH")

    def is_empty(self) -> bool:
        return not (self.static_scatterers or self.propellers or self.background_scatterers)

    def background_only(self) -> "Scene":
        return Scene(
            background_scatterers=self.background_scatterers, reciprocal=self.reciprocal
        )

    def target_only(self) -> "Scene":
        return Scene(
            static_scatterers=self.static_scatterers,
            propellers=self.propellers,
            reciprocal=self.reciprocal,
        )

    def max_speed(self) -> float:
        """Largest instantaneous scatterer speed in the scene, m/s."""
        speeds = [float(np.linalg.norm(s.velocity)) for s in self.static_scatterers]
        speeds += [float(np.linalg.norm(s.velocity)) for s in self.background_scatterers]
        speeds += [p.tip_speed for p in self.propellers]
        return max(speeds, default=0.0)


def propeller_point_cloud(prop: Propeller, t: float) -> list[PointScatterer]:
    """Expand a propeller into blade-element point scatterers at time ``t``.

    Returns n_blades * points_per_blade scatterers.  The element at radius
    l on blade b sits at angle phase0 + 2 pi b / n_blades + omega t in the
    rotation plane and moves tangentially with speed omega * l.
    """
    if not math.isfinite(t):
        raise ValueError("time must be finite")
    e1, e2 = prop.blade_plane()
    radii = prop.element_radii()
    angles = prop.element_angles(t)
    elem_coeff = prop.coeff.scaled(1.0 / prop.points_per_blade)

    cloud = []
    for ang in angles:
        radial = math.cos(ang) * e1 + math.sin(ang) * e2
        tangential = -math.sin(ang) * e1 + math.cos(ang) * e2
        for l in radii:
            cloud.append(
                PointScatterer(
                    position=prop.center + l * radial,
                    velocity=prop.omega * l * tangential,
                    coeff=elem_coeff,
                )
            )
    return cloud


def rotate_target_about_z(scene: Scene, angle_rad: float) -> Scene:
    """Turntable rotation: spin the target about the vertical axis.

    Rotates static scatterers and propellers (positions, velocities and
    rotation axes) by ``angle_rad`` about +z through the origin; the
    chamber background does not move with the turntable.
    """
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    statics = tuple(
        PointScatterer(position=rot @ p.position, velocity=rot @ p.velocity, coeff=p.coeff)
        for p in scene.static_scatterers
    )
    props = tuple(
        Propeller(
            center=rot @ p.center,
            rotation_axis=rot @ p.rotation_axis,
            n_blades=p.n_blades,
            radius_m=p.radius_m,
            f_rot_hz=p.f_rot_hz,
            phase0_rad=p.phase0_rad,
            points_per_blade=p.points_per_blade,
            coeff=p.coeff,
        )
        for p in scene.propellers
    )
    return Scene(
        static_scatterers=statics,
        propellers=props,
        background_scatterers=scene.background_scatterers,
        reciprocal=scene.reciprocal,
    )


def reflectivity(e_scat_mag: float, e_inc_mag: float) -> float:
    """Scattered-to-incident power ratio |E_scat|^2 / |E_inc|^2."""
    if e_inc_mag <= 0.0:
        raise ValueError("incident field magnitude must be positive")
    ratio = e_scat_mag / e_inc_mag
    return ratio * ratio


def rcs_from_fields(e_scat_mag: float, e_inc_mag: float, d_rx: float) -> float:
    """Radar cross section 4 pi d_rx^2 |E_scat|^2 / |E_inc|^2 in m^2.

    Only meaningful when ``d_rx`` satisfies the far-field condition for
    the target size (see :func:`bisig.geometry.far_field_distance`).
    """
    if d_rx <= 0.0:
        raise ValueError("receiver distance must be positive")
    return 4.0 * math.pi * d_rx * d_rx * reflectivity(e_scat_mag, e_inc_mag)
