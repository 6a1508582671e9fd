"""Forward model: OFDM slow-time cubes and VNA-style frequency sweeps.

Both paths share one scatterer echo model: each point scatterer i
contributes

    a_i(pol) * g(d_tx,i) * g(d_rx,i) * exp(-j 2 pi f (d_tx,i + d_rx,i) / c)

with spherical spreading g(d) = 1/d per leg and no absolute radiometric
constants (results are meant to be normalized downstream).  Propellers are
frozen within each OFDM symbol and advanced between symbols (stop-and-go),
which is valid while the per-symbol displacement stays far below a tenth
of the wavelength; :func:`simulate_slow_time` enforces that bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import SPEED_OF_LIGHT
from .geometry import BistaticGeometry, bistatic_angle
from .scene import POLARIZATIONS, Propeller, Scene, propeller_point_cloud
from .waveform import OfdmConfig, build_reference

__all__ = [
    "NoiseSpec",
    "SlowTimeCube",
    "SweepRecord",
    "channel_response",
    "simulate_slow_time",
    "simulate_vna_sweep",
    "flyover_sweep",
    "default_system_response",
]

_SYMBOL_CHUNK = 2048


@dataclass(frozen=True)
class NoiseSpec:
    """Circularly-symmetric complex white noise, reproducible from a seed."""

    sigma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError("noise sigma must be non-negative")


@dataclass
class SlowTimeCube:
    """Received spectra Y(f, m) across symbols for one geometry and pol.

    ``geometry`` is None for cubes loaded from files without their
    sidecar; the processing chain does not need it.
    """

    data: np.ndarray  # complex, (n_carriers, n_symbols)
    config: OfdmConfig
    geometry: BistaticGeometry | None = None
    pol: str = "HH"

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2 or self.data.shape[0] != self.config.n_carriers:
            raise ValueError(
                f"cube must be (n_carriers, n_symbols); got {self.data.shape} "
                f"for n_carriers={self.config.n_carriers}"
            )
        if self.data.shape[1] < 1:
            raise ValueError("cube needs at least one symbol")

    @property
    def n_symbols(self) -> int:
        return self.data.shape[1]

    @property
    def symbol_rate_hz(self) -> float:
        return self.config.symbol_rate_hz


@dataclass
class SweepRecord:
    """S21(f, beta, pol) of one labeled VNA measurement."""

    label: str
    freqs_hz: np.ndarray
    angles_deg: np.ndarray
    s21: np.ndarray  # complex, (n_freq, n_angle, n_pol)
    pols: tuple[str, ...] = POLARIZATIONS

    def __post_init__(self):
        self.freqs_hz = np.asarray(self.freqs_hz, dtype=float)
        self.angles_deg = np.asarray(self.angles_deg, dtype=float)
        self.s21 = np.asarray(self.s21)
        expected = (len(self.freqs_hz), len(self.angles_deg), len(self.pols))
        if self.s21.shape != expected:
            raise ValueError(f"s21 shape {self.s21.shape} does not match grids {expected}")

    def same_grids(self, other: "SweepRecord") -> bool:
        return (
            self.pols == other.pols
            and self.freqs_hz.shape == other.freqs_hz.shape
            and self.angles_deg.shape == other.angles_deg.shape
            and bool(np.all(self.freqs_hz == other.freqs_hz))
            and bool(np.all(self.angles_deg == other.angles_deg))
        )


def _scatterer_states(scene: Scene, t: float, pol: str):
    """Positions (moved by velocity * t) and amplitudes of all scatterers."""
    positions = []
    amplitudes = []
    for s in list(scene.static_scatterers) + list(scene.background_scatterers):
        positions.append(s.position + s.velocity * t)
        amplitudes.append(s.coeff.element(pol))
    for prop in scene.propellers:
        for s in propeller_point_cloud(prop, t):
            positions.append(s.position)
            amplitudes.append(s.coeff.element(pol))
    return positions, amplitudes


def channel_response(
    scene: Scene,
    geom: BistaticGeometry,
    freqs_hz: np.ndarray,
    t: float = 0.0,
    pol: str = "HH",
) -> np.ndarray:
    """Complex channel transfer function H(f) of the scene at time ``t``.

    Point scatterers are displaced by velocity * t and propellers are
    expanded into their blade-element clouds at ``t``.  An empty scene
    yields the all-zero response.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    positions, amplitudes = _scatterer_states(scene, t, pol)
    if not positions:
        return np.zeros(freqs.shape, dtype=complex)

    pos = np.stack(positions)
    amp = np.asarray(amplitudes)
    d_tx = np.linalg.norm(pos - geom.tx_pos, axis=1)
    d_rx = np.linalg.norm(pos - geom.rx_pos, axis=1)
    if np.any(d_tx == 0.0) or np.any(d_rx == 0.0):
        raise ValueError("a scatterer coincides with the transmitter or receiver")

    tau = (d_tx + d_rx) / SPEED_OF_LIGHT
    weights = amp / (d_tx * d_rx)
    return np.exp(-2j * np.pi * np.outer(freqs, tau)) @ weights


def _taylor_order(delta_max: float, tol: float = 1e-14) -> int:
    """Smallest truncation order with remainder below ``tol`` for |x| <= delta_max."""
    term = 1.0
    p = 0
    while True:
        p += 1
        term *= delta_max / p
        if term < tol and p > delta_max:
            return p + 1
        if p > 170:
            raise ValueError("phase excursion too large for the separable expansion")


def _propeller_block_response(
    prop: Propeller,
    geom: BistaticGeometry,
    freqs_hz: np.ndarray,
    times_s: np.ndarray,
    pol: str,
) -> np.ndarray:
    """Blade-element channel response for a batch of symbol times.

    Factorizes exp(-j 2 pi f tau_e(t)) around the fixed propeller-center
    delay into a short Taylor series that is separable in (time, frequency),
    so the per-symbol cost collapses to one small matrix product.  The
    truncation order is chosen for a remainder below 1e-14 per element,
    keeping this path interchangeable with :func:`channel_response`.
    Returns an array of shape (len(times_s), len(freqs_hz)).
    """
    e1, e2 = prop.blade_plane()
    radii = prop.element_radii()
    blade0 = prop.element_angles(0.0)
    amp_el = prop.coeff.scaled(1.0 / prop.points_per_blade).element(pol)

    ang = blade0[None, :] + prop.omega * times_s[:, None]  # (M, B)
    cos_a, sin_a = np.cos(ang), np.sin(ang)
    # element positions relative to scene origin: (M, B, P, 3)
    radial = cos_a[..., None, None] * e1 + sin_a[..., None, None] * e2
    pos = prop.center + radii[None, None, :, None] * radial

    d_tx = np.linalg.norm(pos - geom.tx_pos, axis=-1)
    d_rx = np.linalg.norm(pos - geom.rx_pos, axis=-1)
    if np.any(d_tx == 0.0) or np.any(d_rx == 0.0):
        raise ValueError("a blade element coincides with the transmitter or receiver")

    n_t = len(times_s)
    tau = ((d_tx + d_rx) / SPEED_OF_LIGHT).reshape(n_t, -1)       # (M, E)
    weights = (amp_el / (d_tx * d_rx)).reshape(n_t, -1)

    d_tx_c = float(np.linalg.norm(prop.center - geom.tx_pos))
    d_rx_c = float(np.linalg.norm(prop.center - geom.rx_pos))
    tau_ref = (d_tx_c + d_rx_c) / SPEED_OF_LIGHT

    f_anchor = 0.5 * (freqs_hz[0] + freqs_hz[-1])
    nu = freqs_hz - f_anchor
    nu_max = float(np.max(np.abs(nu)))

    dtau = tau - tau_ref
    g = weights * np.exp(-2j * np.pi * f_anchor * dtau)
    if nu_max == 0.0:
        return np.exp(-2j * np.pi * freqs_hz * tau_ref)[None, :] * g.sum(axis=1)[:, None]

    delta = 2.0 * np.pi * nu_max * dtau
    order = _taylor_order(float(np.max(np.abs(delta))))

    moments = np.empty((n_t, order), dtype=complex)
    term = g.astype(complex, copy=True)
    moments[:, 0] = term.sum(axis=1)
    jdelta = -1j * delta
    for p in range(1, order):
        term *= jdelta / p
        moments[:, p] = term.sum(axis=1)

    x = nu / nu_max
    vand = np.empty((order, len(freqs_hz)))
    vand[0] = 1.0
    for p in range(1, order):
        vand[p] = vand[p - 1] * x

    phase_ref = np.exp(-2j * np.pi * freqs_hz * tau_ref)
    return (moments @ vand) * phase_ref[None, :]


def _moving_points_block_response(
    movers, geom: BistaticGeometry, freqs_hz: np.ndarray, times_s: np.ndarray, pol: str
) -> np.ndarray:
    """Channel response of linearly moving point scatterers, per symbol.

    Evaluated exactly (one complex exponential per scatterer, symbol and
    carrier); scenes rarely hold more than a handful of moving points, so
    this stays cheap next to the blade clouds.
    """
    pos0 = np.stack([s.position for s in movers])
    vel = np.stack([s.velocity for s in movers])
    amp = np.array([s.coeff.element(pol) for s in movers])

    pos = pos0[None, :, :] + vel[None, :, :] * times_s[:, None, None]  # (M, S, 3)
    d_tx = np.linalg.norm(pos - geom.tx_pos, axis=-1)
    d_rx = np.linalg.norm(pos - geom.rx_pos, axis=-1)
    if np.any(d_tx == 0.0) or np.any(d_rx == 0.0):
        raise ValueError("a scatterer coincides with the transmitter or receiver")
    tau = (d_tx + d_rx) / SPEED_OF_LIGHT
    weights = amp[None, :] / (d_tx * d_rx)
    phase = np.exp(-2j * np.pi * tau[:, :, None] * freqs_hz[None, None, :])
    return np.einsum("ms,msf->mf", weights, phase)


def _check_stop_and_go(scene: Scene, config: OfdmConfig) -> None:
    wavelength = SPEED_OF_LIGHT / config.center_freq_hz
    displacement = scene.max_speed() * config.symbol_duration_s
    if displacement > wavelength / 10.0:
        raise ValueError(
            "stop-and-go approximation invalid: per-symbol displacement "
            f"{displacement:.3e} m exceeds wavelength/10 = {wavelength / 10.0:.3e} m"
        )


def simulate_slow_time(
    scene: Scene,
    geom: BistaticGeometry,
    config: OfdmConfig,
    n_symbols: int,
    noise: NoiseSpec | None = None,
    pol: str = "HH",
) -> SlowTimeCube:
    """Simulate received spectra Y(f, m) = H(f, t_m) X(f) + noise.

    The scene is frozen within each symbol and evaluated at t_m =
    m * symbol_duration.  Output is bit-reproducible for a given noise
    seed.  Guard carriers carry no signal, only noise.
    """
    if n_symbols < 1:
        raise ValueError("n_symbols must be >= 1")
    _check_stop_and_go(scene, config)

    ref = build_reference(config)
    freqs = config.carrier_freqs_hz()
    sl = config.active_slice
    freqs_active = freqs[sl]
    x_active = ref.amplitudes[sl]

    points = list(scene.static_scatterers) + list(scene.background_scatterers)
    fixed = [s for s in points if not np.any(s.velocity)]
    movers = [s for s in points if np.any(s.velocity)]

    # contribution of non-moving scatterers is identical for every symbol
    h_static = channel_response(Scene(static_scatterers=fixed), geom, freqs_active, 0.0, pol)

    data = np.zeros((config.n_carriers, n_symbols), dtype=complex)
    times = np.arange(n_symbols) * config.symbol_duration_s
    for start in range(0, n_symbols, _SYMBOL_CHUNK):
        stop = min(start + _SYMBOL_CHUNK, n_symbols)
        h_chunk = np.broadcast_to(h_static, (stop - start, len(freqs_active))).copy()
        for prop in scene.propellers:
            h_chunk += _propeller_block_response(prop, geom, freqs_active, times[start:stop], pol)
        if movers:
            h_chunk += _moving_points_block_response(movers, geom, freqs_active, times[start:stop], pol)
        data[sl, start:stop] = (h_chunk * x_active[None, :]).T

    if noise is not None and noise.sigma > 0.0:
        rng = np.random.default_rng(noise.seed)
        w = rng.standard_normal((n_symbols, config.n_carriers, 2))
        data += (noise.sigma / math.sqrt(2.0)) * (w[..., 0] + 1j * w[..., 1]).T

    return SlowTimeCube(data=data, config=config, geometry=geom, pol=pol)


def default_system_response(freqs_hz: np.ndarray) -> np.ndarray:
    """Smooth instrumentation response: polynomial ripple plus linear phase.

    Stands in for the cascaded antenna/VNA/attenuator response that the
    calibration stage is expected to remove.  Deterministic.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    if len(freqs) > 1:
        x = 2.0 * (freqs - freqs[0]) / (freqs[-1] - freqs[0]) - 1.0
    else:
        x = np.zeros_like(freqs)
    magnitude = 1.0 + 0.25 * x - 0.15 * x**2 + 0.08 * x**3
    group_delay_s = 2e-9
    return magnitude * np.exp(-2j * np.pi * freqs * group_delay_s)


def simulate_vna_sweep(
    scene: Scene,
    geometries: Sequence[BistaticGeometry],
    freqs_hz: np.ndarray,
    system_response: np.ndarray,
    noise: NoiseSpec | None = None,
) -> tuple[SweepRecord, SweepRecord]:
    """Synthesize the (DUT+background, background-only) sweep pair.

    The background record sees only ``scene.background_scatterers``; the
    DUT record adds the target scatterers and propellers (frozen at t = 0).
    Both are multiplied by ``system_response`` and, when requested, get
    independent noise realizations.  All four polarization channels are
    produced per grid point.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    if len(freqs) == 0 or len(geometries) == 0:
        raise ValueError("frequency and angle grids must be non-empty")
    resp = np.asarray(system_response, dtype=complex)
    if resp.shape != freqs.shape:
        raise ValueError("system_response must be sampled on the frequency grid")

    angles_deg = np.array([math.degrees(bistatic_angle(g)) for g in geometries])
    shape = (len(freqs), len(geometries), len(POLARIZATIONS))
    s21_dut = np.zeros(shape, dtype=complex)
    s21_bg = np.zeros(shape, dtype=complex)

    bg_scene = scene.background_only()
    for ia, geom in enumerate(geometries):
        for ip, pol in enumerate(POLARIZATIONS):
            s21_dut[:, ia, ip] = channel_response(scene, geom, freqs, 0.0, pol)
            s21_bg[:, ia, ip] = channel_response(bg_scene, geom, freqs, 0.0, pol)

    s21_dut *= resp[:, None, None]
    s21_bg *= resp[:, None, None]

    if noise is not None and noise.sigma > 0.0:
        rng = np.random.default_rng(noise.seed)
        scale = noise.sigma / math.sqrt(2.0)
        w = rng.standard_normal(shape + (2,))
        s21_dut += scale * (w[..., 0] + 1j * w[..., 1])
        w = rng.standard_normal(shape + (2,))
        s21_bg += scale * (w[..., 0] + 1j * w[..., 1])

    dut = SweepRecord(label="DUT_BG", freqs_hz=freqs, angles_deg=angles_deg, s21=s21_dut)
    bg = SweepRecord(label="BG", freqs_hz=freqs, angles_deg=angles_deg, s21=s21_bg)
    return dut, bg


def flyover_sweep(betas_deg: Sequence[float], range_m: float = 3.0) -> list[BistaticGeometry]:
    """Geometries realizing each requested bistatic angle at fixed ranges.

    The target sits at the origin; Tx and Rx are placed symmetrically
    about the +z axis at ``range_m`` so that the bistatic angle equals the
    request.  Accepts angles in (0, 180] degrees.
    """
    if range_m <= 0.0:
        raise ValueError("range_m must be positive")
    geometries = []
    for beta in betas_deg:
        if not 0.0 < beta <= 180.0:
            raise ValueError(f"bistatic angle {beta} deg outside (0, 180]")
        half = math.radians(beta) / 2.0
        tx = np.array([range_m * math.sin(half), 0.0, range_m * math.cos(half)])
        rx = np.array([-range_m * math.sin(half), 0.0, range_m * math.cos(half)])
        geometries.append(BistaticGeometry(tx_pos=tx, rx_pos=rx, target_pos=np.zeros(3)))
    return geometries
