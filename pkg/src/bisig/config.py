"""Run configuration: YAML schema, validation, canonical serialization.

Keys carry explicit units in their names (``f_rot_hz``, ``radius_m``,
``width_s``) because unit mistakes are the dominant failure mode in this
domain.  Parsing fills every default, so serialize(parse(x)) is the
canonical form and round-trips to itself; the config hash is computed
over that canonical form.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .geometry import BistaticGeometry
from .scene import PointScatterer, PolarimetricCoeff, Propeller, Scene
from .simulate import NoiseSpec, flyover_sweep
from .waveform import OfdmConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "default_config_dict"]

SCENARIOS = ("micro-doppler", "vna-sweep", "flyover")


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


def _get(d: dict, path: str, key: str, default):
    value = d.get(key, default)
    if value is None:
        value = default
    return value


def _number(d: dict, path: str, key: str, default, minimum=None, strict_min=False):
    value = _get(d, path, key, default)
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: expected a number, got {value!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"{path}.{key}: must be finite")
    if minimum is not None:
        if strict_min and value <= minimum:
            raise ConfigError(f"{path}.{key}: must be > {minimum}, got {value}")
        if not strict_min and value < minimum:
            raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {value}")
    return value


def _integer(d: dict, path: str, key: str, default, minimum=None):
    value = _get(d, path, key, default)
    if isinstance(value, bool) or (not isinstance(value, int) and float(value) != int(value)):
        raise ConfigError(f"{path}.{key}: expected an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {value}")
    return value


def _vec(d: dict, path: str, key: str, default):
    value = _get(d, path, key, default)
    if not isinstance(value, (list, tuple)) or len(value) != 3:
        raise ConfigError(f"{path}.{key}: expected [x, y, z], got {value!r}")
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{path}.{key}: components must be numbers") from None


def _section(d: dict, key: str) -> dict:
    value = d.get(key) or {}
    if not isinstance(value, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return value


@dataclass
class ProcessingParams:
    subsample_factor: int = 8
    n_fft: int = 0  # 0: use the profile length
    line_window: str = "rect"
    line_threshold_db: float = 12.0
    line_rel_db: float = 12.0
    noise_floor_percentile: float = 50.0
    spread_margin_db: float = 12.0
    spectrogram_window: str = "hann"
    spectrogram_frame_len: int = 256
    spectrogram_overlap: int = 192


@dataclass
class VnaParams:
    freq_start_hz: float = 2.0e9
    freq_stop_hz: float = 18.0e9
    n_freq: int = 1601
    beta_start_deg: float = 10.0
    beta_stop_deg: float = 180.0
    beta_step_deg: float = 5.0
    turntable_deg: float = 0.0
    range_m: float = 3.0
    system_ripple: bool = True

    def freqs_hz(self):
        import numpy as np

        return np.linspace(self.freq_start_hz, self.freq_stop_hz, self.n_freq)

    def betas_deg(self) -> list[float]:
        betas = []
        b = self.beta_start_deg
        while b <= self.beta_stop_deg + 1e-9:
            betas.append(round(b, 9))
            b += self.beta_step_deg
        return betas


@dataclass
class GateParams:
    auto: bool = True
    center_s: float = 0.0
    width_s: float = 2.0e-8
    taper_fraction: float = 0.1


@dataclass
class RunConfig:
    """Validated run configuration for every CLI command."""

    scenario: str = "micro-doppler"
    seed: int = 0
    out_dir: str = "out"
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    scene: Scene = field(default_factory=Scene)
    beta_deg: float = 60.0
    range_m: float = 3.0
    beta_list_deg: tuple[float, ...] = (10.0, 30.0, 60.0, 90.0, 120.0, 150.0, 176.0)
    n_symbols: int = 32768
    noise_sigma: float = 0.0
    processing: ProcessingParams = field(default_factory=ProcessingParams)
    vna: VnaParams = field(default_factory=VnaParams)
    gate: GateParams = field(default_factory=GateParams)

    def md_geometry(self, beta_deg: float | None = None) -> BistaticGeometry:
        return flyover_sweep([beta_deg if beta_deg is not None else self.beta_deg],
                             range_m=self.range_m)[0]

    def noise(self) -> NoiseSpec:
        return NoiseSpec(sigma=self.noise_sigma, seed=self.seed)

    def to_dict(self) -> dict[str, Any]:
        """Canonical dict form with every field populated."""
        scene_dict: dict[str, Any] = {
            "reciprocal": self.scene.reciprocal,
            "static": [
                {"position_m": list(map(float, s.position)),
                 "amplitude": _coeff_amplitude(s.coeff)}
                for s in self.scene.static_scatterers
            ],
            "propellers": [
                {
                    "center_m": list(map(float, p.center)),
                    "axis": list(map(float, p.rotation_axis)),
                    "n_blades": p.n_blades,
                    "radius_m": p.radius_m,
                    "f_rot_hz": p.f_rot_hz,
                    "phase0_rad": p.phase0_rad,
                    "points_per_blade": p.points_per_blade,
                    "amplitude": _coeff_amplitude(p.coeff),
                }
                for p in self.scene.propellers
            ],
            "background": [
                {"position_m": list(map(float, s.position)),
                 "amplitude": _coeff_amplitude(s.coeff)}
                for s in self.scene.background_scatterers
            ],
        }
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "geometry": {"beta_deg": self.beta_deg, "range_m": self.range_m},
            "flyover": {"beta_list_deg": list(self.beta_list_deg)},
            "ofdm": {
                "center_freq_hz": self.ofdm.center_freq_hz,
                "bandwidth_hz": self.ofdm.bandwidth_hz,
                "n_carriers": self.ofdm.n_carriers,
                "n_active": self.ofdm.n_active,
                "symbol_duration_s": self.ofdm.symbol_duration_s,
                "pilot_stride": self.ofdm.pilot_stride,
                "subsample_factor": self.ofdm.subsample_factor,
            },
            "scene": scene_dict,
            "simulation": {"n_symbols": self.n_symbols, "noise_sigma": self.noise_sigma},
            "processing": {
                "subsample_factor": self.processing.subsample_factor,
                "n_fft": self.processing.n_fft,
                "line_window": self.processing.line_window,
                "line_threshold_db": self.processing.line_threshold_db,
                "line_rel_db": self.processing.line_rel_db,
                "noise_floor_percentile": self.processing.noise_floor_percentile,
                "spread_margin_db": self.processing.spread_margin_db,
                "spectrogram_window": self.processing.spectrogram_window,
                "spectrogram_frame_len": self.processing.spectrogram_frame_len,
                "spectrogram_overlap": self.processing.spectrogram_overlap,
            },
            "vna": {
                "freq_start_hz": self.vna.freq_start_hz,
                "freq_stop_hz": self.vna.freq_stop_hz,
                "n_freq": self.vna.n_freq,
                "beta_start_deg": self.vna.beta_start_deg,
                "beta_stop_deg": self.vna.beta_stop_deg,
                "beta_step_deg": self.vna.beta_step_deg,
                "turntable_deg": self.vna.turntable_deg,
                "range_m": self.vna.range_m,
                "system_ripple": self.vna.system_ripple,
            },
            "gate": {
                "auto": self.gate.auto,
                "center_s": self.gate.center_s,
                "width_s": self.gate.width_s,
                "taper_fraction": self.gate.taper_fraction,
            },
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def sha256(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def _coeff_amplitude(coeff: PolarimetricCoeff) -> float:
    """Scalar amplitude of an identity-scaled coefficient (config scenes)."""
    return float(coeff.matrix[0, 0].real)


def _parse_scatterer(entry: Any, path: str) -> PointScatterer:
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected a mapping")
    position = _vec(entry, path, "position_m", None if "position_m" in entry else [0, 0, 0])
    if "position_m" not in entry:
        raise ConfigError(f"{path}.position_m: required")
    amplitude = _number(entry, path, "amplitude", 1.0)
    return PointScatterer(position=position, coeff=PolarimetricCoeff.scalar(amplitude))


def _parse_propeller(entry: Any, path: str) -> Propeller:
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected a mapping")
    try:
        return Propeller(
            center=_vec(entry, path, "center_m", [0, 0, 0]),
            rotation_axis=_vec(entry, path, "axis", [1, 0, 0]),
            n_blades=_integer(entry, path, "n_blades", 2, minimum=1),
            radius_m=_number(entry, path, "radius_m", 0.1655, minimum=0.0, strict_min=True),
            f_rot_hz=_number(entry, path, "f_rot_hz", 25.0, minimum=0.0),
            phase0_rad=_number(entry, path, "phase0_rad", 0.0),
            points_per_blade=_integer(entry, path, "points_per_blade", 16, minimum=1),
            coeff=PolarimetricCoeff.scalar(_number(entry, path, "amplitude", 1.0)),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def parse_config(data: dict[str, Any] | None) -> RunConfig:
    """Validate a config mapping and fill every default."""
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("config root: expected a mapping")

    scenario = _get(data, "", "scenario", "micro-doppler")
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario: must be one of {SCENARIOS}, got {scenario!r}")
    seed = _integer(data, "config", "seed", 0, minimum=0)
    out_dir = str(_get(data, "", "out_dir", "out"))

    geo = _section(data, "geometry")
    beta_deg = _number(geo, "geometry", "beta_deg", 60.0)
    if not 0.0 < beta_deg <= 180.0:
        raise ConfigError(f"geometry.beta_deg: must be in (0, 180], got {beta_deg}")
    range_m = _number(geo, "geometry", "range_m", 3.0, minimum=0.0, strict_min=True)

    fly = _section(data, "flyover")
    beta_list = _get(fly, "flyover", "beta_list_deg", [10.0, 30.0, 60.0, 90.0, 120.0, 150.0, 176.0])
    if not isinstance(beta_list, (list, tuple)) or not beta_list:
        raise ConfigError("flyover.beta_list_deg: expected a non-empty list of angles")
    for i, b in enumerate(beta_list):
        try:
            b = float(b)
        except (TypeError, ValueError):
            raise ConfigError(f"flyover.beta_list_deg[{i}]: expected a number") from None
        if not 0.0 < b <= 180.0:
            raise ConfigError(f"flyover.beta_list_deg[{i}]: must be in (0, 180], got {b}")
    beta_list = tuple(float(b) for b in beta_list)

    ofd = _section(data, "ofdm")
    try:
        ofdm = OfdmConfig(
            center_freq_hz=_number(ofd, "ofdm", "center_freq_hz", 3.7e9, minimum=0.0, strict_min=True),
            bandwidth_hz=_number(ofd, "ofdm", "bandwidth_hz", 200e6, minimum=0.0, strict_min=True),
            n_carriers=_integer(ofd, "ofdm", "n_carriers", 1600, minimum=1),
            n_active=_integer(ofd, "ofdm", "n_active", 1280, minimum=1),
            symbol_duration_s=_number(ofd, "ofdm", "symbol_duration_s", 8e-6, minimum=0.0, strict_min=True),
            pilot_stride=_integer(ofd, "ofdm", "pilot_stride", 10, minimum=0),
            subsample_factor=_integer(ofd, "ofdm", "subsample_factor", 8, minimum=1),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"ofdm: {exc}") from None

    sc = _section(data, "scene")
    statics = sc.get("static") or []
    props = sc.get("propellers") or []
    background = sc.get("background") or []
    if not isinstance(statics, list):
        raise ConfigError("scene.static: expected a list")
    if not isinstance(props, list):
        raise ConfigError("scene.propellers: expected a list")
    if not isinstance(background, list):
        raise ConfigError("scene.background: expected a list")
    reciprocal = bool(_get(sc, "scene", "reciprocal", False))
    scene = Scene(
        static_scatterers=[_parse_scatterer(s, f"scene.static[{i}]") for i, s in enumerate(statics)],
        propellers=[_parse_propeller(p, f"scene.propellers[{i}]") for i, p in enumerate(props)],
        background_scatterers=[
            _parse_scatterer(s, f"scene.background[{i}]") for i, s in enumerate(background)
        ],
        reciprocal=reciprocal,
    )

    sim = _section(data, "simulation")
    n_symbols = _integer(sim, "simulation", "n_symbols", 32768, minimum=1)
    noise_sigma = _number(sim, "simulation", "noise_sigma", 0.0, minimum=0.0)

    pr = _section(data, "processing")
    processing = ProcessingParams(
        subsample_factor=_integer(pr, "processing", "subsample_factor", ofdm.subsample_factor, minimum=1),
        n_fft=_integer(pr, "processing", "n_fft", 0, minimum=0),
        line_window=str(_get(pr, "processing", "line_window", "rect")),
        line_threshold_db=_number(pr, "processing", "line_threshold_db", 12.0),
        line_rel_db=_number(pr, "processing", "line_rel_db", 12.0),
        noise_floor_percentile=_number(pr, "processing", "noise_floor_percentile", 50.0, minimum=0.0),
        spread_margin_db=_number(pr, "processing", "spread_margin_db", 12.0),
        spectrogram_window=str(_get(pr, "processing", "spectrogram_window", "hann")),
        spectrogram_frame_len=_integer(pr, "processing", "spectrogram_frame_len", 256, minimum=2),
        spectrogram_overlap=_integer(pr, "processing", "spectrogram_overlap", 192, minimum=0),
    )
    if processing.spectrogram_overlap >= processing.spectrogram_frame_len:
        raise ConfigError("processing.spectrogram_overlap: must be smaller than spectrogram_frame_len")
    if processing.noise_floor_percentile > 100.0:
        raise ConfigError("processing.noise_floor_percentile: must be in [0, 100]")

    vn = _section(data, "vna")
    vna = VnaParams(
        freq_start_hz=_number(vn, "vna", "freq_start_hz", 2.0e9, minimum=0.0, strict_min=True),
        freq_stop_hz=_number(vn, "vna", "freq_stop_hz", 18.0e9, minimum=0.0, strict_min=True),
        n_freq=_integer(vn, "vna", "n_freq", 1601, minimum=2),
        beta_start_deg=_number(vn, "vna", "beta_start_deg", 10.0),
        beta_stop_deg=_number(vn, "vna", "beta_stop_deg", 180.0),
        beta_step_deg=_number(vn, "vna", "beta_step_deg", 5.0, minimum=0.0, strict_min=True),
        turntable_deg=_number(vn, "vna", "turntable_deg", 0.0),
        range_m=_number(vn, "vna", "range_m", 3.0, minimum=0.0, strict_min=True),
        system_ripple=bool(_get(vn, "vna", "system_ripple", True)),
    )
    if vna.freq_stop_hz <= vna.freq_start_hz:
        raise ConfigError("vna.freq_stop_hz: must exceed vna.freq_start_hz")
    if not 0.0 < vna.beta_start_deg <= vna.beta_stop_deg <= 180.0:
        raise ConfigError("vna.beta_start_deg/beta_stop_deg: need 0 < start <= stop <= 180")

    ga = _section(data, "gate")
    gate = GateParams(
        auto=bool(_get(ga, "gate", "auto", True)),
        center_s=_number(ga, "gate", "center_s", 0.0, minimum=0.0),
        width_s=_number(ga, "gate", "width_s", 2.0e-8, minimum=0.0, strict_min=True),
        taper_fraction=_number(ga, "gate", "taper_fraction", 0.1, minimum=0.0),
    )
    if gate.taper_fraction > 0.5:
        raise ConfigError("gate.taper_fraction: must be in [0, 0.5]")

    cfg = RunConfig(
        scenario=scenario,
        seed=seed,
        out_dir=out_dir,
        ofdm=ofdm,
        scene=scene,
        beta_deg=beta_deg,
        range_m=range_m,
        beta_list_deg=beta_list,
        n_symbols=n_symbols,
        noise_sigma=noise_sigma,
        processing=processing,
        vna=vna,
        gate=gate,
    )
    _check_stop_and_go_bound(cfg)
    return cfg


def _check_stop_and_go_bound(cfg: RunConfig) -> None:
    from . import SPEED_OF_LIGHT

    wavelength = SPEED_OF_LIGHT / cfg.ofdm.center_freq_hz
    displacement = cfg.scene.max_speed() * cfg.ofdm.symbol_duration_s
    if displacement > wavelength / 10.0:
        raise ConfigError(
            "scene: fastest scatterer moves "
            f"{displacement:.3e} m per symbol, above the wavelength/10 bound "
            f"{wavelength / 10.0:.3e} m of the per-symbol freeze approximation; "
            "reduce f_rot_hz/radius_m or symbol_duration_s"
        )


def load_config(path: str | Path) -> RunConfig:
    with open(path) as f:
        try:
            data = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return parse_config(data)


def default_config_dict() -> dict[str, Any]:
    """Canonical dict of the all-defaults configuration.

    One two-blade 16.55 cm propeller at 25 Hz plus a weak hub scatterer,
    observed at 60 deg bistatic angle from 3 m per leg with the default
    OFDM grid.
    """
    base = RunConfig(
        scene=Scene(
            static_scatterers=[
                PointScatterer(position=[0, 0, 0], coeff=PolarimetricCoeff.scalar(0.05))
            ],
            propellers=[
                Propeller(
                    center=[0, 0, 0],
                    rotation_axis=[1, 0, 0],
                    n_blades=2,
                    radius_m=0.1655,
                    f_rot_hz=25.0,
                )
            ],
        )
    )
    return base.to_dict()
