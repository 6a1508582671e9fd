"""File formats: binary cubes/sweeps and CSV exports.

Binary layouts (all little-endian):

Slow-time cube (``.stc``)
    64-byte header ``<8sIIQdddIII4x``: magic ``BSIGCUBE``, format version,
    n_carriers, n_symbols, center_freq_hz, bandwidth_hz,
    symbol_duration_s, n_active, pilot_stride, subsample_factor.
    Followed by the (n_carriers, n_symbols) complex64 array in C order,
    each sample stored as interleaved float32 (re, im).

Sweep record (``.swp``)
    64-byte header ``<8sIIII16s24x``: magic ``BSIGSWP1``, format version,
    n_freq, n_angle, n_pol, label (NUL-padded ASCII).  Followed by the
    float64 frequency grid, the float64 angle grid, and the
    (n_freq, n_angle, n_pol) complex64 array in C order.  Polarization
    order is fixed to HH, HV, VH, VV.

CSV files are plain comma-separated tables preceded by ``#``-comment
header lines recording at least the tool version and the config hash.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .mdproc import DopplerSpectrum, LineAnalysis, Spectrogram
from .reflproc import ReflectivityMap
from .simulate import SlowTimeCube, SweepRecord
from .scene import POLARIZATIONS
from .waveform import OfdmConfig

__all__ = [
    "save_cube",
    "load_cube",
    "save_sweep",
    "load_sweep",
    "write_spectrum_csv",
    "write_spectrogram_csv",
    "write_lines_csv",
    "write_map_csv",
    "write_system_response_csv",
    "read_system_response_csv",
]

_CUBE_MAGIC = b"BSIGCUBE"
_CUBE_HEADER = struct.Struct("<8sIIQdddIII4x")
_SWEEP_MAGIC = b"BSIGSWP1"
_SWEEP_HEADER = struct.Struct("<8sIIII16s24x")
_FORMAT_VERSION = 1

assert _CUBE_HEADER.size == 64 and _SWEEP_HEADER.size == 64


def save_cube(path: str | Path, cube: SlowTimeCube) -> None:
    cfg = cube.config
    header = _CUBE_HEADER.pack(
        _CUBE_MAGIC,
        _FORMAT_VERSION,
        cfg.n_carriers,
        cube.n_symbols,
        cfg.center_freq_hz,
        cfg.bandwidth_hz,
        cfg.symbol_duration_s,
        cfg.n_active,
        cfg.pilot_stride,
        cfg.subsample_factor,
    )
    with open(path, "wb") as f:
        f.write(header)
        cube.data.astype(np.complex64).tofile(f)


def load_cube(path: str | Path) -> SlowTimeCube:
    with open(path, "rb") as f:
        raw = f.read(_CUBE_HEADER.size)
        if len(raw) != _CUBE_HEADER.size:
            raise ValueError(f"{path}: truncated cube header")
        (magic, version, n_carriers, n_symbols, center, bw, t_sym, n_active,
         pilot_stride, subsample) = _CUBE_HEADER.unpack(raw)
        if magic != _CUBE_MAGIC:
            raise ValueError(f"{path}: not a slow-time cube file")
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported cube format version {version}")
        data = np.fromfile(f, dtype=np.complex64, count=n_carriers * n_symbols)
    if data.size != n_carriers * n_symbols:
        raise ValueError(f"{path}: truncated cube data")
    cfg = OfdmConfig(
        center_freq_hz=center,
        bandwidth_hz=bw,
        n_carriers=n_carriers,
        n_active=n_active,
        symbol_duration_s=t_sym,
        pilot_stride=pilot_stride,
        subsample_factor=subsample,
    )
    return SlowTimeCube(data=data.reshape(n_carriers, n_symbols), config=cfg)


def save_sweep(path: str | Path, record: SweepRecord) -> None:
    if record.pols != POLARIZATIONS:
        raise ValueError(f"sweep files require the fixed polarization order {POLARIZATIONS}")
    label = record.label.encode("ascii")
    if len(label) > 16:
        raise ValueError("sweep label longer than 16 bytes")
    header = _SWEEP_HEADER.pack(
        _SWEEP_MAGIC,
        _FORMAT_VERSION,
        len(record.freqs_hz),
        len(record.angles_deg),
        len(record.pols),
        label,
    )
    with open(path, "wb") as f:
        f.write(header)
        record.freqs_hz.astype(np.float64).tofile(f)
        record.angles_deg.astype(np.float64).tofile(f)
        record.s21.astype(np.complex64).tofile(f)


def load_sweep(path: str | Path) -> SweepRecord:
    with open(path, "rb") as f:
        raw = f.read(_SWEEP_HEADER.size)
        if len(raw) != _SWEEP_HEADER.size:
            raise ValueError(f"{path}: truncated sweep header")
        magic, version, n_freq, n_angle, n_pol, label = _SWEEP_HEADER.unpack(raw)
        if magic != _SWEEP_MAGIC:
            raise ValueError(f"{path}: not a sweep record file")
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported sweep format version {version}")
        if n_pol != len(POLARIZATIONS):
            raise ValueError(f"{path}: expected {len(POLARIZATIONS)} polarizations, got {n_pol}")
        freqs = np.fromfile(f, dtype=np.float64, count=n_freq)
        angles = np.fromfile(f, dtype=np.float64, count=n_angle)
        data = np.fromfile(f, dtype=np.complex64, count=n_freq * n_angle * n_pol)
    if data.size != n_freq * n_angle * n_pol:
        raise ValueError(f"{path}: truncated sweep data")
    return SweepRecord(
        label=label.rstrip(b"\x00").decode("ascii"),
        freqs_hz=freqs,
        angles_deg=angles,
        s21=data.reshape(n_freq, n_angle, n_pol),
    )


def _open_csv(path: str | Path, header: dict[str, str]):
    f = open(path, "w", newline="")
    f.write(f"# tool: bisig {__version__}\n")
    for key, value in header.items():
        f.write(f"# {key}: {value}\n")
    return f


def write_spectrum_csv(path: str | Path, spec: DopplerSpectrum, header: dict[str, str]) -> None:
    with _open_csv(path, header) as f:
        w = csv.writer(f)
        w.writerow(["freq_hz", "magnitude", "real", "imag"])
        for freq, val in zip(spec.freqs_hz, spec.values):
            w.writerow([f"{freq:.9g}", f"{abs(val):.9g}", f"{val.real:.9g}", f"{val.imag:.9g}"])


def write_spectrogram_csv(path: str | Path, sg: Spectrogram, header: dict[str, str]) -> None:
    with _open_csv(path, header) as f:
        w = csv.writer(f)
        w.writerow(["time_s", "freq_hz", "magnitude"])
        for j, t in enumerate(sg.times_s):
            for i, freq in enumerate(sg.freqs_hz):
                w.writerow([f"{t:.9g}", f"{freq:.9g}", f"{sg.magnitude[i, j]:.9g}"])


def write_lines_csv(path: str | Path, analysis: LineAnalysis, header: dict[str, str]) -> None:
    meta = dict(header)
    meta["resolved"] = str(analysis.resolved).lower()
    meta["spacing_hz"] = f"{analysis.spacing_hz:.9g}"
    meta["spread_hz"] = f"{analysis.spread_hz:.9g}"
    with _open_csv(path, meta) as f:
        w = csv.writer(f)
        w.writerow(["line_freq_hz", "amplitude"])
        for freq, amp in zip(analysis.line_freqs_hz, analysis.amplitudes):
            w.writerow([f"{freq:.9g}", f"{amp:.9g}"])


def write_map_csv(path: str | Path, rmap: ReflectivityMap, header: dict[str, str]) -> None:
    meta = dict(header)
    meta["reference_distance_m"] = f"{rmap.reference_distance_m:g}"
    meta["norm_reference"] = f"{rmap.norm_reference:.9g}"
    with _open_csv(path, meta) as f:
        w = csv.writer(f)
        w.writerow(["beta_deg", "freq_hz", "pol", "power_db"])
        for ia, beta in enumerate(rmap.angles_deg):
            for ip, pol in enumerate(rmap.pols):
                for i, freq in enumerate(rmap.freqs_hz):
                    w.writerow([f"{beta:.9g}", f"{freq:.9g}", pol, f"{rmap.values_db[i, ia, ip]:.6f}"])


def write_system_response_csv(
    path: str | Path, freqs_hz: np.ndarray, response: np.ndarray, header: dict[str, str]
) -> None:
    with _open_csv(path, header) as f:
        w = csv.writer(f)
        w.writerow(["freq_hz", "real", "imag"])
        for freq, val in zip(freqs_hz, response):
            w.writerow([f"{freq:.9g}", f"{val.real:.12g}", f"{val.imag:.12g}"])


def read_system_response_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    """Returns (freqs_hz, complex response) from a system-response CSV."""
    freqs: list[float] = []
    values: list[complex] = []
    with open(path, newline="") as f:
        for row in csv.reader(f):
            if not row or row[0].startswith("#") or row[0] == "freq_hz":
                continue
            freqs.append(float(row[0]))
            values.append(float(row[1]) + 1j * float(row[2]))
    if not freqs:
        raise ValueError(f"{path}: no response samples found")
    return np.asarray(freqs), np.asarray(values)
