"""OFDM reference-signal synthesis: carrier layout and Newman phasing.

The reference symbol is a multisine with constant spectral magnitude on
all active carriers and quadratic (Newman) phases, which keeps the
time-domain crest factor low.  Spectra are stored in frequency-ascending
("centered") order: index 0 is the lowest carrier of the grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "OfdmConfig",
    "ReferenceSymbol",
    "newman_phases",
    "build_reference",
    "time_domain_symbol",
    "crest_factor",
]


@dataclass(frozen=True)
class OfdmConfig:
    """Carrier grid and timing of the OFDM reference waveform.

    The defaults are a 3.7 GHz / 200 MHz grid of 1600 carriers (125 kHz
    spacing, 8 us symbols) with 1280 active carriers and every 10th active
    carrier flagged as a pilot.  ``subsample_factor`` is the default
    slow-time decimation used by the processing chain.
    """

    center_freq_hz: float = 3.7e9
    bandwidth_hz: float = 200e6
    n_carriers: int = 1600
    n_active: int = 1280
    symbol_duration_s: float = 8e-6
    pilot_stride: int = 10
    subsample_factor: int = 8

    def __post_init__(self):
        if self.n_carriers < 1:
            raise ValueError("n_carriers must be >= 1")
        if not 1 <= self.n_active <= self.n_carriers:
            raise ValueError(
                f"n_active must be in [1, n_carriers]; got {self.n_active} of {self.n_carriers}"
            )
        if (self.n_carriers - self.n_active) % 2 != 0:
            raise ValueError(
                "n_carriers - n_active must be even so the guard bands split equally"
            )
        if self.symbol_duration_s <= 0.0:
            raise ValueError("symbol_duration_s must be positive")
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth_hz must be positive")
        spacing = self.bandwidth_hz / self.n_carriers
        if not math.isclose(spacing * self.symbol_duration_s, 1.0, rel_tol=1e-9):
            raise ValueError(
                "inconsistent grid: carrier spacing bandwidth/n_carriers = "
                f"{spacing:.6g} Hz but 1/symbol_duration = {1.0 / self.symbol_duration_s:.6g} Hz; "
                "they must match"
            )
        if self.pilot_stride < 0:
            raise ValueError("pilot_stride must be >= 0 (0 disables pilots)")
        if self.subsample_factor < 1:
            raise ValueError("subsample_factor must be >= 1")

    @property
    def carrier_spacing_hz(self) -> float:
        return self.bandwidth_hz / self.n_carriers

    @property
    def symbol_rate_hz(self) -> float:
        return 1.0 / self.symbol_duration_s

    @property
    def guard_carriers(self) -> int:
        """Number of zero carriers at each band edge."""
        return (self.n_carriers - self.n_active) // 2

    @property
    def active_slice(self) -> slice:
        return slice(self.guard_carriers, self.guard_carriers + self.n_active)

    def carrier_freqs_hz(self) -> np.ndarray:
        """Absolute RF frequency of every carrier, ascending."""
        k = np.arange(self.n_carriers) - self.n_carriers // 2
        return self.center_freq_hz + k * self.carrier_spacing_hz


def newman_phases(n: int) -> np.ndarray:
    """Quadratic phase schedule pi (k - 1)^2 / n for k = 1..n, unwrapped."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n + 1, dtype=float)
    return math.pi * (k - 1.0) ** 2 / n


@dataclass(frozen=True)
class ReferenceSymbol:
    """Frequency-domain reference X(f) plus carrier bookkeeping masks."""

    amplitudes: np.ndarray  # complex, one entry per carrier, ascending frequency
    active_mask: np.ndarray
    pilot_mask: np.ndarray
    config: OfdmConfig

    def __post_init__(self):
        if not (
            len(self.amplitudes) == len(self.active_mask) == len(self.pilot_mask)
            == self.config.n_carriers
        ):
            raise ValueError("mask/amplitude lengths must equal n_carriers")

    @property
    def data_mask(self) -> np.ndarray:
        """Active carriers that are not pilots (usable for estimation)."""
        return self.active_mask & ~self.pilot_mask


def build_reference(config: OfdmConfig) -> ReferenceSymbol:
    """Assemble the reference spectrum for ``config``.

    All active carriers (pilots included) carry unit-magnitude Newman-phased
    amplitudes; guard carriers are zero.  Every ``pilot_stride``-th active
    carrier is flagged as a pilot; stride 0 disables pilots.
    """
    n = config.n_carriers
    amplitudes = np.zeros(n, dtype=complex)
    active = np.zeros(n, dtype=bool)
    pilots = np.zeros(n, dtype=bool)

    sl = config.active_slice
    active[sl] = True
    amplitudes[sl] = np.exp(1j * newman_phases(config.n_active))
    if config.pilot_stride > 0:
        active_idx = np.nonzero(active)[0]
        pilots[active_idx[:: config.pilot_stride]] = True
    return ReferenceSymbol(amplitudes=amplitudes, active_mask=active, pilot_mask=pilots, config=config)


def time_domain_symbol(ref: ReferenceSymbol) -> np.ndarray:
    """Complex baseband samples of one symbol (n_carriers samples).

    Inverse DFT of the frequency-ascending spectrum; the forward round
    trip ``fftshift(fft(x))`` reproduces the amplitudes to machine
    precision.
    """
    return np.fft.ifft(np.fft.ifftshift(ref.amplitudes))


def crest_factor(x: np.ndarray) -> float:
    """Peak-to-RMS magnitude ratio of a complex or real sample sequence."""
    x = np.asarray(x)
    rms = math.sqrt(float(np.mean(np.abs(x) ** 2)))
    if rms == 0.0:
        raise ValueError("crest factor undefined for an all-zero signal")
    return float(np.max(np.abs(x))) / rms
