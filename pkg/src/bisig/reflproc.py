"""Static reflectivity chain: calibrate, subtract, gate, normalize.

Operates on :class:`~bisig.simulate.SweepRecord` frequency sweeps.  The
stages are applied in the frequency domain except for time gating, which
windows the impulse response in delay to excise residual echoes, then
returns to the frequency domain.  The final map is normalized by the
single global power maximum across angles, frequencies and polarizations,
so absolute propagation loss never has to be compensated; results remain
conditioned on the synthesis distances (3 m per leg by convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .simulate import SweepRecord

__all__ = [
    "GateSpec",
    "ReflectivityMap",
    "calibrate",
    "background_subtract",
    "time_gate",
    "gate_record",
    "auto_gate",
    "reflectivity_map",
]

#: Both synthesis legs of the reference scenes are 3 m; the normalized map
#: is conditioned on that distance.
REFERENCE_DISTANCE_M = 3.0


@dataclass(frozen=True)
class GateSpec:
    """Flat-top delay gate with raised-cosine edge tapers.

    ``taper_fraction`` is the fraction of the gate width used for each
    cosine ramp (0 gives a hard rectangular gate, 0.5 a full cosine).
    """

    center_s: float
    width_s: float
    taper_fraction: float = 0.1

    def __post_init__(self):
        if self.width_s <= 0.0:
            raise ValueError("gate width must be positive")
        if not 0.0 <= self.taper_fraction <= 0.5:
            raise ValueError("taper fraction must be in [0, 0.5]")


@dataclass
class ReflectivityMap:
    """Normalized reflectivity in dB over (frequency, angle, polarization).

    The global maximum is 0 dB by construction; ``norm_reference`` keeps
    the linear power value that was mapped to 0 dB.
    """

    values_db: np.ndarray  # (n_freq, n_angle, n_pol)
    freqs_hz: np.ndarray
    angles_deg: np.ndarray
    pols: tuple[str, ...]
    norm_reference: float
    reference_distance_m: float = REFERENCE_DISTANCE_M


def calibrate(record: SweepRecord, system_response: np.ndarray) -> SweepRecord:
    """De-embed the instrumentation response by complex division."""
    resp = np.asarray(system_response, dtype=complex)
    if resp.shape != record.freqs_hz.shape:
        raise ValueError("system_response must be sampled on the record frequency grid")
    if np.any(np.abs(resp) == 0.0):
        raise ValueError("system response contains a zero sample; cannot divide")
    return SweepRecord(
        label=record.label,
        freqs_hz=record.freqs_hz,
        angles_deg=record.angles_deg,
        s21=record.s21 / resp[:, None, None],
        pols=record.pols,
    )


def background_subtract(dut_bg: SweepRecord, bg: SweepRecord) -> SweepRecord:
    """Complex difference removing coherent chamber clutter."""
    if not dut_bg.same_grids(bg):
        raise ValueError("DUT and background records must share identical grids")
    return SweepRecord(
        label="TARGET",
        freqs_hz=dut_bg.freqs_hz,
        angles_deg=dut_bg.angles_deg,
        s21=dut_bg.s21 - bg.s21,
        pols=dut_bg.pols,
    )


def _check_uniform_grid(freqs: np.ndarray) -> float:
    steps = np.diff(freqs)
    if len(steps) == 0:
        raise ValueError("time gating needs at least two frequency points")
    step = float(steps[0])
    if step <= 0.0 or not np.allclose(steps, step, rtol=1e-9):
        raise ValueError("time gating requires a uniform ascending frequency grid")
    return step


def _gate_window(n: int, freq_step_hz: float, gate: GateSpec) -> np.ndarray:
    span = 1.0 / freq_step_hz
    if gate.width_s > span:
        raise ValueError(
            f"gate width {gate.width_s:.3e} s exceeds the unambiguous span {span:.3e} s"
        )
    if not 0.0 <= gate.center_s < span:
        raise ValueError(
            f"gate center {gate.center_s:.3e} s outside the unambiguous span [0, {span:.3e}) s"
        )
    delays = np.arange(n) / (n * freq_step_hz)
    dist = np.abs(delays - gate.center_s)
    dist = np.minimum(dist, span - dist)  # wrapped delay distance

    half = gate.width_s / 2.0
    taper_len = gate.taper_fraction * gate.width_s
    flat_half = half - taper_len

    window = np.zeros(n)
    window[dist <= flat_half] = 1.0
    if taper_len > 0.0:
        edge = (dist > flat_half) & (dist <= half)
        window[edge] = 0.5 * (1.0 + np.cos(np.pi * (dist[edge] - flat_half) / taper_len))
    return window


#: Frequency taper applied before the delay transform.  An off-grid echo
#: transformed with a bare rectangle leaks 1/(pi * distance) delay
#: sidelobes across the whole span, capping out-of-gate suppression near
#: -25 dB; a Kaiser taper pushes those sidelobes far below the gate floor.
#: beta = 6 keeps the endpoints nonzero so the taper can be divided out.
_FREQ_TAPER_BETA = 6.0


def _gate_operator(n: int, step: float, gate: GateSpec):
    """Shared pieces of the gating transform: freq taper and delay window."""
    taper = np.kaiser(n, _FREQ_TAPER_BETA)
    window = _gate_window(n, step, gate)
    return taper, window


def _apply_gate(s21: np.ndarray, taper: np.ndarray, window: np.ndarray) -> np.ndarray:
    y = np.fft.ifft(s21 * taper, axis=0)
    return np.fft.fft(y * window, axis=0) / taper


def _gate_correction(freqs_hz: np.ndarray, taper: np.ndarray, window: np.ndarray,
                     gate: GateSpec) -> np.ndarray:
    """Per-frequency factor making the gate unity-gain at its center.

    Gating convolves the band-limited spectrum with the window transform,
    which rolls off and rings near the band edges.  Dividing by the gated
    response of an ideal unit echo at the gate center removes that
    distortion exactly for a centered echo and to first order for echoes
    elsewhere inside the flat region (the usual compensated-gate scheme of
    VNA time-domain processing).
    """
    reference = np.exp(-2j * np.pi * freqs_hz * gate.center_s)
    gated_ref = _apply_gate(reference, taper, window)
    magnitude = np.abs(gated_ref)
    if np.min(magnitude) < 1e-9 * np.max(magnitude):
        raise ValueError("gate too narrow to renormalize; widen the gate or its taper")
    return reference / gated_ref


def time_gate(
    s21_of_f: np.ndarray,
    freqs_hz: np.ndarray,
    gate: GateSpec,
    renormalize: bool = True,
) -> np.ndarray:
    """Gate one frequency trace in the delay domain.

    Applies a Kaiser frequency taper (divided out afterwards) to keep
    off-grid delay sidelobes from leaking through the gate, transforms to
    delay, multiplies by the tapered gate window and transforms back.
    The gate must lie inside the unambiguous delay span
    1 / frequency_step.  With ``renormalize`` (default) the result is
    compensated so a unit echo at the gate center passes with exactly
    unity gain.

    The outermost band-edge bins are amplified by the taper division and
    stay unreliable after any gating scheme; quantitative use of gated
    spectra should stick to the band interior.
    """
    s21 = np.asarray(s21_of_f)
    freqs = np.asarray(freqs_hz, dtype=float)
    if s21.shape != freqs.shape:
        raise ValueError("trace and frequency grid lengths differ")
    step = _check_uniform_grid(freqs)
    taper, window = _gate_operator(len(s21), step, gate)
    gated = _apply_gate(s21, taper, window)
    if renormalize:
        gated *= _gate_correction(freqs, taper, window, gate)
    return gated


def gate_record(record: SweepRecord, gate: GateSpec, renormalize: bool = True) -> SweepRecord:
    """Apply :func:`time_gate` to every (angle, polarization) trace."""
    step = _check_uniform_grid(record.freqs_hz)
    taper, window = _gate_operator(len(record.freqs_hz), step, gate)
    gated = _apply_gate(record.s21, taper[:, None, None], window[:, None, None])
    if renormalize:
        gated *= _gate_correction(record.freqs_hz, taper, window, gate)[:, None, None]
    return SweepRecord(
        label=record.label,
        freqs_hz=record.freqs_hz,
        angles_deg=record.angles_deg,
        s21=gated,
        pols=record.pols,
    )


def auto_gate(record: SweepRecord, width_s: float, taper_fraction: float = 0.1) -> GateSpec:
    """Gate centered on the strongest delay-domain peak of the record.

    The peak is taken from the power impulse response averaged over all
    angles and polarizations, interpolated (zero padding plus a parabolic
    fit) to sub-sample accuracy: the renormalized gate is exact only for
    an echo at its center, so the center should track the echo delay much
    closer than one delay bin.
    """
    step = _check_uniform_grid(record.freqs_hz)
    n = len(record.freqs_hz)
    pad = 8
    taper = np.kaiser(n, _FREQ_TAPER_BETA)
    impulse = np.fft.ifft(record.s21 * taper[:, None, None], n=pad * n, axis=0)
    mean_power = np.mean(np.abs(impulse) ** 2, axis=(1, 2))
    peak = int(np.argmax(mean_power))
    left = mean_power[(peak - 1) % (pad * n)]
    mid = mean_power[peak]
    right = mean_power[(peak + 1) % (pad * n)]
    denom = left - 2.0 * mid + right
    shift = 0.5 * (left - right) / denom if denom != 0.0 else 0.0
    center = ((peak + shift) % (pad * n)) / (pad * n * step)
    return GateSpec(center_s=center, width_s=width_s, taper_fraction=taper_fraction)


def reflectivity_map(record: SweepRecord, gate: GateSpec | None = None) -> ReflectivityMap:
    """Normalized power map of a processed sweep record, in dB.

    When ``gate`` is given the record is time-gated (renormalized) first,
    the final chain step; otherwise it is assumed to be fully processed
    already.  Power |S21|^2 per cell is divided by the single global
    maximum over all angles, frequencies and polarizations, making the
    map invariant to any overall complex scaling of the record.
    """
    if gate is not None:
        record = gate_record(record, gate)
    power = np.abs(record.s21) ** 2
    reference = float(np.max(power))
    if reference == 0.0:
        raise ValueError("record is identically zero; nothing to normalize")
    values_db = 10.0 * np.log10(np.maximum(power / reference, 1e-300))
    return ReflectivityMap(
        values_db=values_db,
        freqs_hz=record.freqs_hz,
        angles_deg=record.angles_deg,
        pols=record.pols,
        norm_reference=reference,
    )
