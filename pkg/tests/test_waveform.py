import math

import numpy as np
import pytest

from bisig.waveform import (
    OfdmConfig,
    ReferenceSymbol,
    build_reference,
    crest_factor,
    newman_phases,
    time_domain_symbol,
)


class TestNewmanPhases:
    def test_single_tone(self):
        np.testing.assert_allclose(newman_phases(1), [0.0])

    def test_four_tones(self):
        np.testing.assert_allclose(
            newman_phases(4), [0.0, math.pi / 4, math.pi, 9 * math.pi / 4]
        )

    def test_invalid_n(self):
        with pytest.raises(ValueError):
            newman_phases(0)

    def test_crest_factor_beats_random_phases(self):
        # quadratic phasing should beat the median of random phase draws
        n = 1280
        x = np.fft.ifft(np.exp(1j * newman_phases(n)), 4 * n)
        newman_crest = crest_factor(x)

        rng = np.random.default_rng(99)
        random_crests = []
        for _ in range(100):
            phases = rng.uniform(0.0, 2 * math.pi, n)
            random_crests.append(crest_factor(np.fft.ifft(np.exp(1j * phases), 4 * n)))
        assert newman_crest < np.median(random_crests)


class TestOfdmConfig:
    def test_defaults_are_consistent(self):
        cfg = OfdmConfig()
        assert cfg.carrier_spacing_hz == pytest.approx(125e3)
        assert cfg.symbol_rate_hz == pytest.approx(125e3)
        assert cfg.guard_carriers == 160

    def test_spacing_symbol_duration_product_is_one(self):
        for cfg in (
            OfdmConfig(),
            OfdmConfig(center_freq_hz=5e9, bandwidth_hz=32e6, n_carriers=256, n_active=192,
                       symbol_duration_s=8e-6),
            OfdmConfig(bandwidth_hz=100e6, n_carriers=1000, n_active=800, symbol_duration_s=1e-5),
        ):
            assert cfg.carrier_spacing_hz * cfg.symbol_duration_s == pytest.approx(1.0)

    def test_inconsistent_grid_rejected_with_diagnostic(self):
        with pytest.raises(ValueError, match="carrier spacing"):
            OfdmConfig(bandwidth_hz=200e6, n_carriers=1600, symbol_duration_s=5e-6)

    def test_active_exceeding_total_rejected(self):
        with pytest.raises(ValueError):
            OfdmConfig(n_active=1601)

    def test_odd_guard_split_rejected(self):
        with pytest.raises(ValueError, match="guard"):
            OfdmConfig(n_active=1279)

    def test_carrier_freqs_centered(self):
        cfg = OfdmConfig()
        freqs = cfg.carrier_freqs_hz()
        assert len(freqs) == 1600
        assert freqs[800] == pytest.approx(3.7e9)
        assert freqs[1] - freqs[0] == pytest.approx(125e3)


class TestBuildReference:
    def test_default_layout(self):
        ref = build_reference(OfdmConfig())
        assert int(np.count_nonzero(ref.amplitudes)) == 1280
        assert not ref.active_mask[:160].any()
        assert not ref.active_mask[-160:].any()
        assert ref.active_mask[160:1440].all()

    def test_constant_magnitude_on_active(self):
        ref = build_reference(OfdmConfig())
        mags = np.abs(ref.amplitudes[ref.active_mask])
        # unit magnitude by construction; equality up to float rounding of |exp(j phi)|
        assert mags.max() / mags.min() == pytest.approx(1.0, abs=1e-15)
        np.testing.assert_allclose(mags, 1.0, rtol=4e-16)

    def test_pilot_layout(self):
        ref = build_reference(OfdmConfig())
        assert int(ref.pilot_mask.sum()) == 128
        active_idx = np.nonzero(ref.active_mask)[0]
        np.testing.assert_array_equal(np.nonzero(ref.pilot_mask)[0], active_idx[::10])
        assert int(ref.data_mask.sum()) == 1280 - 128

    def test_no_pilots_when_stride_zero(self):
        ref = build_reference(OfdmConfig(pilot_stride=0))
        assert not ref.pilot_mask.any()
        assert int(ref.data_mask.sum()) == 1280

    def test_no_guards_when_fully_active(self):
        ref = build_reference(
            OfdmConfig(bandwidth_hz=32e6, n_carriers=256, n_active=256, symbol_duration_s=8e-6)
        )
        assert ref.active_mask.all()


class TestTimeDomainSymbol:
    def test_single_carrier_is_complex_exponential(self):
        cfg = OfdmConfig(bandwidth_hz=8e6, n_carriers=64, n_active=64,
                         symbol_duration_s=8e-6, pilot_stride=0)
        amplitudes = np.zeros(64, dtype=complex)
        amplitudes[64 // 2 + 3] = 1.0  # +3 carrier offsets from center
        ref = ReferenceSymbol(
            amplitudes=amplitudes,
            active_mask=np.ones(64, bool),
            pilot_mask=np.zeros(64, bool),
            config=cfg,
        )
        x = time_domain_symbol(ref)
        np.testing.assert_allclose(np.abs(x), np.abs(x[0]), rtol=1e-12)
        expected = np.exp(2j * np.pi * 3 * np.arange(64) / 64) / 64
        np.testing.assert_allclose(x, expected, atol=1e-15)

    def test_zero_spectrum_gives_zero_signal(self):
        cfg = OfdmConfig(bandwidth_hz=8e6, n_carriers=64, n_active=64,
                         symbol_duration_s=8e-6, pilot_stride=0)
        ref = ReferenceSymbol(
            amplitudes=np.zeros(64, dtype=complex),
            active_mask=np.ones(64, bool),
            pilot_mask=np.zeros(64, bool),
            config=cfg,
        )
        assert not time_domain_symbol(ref).any()

    def test_round_trip_to_machine_precision(self):
        ref = build_reference(OfdmConfig())
        x = time_domain_symbol(ref)
        back = np.fft.fftshift(np.fft.fft(x))
        err = np.max(np.abs(back - ref.amplitudes)) / np.max(np.abs(ref.amplitudes))
        assert err < 1e-12

    def test_crest_factor_deterministic(self):
        ref = build_reference(OfdmConfig())
        a = crest_factor(time_domain_symbol(ref))
        b = crest_factor(time_domain_symbol(build_reference(OfdmConfig())))
        assert a == b

    def test_crest_factor_of_all_zero_rejected(self):
        with pytest.raises(ValueError):
            crest_factor(np.zeros(8))
