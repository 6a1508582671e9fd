import math

import numpy as np
import pytest

from bisig import SPEED_OF_LIGHT
from bisig.geometry import (
    AspectAngles,
    BistaticGeometry,
    aspect_angles,
    bistatic_angle,
    bistatic_bisector,
    far_field_distance,
    micro_doppler_spread,
    point_doppler,
    propeller_point_doppler,
)

WAVELENGTH = SPEED_OF_LIGHT / 3.7e9
OMEGA = 2.0 * math.pi * 25.0
BLADE = 0.1655


def random_geometry(rng, min_range=10.0, max_range=100.0):
    target = rng.uniform(-20.0, 20.0, 3)
    def leg():
        d = rng.uniform(min_range, max_range)
        v = rng.standard_normal(3)
        return target + d * v / np.linalg.norm(v)
    return BistaticGeometry(leg(), leg(), target)


class TestBistaticAngle:
    def test_target_on_baseline_is_forward_scatter(self):
        geom = BistaticGeometry([-1, 0, 0], [1, 0, 0], [0, 0, 0])
        assert bistatic_angle(geom) == pytest.approx(math.pi)

    def test_coincident_tx_rx_is_monostatic(self):
        geom = BistaticGeometry([0, 0, 3], [0, 0, 3], [0, 0, 0])
        assert bistatic_angle(geom) == pytest.approx(0.0, abs=1e-12)

    def test_perpendicular_legs(self):
        geom = BistaticGeometry([0, 3, 0], [3, 0, 0], [0, 0, 0])
        assert bistatic_angle(geom) == pytest.approx(math.pi / 2)

    def test_symmetric_under_tx_rx_swap(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            geom = random_geometry(rng)
            assert bistatic_angle(geom) == pytest.approx(bistatic_angle(geom.swapped()))

    def test_degenerate_geometry_rejected(self):
        with pytest.raises(ValueError):
            BistaticGeometry([0, 0, 0], [1, 0, 0], [0, 0, 0])
        with pytest.raises(ValueError):
            BistaticGeometry([1, 0, 0], [0, 0, 0], [0, 0, 0])

    def test_non_finite_positions_rejected(self):
        with pytest.raises(ValueError):
            BistaticGeometry([math.nan, 0, 0], [1, 0, 0], [0, 0, 0])


class TestBisector:
    def test_monostatic_points_at_tx(self):
        geom = BistaticGeometry([0, 0, 3], [0, 0, 3], [0, 0, 0])
        np.testing.assert_allclose(bistatic_bisector(geom), [0, 0, 1], atol=1e-12)

    def test_symmetric_geometry_bisects_along_z(self):
        geom = BistaticGeometry([2, 0, 3], [-2, 0, 3], [0, 0, 0])
        np.testing.assert_allclose(bistatic_bisector(geom), [0, 0, 1], atol=1e-12)

    def test_equal_angles_to_both_legs(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            geom = random_geometry(rng)
            b = bistatic_bisector(geom)
            a_tx = math.acos(np.clip(np.dot(b, geom.unit_to_tx()), -1, 1))
            a_rx = math.acos(np.clip(np.dot(b, geom.unit_to_rx()), -1, 1))
            assert a_tx == pytest.approx(a_rx, abs=1e-9)

    def test_forward_scatter_rejected(self):
        geom = BistaticGeometry([-1, 0, 0], [1, 0, 0], [0, 0, 0])
        with pytest.raises(ValueError, match="forward scattering"):
            bistatic_bisector(geom)


class TestPointDoppler:
    def test_zero_velocity(self, monostatic_geom):
        assert point_doppler(monostatic_geom, [0, 0, 0], WAVELENGTH) == 0.0

    def test_forward_scatter_null(self):
        geom = BistaticGeometry([-5, 0, 0], [5, 0, 0], [0, 0, 0])
        for v in ([1, 2, 3], [0, 0, 9], [-4, 1, 0]):
            assert point_doppler(geom, v, WAVELENGTH) == pytest.approx(0.0, abs=1e-12)

    def test_zero_wavelength_rejected(self, monostatic_geom):
        with pytest.raises(ValueError):
            point_doppler(monostatic_geom, [1, 0, 0], 0.0)

    def test_matches_range_rate_oracle(self):
        rng = np.random.default_rng(23)
        dt = 1e-6
        for _ in range(200):
            geom = random_geometry(rng)
            velocity = rng.standard_normal(3) * 10.0

            def total_path(t):
                p = geom.target_pos + velocity * t
                return np.linalg.norm(geom.tx_pos - p) + np.linalg.norm(geom.rx_pos - p)

            oracle = -(total_path(dt) - total_path(-dt)) / (2 * dt) / WAVELENGTH
            measured = point_doppler(geom, velocity, WAVELENGTH)
            assert measured == pytest.approx(oracle, rel=1e-3, abs=1e-6)

    def test_monostatic_reduces_to_classic_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            target = rng.uniform(-5, 5, 3)
            radar = target + rng.standard_normal(3) * 20.0
            geom = BistaticGeometry(radar, radar, target)
            velocity = rng.standard_normal(3) * 8.0
            ang = aspect_angles(geom, velocity)
            speed = np.linalg.norm(velocity)
            classic = -2 * speed * math.cos(ang.phi) * math.sin(ang.theta) / WAVELENGTH
            assert point_doppler(geom, velocity, WAVELENGTH) == pytest.approx(classic, rel=1e-9)

    def test_closed_form_with_aspect_angles(self):
        # the dot-product evaluation must equal the explicit angle formula
        rng = np.random.default_rng(7)
        for _ in range(100):
            geom = random_geometry(rng)
            velocity = rng.standard_normal(3) * 12.0
            beta = bistatic_angle(geom)
            ang = aspect_angles(geom, velocity)
            speed = np.linalg.norm(velocity)
            formula = (
                -2 * speed * math.cos(beta / 2) * math.cos(ang.phi) * math.sin(ang.theta)
                / WAVELENGTH
            )
            assert point_doppler(geom, velocity, WAVELENGTH) == pytest.approx(formula, rel=1e-9)


class TestAspectAngles:
    def test_ranges(self):
        rng = np.random.default_rng(41)
        for _ in range(100):
            geom = random_geometry(rng)
            ang = aspect_angles(geom, rng.standard_normal(3))
            assert -math.pi <= ang.phi <= math.pi
            assert 0.0 <= ang.theta <= math.pi

    def test_zero_velocity_rejected(self, monostatic_geom):
        with pytest.raises(ValueError):
            aspect_angles(monostatic_geom, [0, 0, 0])

    def test_receding_velocity_has_zero_phi(self, monostatic_geom):
        # radar on +z, target receding along -z: along the azimuth reference
        ang = aspect_angles(monostatic_geom, [0, 0, -4.0])
        assert ang == AspectAngles(phi=pytest.approx(0.0, abs=1e-12),
                                   theta=pytest.approx(math.pi / 2))


class TestPropellerPointDoppler:
    def test_hub_is_zero(self):
        assert propeller_point_doppler(OMEGA, 0.0, 0.3, 1.0, 1.0, 1.0, WAVELENGTH) == 0.0

    def test_peak_blade_tip_doppler_matches_reference_value(self):
        # 2*pi*25 rad/s, 16.55 cm tip, beta=60 deg, theta=90 deg: |f_D| peaks at 555.4 Hz
        f = propeller_point_doppler(
            OMEGA, BLADE, 0.0, 0.0, math.radians(60.0), math.pi / 2, WAVELENGTH
        )
        assert abs(f) == pytest.approx(555.4, rel=5e-3)

    def test_sweep_over_rotation_is_sinusoid_with_predicted_peak(self):
        beta, theta = math.radians(40.0), math.radians(75.0)
        t = np.linspace(0.0, 1.0 / 25.0, 4001)
        values = np.array(
            [propeller_point_doppler(OMEGA, BLADE, 0.7, ti, beta, theta, WAVELENGTH) for ti in t]
        )
        predicted_peak = 2 * OMEGA * BLADE * math.cos(beta / 2) * math.sin(theta) / WAVELENGTH
        assert values.max() == pytest.approx(predicted_peak, rel=1e-6)
        assert values.min() == pytest.approx(-predicted_peak, rel=1e-6)

    def test_negative_radius_rejected(self):
        with pytest.raises(ValueError):
            propeller_point_doppler(OMEGA, -0.1, 0, 0, 1.0, 1.0, WAVELENGTH)


class TestMicroDopplerSpread:
    def test_reference_value_at_beta60(self):
        spread = micro_doppler_spread(OMEGA, BLADE, math.radians(60.0), math.pi / 2, WAVELENGTH)
        assert spread == pytest.approx(1110.8, rel=5e-3)
        assert spread == pytest.approx(
            2 * abs(propeller_point_doppler(OMEGA, BLADE, 0, 0, math.radians(60), math.pi / 2, WAVELENGTH))
        )

    def test_forward_scatter_is_zero(self):
        assert micro_doppler_spread(OMEGA, BLADE, math.pi, math.pi / 2, WAVELENGTH) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_monostatic_value(self):
        # direct evaluation of 4*omega*L/lambda
        spread = micro_doppler_spread(OMEGA, BLADE, 0.0, math.pi / 2, WAVELENGTH)
        assert spread == pytest.approx(1282.497, abs=0.01)

    def test_monotone_non_increasing_in_beta(self):
        betas = np.linspace(0.0, math.pi, 73)
        spreads = [micro_doppler_spread(OMEGA, BLADE, b, math.pi / 2, WAVELENGTH) for b in betas]
        assert all(s1 >= s2 - 1e-12 for s1, s2 in zip(spreads, spreads[1:]))


class TestFarFieldDistance:
    def test_vehicle_at_59ghz(self):
        assert far_field_distance(4.0, 5.9e9) == pytest.approx(629.4, abs=0.1)

    def test_zero_size(self):
        assert far_field_distance(0.0, 5.9e9) == 0.0

    def test_drone_scale(self):
        assert far_field_distance(0.35, 3.7e9) == pytest.approx(3.0217, abs=1e-3)

    def test_scaling_laws(self):
        base = far_field_distance(1.0, 1e9)
        assert far_field_distance(2.0, 1e9) == pytest.approx(4.0 * base)
        assert far_field_distance(1.0, 3e9) == pytest.approx(3.0 * base)

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            far_field_distance(-1.0, 1e9)
        with pytest.raises(ValueError):
            far_field_distance(1.0, 0.0)
