import numpy as np
import pytest

from bisig.geometry import BistaticGeometry
from bisig.scene import Propeller, Scene
from bisig.simulate import flyover_sweep, simulate_slow_time
from bisig.waveform import OfdmConfig


@pytest.fixture(scope="session")
def light_config():
    """Reduced carrier grid with the standard 125 kHz spacing: fast sims."""
    return OfdmConfig(
        center_freq_hz=3.7e9,
        bandwidth_hz=32e6,
        n_carriers=256,
        n_active=192,
        symbol_duration_s=8e-6,
        pilot_stride=10,
    )


@pytest.fixture(scope="session")
def drone_propeller():
    """Two 16.55 cm blades at 25 Hz, axis perpendicular to the bisector."""
    return Propeller(
        center=[0.0, 0.0, 0.0],
        rotation_axis=[1.0, 0.0, 0.0],
        n_blades=2,
        radius_m=0.1655,
        f_rot_hz=25.0,
    )


@pytest.fixture(scope="session")
def geom_beta60():
    return flyover_sweep([60.0])[0]


@pytest.fixture(scope="session")
def monostatic_geom():
    return BistaticGeometry([0.0, 0.0, 3.0], [0.0, 0.0, 3.0], [0.0, 0.0, 0.0])


@pytest.fixture(scope="session")
def propeller_cube(light_config, drone_propeller, geom_beta60):
    """10240 symbols (4.1 blade-passing periods): resolved line comb."""
    scene = Scene(propellers=[drone_propeller])
    return simulate_slow_time(scene, geom_beta60, light_config, 10240)


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)
