import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def quick_model():
    """Force-air model calibrated on a coarse noiseless sweep of the default airframe."""
    import math

    from dobwind import airmodel, plant
    from dobwind.frames import UavParams

    p = UavParams()
    log = plant.run_wind_tunnel_scenario(p, plant.barrel_airframe(noise_sigma=0.0),
                                         yaw_step_rad=math.radians(30), dwell_s=6.0)
    return airmodel.calibrate(log, p, 6.0)


ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
