import numpy as np
import pytest

from fingersense import presets
from fingersense.signal import calibrate_arrays
from fingersense.simfinger import run_scenario

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def rig_suite():
    """Three rig-matched fingers: logs and per-joint calibrations."""
    logs, cals = [], []
    for finger in range(3):
        log = run_scenario(presets.rig_sweep(seed=10 + finger), presets.rig_finger_specs(finger))
        losses = log.losses()
        logs.append(log)
        cals.append([calibrate_arrays(log.theta[:, j], losses[:, j], log.unloading, i0=log.intensity[0, j])
                     for j in range(3)])
    return logs, cals


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
