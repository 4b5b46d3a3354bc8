import numpy as np
import pytest

from surfreg.genetic import GaConfig
from surfreg.geometry import EulerAngles, RigidMotion
from surfreg.synth import default_pair_spec, run_trials


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_motion(rng, scale=100.0):
    angles = rng.uniform(-180.0, 180.0, size=3)
    angles[1] = rng.uniform(-89.0, 89.0)
    return RigidMotion(EulerAngles(*angles), tuple(rng.uniform(-scale, scale, size=3)))


def brute_nearest(points, q):
    """O(N) oracle using the same squared-distance arithmetic as the index."""
    dx = points[:, 0] - q[0]
    dy = points[:, 1] - q[1]
    dz = points[:, 2] - q[2]
    d2 = dx * dx + dy * dy + dz * dz
    i = int(np.argmin(d2))  # argmin returns the first minimum
    return i, float(np.sqrt(d2[i]))


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one pass/fail line per acceptance criterion; returns the verdict."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number, title, ok, detail):
        line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} [{detail}]"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def benchmark_trials():
    """Default synthetic pair, seeds 0-9, both modes at the default GA settings."""
    outcomes = []
    for seed in range(10):
        outcomes.extend(run_trials(default_pair_spec(seed), ["reduced", "full"], GaConfig(seed=seed)))
    return outcomes
