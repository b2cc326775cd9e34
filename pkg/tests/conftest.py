import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ssmcodec.transforms import TransformConfig
from ssmcodec.weights import init_weights

# Numpy-heavy properties routinely blow the default 200ms deadline on CI
# boxes; determinism comes from derandomize, not timing.
settings.register_profile(
    "codec",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("codec")


@pytest.fixture(scope="session")
def tiny_store():
    return init_weights(TransformConfig.tiny(), seed=0)


@pytest.fixture(scope="session")
def small_store():
    return init_weights(TransformConfig.small(), seed=0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and rep.when == "call":
                name = nodeid.split("::")[-1]
                status = "PASS" if outcome == "passed" else "FAIL"
                lines.append((name, status))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, status in sorted(lines):
            terminalreporter.write_line(f"{status}  {name}")
