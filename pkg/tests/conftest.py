import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make tests/oracles.py importable

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def ensemble_default():
    """The default overlap grid (builtin data, 50 replicates, seed 42) and its wall time."""
    from masim.ensemble.data import builtin_blobs
    from masim.ensemble.experiment import run_overlap_experiment

    t0 = time.perf_counter()
    res = run_overlap_experiment(builtin_blobs(), replicates=50, seed=42)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def attribution_default():
    from masim.vulnerability.attribution import run_attribution_experiment

    t0 = time.perf_counter()
    res = run_attribution_experiment(replicates=10, seed=42)
    return res, time.perf_counter() - t0


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
