"""Shared fixtures.

The scenario battery fixture runs every shipped scenario exactly once and is
session scoped: a full sweep takes on the order of two minutes, almost all of
it in the finite-difference positivity grids.
"""

import pytest

from coversmooth import build_scenario, run_scenario
from coversmooth.scenarios import SCENARIO_IDS


@pytest.fixture(scope="session")
def scenario_runs():
    """Map scenario id -> (report dict, stage timings dict)."""
    out = {}
    for sid in SCENARIO_IDS:
        timings = {}
        report = run_scenario(build_scenario(sid), timings=timings)
        out[sid] = (report, timings)
    return out
