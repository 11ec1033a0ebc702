import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

from seqgini.design import (FrameSource, IncomeLaw, PopulationFrame, PopulationSpec,  # noqa: E402
                            StratumFrame)

GAMMA = IncomeLaw("gamma", (2.649, 0.84))
PARETO = IncomeLaw("pareto", (20000, 5))
LOGNORMAL = IncomeLaw("lognormal", (2.185, 0.562))
LAWS = {"gamma": GAMMA, "pareto": PARETO, "lognormal": LOGNORMAL}


def toy_frame(counts_by_stratum, incomes=True, seed=0):
    """Frame from explicit per-cluster (m1, m2) counts; incomes are
    distinct positive values, affluent ones above every non-affluent one."""
    rng = np.random.default_rng(seed)
    strata = []
    for s, counts in enumerate(counts_by_stratum):
        counts = np.asarray(counts, dtype=np.int64)
        if incomes:
            blocks = []
            for m1, m2 in counts:
                blocks.append(np.sort(rng.uniform(100, 200, m1)))
                blocks.append(np.sort(rng.uniform(1, 99, m2)))
            x = np.concatenate(blocks)
            offsets = np.concatenate(([0], np.cumsum(counts.ravel())[:-1])).reshape(-1, 2)
            strata.append(StratumFrame(s + 1, range(1, len(counts) + 1), counts, x, offsets))
        else:
            strata.append(StratumFrame(s + 1, range(1, len(counts) + 1), counts))
    return PopulationFrame(tuple(strata))


@pytest.fixture
def small_spec():
    return PopulationSpec(GAMMA, strata_sizes=(40, 40), household_range=(5, 15))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
