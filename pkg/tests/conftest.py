import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cbmopt.bench import BenchConfig, sample_instance  # noqa: E402

# criterion number -> (passed, detail), filled in by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def make_instance():
    """Baseline-regime instance factory: make_instance(seed, index, n, m=11, horizon=2)."""
    def make(seed, index, n, m=11, horizon=2, **overrides):
        cfg = BenchConfig(seed=seed, m=m, **overrides)
        return sample_instance(cfg, index, n, horizon=horizon)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
