import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20071019)


def random_rotation(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


_PROVIDERS = {}


def shared_nulls(replicates, seed=0):
    """Session-wide in-memory null provider; tables are simulated at most once per run."""
    from scaledim.nulls import NullProvider

    key = (replicates, seed)
    if key not in _PROVIDERS:
        _PROVIDERS[key] = NullProvider(replicates=replicates, seed=seed, generate=True)
    return _PROVIDERS[key]


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
