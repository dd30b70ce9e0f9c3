import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import numpy as np
import pytest

from trackpgd.toy import ToyTracker, generate_toy_sequences


@pytest.fixture(scope="session")
def tiny_sequences():
    return generate_toy_sequences(7, 3, 4, 16)


@pytest.fixture(scope="session")
def untrained_tracker(tiny_sequences):
    """Randomly initialised tracker (no training); cheap and fully deterministic."""
    return ToyTracker(channels=6, epochs=0, seed=3).fit(tiny_sequences)


@pytest.fixture(scope="session")
def random_frame_case():
    rng = np.random.default_rng(0)
    frame = rng.uniform(0.05, 0.95, size=(16, 16, 3))
    mask = np.zeros((16, 16), np.uint8)
    mask[5:10, 4:11] = 1
    return frame, mask


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one line per acceptance criterion; printed in the terminal summary."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
