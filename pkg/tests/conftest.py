import sys

import numpy as np
import pytest
import torch

from amfusion.data import FusionConfig


@pytest.fixture(autouse=True)
def _seeded():
    torch.manual_seed(0)
    np.random.seed(0)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    acceptance = sys.modules.get("test_acceptance")
    lines = getattr(acceptance, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def tiny_config():
    """Smallest config that keeps all head-divisibility constraints."""
    return FusionConfig(base_channels=4)
