import sys

import numpy as np
import pytest

from delaycert.delays import make_delay, make_kernel
from delaycert.models import Feedback, build_scalar


def exp_channel(k0=0.4, lam=1.0, tau0=0.5, g0=0.3, b=1.0):
    return Feedback(make_delay({"kind": "constant", "value": tau0}),
                    make_kernel({"kind": "exp_decay_kernel", "k0": k0, "rate": lam}),
                    profile=lambda s, g0=g0: g0, b=b)


@pytest.fixture
def closed_form_system():
    """a = 1, tau = 0.5, k(t) = 0.4 e^{-t}, ||g|| = 0.3, b = 1."""
    return build_scalar(1.0, [exp_channel()])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
