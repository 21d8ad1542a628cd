import math
import sys

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("nisim", max_examples=60, deadline=None)
settings.load_profile("nisim")


def ket(dim, i):
    v = np.zeros(dim, dtype=complex)
    v[i] = 1
    return v


def kb(dim, i, j):
    """|i><j| in dimension ``dim``."""
    return np.outer(ket(dim, i), ket(dim, j))


def kron(*ms):
    out = np.ones((1, 1), dtype=complex) if np.ndim(ms[0]) == 2 else np.ones(1, dtype=complex)
    for m in ms:
        out = np.kron(out, m)
    return out


def plus(phi):
    return np.array([1, np.exp(1j * phi)]) / math.sqrt(2)


def proj_plus(phi):
    v = plus(phi)
    return np.outer(v, v.conj())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])
