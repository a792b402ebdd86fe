import functools

import numpy as np
import pytest

from rabispec import oracle
from rabispec.series import ModelParams


@functools.lru_cache(maxsize=None)
def sector_levels(g, delta, parity, n_fock=300):
    """Certified oracle levels of one parity sector as spectral values x = E + g^2."""
    p = ModelParams(g, delta)
    return oracle.sector_eigenvalues(p, parity, n_fock) + g * g


@functools.lru_cache(maxsize=None)
def all_levels(g, delta, epsilon=0.0, n_fock=300):
    p = ModelParams(g, delta, epsilon)
    return oracle.solve(p, n_fock).spectral(p)


@pytest.fixture
def rabi():
    return ModelParams(1.0, 0.7)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_LINES] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_LINES]

    def record(label, ok, detail):
        line = f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
