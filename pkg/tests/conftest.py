import math

import numpy as np
import pytest
from hypothesis import settings

from nfmmse.config import ExperimentConfig, desk_scale
from nfmmse.geometry import ArrayGeometry

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def desk_geom():
    return ArrayGeometry(16, 8, 0.0015, 0.003)


@pytest.fixture(scope="session")
def small_geom():
    return ArrayGeometry(4, 4, 0.0015, 0.003)


@pytest.fixture(scope="session")
def desk_cfg():
    return desk_scale(ExperimentConfig())


@pytest.fixture(scope="session")
def table1_cfg():
    return ExperimentConfig()


def random_unitary_columns(rng, n, k):
    q, _ = np.linalg.qr(rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k)))
    return q


def deg(x):
    return math.radians(x)


# Acceptance results, printed as a block at the end of the session.
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
