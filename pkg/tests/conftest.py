"""Shared fixtures: seeded generators, small region systems and calibrations."""

import numpy as np
import pytest

from calibration import build_calibration
from localmeans import COUNTS, make_field
from regions import build_rectangles


@pytest.fixture()
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture()
def small_system():
    """16 x 16 grid, all rectangles with sides 2..6 (25 scales)."""
    return build_rectangles(16, 2, 2, 6)


@pytest.fixture()
def dw():
    return build_calibration('dw', 2)


@pytest.fixture()
def count_field(rng):
    return make_field(rng.poisson(2.0, (16, 16)), COUNTS)


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    """Keep local AMS_* variables from leaking into tests."""
    for name in ('AMS_SETTINGS', 'AMS_QUANTILE_STORE', 'AMS_THREADS'):
        monkeypatch.delenv(name, raising=False)
