from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fswl.grid import Field, make_grid


@pytest.fixture
def grid16():
    return make_grid(16.0, 256)


@pytest.fixture
def gauss_pair(grid16):
    """Canonical-style initial data: modulated Gaussian signal, real bump."""
    u0 = Field.from_function(
        grid16,
        lambda x: 0.35 * np.exp(-(x**2)) * np.exp(1j * 3 * np.pi / 16.0 * x),
    )
    v0 = Field.from_function(
        grid16, lambda x: 0.4 * np.exp(-((x / 1.5) ** 2)), flavor="real"
    )
    return u0, v0
