import sys
from fractions import Fraction
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fermiball import InteractionPotential, build_fermi_ball

UNIT_VECTORS = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]


@pytest.fixture(scope="session")
def ball_tiny():
    """k_F = 1: origin plus the six unit vectors."""
    return build_fermi_ball(k_fermi_sq=Fraction(3, 2))


@pytest.fixture(scope="session")
def ball_small():
    return build_fermi_ball(k_fermi_sq=Fraction("20.5"))


@pytest.fixture(scope="session")
def ball_100():
    return build_fermi_ball(k_fermi_sq=Fraction("100.5"))


@pytest.fixture(scope="session")
def ball_400():
    return build_fermi_ball(k_fermi_sq=Fraction("400.5"))


@pytest.fixture(scope="session")
def ball_1600():
    return build_fermi_ball(k_fermi_sq=Fraction("1600.5"))


@pytest.fixture(scope="session")
def ball_3600():
    return build_fermi_ball(k_fermi_sq=Fraction("3600.5"))


@pytest.fixture(scope="session")
def ball_6400():
    return build_fermi_ball(k_fermi_sq=Fraction("6400.5"))


@pytest.fixture(scope="session")
def unit_potential():
    """V = 0.05 on the six unit vectors."""
    return InteractionPotential({k: 0.05 for k in UNIT_VECTORS})
