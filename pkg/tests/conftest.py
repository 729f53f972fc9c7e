import numpy as np
import pytest
from fractions import Fraction

from solvdyn import pi1
from solvdyn.conjugacy import CenterSystem, build_section_map
from solvdyn.perturbed import PerturbedMap
from solvdyn.solgeo import SolFrame

CAT = ((2, 1), (1, 1))
DEFAULT_SEED = 7
DEFAULT_EPS = 0.05


@pytest.fixture(scope="session")
def cat_frame():
    return SolFrame(CAT)


@pytest.fixture(scope="session")
def identity_model():
    return pi1.AffineModel(b=((1, 0), (0, 1)), w=(Fraction(0), Fraction(0)), e=1)


@pytest.fixture(scope="session")
def unperturbed_map(identity_model):
    return PerturbedMap(CAT, identity_model, k=1, eps=0.0)


@pytest.fixture(scope="session")
def perturbed_map(identity_model):
    return PerturbedMap(CAT, identity_model, k=1, eps=DEFAULT_EPS, seed=DEFAULT_SEED)


@pytest.fixture(scope="session")
def center_system(perturbed_map):
    return CenterSystem(perturbed_map)


@pytest.fixture(scope="session")
def section_map(center_system):
    return build_section_map(center_system, grid_n=13)


@pytest.fixture(scope="session")
def center_system_unperturbed(unperturbed_map):
    return CenterSystem(unperturbed_map)


def rand_unimodular2(rng, bound=3):
    """Random 2x2 unimodular integer matrix with bounded entries."""
    while True:
        m = tuple(tuple(int(x) for x in row) for row in rng.integers(-bound, bound + 1, (2, 2)))
        d = m[0][0] * m[1][1] - m[0][1] * m[1][0]
        if d in (1, -1):
            return m


def rand_points(rng, n, scale=2.0):
    from solvdyn.solgeo import CoverPoint
    pts = rng.normal(size=(n, 3)) * scale
    return [CoverPoint((float(p[0]), float(p[1])), float(p[2])) for p in pts]
