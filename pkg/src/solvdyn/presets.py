"""Named presets: the worked examples become one-line reproducible fixtures."""

from fractions import Fraction

from .quotients import AffineTorusMap

CAT = ((2, 1), (1, 1))

TORUS_MATRICES = {
    "paper-matrix-1": ((2, 1, 0), (1, 1, 0), (0, 0, 1)),
    "paper-matrix-2": ((3, 1, 0), (2, 1, 0), (0, 0, 1)),
    "paper-matrix-3": ((5, 2, 3), (2, 1, 1), (0, 0, 1)),
}

_TAU_DATA = {
    "tau1": (((-1, 0, 0), (0, -1, 0), (0, 0, 1)), (0, 0, Fraction(1, 2))),
    "tau2": (((1, 0, 0), (0, 1, 0), (0, 0, -1)), (Fraction(1, 2), 0, 0)),
    "tau3": (((1, 0, 1), (0, 1, 1), (0, 0, -1)), (Fraction(1, 2), 0, 0)),
}

# the tau involutions pair with the torus matrices in this order
TAU_PAIRING = {"tau1": "paper-matrix-1", "tau2": "paper-matrix-2", "tau3": "paper-matrix-3"}


def tau_map(name: str) -> AffineTorusMap:
    linear, translation = _TAU_DATA[name]
    return AffineTorusMap(linear, translation)


def matrix_preset(name: str):
    if name == "cat":
        return CAT
    return TORUS_MATRICES[name]


PRESET_NAMES = sorted(list(TORUS_MATRICES) + list(_TAU_DATA) + ["cat", "heis-example"])
