import math
from fractions import Fraction

import numpy as np
import pytest

from solvdyn import certify, exact, pi1
from solvdyn.certify import SampledCocycle, certify_linear_t3, certify_model_sol, cone_certify
from solvdyn.errors import ConeNotInvariantError, ValidationError

from conftest import CAT, rand_unimodular2

PAPER_MATRICES = [
    ((2, 1, 0), (1, 1, 0), (0, 0, 1)),
    ((3, 1, 0), (2, 1, 0), (0, 0, 1)),
    ((5, 2, 3), (2, 1, 1), (0, 0, 1)),
]


def _block_plus_unit(rng, conjugate=True):
    """Random hyperbolic 2x2 block plus a +-1 eigenvalue, mildly conjugated."""
    while True:
        b = rand_unimodular2(rng, bound=4)
        if exact.is_hyperbolic(b):
            break
    sign = 1 if rng.integers(0, 2) else -1
    m = ((b[0][0], b[0][1], 0), (b[1][0], b[1][1], 0), (0, 0, sign))
    if conjugate:
        p = exact.identity(3)
        for _ in range(3):
            i, j = rng.integers(0, 3, 2)
            if i == j:
                continue
            c = int(rng.integers(-1, 2))
            rows = [list(r) for r in p]
            rows[i] = [x + c * y for x, y in zip(rows[i], rows[j])]
            p = tuple(tuple(r) for r in rows)
        m = exact.mat_mul(exact.mat_mul(p, m), exact.mat_inv_unimodular(p))
    return m


class TestCertifyLinearT3:
    @pytest.mark.parametrize("m", PAPER_MATRICES)
    def test_paper_matrices_absolute(self, m):
        cert = certify_linear_t3(m)
        assert cert.flavor == "absolute"
        assert cert.gamma1 < 1 < cert.gamma2

    def test_first_matrix_rates(self):
        cert = certify_linear_t3(PAPER_MATRICES[0])
        lam = (3 + math.sqrt(5)) / 2
        assert cert.n == 1
        assert cert.rates.s_upper == pytest.approx(1 / lam, abs=1e-9)
        assert cert.rates.c_lower == 1.0 == cert.rates.c_upper
        assert cert.rates.u_lower == pytest.approx(lam, abs=1e-9)

    def test_identity_none(self):
        assert certify_linear_t3(exact.identity(3)).flavor == "none"

    def test_unit_middle_detected_exactly(self):
        # the middle modulus is reported as exactly 1, decided on the char poly
        cert = certify_linear_t3(PAPER_MATRICES[1])
        assert cert.rates.c_lower == 1.0

    def test_hyperbolic_three_real(self):
        comp = ((0, 0, -1), (1, 0, 1), (0, 1, 2))  # x^3 - 2x^2 - x + 1, det -1
        cert = certify_linear_t3(comp)
        assert cert.flavor == "absolute"
        assert cert.rates.c_upper < 1.0  # all three moduli distinct, middle below 1

    def test_rotation_block_none(self):
        m = ((0, -1, 0), (1, 0, 0), (0, 0, 1))
        assert certify_linear_t3(m).flavor == "none"

    def test_iterate_consistency(self):
        m = PAPER_MATRICES[0]
        c1 = certify_linear_t3(m)
        c2 = certify_linear_t3(exact.mat_mul(m, m))
        assert c2.rates.u_lower == pytest.approx(c1.rates.u_lower ** 2, abs=1e-8)
        assert c2.rates.s_upper == pytest.approx(c1.rates.s_upper ** 2, abs=1e-8)


class TestCertifyModelSol:
    def test_time_one_shift(self, identity_model):
        cert = certify_model_sol(CAT, identity_model, 1)
        lam = (3 + math.sqrt(5)) / 2
        assert cert.flavor == "absolute"
        assert cert.rates.as_tuple() == pytest.approx((1 / lam, 1 / lam, 1.0, 1.0, lam), abs=1e-12)

    def test_zero_shift_identity_none(self, identity_model):
        assert certify_model_sol(CAT, identity_model, 0).flavor == "none"

    def test_k2_squares_rates(self, identity_model):
        c1 = certify_model_sol(CAT, identity_model, 1)
        c2 = certify_model_sol(CAT, identity_model, 2)
        assert c2.rates.u_lower == pytest.approx(c1.rates.u_lower ** 2, abs=1e-10)

    def test_hyperbolic_b_without_shift(self):
        model = pi1.build_model(CAT, pi1.AutomorphismData(b=CAT, v=(1, 0), e=1))
        assert certify_model_sol(CAT, model, 0).flavor == "absolute"

    def test_unnormalized_rejected(self):
        swap = pi1.build_model(CAT, pi1.AutomorphismData(b=((0, 1), (-1, 0)), v=(0, 0), e=-1))
        with pytest.raises(ValidationError):
            certify_model_sol(CAT, swap, 1)


class TestConeCertify:
    def test_constant_diagonal(self):
        co = SampledCocycle.constant(np.diag([0.3, 1.0, 3.0]))
        cert = cone_certify(co, 0.5, 1)
        assert cert.flavor == "absolute"
        assert cert.rates.as_tuple() == pytest.approx((0.3, 0.3, 1.0, 1.0, 3.0), abs=1e-10)

    def test_identity_not_invariant(self):
        with pytest.raises(ConeNotInvariantError):
            cone_certify(SampledCocycle.constant(np.eye(3)), 0.5, 1)

    def test_agrees_with_linear_certifier(self):
        rng = np.random.default_rng(31)
        for _ in range(50):
            m = _block_plus_unit(rng)
            cl = certify_linear_t3(m)
            co = SampledCocycle.constant_from_matrix_eigenframe(m)
            cc = cone_certify(co, 0.4, 1)
            assert cc.flavor == cl.flavor
            for a, b in zip(cc.rates.as_tuple(), cl.rates.as_tuple()):
                assert abs(a - b) < 1e-8

    def test_iterate_consistency(self):
        co = SampledCocycle.constant(np.diag([0.25, 1.0, 4.0]))
        c1 = cone_certify(co, 0.4, 1)
        c2 = cone_certify(co, 0.4, 2)
        assert c2.rates.u_lower == pytest.approx(c1.rates.u_lower ** 2, abs=1e-8)
        assert c2.rates.s_upper == pytest.approx(c1.rates.s_upper ** 2, abs=1e-8)

    def test_margins_monotone_in_opening(self):
        co = SampledCocycle.constant(np.diag([0.3, 1.0, 3.0]))
        prev = None
        for opening in (0.1, 0.25, 0.5, 0.75, 0.9):
            cert = cone_certify(co, opening, 1)
            margins = (cert.margins["cone_margin_u"], cert.margins["cone_margin_s"])
            if prev is not None:
                assert margins[0] <= prev[0] + 1e-12
                assert margins[1] <= prev[1] + 1e-12
            prev = margins

    def test_invalid_opening(self):
        co = SampledCocycle.constant(np.diag([0.3, 1.0, 3.0]))
        with pytest.raises(ValidationError):
            cone_certify(co, 1.5, 1)

    def test_perturbed_map_cocycle_certifies(self, perturbed_map):
        from solvdyn.perturbed import sampled_cocycle_from_map
        co = sampled_cocycle_from_map(perturbed_map, mesh=1 / 12)
        cert = cone_certify(co, 0.5, 1)
        assert cert.flavor in ("pointwise", "absolute")
        assert cert.margins["cone_margin_u"] > 0
        assert cert.margins["cone_margin_s"] > 0


class TestObstruction:
    def test_flags_small_gamma2(self):
        v = certify.cs_torus_obstruction(CAT, 0.5)
        assert v.incompatible and v.margin < 0

    def test_compatible_above(self):
        h = exact.htop(CAT)
        assert not certify.cs_torus_obstruction(CAT, h + 1.0).incompatible

    def test_boundary_is_incompatible(self):
        h = exact.htop(CAT)
        v = certify.cs_torus_obstruction(CAT, h)
        assert v.incompatible and v.margin == 0.0

    def test_htop_value(self):
        assert abs(exact.htop(CAT) - 0.9624236501192069) < 1e-10

    def test_non_hyperbolic_rejected(self):
        with pytest.raises(Exception):
            certify.cs_torus_obstruction(exact.identity(2), 0.5)
