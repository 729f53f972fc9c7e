from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solvdyn import exact, presets
from solvdyn import quotients as qt
from solvdyn.errors import ValidationError

from conftest import rand_unimodular2


class TestLefschetz:
    def test_unit_block(self):
        assert qt.lefschetz(presets.TORUS_MATRICES["paper-matrix-1"]) == 0

    def test_minus_one_block(self):
        assert qt.lefschetz(((2, 1, 0), (1, 1, 0), (0, 0, -1))) == -2

    def test_identity(self):
        assert qt.lefschetz(exact.identity(3)) == 0

    def test_planted_unit_eigenvalue_vanishes(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            b = rand_unimodular2(rng, bound=5)
            r1, r2 = int(rng.integers(-9, 10)), int(rng.integers(-9, 10))
            m = ((b[0][0], b[0][1], 0), (b[1][0], b[1][1], 0), (r1, r2, 1))
            # char poly at 1 vanishes by construction, so the product does too
            assert qt.lefschetz(m) == 0


class TestHasFixedPoint:
    def test_full_rank_always(self):
        rng = np.random.default_rng(42)
        m = ((2, 1, 0), (1, 1, 0), (0, 0, -1))
        for _ in range(20):
            b = tuple(Fraction(int(rng.integers(0, 12)), 12) for _ in range(3))
            assert qt.has_fixed_point(qt.AffineTorusMap(m, b))

    @pytest.mark.parametrize("name", ["tau1", "tau2", "tau3"])
    def test_tau_maps_fixed_point_free(self, name):
        assert not qt.has_fixed_point(presets.tau_map(name))

    def test_identity_translation_zero(self):
        assert qt.has_fixed_point(qt.AffineTorusMap(exact.identity(3), (0, 0, 0)))

    def test_pure_translation_free(self):
        assert not qt.has_fixed_point(
            qt.AffineTorusMap(exact.identity(3), (Fraction(1, 2), 0, 0)))

    def test_conjugation_invariance(self):
        rng = np.random.default_rng(43)
        cases = [presets.tau_map("tau1"), presets.tau_map("tau3"),
                 qt.AffineTorusMap(((2, 1, 0), (1, 1, 0), (0, 0, -1)), (Fraction(1, 3), 0, 0)),
                 qt.AffineTorusMap(exact.identity(3), (Fraction(1, 2), 0, Fraction(1, 4)))]
        for _ in range(100):
            g = cases[int(rng.integers(0, len(cases)))]
            p = exact.identity(3)
            for _ in range(4):
                i, j = rng.integers(0, 3, 2)
                if i == j:
                    continue
                c = int(rng.integers(-2, 3))
                rows = [list(r) for r in p]
                rows[i] = [x + c * y for x, y in zip(rows[i], rows[j])]
                p = tuple(tuple(r) for r in rows)
            shift = tuple(Fraction(int(rng.integers(0, 8)), 8) for _ in range(3))
            p_inv = exact.mat_inv_unimodular(p)
            lin = exact.mat_mul(exact.mat_mul(p, g.linear), p_inv)
            # conjugated translation: P b + (I - P L P^{-1}) c
            pb = exact.mat_vec(p, g.translation)
            ilc = exact.mat_vec(exact.mat_sub(exact.identity(3), lin), shift)
            conj = qt.AffineTorusMap(lin, tuple(x + y for x, y in zip(pb, ilc)))
            assert qt.has_fixed_point(conj) == qt.has_fixed_point(g)


class TestClassifyT3Quotient:
    def test_trivial_group_torus(self):
        v = qt.classify_t3_quotient([], presets.TORUS_MATRICES["paper-matrix-1"])
        assert v.classification == "torus"

    @pytest.mark.parametrize("name,tag", [
        ("tau1", ("-Id", 1)),
        ("tau2", ("+Id", -1)),
        ("tau3", ("+Id", -1)),
    ])
    def test_paper_pairings(self, name, tag):
        fstar = presets.TORUS_MATRICES[presets.TAU_PAIRING[name]]
        v = qt.classify_t3_quotient([presets.tau_map(name)], fstar)
        assert v.classification == "flat-double-cover"
        assert v.details["case_tag"] == [tag]
        case = v.details["cases"][0]["case"]
        assert case in (3, 4)

    def test_case_tags_mutually_exclusive(self):
        tags = set()
        for name in ("tau1", "tau2", "tau3"):
            fstar = presets.TORUS_MATRICES[presets.TAU_PAIRING[name]]
            v = qt.classify_t3_quotient([presets.tau_map(name)], fstar)
            tags.update(tuple(t) for t in v.details["case_tag"])
        # the two possible tags are exactly the surviving cases 3 and 4
        assert tags <= {("+Id", -1), ("-Id", 1)}

    def test_hyperbolic_with_nontranslation_rejected(self):
        hyp = ((0, 0, -1), (1, 0, 1), (0, 1, 2))  # no unit-modulus eigenvalue
        gamma = qt.AffineTorusMap(
            tuple(tuple(-1 if i == j else 0 for j in range(3)) for i in range(3)),
            (Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)))
        v = qt.classify_t3_quotient([gamma], hyp)
        assert v.classification == "invalid"
        assert v.details["failed_axiom"] == "fixed-point-free"

    def test_hyperbolic_with_translations_torus(self):
        hyp = ((0, 0, -1), (1, 0, 1), (0, 1, 2))
        tr = qt.AffineTorusMap(exact.identity(3), (Fraction(1, 2), 0, 0))
        assert qt.classify_t3_quotient([tr], hyp).classification == "torus"

    def test_noncommuting_rejected(self):
        v = qt.classify_t3_quotient([presets.tau_map("tau3")],
                                    presets.TORUS_MATRICES["paper-matrix-1"])
        assert v.classification == "invalid"
        assert v.details["failed_axiom"] == "f-star-conjugation"

    def test_map_with_fixed_point_rejected(self):
        g = qt.AffineTorusMap(((2, 1, 0), (1, 1, 0), (0, 0, -1)), (0, 0, Fraction(1, 2)))
        v = qt.classify_t3_quotient([g], presets.TORUS_MATRICES["paper-matrix-1"])
        assert v.classification == "invalid"
        assert v.details["failed_axiom"] in ("fixed-point-free", "finite-closure")


heis_coord = st.fractions(min_value=-5, max_value=5, max_denominator=12)
heis_elem = st.builds(qt.HeisenbergElement, heis_coord, heis_coord, heis_coord)


class TestHeisenberg:
    @given(heis_elem, heis_elem, heis_elem)
    @settings(max_examples=300, deadline=None)
    def test_associativity(self, a, b, c):
        lhs = qt.heis_mul(qt.heis_mul(a, b), c)
        rhs = qt.heis_mul(a, qt.heis_mul(b, c))
        assert lhs == rhs

    @given(heis_elem)
    @settings(max_examples=100, deadline=None)
    def test_inverse(self, a):
        assert qt.heis_mul(a, qt.heis_inv(a)) == qt.HEIS_IDENTITY
        assert qt.heis_mul(qt.heis_inv(a), a) == qt.HEIS_IDENTITY

    def test_commutator_central(self):
        x = qt.HeisenbergElement(1, 0, 0)
        y = qt.HeisenbergElement(0, 1, 0)
        assert qt.heis_commutator(x, y) == qt.HeisenbergElement(0, 0, 1)

    def test_center_commutes(self):
        z = qt.HeisenbergElement(0, 0, Fraction(7, 3))
        g = qt.HeisenbergElement(2, -5, Fraction(1, 2))
        assert qt.heis_mul(z, g) == qt.heis_mul(g, z)

    def test_lattice_membership(self):
        assert qt.in_lattice(qt.HeisenbergElement(1, 0, Fraction(1, 4)), 4)
        assert not qt.in_lattice(qt.HeisenbergElement(Fraction(1, 2), 0, 0), 4)
        assert not qt.in_lattice(qt.HeisenbergElement(0, 0, Fraction(1, 8)), 4)

    def test_lattice_closed_under_mul_and_inverse(self):
        rng = np.random.default_rng(44)
        k = 6
        for _ in range(200):
            a = qt.HeisenbergElement(int(rng.integers(-4, 5)), int(rng.integers(-4, 5)),
                                     Fraction(int(rng.integers(-12, 13)), k))
            b = qt.HeisenbergElement(int(rng.integers(-4, 5)), int(rng.integers(-4, 5)),
                                     Fraction(int(rng.integers(-12, 13)), k))
            assert qt.in_lattice(qt.heis_mul(a, b), k)
            assert qt.in_lattice(qt.heis_inv(a), k)

    def test_tau_k_formula(self):
        assert qt.tau_k(qt.HEIS_IDENTITY, 4) == qt.HeisenbergElement(0, 0, Fraction(1, 8))
        assert qt.tau_k(qt.HeisenbergElement(1, 0, 0), 4) == \
            qt.HeisenbergElement(-1, 0, Fraction(1, 8))

    def test_tau_k_square_is_central_lattice_translation(self):
        for k in (2, 4, 10):
            sq = qt.tau_k(qt.tau_k(qt.HEIS_IDENTITY, k), k)
            assert sq == qt.HeisenbergElement(0, 0, Fraction(1, k))
            assert qt.in_lattice(sq, k)

    def test_tau_k_odd_rejected(self):
        with pytest.raises(ValidationError):
            qt.tau_k(qt.HEIS_IDENTITY, 3)

    def test_tau_k_conjugates_lattice(self):
        # tau_k L_gamma tau_k^{-1} = L_{sigma(gamma)} with sigma(x,y,z) = (-x,-y,z)
        k = 4
        gens = [qt.HeisenbergElement(1, 0, 0), qt.HeisenbergElement(0, 1, 0),
                qt.HeisenbergElement(0, 0, Fraction(1, k))]
        probe = qt.HeisenbergElement(Fraction(1, 3), Fraction(2, 7), Fraction(5, 11))
        for gamma in gens:
            tau_inv = lambda g: qt.HeisenbergElement(-g.x, -g.y, g.z - Fraction(1, 2 * k))
            lhs = qt.tau_k(qt.heis_mul(gamma, tau_inv(probe)), k)
            sigma_gamma = qt.HeisenbergElement(-gamma.x, -gamma.y, gamma.z)
            rhs = qt.heis_mul(sigma_gamma, probe)
            assert lhs == rhs
            assert qt.in_lattice(sigma_gamma, k)

    def test_example_map_values(self):
        assert qt.heis_example_map(qt.HeisenbergElement(0, 0, 0)) == qt.HEIS_IDENTITY
        assert qt.heis_example_map(qt.HeisenbergElement(1, 0, 0)) == \
            qt.HeisenbergElement(5, 0, 5)
        assert qt.heis_example_map(qt.HeisenbergElement(0, 1, 0)) == \
            qt.HeisenbergElement(2, 2, 1)

    def test_example_map_homomorphism_report(self):
        rng = np.random.default_rng(45)
        samples = [(qt.HeisenbergElement(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)),
                                         Fraction(int(rng.integers(-6, 7)), 2)),
                    qt.HeisenbergElement(int(rng.integers(-3, 4)), int(rng.integers(-3, 4)),
                                         Fraction(int(rng.integers(-6, 7)), 2)))
                   for _ in range(60)]
        rep = qt.heis_map_homomorphism_report(qt.heis_example_map, samples)
        # the displayed map mixes z into the y-image, so it is reported, not assumed
        assert not rep["is_homomorphism"]

    def test_reduce_mod_lattice(self):
        k = 4
        g = qt.HeisenbergElement(Fraction(7, 2), Fraction(-3, 5), Fraction(9, 7))
        r = qt.heis_reduce_mod_lattice(g, k)
        assert 0 <= r.x < 1 and 0 <= r.y < 1 and 0 <= r.z < Fraction(1, k)
        # same coset: g^{-1} r in Gamma_k
        assert qt.in_lattice(qt.heis_mul(qt.heis_inv(g), r), k)


class TestInducedH1Block:
    def test_pure_automorphism(self):
        block, mult = qt.induced_h1_block(((2, 1, 0), (1, 1, 0), (3, -2, 1)))
        assert block == ((2, 1), (1, 1)) and mult == 1

    def test_identity(self):
        assert qt.induced_h1_block(exact.identity(3)) == (exact.identity(2), 1)

    def test_orientation_reversing_block(self):
        block, mult = qt.induced_h1_block(((1, 1, 0), (1, 0, 0), (0, 0, -1)))
        assert mult == -1

    def test_center_not_preserved(self):
        with pytest.raises(ValidationError):
            qt.induced_h1_block(((2, 1, 1), (1, 1, 0), (0, 0, 1)))

    def test_wrong_multiplier(self):
        with pytest.raises(ValidationError):
            qt.induced_h1_block(((2, 1, 0), (1, 1, 0), (0, 0, 5)))


class TestNilClassification:
    def test_odd_k(self):
        assert qt.classify_nil_double_cover(3).classification == "nilmanifold"

    def test_even_k(self):
        v = qt.classify_nil_double_cover(4)
        assert v.classification == "nil-double-cover"
        assert v.details["tau_k_square"] == ["0", "0", "1/4"]
