import math
from fractions import Fraction

import numpy as np
import pytest

from solvdyn import exact
from solvdyn.errors import ValidationError
from solvdyn.solgeo import (CoverPoint, ModelLeaf, SolFrame, flow, height,
                            load_point_cloud, save_point_cloud)

from conftest import CAT, rand_points


class TestDeckAction:
    def test_gamma1(self, cat_frame):
        q = cat_frame.deck_apply(((1, 0), 0), CoverPoint((0.0, 0.0), 0.0))
        assert q.v == (1.0, 0.0) and q.t == 0.0

    def test_gamma3_on_av(self, cat_frame):
        # gamma_3(Av, t) = (v, t+1) with v = (1, 0)
        av = exact.mat_vec(CAT, (1, 0))
        q = cat_frame.deck_apply(((0, 0), 1), CoverPoint((av[0], av[1]), 0.5))
        assert q.v == (1, 0) and q.t == 1.5

    def test_identity_element(self, cat_frame):
        p = CoverPoint((0.3, -0.7), 2.1)
        assert cat_frame.deck_apply(((0, 0), 0), p) == p

    def test_action_is_isometric_for_path_length(self, cat_frame):
        rng = np.random.default_rng(11)
        worst = 0.0
        for _ in range(100):
            pts = rand_points(rng, 4, scale=1.5)
            g = ((int(rng.integers(-3, 4)), int(rng.integers(-3, 4))), int(rng.integers(-3, 4)))
            mapped = [cat_frame.deck_apply(g, p) for p in pts]
            worst = max(worst, abs(cat_frame.path_length(pts) - cat_frame.path_length(mapped)))
        assert worst < 1e-9

    def test_height_rules(self, cat_frame):
        p = CoverPoint((0.3, 0.4), 0.7)
        assert height(cat_frame.deck_apply(((3, -2), 0), p)) == height(p)
        assert height(cat_frame.deck_apply(((3, -2), 5), p)) == height(p) + 5

    def test_height_differences_deck_invariant(self, cat_frame):
        # p1(x) - p1(y) = p1(gx) - p1(gy), exact on exact inputs
        rng = np.random.default_rng(12)
        gens = [((1, 0), 0), ((0, 1), 0), ((0, 0), 1)]
        for _ in range(1000):
            x = CoverPoint((Fraction(int(rng.integers(-60, 60)), 7),
                            Fraction(int(rng.integers(-60, 60)), 11)),
                           Fraction(int(rng.integers(-60, 60)), 13))
            y = CoverPoint((Fraction(int(rng.integers(-60, 60)), 7),
                            Fraction(int(rng.integers(-60, 60)), 11)),
                           Fraction(int(rng.integers(-60, 60)), 13))
            for g in gens:
                gx, gy = cat_frame.deck_apply(g, x), cat_frame.deck_apply(g, y)
                assert gx.t - gy.t == x.t - y.t


class TestFlow:
    def test_basic(self):
        assert flow(CoverPoint((1.0, 2.0), 0.0), 1.0) == CoverPoint((1.0, 2.0), 1.0)

    def test_zero_is_identity(self):
        p = CoverPoint((0.5, -0.25), 3.25)
        assert flow(p, 0.0) == p

    def test_group_property_exact(self):
        p = CoverPoint((0.5, -0.25), Fraction(1, 3))
        assert flow(flow(p, Fraction(1, 4)), Fraction(3, 4)) == flow(p, 1)

    def test_height_shift(self):
        p = CoverPoint((0.1, 0.2), -1.5)
        assert height(flow(p, 2.25)) - height(p) == 2.25


class TestLeavesAndDistU:
    def test_dist_u_unit(self, cat_frame):
        leaf = cat_frame.leaf_through(cat_frame.point(0.0, 0.3, 0.0), "cs")
        p = cat_frame.point(1.0, -0.2, 0.0)
        assert cat_frame.dist_u(p, leaf) == pytest.approx(1.0, abs=1e-12)

    def test_flow_scaling_identity(self, cat_frame):
        leaf = cat_frame.leaf_through(cat_frame.point(0.0, 0.0, 0.0), "cs")
        p = cat_frame.point(0.7, 0.4, 0.0)
        base = cat_frame.dist_u(p, leaf)
        for t in np.linspace(-5, 5, 41):
            scaled = cat_frame.dist_u(flow(p, t), leaf)
            assert abs(scaled - cat_frame.lam ** t * base) < 1e-9 * max(1.0, scaled)

    def test_on_leaf_zero(self, cat_frame):
        p = cat_frame.point(0.25, 0.5, 1.5)
        leaf = cat_frame.leaf_through(p, "cs")
        assert cat_frame.dist_u(p, leaf) == 0.0

    def test_leaf_separation_formula(self, cat_frame):
        # dist_u(x, L') = lam^t |u0 - u0'| for x on leaf u0
        rng = np.random.default_rng(13)
        for _ in range(200):
            u0, u1 = rng.normal(size=2)
            s, t = rng.normal(), rng.uniform(-4, 4)
            x = cat_frame.point(u0, s, t)
            leaf1 = ModelLeaf("cs", (u1,))
            expected = cat_frame.lam ** t * abs(u0 - u1)
            assert abs(cat_frame.dist_u(x, leaf1) - expected) < 1e-10 * max(1.0, expected)

    def test_wrong_kind_rejected(self, cat_frame):
        with pytest.raises(ValidationError):
            cat_frame.dist_u(cat_frame.point(0, 0, 0), ModelLeaf("cu", (0.0,)))

    def test_membership_is_equivalence_on_triples(self, cat_frame):
        rng = np.random.default_rng(14)
        for kind in ("cs", "cu", "c", "s", "u"):
            for _ in range(50):
                base = cat_frame.point(rng.normal(), rng.normal(), rng.normal())
                leaf = cat_frame.leaf_through(base, kind)
                others = []
                for _ in range(2):
                    u, s, t = cat_frame.leaf_coords(base)
                    if kind == "cs":
                        q = cat_frame.point(u, rng.normal(), rng.normal())
                    elif kind == "cu":
                        q = cat_frame.point(rng.normal(), s, rng.normal())
                    elif kind == "c":
                        q = cat_frame.point(u, s, rng.normal())
                    elif kind == "s":
                        q = cat_frame.point(u, rng.normal(), t)
                    else:
                        q = cat_frame.point(rng.normal(), s, t)
                    others.append(q)
                assert all(cat_frame.on_leaf(q, leaf) for q in others)
                # transitivity: leaf through the second point contains the third
                leaf2 = cat_frame.leaf_through(others[0], kind)
                assert cat_frame.on_leaf(others[1], leaf2)


class TestBracket:
    def test_self(self, cat_frame):
        x = cat_frame.point(0.3, 0.4, 0.5)
        b = cat_frame.bracket(x, x)
        assert max(abs(a - c) for a, c in zip(b.as_floats(), x.as_floats())) < 1e-12

    def test_coordinates(self, cat_frame):
        x = cat_frame.point(0, 0, 0)
        y = cat_frame.point(3, 5, 9)
        u, s, t = cat_frame.leaf_coords(cat_frame.bracket(x, y))
        assert (abs(u - 3), abs(s), abs(t)) < (1e-10, 1e-10, 1e-10)

    def test_idempotent(self, cat_frame):
        rng = np.random.default_rng(15)
        for _ in range(100):
            x, y = rand_points(rng, 2)
            b1 = cat_frame.bracket(x, y)
            b2 = cat_frame.bracket(b1, y)
            assert max(abs(a - c) for a, c in zip(b1.as_floats(), b2.as_floats())) < 1e-10

    def test_deck_equivariance(self, cat_frame):
        rng = np.random.default_rng(16)
        for _ in range(100):
            x, y = rand_points(rng, 2)
            g = ((int(rng.integers(-2, 3)), int(rng.integers(-2, 3))), int(rng.integers(-2, 3)))
            lhs = cat_frame.bracket(cat_frame.deck_apply(g, x), cat_frame.deck_apply(g, y))
            rhs = cat_frame.deck_apply(g, cat_frame.bracket(x, y))
            scale = max(1.0, *map(abs, rhs.as_floats()))
            assert max(abs(a - c) for a, c in zip(lhs.as_floats(), rhs.as_floats())) < 1e-9 * scale


class TestPathLength:
    def test_pure_flow(self, cat_frame):
        assert cat_frame.path_length(
            [cat_frame.point(0.2, 0.3, 0.0), cat_frame.point(0.2, 0.3, 4.0)]) == 4.0

    def test_pure_unstable(self, cat_frame):
        t0, delta = 1.7, 0.25
        val = cat_frame.path_length(
            [cat_frame.point(0.0, 0.1, t0), cat_frame.point(delta, 0.1, t0)])
        assert abs(val - cat_frame.lam ** t0 * delta) < 1e-8 * val

    def test_pure_stable(self, cat_frame):
        t0, delta = -1.3, 0.5
        val = cat_frame.path_length(
            [cat_frame.point(0.4, 0.0, t0), cat_frame.point(0.4, delta, t0)])
        assert abs(val - cat_frame.lam ** (-t0) * delta) < 1e-8 * val

    def test_mixed_segment_against_quadrature(self, cat_frame):
        llog = cat_frame.log_lam
        du, ds, dt, t0 = -0.5, 1.3, 3.2, -1.2
        s = np.linspace(0, 1, 400001)
        t = t0 + s * dt
        g = np.sqrt((du * np.exp(llog * t)) ** 2 + (ds * np.exp(-llog * t)) ** 2 + dt ** 2)
        ref = np.trapezoid(g, s)
        val = cat_frame.path_length(
            [cat_frame.point(0.3, -0.4, t0), cat_frame.point(0.3 + du, -0.4 + ds, t0 + dt)])
        assert abs(val - ref) < 1e-7 * ref

    def test_plip_inequality(self, cat_frame):
        rng = np.random.default_rng(17)
        for _ in range(1000):
            x, y = rand_points(rng, 2)
            assert abs(x.t - y.t) <= cat_frame.path_length([x, y]) + 1e-12

    def test_needs_two_points(self, cat_frame):
        with pytest.raises(ValidationError):
            cat_frame.path_length([cat_frame.point(0, 0, 0)])


class TestReduceToFundamental:
    def test_already_reduced(self, cat_frame):
        p = CoverPoint((0.25, 0.75), 0.5)
        g, q = cat_frame.reduce_to_fundamental(p)
        assert g == ((0, 0), 0) and q == p

    def test_v_shift(self, cat_frame):
        g, q = cat_frame.reduce_to_fundamental(CoverPoint((1.5, 0.0), 0.0))
        assert g == ((1, 0), 0)
        assert q.v == (0.5, 0.0) and q.t == 0.0

    def test_height_shift(self, cat_frame):
        ainv = exact.mat_inv_unimodular(CAT)
        v = exact.mat_vec(ainv, (Fraction(1, 4), Fraction(1, 4)))
        g, q = cat_frame.reduce_to_fundamental(CoverPoint(v, Fraction(1)))
        assert g == ((0, 0), 1)
        assert q.v == (Fraction(1, 4), Fraction(1, 4)) and q.t == 0

    def test_roundtrip(self, cat_frame):
        rng = np.random.default_rng(18)
        for _ in range(300):
            p = CoverPoint((float(rng.normal() * 6), float(rng.normal() * 6)),
                           float(rng.normal() * 2))
            g, q = cat_frame.reduce_to_fundamental(p)
            assert 0 <= q.t < 1 and 0 <= q.v[0] < 1 and 0 <= q.v[1] < 1
            back = cat_frame.deck_apply(g, q)
            assert max(abs(a - b) for a, b in zip(back.as_floats(), p.as_floats())) < 1e-9


class TestHausdorffEstimate:
    def test_identical(self, cat_frame):
        s = [cat_frame.point(0.1 * i, 0.05 * i, 0.2 * i) for i in range(5)]
        assert cat_frame.hausdorff_estimate(s, s) == 0.0

    def test_singletons(self, cat_frame):
        x, y = cat_frame.point(0, 0, 0), cat_frame.point(0.3, 0.1, 0.2)
        assert cat_frame.hausdorff_estimate([x], [y]) == cat_frame.distance_upper(x, y)

    def test_parallel_cs_samples_lower_bound(self, cat_frame):
        # samples on two cs-leaves at unstable separation delta, height 0:
        # every distance upper bound dominates a fixed fraction of delta
        delta = 0.4
        a = [cat_frame.point(0.0, s, 0.0) for s in np.linspace(-0.5, 0.5, 6)]
        b = [cat_frame.point(delta, s, 0.0) for s in np.linspace(-0.5, 0.5, 6)]
        est = cat_frame.hausdorff_estimate(a, b)
        assert est >= 0.1 * delta

    def test_empty_rejected(self, cat_frame):
        with pytest.raises(ValidationError):
            cat_frame.hausdorff_estimate([], [cat_frame.point(0, 0, 0)])

    def test_upper_bound_dominates_height_gap(self, cat_frame):
        rng = np.random.default_rng(19)
        for _ in range(100):
            x, y = rand_points(rng, 2)
            assert cat_frame.distance_upper(x, y) >= abs(x.t - y.t) - 1e-12


class TestEmpiricalR1:
    def test_reports_positive_bound(self, cat_frame):
        rep = cat_frame.empirical_r1(1.5, n_samples=50, seed=3)
        assert rep["samples"] == 50
        assert rep["empirical_r1"] > 0


class TestPointCloudIO:
    def test_roundtrip(self, tmp_path, cat_frame):
        pts = [cat_frame.point(0.1, 0.2, 0.3), cat_frame.point(-1.5, 2.0, -0.25)]
        path = tmp_path / "cloud.csv"
        save_point_cloud(path, pts)
        loaded = load_point_cloud(path)
        assert len(loaded) == 2
        for p, q in zip(pts, loaded):
            assert p.as_floats() == q.as_floats()
