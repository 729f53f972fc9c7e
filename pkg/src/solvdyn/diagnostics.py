"""Expansivity and global-product-structure diagnostics.

The expansivity scan iterates the sampled section return map (and its
inverse) on nearby pairs and reports the slowest-separating one.  The
product-structure checks locate intersections of computed cs/cu leaves,
center curves and strong stable/unstable curves; the strong curves are
realized dynamically by pushing flat model segments from far along the
orbit, which converges to the true invariant curves at the domination rate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conjugacy import CenterSystem, SectionMap
from .errors import ValidationError
from .perturbed import PerturbedMap


# ---------------------------------------------------------------------------
# expansivity of the section return map


def _wrap_half(d):
    return (d + 0.5) % 1.0 - 0.5


class _TorusMapInterp:
    """Periodic bilinear interpolation of the sampled displacement rho."""

    def __init__(self, grid_n, rho, linear):
        self.n = grid_n
        self.rho = rho.reshape(grid_n, grid_n, 2)
        self.linear = np.asarray(linear, float)

    def _interp(self, v):
        x = (v[:, 0] % 1.0) * self.n
        y = (v[:, 1] % 1.0) * self.n
        x0 = np.floor(x).astype(int) % self.n
        y0 = np.floor(y).astype(int) % self.n
        x1 = (x0 + 1) % self.n
        y1 = (y0 + 1) % self.n
        fx = (x - np.floor(x))[:, None]
        fy = (y - np.floor(y))[:, None]
        return (
            self.rho[x0, y0] * (1 - fx) * (1 - fy)
            + self.rho[x1, y0] * fx * (1 - fy)
            + self.rho[x0, y1] * (1 - fx) * fy
            + self.rho[x1, y1] * fx * fy
        )

    def apply(self, v):
        return v @ self.linear.T + self._interp(v)


@dataclass
class ExpansivityReport:
    passed: bool
    epsilon: float
    n_steps: int
    n_pairs: int
    slowest_pair: tuple
    slowest_steps: int
    never_separated: int

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "epsilon": self.epsilon,
            "n_steps": self.n_steps,
            "n_pairs": self.n_pairs,
            "slowest_pair": [list(p) for p in self.slowest_pair],
            "slowest_steps": self.slowest_steps,
            "never_separated": self.never_separated,
        }


def expansivity_scan(section: SectionMap, epsilon: float, n_steps: int,
                     n_pairs: int = 300, seed: int = 0) -> ExpansivityReport:
    """Check that nearby section points separate beyond epsilon within n_steps.

    Pairs of distinct points at torus distance below epsilon are iterated
    under the interpolated return map, forward and backward; the scan passes
    when every pair exceeds epsilon in some direction, and the slowest pair
    is reported.
    """
    if epsilon <= 0:
        raise ValidationError("epsilon must be positive")
    a = np.array(section.induced_matrix, dtype=float)
    fwd = _TorusMapInterp(section.grid_n, section.rho, a)
    bwd = _TorusMapInterp(section.grid_n, section.rho_inv, np.linalg.inv(a))
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, size=(n_pairs, 2))
    offs = rng.normal(size=(n_pairs, 2))
    offs *= (rng.uniform(0.05, 0.95, n_pairs) * epsilon
             / np.linalg.norm(offs, axis=1))[:, None]
    y = x + offs

    sep_step = np.full(n_pairs, -1, dtype=int)
    for direction, mp in (("fwd", fwd), ("bwd", bwd)):
        xv, yv = x.copy(), y.copy()
        for n in range(1, n_steps + 1):
            xv = mp.apply(xv)
            yv = mp.apply(yv)
            d = np.linalg.norm(_wrap_half(xv - yv), axis=1)
            newly = (d > epsilon) & (sep_step < 0)
            sep_step[newly] = n
        del direction
    never = int(np.sum(sep_step < 0))
    slowest = int(np.argmax(np.where(sep_step < 0, n_steps + 1, sep_step)))
    return ExpansivityReport(
        passed=never == 0,
        epsilon=epsilon,
        n_steps=n_steps,
        n_pairs=n_pairs,
        slowest_pair=(tuple(x[slowest]), tuple(y[slowest])),
        slowest_steps=int(sep_step[slowest]),
        never_separated=never,
    )


# ---------------------------------------------------------------------------
# strong stable/unstable curves by dynamical push


def strong_curve(pmap: PerturbedMap, v, t, kind: str, span: float = 1.0,
                 n_samples: int = 257, n_push: int = 6):
    """Samples of the strong (un)stable curve through each given point.

    The flat model segment through the n_push-fold preimage (image, for the
    stable curve) is transported back through the dynamics; deviations
    transverse to the curve contract at the domination rate up to the usual
    O(eps) center sliding, and the middle sample is the base point's own
    orbit, so the curve passes through it exactly.

    Returns (u, s, t) arrays of shape (n_points, n_samples).
    """
    if kind not in ("u", "s"):
        raise ValidationError("strong curve kind must be 'u' or 's'")
    frame = pmap.frame
    v = np.atleast_2d(np.asarray(v, float))
    tt = np.atleast_1d(np.asarray(t, float))
    n = len(v)
    cv, ct = v.copy(), tt.copy()
    for _ in range(n_push):
        if kind == "u":
            cv, ct = pmap.inverse(cv, ct)
        else:
            cv, ct = pmap.evaluate(cv, ct)
    us = frame.to_uv_arr(cv)
    # coordinate (not sol-metric) expansion of the transported parameter
    rate = abs(pmap.mu_b_u) if kind == "u" else 1.0 / abs(pmap.mu_b_s)
    offsets = np.linspace(-span, span, n_samples) / rate ** n_push
    if kind == "u":
        uu = us[:, 0:1] + offsets[None, :]
        ss = np.repeat(us[:, 1:2], n_samples, axis=1)
    else:
        ss = us[:, 1:2] + offsets[None, :]
        uu = np.repeat(us[:, 0:1], n_samples, axis=1)
    pts = frame.from_uv_arr(np.stack([uu.ravel(), ss.ravel()], axis=1))
    hts = np.repeat(ct, n_samples)
    for _ in range(n_push):
        if kind == "u":
            pts, hts = pmap.evaluate(pts, hts)
        else:
            pts, hts = pmap.inverse(pts, hts)
    out_us = frame.to_uv_arr(pts)
    return (out_us[:, 0].reshape(n, n_samples),
            out_us[:, 1].reshape(n, n_samples),
            hts.reshape(n, n_samples))


def strong_curve_covering(pmap: PerturbedMap, v, t, kind: str, lo, hi,
                          n_samples: int = 257, n_push: int = 6,
                          max_attempts: int = 4):
    """strong_curve with the parametric span enlarged until it covers [lo, hi].

    The nonlinear field distorts the transported span, so the achieved range
    of the curve parameter is checked per row and the construction retried
    with a tripled span when some row falls short.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    span = float(np.max(hi - lo)) * 0.75 + 0.2
    for _ in range(max_attempts):
        uu, ss, tt_ = strong_curve(pmap, v, t, kind, span=span,
                                   n_samples=n_samples, n_push=n_push)
        coord = uu if kind == "u" else ss
        covered = (coord.min(axis=1) <= lo) & (coord.max(axis=1) >= hi)
        if covered.all():
            break
        span *= 3.0
    return uu, ss, tt_


# ---------------------------------------------------------------------------
# global product structure


def _count_crossings(g):
    """(count, locations) of sign changes along rows of g (n, m)."""
    sign = np.sign(g)
    changes = (sign[:, :-1] * sign[:, 1:]) < 0
    return changes.sum(axis=1), changes


@dataclass
class GpsReport:
    samples: int
    clauses: dict

    def passed(self) -> bool:
        return all(c["unique"] == self.samples for c in self.clauses.values())

    def to_json(self) -> dict:
        return {"samples": self.samples, "clauses": self.clauses,
                "passed": self.passed()}


def gps_check(system: CenterSystem, n_samples: int = 100, seed: int = 0,
              window: float = 0.35, n_curve: int = 257) -> GpsReport:
    """Numerical check of the four global-product-structure clauses.

    For sampled pairs: (1) the cs-leaf of x meets the unstable curve of y
    exactly once, (2) the cu-leaf of x meets the stable curve of y exactly
    once, (3) within a common cs-leaf the center curve meets the stable
    curve exactly once, (4) the cu-analog of (3).  Intersections are counted
    as sign changes of the transverse coordinate gap along the sampled
    curves, so 0 reports a miss and >= 2 duplicates.
    """
    pmap = system.pmap
    frame = system.frame
    rng = np.random.default_rng(seed)
    x_v = rng.uniform(0, 1, size=(n_samples, 2))
    x_t = rng.uniform(0, 1, size=n_samples)
    off = rng.uniform(-window, window, size=(n_samples, 3))
    x_us = frame.to_uv_arr(x_v)
    y_us = x_us + off[:, :2]
    y_v = frame.from_uv_arr(y_us)
    y_t = x_t + off[:, 2]

    clauses = {}
    u0x, s0x = system.leaf_labels(x_v, x_t)

    # clause 1: cs-leaf(x) vs unstable curve of y
    cu_, cs_, ct_ = strong_curve_covering(
        pmap, y_v, y_t, "u",
        np.minimum(u0x, y_us[:, 0]) - 0.15, np.maximum(u0x, y_us[:, 0]) + 0.15,
        n_samples=n_curve)
    leaf_u = np.empty_like(cu_)
    for i in range(n_samples):
        leaf_u[i] = system.chart_cs.leaf_coordinate(
            np.full(n_curve, u0x[i]), cs_[i], ct_[i])
    counts, _ = _count_crossings(cu_ - leaf_u)
    clauses["cs_meets_unstable"] = _tally(counts, n_samples)

    # clause 2: cu-leaf(x) vs stable curve of y
    su_, ss_, st_ = strong_curve_covering(
        pmap, y_v, y_t, "s",
        np.minimum(s0x, y_us[:, 1]) - 0.15, np.maximum(s0x, y_us[:, 1]) + 0.15,
        n_samples=n_curve)
    leaf_s = np.empty_like(ss_)
    for i in range(n_samples):
        leaf_s[i] = system.chart_cu.leaf_coordinate(
            np.full(n_curve, s0x[i]), su_[i], st_[i])
    counts, _ = _count_crossings(ss_ - leaf_s)
    clauses["cu_meets_stable"] = _tally(counts, n_samples)

    # clause 3: inside cs-leaf(x): center curve of x vs stable curve of y',
    # y' constructed on the same cs-leaf at a transverse offset
    t_grid = np.linspace(-0.8, 1.8, 160)
    cu_ctr, cs_ctr = system.curve_at(u0x, s0x, t_grid)
    y3_s = s0x + off[:, 1]
    y3_t = np.clip(x_t + 0.8 * off[:, 2], -0.45, 1.45)
    y3_u = system.chart_cs.leaf_coordinate(u0x, y3_s, y3_t)
    y3_v = frame.from_uv_arr(np.stack([y3_u, y3_s], axis=1))
    su3, ss3, st3 = strong_curve_covering(
        pmap, y3_v, y3_t, "s",
        cs_ctr.min(axis=1) - 0.05, cs_ctr.max(axis=1) + 0.05,
        n_samples=n_curve)
    del su3
    counts3 = _crossings_in_leaf(t_grid, cs_ctr, ss3, st3)
    clauses["center_meets_stable_in_cs"] = _tally(counts3, n_samples)

    # clause 4: inside cu-leaf(x): center curve vs unstable curve
    y4_u = u0x + off[:, 0]
    y4_t = np.clip(x_t + 0.8 * off[:, 2], -0.45, 1.45)
    y4_s = system.chart_cu.leaf_coordinate(s0x, y4_u, y4_t)
    y4_v = frame.from_uv_arr(np.stack([y4_u, y4_s], axis=1))
    uu4, us4, ut4 = strong_curve_covering(
        pmap, y4_v, y4_t, "u",
        cu_ctr.min(axis=1) - 0.05, cu_ctr.max(axis=1) + 0.05,
        n_samples=n_curve)
    del us4
    counts4 = _crossings_in_leaf(t_grid, cu_ctr, uu4, ut4)
    clauses["center_meets_unstable_in_cu"] = _tally(counts4, n_samples)

    return GpsReport(samples=n_samples, clauses=clauses)


def _crossings_in_leaf(t_grid, ctr_coord, curve_coord, curve_t):
    """Crossings of a center curve with a strong curve in shared leaf coordinates.

    The strong curve is a monotone graph t = t_w(coord); the root count of
    t - t_w(ctr_coord(t)) along the center parametrization counts actual
    intersections inside the leaf.
    """
    n = len(ctr_coord)
    counts = np.zeros(n, dtype=int)
    for i in range(n):
        order = np.argsort(curve_coord[i])
        t_of_c = np.interp(ctr_coord[i], curve_coord[i][order], curve_t[i][order],
                           left=np.nan, right=np.nan)
        gap = t_grid - t_of_c
        good = ~np.isnan(gap)
        sg = np.sign(gap[good])
        counts[i] = int(((sg[:-1] * sg[1:]) < 0).sum())
    return counts


def _tally(counts, n):
    return {
        "unique": int(np.sum(counts == 1)),
        "misses": int(np.sum(counts == 0)),
        "duplicates": int(np.sum(counts >= 2)),
        "total": int(n),
    }
