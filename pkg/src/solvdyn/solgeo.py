"""The universal cover of a suspension manifold with its sol metric.

Points are written (v, t) with v in R^2 and t the height.  The three deck
generators act by

    gamma_1(v,t) = (v + (1,0), t)
    gamma_2(v,t) = (v + (0,1), t)
    gamma_3(v,t) = (A^{-1} v, t + 1)

and the metric scales the unstable eigendirection by lambda^t and the stable
one by lambda^{-t}, with the vertical flow at unit speed.  Horizontal
displacements are measured in the eigen-coordinates (u, s) of the defining
hyperbolic matrix A.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import exact
from .errors import ValidationError


@dataclass(frozen=True)
class CoverPoint:
    """Point (v, t) of the universal cover; v may hold Fractions for exact work."""

    v: tuple
    t: float

    def __post_init__(self):
        if len(self.v) != 2:
            raise ValidationError("cover point needs a 2-dimensional v")
        for x in (*self.v, self.t):
            if isinstance(x, float) and not math.isfinite(x):
                raise ValidationError("cover point components must be finite")

    def as_floats(self):
        return (float(self.v[0]), float(self.v[1]), float(self.t))


@dataclass(frozen=True)
class ModelLeaf:
    """A leaf of one of the model foliations, frozen by its coordinates.

    kind: cs (fixed u), cu (fixed s), c (fixed u,s), s (fixed u,t), u (fixed s,t).
    label: the frozen coordinate(s), scalars or tuples as listed above.
    """

    kind: str
    label: tuple

    _SIZES = {"cs": 1, "cu": 1, "c": 2, "s": 2, "u": 2}

    def __post_init__(self):
        if self.kind not in self._SIZES:
            raise ValidationError(f"unknown leaf kind {self.kind!r}")
        if len(self.label) != self._SIZES[self.kind]:
            raise ValidationError(
                f"leaf kind {self.kind!r} takes {self._SIZES[self.kind]} label components"
            )


def height(p: CoverPoint) -> float:
    return p.t


def flow(p: CoverPoint, t) -> CoverPoint:
    return CoverPoint(p.v, p.t + t)


class SolFrame:
    """Geometry of the cover attached to one hyperbolic matrix A."""

    def __init__(self, a):
        self.a = exact.check_unimodular(a, 2)
        self.frame = exact.eigen_frame(self.a)
        self.lam = self.frame.lam
        self.log_lam = math.log(self.lam)
        e = np.array([self.frame.e_u, self.frame.e_s]).T  # columns e_u, e_s
        self._basis = e
        self._dual = np.linalg.inv(e)  # rows: dual functionals giving (u, s)
        self._apow = {0: exact.identity(2)}

    # -- exact integer powers of A ------------------------------------------
    def apow(self, n: int):
        if n not in self._apow:
            self._apow[n] = exact.mat_pow(self.a, n)
        return self._apow[n]

    # -- coordinates ---------------------------------------------------------
    def to_uv(self, v):
        """(u, s) eigen-coordinates of a Euclidean vector v."""
        x, y = float(v[0]), float(v[1])
        d = self._dual
        return (d[0, 0] * x + d[0, 1] * y, d[1, 0] * x + d[1, 1] * y)

    def from_uv(self, u, s):
        b = self._basis
        return (b[0, 0] * u + b[0, 1] * s, b[1, 0] * u + b[1, 1] * s)

    def to_uv_arr(self, v):
        return np.asarray(v) @ self._dual.T

    def from_uv_arr(self, us):
        return np.asarray(us) @ self._basis.T

    def leaf_coords(self, p: CoverPoint):
        u, s = self.to_uv(p.v)
        return (u, s, float(p.t))

    def point(self, u, s, t) -> CoverPoint:
        return CoverPoint(self.from_uv(u, s), t)

    # -- deck action ----------------------------------------------------------
    def deck_apply(self, g, p: CoverPoint) -> CoverPoint:
        """(z, n) acts by (v, t) -> (A^{-n} v + z, t + n); exact on Fractions."""
        z, n = g
        an = self.apow(-n)
        v = exact.mat_vec(an, p.v)
        return CoverPoint((v[0] + z[0], v[1] + z[1]), p.t + n)

    def reduce_to_fundamental(self, p: CoverPoint):
        """(g, q) with deck_apply(g, q) = p and q in [0,1)^2 x [0,1).

        Height is reduced first (gamma_3 mixes v), then v.  Exact when fed
        Fraction coordinates; with floats the roundtrip degrades like
        lambda^(2|n|) * eps, so keep heights moderate in float work.
        """
        n = math.floor(p.t)
        tq = p.t - n
        if isinstance(tq, float) and tq >= 1.0:  # floating roll-over at the seam
            n += 1
            tq = p.t - n
        w = exact.mat_vec(self.apow(n), p.v)
        zp = (math.floor(w[0]), math.floor(w[1]))
        vq = (w[0] - zp[0], w[1] - zp[1])
        z = exact.mat_vec(self.apow(-n), zp)
        return ((int(z[0]), int(z[1])), n), CoverPoint(vq, tq)

    # -- leaves ----------------------------------------------------------------
    def leaf_through(self, p: CoverPoint, kind: str) -> ModelLeaf:
        u, s, t = self.leaf_coords(p)
        label = {
            "cs": (u,),
            "cu": (s,),
            "c": (u, s),
            "s": (u, t),
            "u": (s, t),
        }[kind]
        return ModelLeaf(kind, label)

    def on_leaf(self, p: CoverPoint, leaf: ModelLeaf, tol=1e-10) -> bool:
        u, s, t = self.leaf_coords(p)
        coords = {"cs": (u,), "cu": (s,), "c": (u, s), "s": (u, t), "u": (s, t)}[leaf.kind]
        return all(abs(a - b) <= tol for a, b in zip(coords, leaf.label))

    def dist_u(self, p: CoverPoint, leaf: ModelLeaf) -> float:
        """Unstable arclength from p to the bracket point on the cs-leaf.

        Equals lambda^t |u(p) - label| and scales exactly by lambda^t along
        the flow.
        """
        if leaf.kind != "cs":
            raise ValidationError("dist_u is measured against cs-leaves")
        u, _, t = self.leaf_coords(p)
        return self.lam ** t * abs(u - leaf.label[0])

    def bracket(self, x: CoverPoint, y: CoverPoint) -> CoverPoint:
        """The unique intersection of the u-leaf of x with the cs-leaf of y."""
        ux, sx, tx = self.leaf_coords(x)
        uy, _, _ = self.leaf_coords(y)
        del ux
        return self.point(uy, sx, tx)

    # -- lengths ----------------------------------------------------------------
    def _segment_integrand(self, du, ds, dt, t0):
        llam = self.log_lam

        def g(sigma):
            t = t0 + sigma * dt
            eu = du * math.exp(llam * t)
            es = ds * math.exp(-llam * t)
            return math.sqrt(eu * eu + es * es + dt * dt)

        return g

    def segment_length(self, p0: CoverPoint, p1: CoverPoint, rel_tol=1e-8, max_depth=30):
        u0, s0, t0 = self.leaf_coords(p0)
        u1, s1, t1 = self.leaf_coords(p1)
        du, ds, dt = u1 - u0, s1 - s0, t1 - t0
        if du == 0.0 and ds == 0.0:
            return abs(dt)
        g = self._segment_integrand(du, ds, dt, t0)
        if dt == 0.0:
            return g(0.0)
        coarse = g(0.5)
        tol = max(rel_tol * max(coarse, abs(dt)), 1e-300)
        return _adaptive_midpoint(g, 0.0, 1.0, coarse, tol, max_depth)

    def path_length(self, points, rel_tol=1e-8, max_depth=30) -> float:
        """Sum of sol lengths of the straight coordinate segments of a polyline.

        Each segment is an actual path, so the total is an upper bound for
        the geodesic distance between the endpoints.
        """
        if len(points) < 2:
            raise ValidationError("path_length needs at least 2 points")
        total = 0.0
        for p0, p1 in zip(points, points[1:]):
            total += self.segment_length(p0, p1, rel_tol, max_depth)
        return total

    def distance_upper(self, x: CoverPoint, y: CoverPoint) -> float:
        """Upper bound for d(x, y): best of several explicit paths.

        Besides the direct coordinate segment, tries detours that change
        height before traversing (u-moves get cheap at low heights, s-moves
        at high heights); every candidate is a genuine polyline length.
        """
        ux, sx, tx = self.leaf_coords(x)
        uy, sy, ty = self.leaf_coords(y)
        du, ds = abs(uy - ux), abs(sy - sx)
        best = self.path_length([x, y])
        llam = self.log_lam
        taus_u = {tx, ty}
        taus_s = {tx, ty}
        if du > 0:
            taus_u.add(math.log(2.0 / (du * llam)) / llam)
        if ds > 0:
            taus_s.add(-math.log(2.0 / (ds * llam)) / llam)
        for tau_u in taus_u:
            for tau_s in taus_s:
                # x --(vert)--> u-move at tau_u --(vert)--> s-move at tau_s --(vert)--> y
                length = (
                    abs(tx - tau_u)
                    + du * math.exp(llam * tau_u)
                    + abs(tau_u - tau_s)
                    + ds * math.exp(-llam * tau_s)
                    + abs(tau_s - ty)
                )
                best = min(best, length)
        return best

    def hausdorff_estimate(self, sample_a, sample_b) -> float:
        """Symmetric max-min of distance upper bounds over two point samples.

        This estimates the Hausdorff distance restricted to the samples; the
        one-sided bounds inherit the upper-bound property of distance_upper.
        """
        if not sample_a or not sample_b:
            raise ValidationError("hausdorff estimate needs non-empty samples")
        sup_a = max(min(self.distance_upper(a, b) for b in sample_b) for a in sample_a)
        sup_b = max(min(self.distance_upper(b, a) for a in sample_a) for b in sample_b)
        return max(sup_a, sup_b)

    def empirical_r1(self, radius: float, n_samples: int = 200, seed: int = 0):
        """Empirical bound for dist_u over pairs at distance < radius.

        The paper-level statement is existence-only; this reports the maximum
        of dist_u(x, cs-leaf(y)) over sampled pairs with distance_upper(x,y)
        below the radius, together with the sample count actually used.
        """
        rng = np.random.default_rng(seed)
        worst = 0.0
        used = 0
        while used < n_samples:
            vx = rng.uniform(0.0, 1.0, size=2)
            tx = rng.uniform(0.0, 1.0)
            x = CoverPoint((float(vx[0]), float(vx[1])), float(tx))
            step = rng.normal(size=3)
            step *= rng.uniform(0.0, radius) / (np.linalg.norm(step) + 1e-30)
            ux, sx, txx = self.leaf_coords(x)
            y = self.point(ux + step[0], sx + step[1], txx + step[2])
            if self.distance_upper(x, y) >= radius:
                continue
            used += 1
            worst = max(worst, self.dist_u(x, self.leaf_through(y, "cs")))
        return {"radius": radius, "samples": used, "empirical_r1": worst}


def _adaptive_midpoint(g, a, b, whole_mid, tol, depth):
    """Richardson-extrapolated adaptive midpoint rule."""
    m = 0.5 * (a + b)
    h = b - a
    whole = h * whole_mid
    gm1 = g(0.5 * (a + m))
    gm2 = g(0.5 * (m + b))
    left = 0.5 * h * gm1
    right = 0.5 * h * gm2
    refined = left + right
    if depth <= 0 or abs(refined - whole) <= 3.0 * tol:
        return refined + (refined - whole) / 3.0
    return _adaptive_midpoint(g, a, m, gm1, 0.5 * tol, depth - 1) + _adaptive_midpoint(
        g, m, b, gm2, 0.5 * tol, depth - 1
    )


# ---------------------------------------------------------------------------
# serialization


def cover_point_to_json(p: CoverPoint) -> dict:
    return {"v": [float(p.v[0]), float(p.v[1])], "t": float(p.t)}


def cover_point_from_json(obj) -> CoverPoint:
    return CoverPoint((float(obj["v"][0]), float(obj["v"][1])), float(obj["t"]))


def save_point_cloud(path, points):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["v1", "v2", "t"])
        for p in points:
            writer.writerow([repr(float(p.v[0])), repr(float(p.v[1])), repr(float(p.t))])


def load_point_cloud(path):
    points = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["v1", "v2", "t"]:
            raise ValidationError("point cloud CSV must have header v1,v2,t")
        for row in reader:
            points.append(CoverPoint((float(row[0]), float(row[1])), float(row[2])))
    return points
