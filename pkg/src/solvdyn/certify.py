"""Partial-hyperbolicity certification.

Linear toral automorphisms and algebraic sol models are certified exactly
(modulus-versus-one comparisons decided on the integer characteristic
polynomial); sampled nonlinear cocycles are certified numerically through
invariant cone fields with reported margins.

Cocycle matrices live in the (s, c, u) sol frame: axis 0 is the stable
direction, axis 1 the center, axis 2 the unstable direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import exact
from .errors import ConeNotInvariantError, NonHyperbolicError, ValidationError
from .exact import htop  # re-exported: log of the dominant eigenvalue modulus

__all__ = [
    "RateBounds", "PHCertificate", "SampledCocycle", "ObstructionVerdict",
    "certify_linear_t3", "certify_model_sol", "cone_certify", "htop",
    "cs_torus_obstruction", "char_poly_3",
]


@dataclass(frozen=True)
class RateBounds:
    """Per-bundle expansion bounds over N steps."""

    s_lower: float
    s_upper: float
    c_lower: float
    c_upper: float
    u_lower: float

    def as_tuple(self):
        return (self.s_lower, self.s_upper, self.c_lower, self.c_upper, self.u_lower)


@dataclass(frozen=True)
class PHCertificate:
    n: int
    rates: RateBounds
    flavor: str  # pointwise | absolute | none
    margins: dict = field(default_factory=dict)
    gamma1: float = None
    gamma2: float = None

    def to_json(self) -> dict:
        out = {
            "N": self.n,
            "rates": {
                "s_lower": self.rates.s_lower,
                "s_upper": self.rates.s_upper,
                "c_lower": self.rates.c_lower,
                "c_upper": self.rates.c_upper,
                "u_lower": self.rates.u_lower,
            },
            "flavor": self.flavor,
            "margins": dict(self.margins),
        }
        if self.gamma1 is not None:
            out["gamma1"] = self.gamma1
            out["gamma2"] = self.gamma2
        return out


def _finish_certificate(n, s_lo, s_up, c_lo, c_up, u_lo, pointwise_ok):
    """Assemble flavor/margins from aggregated rate bounds.

    All inequalities are strict; ties at margin 0 fail.
    """
    margins = {
        "s_below_one": 1.0 - s_up,
        "u_above_one": u_lo - 1.0,
        "s_c_gap": c_lo - s_up,
        "c_u_gap": u_lo - c_up,
    }
    absolute = (
        s_up < c_lo and c_up < u_lo and s_up < 1.0 < u_lo
    )
    gamma1 = gamma2 = None
    if absolute:
        gamma1 = 0.5 * (s_up + min(c_lo, 1.0))
        gamma2 = 0.5 * (max(c_up, 1.0) + u_lo)
    flavor = "absolute" if absolute else ("pointwise" if pointwise_ok else "none")
    rates = RateBounds(s_lo, s_up, c_lo, c_up, u_lo)
    return PHCertificate(n=n, rates=rates, flavor=flavor, margins=margins,
                         gamma1=gamma1, gamma2=gamma2)


# ---------------------------------------------------------------------------
# exact spectral analysis of 3x3 integer matrices


def char_poly_3(m):
    """Coefficients (c2, c1, c0) of det(xI - M) = x^3 - c2 x^2 + c1 x - c0."""
    m = exact.as_matrix(m)
    c2 = exact.trace(m)
    c1 = (
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
        + m[0][0] * m[2][2] - m[0][2] * m[2][0]
        + m[1][1] * m[2][2] - m[1][2] * m[2][1]
    )
    c0 = exact.det(m)
    return c2, c1, c0


def _eval_cubic(coeffs, x):
    c2, c1, c0 = coeffs
    return x ** 3 - c2 * x ** 2 + c1 * x - c0


def _cubic_disc(coeffs):
    """Discriminant of x^3 + b x^2 + c x + d (exact integer)."""
    c2, c1, c0 = coeffs
    b, c, d = -c2, c1, -c0
    return 18 * b * c * d - 4 * b ** 3 * d + b * b * c * c - 4 * c ** 3 - 27 * d * d


def _has_opposite_pair(coeffs) -> bool:
    """True iff the cubic has roots lam and -lam (then c0 = c1 * c2, c1 = -lam^2)."""
    c2, c1, c0 = coeffs
    return c0 == c1 * c2 and c1 < 0


def _roots_3(m):
    vals = np.linalg.eigvals(np.array(m, dtype=float))
    coeffs = char_poly_3(m)
    out = []
    for v in vals:
        if abs(v.imag) < 1e-9:
            x = float(v.real)
            for _ in range(3):  # Newton polish on the exact polynomial
                p = _eval_cubic(coeffs, x)
                dp = 3 * x * x - 2 * coeffs[0] * x + coeffs[1]
                if dp != 0:
                    x -= p / dp
            out.append(complex(x, 0.0))
        else:
            out.append(v)
    return out


def certify_linear_t3(m) -> PHCertificate:
    """Certificate for a 3x3 unimodular toral automorphism.

    Absolute (N = 1, rates = eigenvalue moduli) when the moduli satisfy
    |l1| < |l2| < |l3| with |l1| < 1 < |l3|; flavor none otherwise.
    Comparisons against modulus one are exact: for an integer unimodular
    3x3 matrix a unit-modulus eigenvalue exists iff p(1) = 0 or p(-1) = 0.
    """
    m = exact.check_unimodular(m, 3)
    coeffs = char_poly_3(m)
    p1 = _eval_cubic(coeffs, 1)
    pm1 = _eval_cubic(coeffs, -1)
    none_cert = lambda: _finish_certificate(1, 1.0, 1.0, 1.0, 1.0, 1.0, False)

    if p1 == 0 and pm1 == 0:
        # both +-1 are eigenvalues; the third has modulus 1 as well
        return none_cert()
    if p1 == 0 or pm1 == 0:
        root = 1 if p1 == 0 else -1
        # deflate exactly: x^3 - c2 x^2 + c1 x - c0 = (x - root)(x^2 - T x + D)
        c2, c1, c0 = coeffs
        t_coef = c2 - root
        d_coef = c0 // root
        if root * root - t_coef * root + d_coef == 0:
            return none_cert()  # +-1 is a repeated eigenvalue
        hyperbolic_pair = (d_coef == 1 and abs(t_coef) > 2) or (d_coef == -1 and t_coef != 0)
        if not hyperbolic_pair:
            return none_cert()
        disc = math.sqrt(t_coef * t_coef - 4 * d_coef)
        r1 = (t_coef + disc) / 2.0
        r2 = (t_coef - disc) / 2.0
        hi, lo = max(abs(r1), abs(r2)), min(abs(r1), abs(r2))
        return _finish_certificate(1, lo, lo, 1.0, 1.0, hi, True)

    # no unit-modulus eigenvalue: need three real roots with distinct moduli
    disc = _cubic_disc(coeffs)
    if disc <= 0 or _has_opposite_pair(coeffs):
        return none_cert()
    mods = sorted(abs(r.real) for r in _roots_3(m))
    return _finish_certificate(1, mods[0], mods[0], mods[1], mods[1], mods[2], True)


# ---------------------------------------------------------------------------
# algebraic sol models


def certify_model_sol(a, model, k: int) -> PHCertificate:
    """Certificate for Phi composed with the time-k height shift, in the sol metric.

    The shift expands the unstable direction by lambda^k and contracts the
    stable one by lambda^{-k}; B contributes its eigenvalues on the two
    directions.  Center rate is exactly 1 (unit-speed flow).
    """
    a = exact.check_unimodular(a, 2)
    if model.e != 1:
        raise ValidationError("certify_model_sol needs a normalized model (e = +1)")
    if exact.mat_mul(a, model.b) != exact.mat_mul(model.b, a):
        raise ValidationError("model B must commute with A when e = +1")
    if not isinstance(k, int) or k < 0:
        raise ValidationError("height shift k must be a non-negative integer")
    frame = exact.eigen_frame(a)
    xi = exact._eig_on_direction(exact.as_matrix(model.b), frame, unstable=True)
    eta = exact._eig_on_direction(exact.as_matrix(model.b), frame, unstable=False)
    u_rate = frame.lam ** k * abs(xi)
    s_rate = frame.lam ** (-k) * abs(eta)
    pointwise = s_rate < 1.0 < u_rate
    return _finish_certificate(1, s_rate, s_rate, 1.0, 1.0, u_rate, pointwise)


# ---------------------------------------------------------------------------
# sampled cocycles and cone certification


@dataclass
class SampledCocycle:
    """Derivative data over a grid of base points.

    points: (n, 3) array of (v1, v2, t) in the fundamental domain.
    matrices: (n, 3, 3) derivative matrices in the (s, c, u) sol frame.
    step: (n,) integer indices; the dynamics sends grid node i near node step[i].
    mesh: grid spacing (must be <= the configured mesh bound).
    """

    points: np.ndarray
    matrices: np.ndarray
    step: np.ndarray
    mesh: float

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.matrices = np.asarray(self.matrices, dtype=float)
        self.step = np.asarray(self.step, dtype=int)
        n = len(self.points)
        if self.matrices.shape != (n, 3, 3) or self.step.shape != (n,):
            raise ValidationError("inconsistent cocycle array shapes")
        dets = np.linalg.det(self.matrices)
        if np.any(np.abs(dets) < 1e-14):
            raise ValidationError("cocycle contains a singular derivative matrix")

    @classmethod
    def constant(cls, matrix, n_points: int = 8) -> "SampledCocycle":
        m = np.asarray(matrix, dtype=float)
        pts = np.zeros((n_points, 3))
        pts[:, 2] = np.linspace(0.0, 0.9, n_points)
        mats = np.repeat(m[None, :, :], n_points, axis=0)
        return cls(points=pts, matrices=mats, step=np.arange(n_points), mesh=1.0)

    @classmethod
    def constant_from_matrix_eigenframe(cls, m3, n_points: int = 8) -> "SampledCocycle":
        """Constant cocycle of a 3x3 matrix written in its own eigenbasis.

        Eigenvectors are ordered by increasing eigenvalue modulus, matching
        the (s, c, u) frame convention.
        """
        arr = np.array(m3, dtype=float)
        vals, vecs = np.linalg.eig(arr)
        if np.max(np.abs(vals.imag)) > 1e-9:
            raise ValidationError("matrix has complex eigenvalues; no real eigenframe")
        order = np.argsort(np.abs(vals.real))
        p = vecs[:, order].real
        d = np.linalg.solve(p, arr @ p)
        return cls.constant(d, n_points=n_points)


def _chain_products(cocycle: SampledCocycle, n: int):
    """(products, end_index): M(f^{n-1} i) ... M(i) along the index orbit."""
    m = cocycle.matrices
    prod = m.copy()
    idx = cocycle.step.copy()
    for _ in range(n - 1):
        prod = np.einsum("nij,njk->nik", m[idx], prod)
        idx = cocycle.step[idx]
    return prod, idx


def _cone_margin(products, opening, axis, n_dirs=128):
    """Angular contraction margin of the cone around `axis` under the products.

    For sampled directions w in the cone (boundary circle plus interior
    rings), the image slope tan(angle(Mw)) must stay strictly below the
    opening; the margin is 1 - max slope/opening, so it shrinks as the
    opening grows and hits 0 exactly when invariance degenerates.
    """
    theta = np.linspace(0.0, 2.0 * np.pi, n_dirs, endpoint=False)
    others = [i for i in range(3) if i != axis]
    rings = (1.0, 0.75, 0.5, 0.25, 0.0)
    dirs = []
    for r in rings:
        w = np.zeros((n_dirs, 3))
        w[:, others[0]] = r * opening * np.cos(theta)
        w[:, others[1]] = r * opening * np.sin(theta)
        w[:, axis] = 1.0
        dirs.append(w)
        if r == 0.0:
            break
    w = np.concatenate(dirs, axis=0)
    w /= np.linalg.norm(w, axis=1, keepdims=True)
    y = np.einsum("nij,dj->ndi", products, w)
    transverse = np.sqrt(y[:, :, others[0]] ** 2 + y[:, :, others[1]] ** 2)
    slope = transverse / np.maximum(np.abs(y[:, :, axis]), 1e-300)
    per_point = 1.0 - slope.max(axis=1) / opening
    i = int(per_point.argmin())
    return float(per_point[i]), i


def _gather_reverse_index(step):
    n = len(step)
    rev = np.arange(n)
    seen = np.zeros(n, dtype=bool)
    for i, j in enumerate(step):
        if not seen[j]:
            rev[j] = i
            seen[j] = True
    return rev


def _bundle_directions(cocycle: SampledCocycle, sweeps: int = 60):
    """(E^s, E^c, E^u) unit fields recovered by power iteration.

    E^s pulls back through inverse matrices, E^u pushes forward along the
    (approximately invertible) index dynamics, and E^c is the intersection
    of the cs/cu planes recovered from their normals.
    """
    m = cocycle.matrices
    step = cocycle.step
    rev = _gather_reverse_index(step)
    minv = np.linalg.inv(m)
    n = len(m)

    def normalize(v):
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    v_s = np.tile(np.array([1.0, 0.0, 0.0]), (n, 1))
    v_u = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))
    nu_cs = np.tile(np.array([0.0, 0.0, 1.0]), (n, 1))  # normal of span(s, c)
    nu_cu = np.tile(np.array([1.0, 0.0, 0.0]), (n, 1))  # normal of span(c, u)
    mt = np.swapaxes(m, 1, 2)
    minv_t = np.swapaxes(minv, 1, 2)
    for _ in range(sweeps):
        v_s = normalize(np.einsum("nij,nj->ni", minv, v_s[step]))
        v_u = normalize(np.einsum("nij,nj->ni", m[rev], v_u[rev]))
        nu_cs = normalize(np.einsum("nij,nj->ni", mt, nu_cs[step]))
        nu_cu = normalize(np.einsum("nij,nj->ni", minv_t[rev], nu_cu[rev]))
    v_c = normalize(np.cross(nu_cs, nu_cu))
    return v_s, v_c, v_u


def cone_certify(cocycle: SampledCocycle, cone_opening: float, n: int) -> PHCertificate:
    """Cone-field certificate over n-step products.

    Checks strict invariance of u-cones under the products and of s-cones
    under the inverse products at every grid point (quadratic cones around
    the frame axes, opening = tangent of the half-angle), then extracts
    per-bundle rate bounds along power-iterated bundle directions.
    """
    if not (0.0 < cone_opening < 1.0):
        raise ValidationError("cone opening must lie in (0, 1)")
    if not isinstance(n, int) or n < 1:
        raise ValidationError("step count N must be a positive integer")
    products, _ = _chain_products(cocycle, n)
    inv_products = np.linalg.inv(products)

    margin_u, iu = _cone_margin(products, cone_opening, axis=2)
    margin_s, is_ = _cone_margin(inv_products, cone_opening, axis=0)
    if margin_u <= 0.0:
        raise ConeNotInvariantError(iu, margin_u)
    if margin_s <= 0.0:
        raise ConeNotInvariantError(is_, margin_s)

    v_s, v_c, v_u = _bundle_directions(cocycle)
    rate_s = np.linalg.norm(np.einsum("nij,nj->ni", products, v_s), axis=1)
    rate_c = np.linalg.norm(np.einsum("nij,nj->ni", products, v_c), axis=1)
    rate_u = np.linalg.norm(np.einsum("nij,nj->ni", products, v_u), axis=1)

    pointwise = bool(
        np.all(rate_s < rate_c) and np.all(rate_c < rate_u)
        and np.all(rate_s < 1.0) and np.all(rate_u > 1.0)
    )
    cert = _finish_certificate(
        n,
        float(rate_s.min()), float(rate_s.max()),
        float(rate_c.min()), float(rate_c.max()),
        float(rate_u.min()),
        pointwise,
    )
    cert.margins["cone_margin_u"] = margin_u
    cert.margins["cone_margin_s"] = margin_s
    return cert


# ---------------------------------------------------------------------------
# entropy obstruction for center-stable tori


@dataclass(frozen=True)
class ObstructionVerdict:
    htop: float
    gamma2_log: float
    incompatible: bool
    margin: float
    message: str

    def to_json(self) -> dict:
        return {
            "htop": self.htop,
            "gamma2_log": self.gamma2_log,
            "incompatible": self.incompatible,
            "margin": self.margin,
            "message": self.message,
        }


def cs_torus_obstruction(a, gamma2_log: float) -> ObstructionVerdict:
    """Entropy test for absolute partial hyperbolicity with a cs-torus.

    On an invariant cs-torus carrying the dynamics of a hyperbolic toral
    automorphism A, ergodic measures realize center exponents arbitrarily
    close to htop(A).  An absolute center bound gamma2 must therefore
    satisfy log gamma2 > htop(A) strictly; at or below it the certificate
    is incompatible with the torus (margin 0 fails).
    """
    h = htop(a)
    margin = gamma2_log - h
    incompatible = margin <= 0.0
    if incompatible:
        msg = (
            f"log gamma2 = {gamma2_log:.6f} <= htop(A) = {h:.6f}: "
            "center exponents near htop(A) on the cs-torus violate the absolute bound"
        )
    else:
        msg = (
            f"log gamma2 = {gamma2_log:.6f} > htop(A) = {h:.6f}: "
            "this test does not obstruct absolute partial hyperbolicity"
        )
    return ObstructionVerdict(htop=h, gamma2_log=gamma2_log,
                              incompatible=incompatible, margin=margin, message=msg)
