"""The group G = Z^2 x|_A Z, its automorphisms and their affine models.

Group elements (z, n) stand for alpha_z * gamma_3^n acting on the cover by
(v, t) -> (A^{-n} v + z, t + n).  Automorphisms are carried in the normal
form (B, v, e): alpha_z -> alpha_{Bz}, gamma_3 -> alpha_v gamma_3^e, which
requires A^e B = B A.  Every automorphism is realized by the affine map
Phi(x, t) = (Bx + w, e t) on the cover, where w solves A^{-e} w + v = w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from . import exact
from .errors import NotFoundError, ValidationError
from .solgeo import CoverPoint, SolFrame


@dataclass(frozen=True)
class GroupElement:
    z: tuple  # integer pair
    n: int

    def __post_init__(self):
        if len(self.z) != 2 or not all(isinstance(x, int) for x in self.z):
            raise ValidationError("group element needs an integer pair z")
        if not isinstance(self.n, int):
            raise ValidationError("group element needs an integer n")


IDENTITY = GroupElement((0, 0), 0)


class FundamentalGroup:
    """Arithmetic of G for a fixed hyperbolic A."""

    def __init__(self, a):
        self.a = exact.check_unimodular(a, 2)
        if not exact.is_hyperbolic(self.a):
            raise ValidationError("suspension group needs hyperbolic A")
        self._frame = None

    @property
    def frame(self) -> SolFrame:
        if self._frame is None:
            self._frame = SolFrame(self.a)
        return self._frame

    def apow(self, n: int):
        return exact.mat_pow(self.a, n)

    def mul(self, g1: GroupElement, g2: GroupElement) -> GroupElement:
        z2 = exact.mat_vec(self.apow(-g1.n), g2.z)
        return GroupElement((g1.z[0] + z2[0], g1.z[1] + z2[1]), g1.n + g2.n)

    def inv(self, g: GroupElement) -> GroupElement:
        z = exact.mat_vec(self.apow(g.n), g.z)
        return GroupElement((-z[0], -z[1]), -g.n)

    def word(self, elements) -> GroupElement:
        out = IDENTITY
        for g in elements:
            out = self.mul(out, g)
        return out

    def apply(self, g: GroupElement, p: CoverPoint) -> CoverPoint:
        return self.frame.deck_apply((g.z, g.n), p)


@dataclass(frozen=True)
class AutomorphismData:
    """Normal form (B, v, e) of an automorphism of G."""

    b: tuple
    v: tuple
    e: int

    def __post_init__(self):
        exact.check_unimodular(self.b, 2)
        if len(self.v) != 2 or not all(isinstance(x, int) for x in self.v):
            raise ValidationError("automorphism translation v must be an integer pair")
        if self.e not in (1, -1):
            raise ValidationError("orientation e must be +1 or -1")


@dataclass(frozen=True)
class AffineModel:
    """Geometric realization Phi(x, t) = (Bx + w, e t); w exact rational."""

    b: tuple
    w: tuple  # pair of Fractions
    e: int
    v: tuple = None  # source translation, kept for the defining identity

    def apply(self, p: CoverPoint) -> CoverPoint:
        x = exact.mat_vec(self.b, p.v)
        return CoverPoint((x[0] + self.w[0], x[1] + self.w[1]), self.e * p.t)


def validate_automorphism(a, data: AutomorphismData) -> bool:
    """True iff A^e B = B A exactly (the consistency condition of the normal form)."""
    a = exact.check_unimodular(a, 2)
    if not exact.is_hyperbolic(a):
        raise ValidationError("automorphism validation needs hyperbolic A")
    lhs = exact.mat_mul(exact.mat_pow(a, data.e), data.b)
    rhs = exact.mat_mul(data.b, a)
    return lhs == rhs


def power_relation(a, b) -> tuple:
    """(j, k, sign) with B^j = sign * A^k, smallest j >= 1.

    For e = +1 data B commutes with A directly; for e = -1 it is B^2 that
    commutes.  Both reduce to decompositions in the commutant generator.
    """
    a0 = exact.commutant_generator(a)
    sign_a, ka = exact.decompose(a, a0)
    for j in range(1, 25):
        bj = exact.mat_pow(b, j)
        try:
            sign_b, kb = exact.decompose(bj, a0)
        except NotFoundError:
            continue
        if ka == 0:
            continue
        # B^j = sign_b A0^kb, A = sign_a A0^ka: need A0^kb ~ A^k
        if kb % ka == 0:
            k = kb // ka
            sign = sign_b * (sign_a ** (k % 2))
            return (j, k, sign)
    raise NotFoundError("no power relation B^j = +-A^k with j <= 24")


def aut_apply(group: FundamentalGroup, data: AutomorphismData, g: GroupElement) -> GroupElement:
    """phi(alpha_z) = alpha_{Bz}, phi(gamma_3) = alpha_v gamma_3^e, extended multiplicatively."""
    if not validate_automorphism(group.a, data):
        raise ValidationError("automorphism data fails A^e B = B A")
    bz = exact.mat_vec(data.b, g.z)
    out = GroupElement((bz[0], bz[1]), 0)
    gen = GroupElement(data.v, data.e)
    if g.n >= 0:
        step = gen
        count = g.n
    else:
        step = group.inv(gen)
        count = -g.n
    for _ in range(count):
        out = group.mul(out, step)
    return out


def build_model(a, data: AutomorphismData) -> AffineModel:
    """Solve A^{-e} w + v = w exactly; hyperbolicity makes the solution unique."""
    if not validate_automorphism(a, data):
        raise ValidationError("automorphism data fails A^e B = B A")
    a = exact.as_matrix(a)
    m = exact.mat_sub(exact.identity(2), exact.mat_pow(a, -data.e))
    w = exact.solve_rational(m, data.v)
    return AffineModel(b=exact.as_matrix(data.b), w=w, e=data.e, v=tuple(data.v))


def model_conjugates_generator(group: FundamentalGroup, model: AffineModel,
                               data: AutomorphismData, g: GroupElement,
                               samples) -> bool:
    """Check Phi o g = phi(g) o Phi exactly on the given rational points."""
    pg = aut_apply(group, data, g)
    for p in samples:
        lhs = model.apply(group.apply(g, p))
        rhs = group.apply(pg, model.apply(p))
        if lhs.v != rhs.v or lhs.t != rhs.t:
            return False
    return True


def iterate_form(model: AffineModel, n: int):
    """(B^n, sum_{i<n} B^i w, e^n): the exact data of Phi^n."""
    bn = exact.identity(2)
    z = (Fraction(0), Fraction(0))
    for _ in range(n):
        bw = exact.mat_vec(bn, model.w)
        z = (z[0] + bw[0], z[1] + bw[1])
        bn = exact.mat_mul(bn, model.b)
    en = 1 if (model.e == 1 or n % 2 == 0) else -1
    return bn, z, en


def normalize_iterate(a, model: AffineModel) -> tuple:
    """Least n with Phi^n(x,t) = (A^m x + z, t), z integer.

    Searches n = 1, 2, ... by exact composition; the constructive bound
    2*j*l from the finite-permutation argument caps the search at 48 q^2
    where q is the lcm of the denominators of w.
    """
    a = exact.check_unimodular(a, 2)
    frame = exact.eigen_frame(a)
    q = 1
    for c in model.w:
        q = q * c.denominator // math.gcd(q, c.denominator)
    bound = 48 * q * q
    bn = exact.identity(2)
    z = (Fraction(0), Fraction(0))
    log_lam = math.log(frame.lam)
    for n in range(1, bound + 1):
        bw = exact.mat_vec(bn, model.w)
        z = (z[0] + bw[0], z[1] + bw[1])
        bn = exact.mat_mul(bn, model.b)
        if model.e == -1 and n % 2 == 1:
            continue
        if z[0].denominator != 1 or z[1].denominator != 1:
            continue
        m = _power_of_a(bn, a, frame, log_lam)
        if m is None:
            continue
        return n, m, (int(z[0]), int(z[1]))
    raise NotFoundError("no normalized iterate within the search bound", bound=bound)


def _power_of_a(bn, a, frame, log_lam):
    """m with bn = A^m exactly, or None."""
    if bn == exact.identity(2):
        return 0
    nu = exact._eig_on_direction(bn, frame, unstable=True)
    if abs(nu) < 1e-300:
        return None
    m0 = int(round(math.log(abs(nu)) / log_lam))
    for m in (m0 - 1, m0, m0 + 1):
        if bn == exact.mat_pow(a, m):
            return m
    return None


def foliation_action(a, model: AffineModel, n_leaves: int = 3, tol: float = 1e-9) -> str:
    """'preserves' iff e = +1, 'swaps' iff e = -1; cross-checked on sampled leaves.

    B preserves the eigenspaces of A when it commutes with A and exchanges
    them when A^{-1} B = B A, so cs-leaves map into cs-leaves (e = +1) or
    cu-leaves (e = -1); the numeric check traces three leaves through the map.
    """
    frame = SolFrame(a)
    expected = "preserves" if model.e == 1 else "swaps"
    for i in range(n_leaves):
        u0 = 0.3 * (i + 1)
        pts = [frame.point(u0, s, t) for s, t in ((0.0, 0.0), (0.7, 0.2), (-0.4, 0.8))]
        images = [model.apply(_float_point(p)) for p in pts]
        coords = [frame.leaf_coords(q) for q in images]
        if expected == "preserves":
            spread = max(c[0] for c in coords) - min(c[0] for c in coords)
        else:
            spread = max(c[1] for c in coords) - min(c[1] for c in coords)
        if spread > tol:
            raise ValidationError(
                f"model does not {expected[:-1]} the expected foliation (spread {spread:.2e})"
            )
    return expected


def _float_point(p: CoverPoint) -> CoverPoint:
    return CoverPoint((float(p.v[0]), float(p.v[1])), float(p.t))


# ---------------------------------------------------------------------------
# serialization


def automorphism_to_json(data: AutomorphismData) -> dict:
    return {"B": [list(r) for r in data.b], "v": list(data.v), "e": data.e}


def automorphism_from_json(obj) -> AutomorphismData:
    return AutomorphismData(
        b=exact.as_matrix(obj["B"]), v=tuple(int(x) for x in obj["v"]), e=int(obj["e"])
    )


def model_to_json(model: AffineModel) -> dict:
    out = {
        "B": [list(r) for r in model.b],
        "w": [str(c) for c in model.w],
        "e": model.e,
    }
    if model.v is not None:
        out["v"] = list(model.v)
    return out


def model_from_json(obj) -> AffineModel:
    return AffineModel(
        b=exact.as_matrix(obj["B"]),
        w=tuple(Fraction(s) for s in obj["w"]),
        e=int(obj["e"]),
        v=tuple(int(x) for x in obj["v"]) if "v" in obj else None,
    )
