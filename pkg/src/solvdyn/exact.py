"""Exact integer and rational linear algebra.

Matrices are tuples of row tuples with Python int or Fraction entries, so all
arithmetic is arbitrary precision.  This module carries the hyperbolicity
tests, eigen-frames, commutant computations, exact solves, modular orders and
Smith normal forms that the algebraic pipelines are built on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import NonHyperbolicError, NotFoundError, SingularMatrixError, ValidationError

Matrix = tuple  # tuple of row tuples


# ---------------------------------------------------------------------------
# generic exact matrix helpers


def as_matrix(rows) -> Matrix:
    return tuple(tuple(x for x in row) for row in rows)


def identity(n: int) -> Matrix:
    return tuple(tuple(1 if i == j else 0 for j in range(n)) for i in range(n))


def mat_mul(a: Matrix, b: Matrix) -> Matrix:
    n, k, m = len(a), len(b), len(b[0])
    assert len(a[0]) == k
    return tuple(
        tuple(sum(a[i][l] * b[l][j] for l in range(k)) for j in range(m))
        for i in range(n)
    )


def mat_vec(a: Matrix, v: Sequence) -> tuple:
    return tuple(sum(a[i][j] * v[j] for j in range(len(v))) for i in range(len(a)))


def mat_add(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x + y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_sub(a: Matrix, b: Matrix) -> Matrix:
    return tuple(tuple(x - y for x, y in zip(ra, rb)) for ra, rb in zip(a, b))


def mat_neg(a: Matrix) -> Matrix:
    return tuple(tuple(-x for x in row) for row in a)


def mat_scale(a: Matrix, c) -> Matrix:
    return tuple(tuple(c * x for x in row) for row in a)


def transpose(a: Matrix) -> Matrix:
    return tuple(tuple(a[i][j] for i in range(len(a))) for j in range(len(a[0])))


def det(a: Matrix):
    """Exact determinant by cofactor expansion (n <= 4 in practice)."""
    n = len(a)
    if n == 1:
        return a[0][0]
    if n == 2:
        return a[0][0] * a[1][1] - a[0][1] * a[1][0]
    total = 0
    for j in range(n):
        minor = tuple(row[:j] + row[j + 1:] for row in a[1:])
        term = a[0][j] * det(minor)
        total += term if j % 2 == 0 else -term
    return total


def trace(a: Matrix):
    return sum(a[i][i] for i in range(len(a)))


def mat_pow(a: Matrix, k: int) -> Matrix:
    """a**k for integer k; negative k allowed when a is unimodular."""
    n = len(a)
    if k < 0:
        return mat_pow(mat_inv_unimodular(a), -k)
    result = identity(n)
    base = a
    while k:
        if k & 1:
            result = mat_mul(result, base)
        base = mat_mul(base, base)
        k >>= 1
    return result


def mat_inv_unimodular(a: Matrix) -> Matrix:
    """Exact integer inverse of a matrix with determinant +-1."""
    d = det(a)
    if d not in (1, -1):
        raise ValidationError(f"matrix is not unimodular (det {d})")
    n = len(a)
    if n == 2:
        adj = ((a[1][1], -a[0][1]), (-a[1][0], a[0][0]))
    else:
        cof = []
        for i in range(n):
            row = []
            for j in range(n):
                minor = tuple(
                    tuple(a[r][c] for c in range(n) if c != j)
                    for r in range(n) if r != i
                )
                row.append((-1) ** (i + j) * det(minor))
            cof.append(tuple(row))
        adj = transpose(tuple(cof))
    return mat_scale(adj, d)  # d = 1/d for d = +-1


def check_unimodular(m, size=None) -> Matrix:
    m = as_matrix(m)
    n = len(m)
    if size is not None and n != size:
        raise ValidationError(f"expected a {size}x{size} matrix, got {n}x{len(m[0])}")
    if any(len(row) != n for row in m):
        raise ValidationError("matrix is not square")
    for row in m:
        for x in row:
            if not isinstance(x, int):
                raise ValidationError("unimodular matrices must have integer entries")
    d = det(m)
    if d not in (1, -1):
        raise ValidationError(f"matrix must have determinant +-1, got {d}")
    return m


# ---------------------------------------------------------------------------
# 2x2 hyperbolicity and eigen-frames


def is_hyperbolic(m) -> bool:
    """True iff no eigenvalue of the unimodular 2x2 matrix has modulus 1.

    With t = trace and d = det: for d = +1 both roots lie on the unit circle
    iff |t| <= 2, so hyperbolic iff |t| > 2.  For d = -1 the roots are real
    with product -1 and a root of modulus one exists only at t = 0.
    """
    m = check_unimodular(m, 2)
    t, d = trace(m), det(m)
    if d == 1:
        return abs(t) > 2
    return t != 0


@dataclass(frozen=True)
class EigenFrame:
    """Eigendata of a hyperbolic 2x2 unimodular matrix.

    lam > 1 is the dominant eigenvalue modulus; the eigenvalues themselves are
    sign_u*lam and sign_s/lam.  e_u, e_s are unit eigenvectors with positive
    first nonzero component.
    """

    lam: float
    sign_u: int
    sign_s: int
    e_u: tuple
    e_s: tuple

    @property
    def lam_inv(self) -> float:
        return 1.0 / self.lam

    @property
    def mu_u(self) -> float:
        return self.sign_u * self.lam

    @property
    def mu_s(self) -> float:
        return self.sign_s / self.lam


def _unit_eigvec(m: Matrix, mu: float) -> tuple:
    a, b = m[0]
    c, d = m[1]
    if b != 0:
        v = (float(b), mu - a)
    elif c != 0:
        v = (mu - d, float(c))
    else:
        v = (1.0, 0.0) if abs(a - mu) < abs(d - mu) else (0.0, 1.0)
    norm = math.hypot(*v)
    v = (v[0] / norm, v[1] / norm)
    lead = v[0] if abs(v[0]) > 1e-14 else v[1]
    if lead < 0:
        v = (-v[0], -v[1])
    return v


def eigen_frame(m) -> EigenFrame:
    """Closed-form eigen-frame from the characteristic polynomial."""
    m = check_unimodular(m, 2)
    if not is_hyperbolic(m):
        raise NonHyperbolicError(f"matrix {m} has an eigenvalue of modulus 1")
    t, d = trace(m), det(m)
    disc = math.sqrt(t * t - 4 * d)
    r1 = (t + disc) / 2.0
    r2 = (t - disc) / 2.0
    mu_u, mu_s = (r1, r2) if abs(r1) >= abs(r2) else (r2, r1)
    lam = abs(mu_u)
    sign_u = 1 if mu_u > 0 else -1
    sign_s = 1 if mu_s > 0 else -1
    # one Newton step on the characteristic polynomial sharpens the root
    p = lambda x: x * x - t * x + d
    dp = lambda x: 2 * x - t
    mu_u -= p(mu_u) / dp(mu_u)
    lam = abs(mu_u)
    return EigenFrame(
        lam=lam,
        sign_u=sign_u,
        sign_s=sign_s,
        e_u=_unit_eigvec(m, sign_u * lam),
        e_s=_unit_eigvec(m, sign_s / lam),
    )


def htop(m) -> float:
    """Topological entropy of the toral automorphism: log of the dominant modulus."""
    return math.log(eigen_frame(m).lam)


# ---------------------------------------------------------------------------
# commutant


def _commutant_lattice(a: Matrix):
    """The integer commutant of hyperbolic a is {j*I + m*C}.

    C = (a - a11*I)/g with g = gcd(a12, a21, a11-a22); integrality of C and
    the fact that every commuting integer matrix lies in the lattice follow
    from gcd Bezout combinations of the commutation constraints.
    """
    (p, b), (c, d) = a
    g = math.gcd(math.gcd(abs(b), abs(c)), abs(p - d))
    if g == 0:
        raise NonHyperbolicError("scalar matrix has no commutant generator")
    cmat = ((0, b // g), (c // g, (d - p) // g))
    return g, cmat


def _isqrt_exact(n: int):
    if n < 0:
        return None
    r = math.isqrt(n)
    return r if r * r == n else None


def commutant_generator(a) -> Matrix:
    """Primitive generator A0 of {B : AB = BA, B unimodular} = {+-A0^k}.

    Solves the Pell-style unit equation det(j*I + m*C) = +-1 over the
    commutant lattice and keeps the unit of smallest spectral radius > 1,
    canonicalized so that it expands A's unstable direction by +lambda0.
    """
    a = check_unimodular(a, 2)
    if not is_hyperbolic(a):
        raise NonHyperbolicError("commutant generator requires hyperbolic input")
    g, cmat = _commutant_lattice(a)
    frame = eigen_frame(a)
    # eigenvalues of C on the u/s directions
    theta_u = (frame.mu_u - a[0][0]) / g
    theta_s = (frame.mu_s - a[0][0]) / g
    gap = abs(theta_u - theta_s)
    tr_c, det_c = trace(cmat), det(cmat)
    # any unit with radius <= lam has |m| <= (lam + 1/lam)/gap; A itself
    # (m = g) is a unit, so searching this far always finds a generator
    m_bound = int(math.ceil((frame.lam + 1.0 / frame.lam) / gap)) + 1
    best = None
    best_radius = None
    for m in range(1, m_bound + 1):
        for target in (1, -1):
            disc = m * m * (tr_c * tr_c - 4 * det_c) + 4 * target
            root = _isqrt_exact(disc)
            if root is None:
                continue
            for j2 in (-m * tr_c + root, -m * tr_c - root):
                if j2 % 2:
                    continue
                j = j2 // 2
                cand = mat_add(mat_scale(identity(2), j), mat_scale(cmat, m))
                nu_u = j + m * theta_u
                nu_s = j + m * theta_s
                radius = max(abs(nu_u), abs(nu_s))
                if radius <= 1.0 + 1e-12:
                    continue
                if best_radius is None or radius < best_radius - 1e-12:
                    best, best_radius = cand, radius
    if best is None:
        raise NotFoundError("no commutant unit found", bound=m_bound)
    # canonical representative among {+-best, +-best^-1}: unstable eigenvalue +lambda0
    inv = mat_inv_unimodular(best)
    for cand in (best, mat_neg(best), inv, mat_neg(inv)):
        nu = _eig_on_direction(cand, frame, unstable=True)
        if nu > 0:
            best = cand
            break
    sign, k = decompose(a, best)
    del sign, k  # A = +-A0^k must hold; decompose raises otherwise
    return best


def _eig_on_direction(b: Matrix, frame: EigenFrame, unstable: bool) -> float:
    v = frame.e_u if unstable else frame.e_s
    w = (b[0][0] * v[0] + b[0][1] * v[1], b[1][0] * v[0] + b[1][1] * v[1])
    # eigenvalue of b on the invariant direction v
    return (w[0] * v[0] + w[1] * v[1]) / (v[0] * v[0] + v[1] * v[1])


def decompose(b, a0) -> tuple:
    """Write b = sign * a0**k exactly; returns (sign, k).

    The representation is unique because a0 has infinite order and
    -I is not a power of a0.
    """
    b = check_unimodular(b, 2)
    a0 = check_unimodular(a0, 2)
    frame0 = eigen_frame(a0)
    nu = _eig_on_direction(b, frame0, unstable=True)
    k0 = 0
    if abs(nu) > 1e-12:
        k0 = int(round(math.log(abs(nu)) / math.log(frame0.lam)))
    for k in sorted(range(k0 - 2, k0 + 3), key=lambda x: (abs(x - k0), abs(x))):
        p = mat_pow(a0, k)
        if p == b:
            return (1, k)
        if mat_neg(p) == b:
            return (-1, k)
    raise NotFoundError(f"{b} is not +-A0^k for A0 = {a0}")


# ---------------------------------------------------------------------------
# exact solving (fraction-free Gaussian elimination)


def solve_rational(m, b) -> tuple:
    """Exact solution of m x = b over the rationals.

    Denominators are cleared and the integer system is reduced by
    fraction-free (Bareiss) elimination.  Raises SingularMatrixError when
    det m = 0; if the singular system is consistent the error carries one
    particular solution and a nullspace basis as the solution-space
    description.
    """
    m = as_matrix(m)
    n = len(m)
    b = tuple(Fraction(x) for x in b)
    if any(len(row) != n for row in m) or len(b) != n:
        raise ValidationError("solve_rational expects a square system")
    rows = [[Fraction(x) for x in row] + [b[i]] for i, row in enumerate(m)]
    # clear denominators row by row -> integer augmented matrix
    aug = []
    for row in rows:
        l = 1
        for x in row:
            l = l * x.denominator // math.gcd(l, x.denominator)
        aug.append([int(x * l) for x in row])

    # Bareiss fraction-free elimination (one-step exact division) to echelon form
    r = 0
    prev = 1
    pivots = []
    for col in range(n):
        piv = next((i for i in range(r, n) if aug[i][col] != 0), None)
        if piv is None:
            continue
        aug[r], aug[piv] = aug[piv], aug[r]
        pivot = aug[r][col]
        for i in range(r + 1, n):
            lead = aug[i][col]
            row = aug[i]
            top = aug[r]
            for j in range(n + 1):
                num = row[j] * pivot - lead * top[j]
                q, rem = divmod(num, prev)
                assert rem == 0, "Bareiss exact division failed"
                row[j] = q
        prev = pivot
        pivots.append((r, col))
        r += 1

    rank = r
    if rank < n:
        # consistency: echelon rows below rank must have zero rhs
        consistent = all(aug[i][n] == 0 for i in range(rank, n))
        if not consistent:
            raise SingularMatrixError("singular system, right-hand side outside the range")
        # back-substitute a particular solution (free variables = 0) and nullspace
        pivot_cols = [c for _, c in pivots]
        free_cols = [c for c in range(n) if c not in pivot_cols]
        particular = _back_substitute(aug, pivots, n, {c: Fraction(0) for c in free_cols})
        nullspace = []
        for fc in free_cols:
            vals = {c: Fraction(1 if c == fc else 0) for c in free_cols}
            hom = _back_substitute(aug, pivots, n, vals, homogeneous=True)
            nullspace.append(hom)
        raise SingularMatrixError(
            "singular system, solution space has dimension %d" % len(free_cols),
            consistent=True,
            particular=particular,
            nullspace=nullspace,
        )
    x = _back_substitute(aug, pivots, n, {})
    return x


def _back_substitute(aug, pivots, n, free_values, homogeneous=False):
    x = [Fraction(0)] * n
    for c, v in free_values.items():
        x[c] = v
    for r, c in reversed(pivots):
        s = Fraction(aug[r][n] if not homogeneous else 0)
        for j in range(c + 1, n):
            s -= Fraction(aug[r][j]) * x[j]
        x[c] = s / aug[r][c]
    return tuple(x)


def rational_vector(components) -> tuple:
    """Exact rational vector; Fractions normalize to reduced form with positive denominator."""
    return tuple(Fraction(x) for x in components)


# ---------------------------------------------------------------------------
# modular order and Lefschetz determinant


def matrix_order_mod(m, q: int) -> int:
    """Least l >= 1 with m**l = I mod q; requires gcd(det m, q) = 1."""
    m = as_matrix(m)
    if not isinstance(q, int) or q < 1:
        raise ValidationError("modulus q must be a positive integer")
    if math.gcd(int(det(m)) % q if q > 1 else 0, q) != 1 and q > 1:
        raise ValidationError("matrix determinant must be invertible mod q")
    if q == 1:
        return 1
    n = len(m)
    ident = tuple(tuple(x % q for x in row) for row in identity(n))
    power = tuple(tuple(x % q for x in row) for row in m)
    order = 1
    # the group GL(n, Z/q) is finite, so the loop terminates
    bound = q ** (n * n) + 1
    while power != ident:
        power = tuple(tuple(x % q for x in row) for row in mat_mul(power, m))
        order += 1
        if order > bound:  # pragma: no cover - unreachable for valid input
            raise NotFoundError("order search exceeded group bound", bound=bound)
    return order


def det_i_minus(m) -> int:
    """Exact det(I - M): the Lefschetz-number product prod (1 - lambda_i)."""
    m = as_matrix(m)
    return int(det(mat_sub(identity(len(m)), m)))


# ---------------------------------------------------------------------------
# Smith normal form over Z


def smith_normal_form(m):
    """U m V = D with U, V unimodular and D diagonal, d1 | d2 | ... .

    Returns (U, D, V) as integer matrices (tuples).  Matrices here are tiny
    (n <= 4), so the plain remainder-rotation algorithm is used and the
    divisibility fix-up simply re-runs the diagonalization.
    """
    a = [list(row) for row in as_matrix(m)]
    rows, cols = len(a), len(a[0])
    u = [list(r) for r in identity(rows)]
    v = [list(r) for r in identity(cols)]

    def add_col(src, dst, c):
        for r in a:
            r[dst] += c * r[src]
        for r in v:
            r[dst] += c * r[src]

    _snf_diagonalize(a, u, v)
    while True:
        bad = None
        for i in range(min(rows, cols) - 1):
            d1, d2 = a[i][i], a[i + 1][i + 1]
            if d1 != 0 and d2 % d1 != 0:
                bad = i
                break
        if bad is None:
            break
        add_col(bad + 1, bad, 1)
        _snf_diagonalize(a, u, v)
    return as_matrix(u), as_matrix(a), as_matrix(v)


def _snf_diagonalize(a, u, v):
    """In-place diagonalization by unimodular row/column operations."""
    rows, cols = len(a), len(a[0])

    def swap_rows(i, j):
        a[i], a[j] = a[j], a[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for r in a:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]

    def add_row(src, dst, c):
        a[dst] = [x + c * y for x, y in zip(a[dst], a[src])]
        u[dst] = [x + c * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, c):
        for r in a:
            r[dst] += c * r[src]
        for r in v:
            r[dst] += c * r[src]

    for t in range(min(rows, cols)):
        while True:
            piv = None
            for i in range(t, rows):
                for j in range(t, cols):
                    if a[i][j] != 0 and (piv is None or abs(a[i][j]) < abs(a[piv[0]][piv[1]])):
                        piv = (i, j)
            if piv is None:
                return
            if piv != (t, t):
                swap_rows(t, piv[0])
                swap_cols(t, piv[1])
            clean = True
            for i in range(t + 1, rows):
                q = a[i][t] // a[t][t]
                if q:
                    add_row(t, i, -q)
                if a[i][t] != 0:
                    clean = False
            for j in range(t + 1, cols):
                q = a[t][j] // a[t][t]
                if q:
                    add_col(t, j, -q)
                if a[t][j] != 0:
                    clean = False
            if clean:
                break
            # a remainder survived; the next sweep picks it as a smaller pivot
        if a[t][t] < 0:
            a[t] = [-x for x in a[t]]
            u[t] = [-x for x in u[t]]


def integer_nullspace(m):
    """Basis of {v in Z^n : m v = 0} as primitive integer vectors."""
    u, d, v = smith_normal_form(m)
    n = len(v)
    rank = sum(1 for i in range(min(len(d), len(d[0]))) if d[i][i] != 0)
    basis = []
    for j in range(rank, n):
        basis.append(tuple(v[i][j] for i in range(n)))
    return basis


def complete_to_unimodular(vec):
    """Unimodular matrix whose last column is the primitive vector vec."""
    n = len(vec)
    g = 0
    for x in vec:
        g = math.gcd(g, abs(x))
    if g != 1:
        raise ValidationError("vector must be primitive")
    col = tuple((x,) for x in vec)
    u, d, v = smith_normal_form(col)
    # u * vec = (1, 0, ..., 0)^T, so u^{-1} has vec as first column
    uinv = mat_inv_unimodular(u)
    cols = [tuple(uinv[i][j] for i in range(n)) for j in range(n)]
    cols = cols[1:] + [cols[0]]  # move vec to the last slot
    p = tuple(tuple(cols[j][i] for j in range(n)) for i in range(n))
    if det(p) == -1:
        # flip the first column's sign to restore det +1
        p = tuple((-row[0],) + row[1:] for row in p)
    return p
