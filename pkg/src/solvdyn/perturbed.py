"""Perturbed suspension-flow models on the universal cover.

The base map is an affine model composed with a height shift,
F0(v, t) = (Bv + w, t + k), perturbed by a displacement field defined on the
fundamental domain and extended by deck equivariance: under alpha_z the field
is Z^2-periodic, under gamma_3 its vector part transforms by A^{-1}.  The
extension leaves the sol-metric size of the field invariant, so the reported
sup norm eps holds on the whole cover.

All heavy operations are vectorized over arrays of points; long orbits are
tracked in reduced coordinates (fundamental domain plus an integer height
counter), which deck equivariance makes exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import exact
from .certify import SampledCocycle
from .errors import ValidationError
from .pi1 import AffineModel
from .solgeo import CoverPoint, SolFrame

ADMISSIBLE_EPS = 0.1


def _smootherstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * x * (10.0 + x * (-15.0 + 6.0 * x))


class TrigPerturbation:
    """Seeded trigonometric displacement field, extended by deck equivariance.

    The equivariant extension blends the pullbacks of one smooth slab profile
    over two adjacent slabs with a C^2 partition of unity (smootherstep
    weights), so the field is generic at integer heights instead of vanishing
    there.  Components are specified in the sol frame with the unstable and
    flow amplitudes damped (factors 0.15 / 0.6 plus lambda^{-tau} gauges):
    v-periodic fields pay a lambda^t amplification on some sol-frame
    derivative entries, and the damping keeps the sampled derivative
    perturbation comparable to eps.
    """

    _WAVEVECTORS = ((1, 0), (0, 1), (1, 1), (1, -1))

    def __init__(self, frame: SolFrame, eps: float, seed: int = 0, n_modes: int = 2):
        self.frame = frame
        self.eps = float(eps)
        self.seed = int(seed)
        rng = np.random.default_rng(seed)
        modes = []
        for _ in range(n_modes):
            m = np.array(self._WAVEVECTORS[rng.integers(0, len(self._WAVEVECTORS))])
            phase = rng.uniform(0.0, 2.0 * np.pi)
            tphase = rng.uniform(0.0, 2.0 * np.pi)
            coef = rng.normal(size=3) * np.array([0.15, 1.0, 0.35])
            modes.append((m.astype(float), phase, tphase, coef))
        self.modes = modes
        self._scale = 1.0
        if eps > 0:
            self._scale = eps / self._sup_sol_norm()

    def _sup_sol_norm(self, n_grid: int = 40) -> float:
        v1, v2, tau = np.meshgrid(
            np.linspace(0, 1, n_grid, endpoint=False),
            np.linspace(0, 1, n_grid, endpoint=False),
            np.linspace(0, 1, n_grid, endpoint=False),
            indexing="ij",
        )
        v = np.stack([v1.ravel(), v2.ravel()], axis=1)
        tau = tau.ravel()
        du, ds, dt = self.eval_blended(v, tau)
        lam_t = self.frame.lam ** tau
        norm = np.sqrt((du * lam_t) ** 2 + (ds / lam_t) ** 2 + dt ** 2)
        return float(norm.max()) / max(self._scale, 1e-300)

    def _raw_components(self, v, tau):
        """Eigen-coordinate Euclidean components (du, ds, dt) of one slab term.

        Sol amplitudes (a_u lambda^{-tau}, a_s, a_c lambda^{-tau}) map to
        Euclidean eigen coefficients through the unit frame fields
        E_u = lambda^{-tau} e_u, E_s = lambda^{tau} e_s, E_c = d/dt.
        """
        lam = self.frame.lam
        du = np.zeros(len(v))
        ds = np.zeros(len(v))
        dt = np.zeros(len(v))
        g_u = lam ** (-2.0 * tau)
        g_s = lam ** tau
        g_c = lam ** (-tau)
        for m, phase, tphase, coef in self.modes:
            osc = np.sin(2.0 * np.pi * (v @ m) + phase) * (
                1.0 + 0.3 * np.sin(2.0 * np.pi * tau + tphase)
            )
            du += coef[0] * osc * g_u
            ds += coef[1] * osc * g_s
            dt += coef[2] * osc * g_c
        return du, ds, dt

    def eval_blended(self, v, tau):
        """Field on the fundamental slab 0 <= tau < 1, seam-blended.

        Term n = 0 is the raw profile at (v, tau); term n = 1 is its deck
        pullback A^{-1} eta(A v, tau - 1); smootherstep weights sum to one.
        """
        v = np.asarray(v, float)
        tau = np.asarray(tau, float)
        w1 = _smootherstep(tau)
        w0 = 1.0 - w1
        du0, ds0, dt0 = self._raw_components(v, tau)
        a = np.array(self.frame.a, dtype=float)
        v1 = (v @ a.T) % 1.0
        du1, ds1, dt1 = self._raw_components(v1, tau - 1.0)
        fr = self.frame.frame
        du = w0 * du0 + w1 * du1 / fr.mu_u
        ds = w0 * ds0 + w1 * ds1 / fr.mu_s
        dt = w0 * dt0 + w1 * dt1
        return du * self._scale, ds * self._scale, dt * self._scale

    def lipschitz_report(self, n_samples: int = 2000, h: float = 1e-5, seed: int = 1):
        """Sampled sol-metric Lipschitz estimate of the displacement field."""
        rng = np.random.default_rng(seed)
        v = rng.uniform(0, 1, size=(n_samples, 2))
        tau = rng.uniform(0, 1 - h, size=n_samples)
        base = np.stack(self.eval_blended(v, tau), axis=1)
        worst = 0.0
        for axis in range(3):
            dv = np.zeros((n_samples, 2))
            dtau = np.zeros(n_samples)
            if axis < 2:
                dv[:, axis] = h
            else:
                dtau[:] = h
            shifted = np.stack(self.eval_blended(v + dv, tau + dtau), axis=1)
            worst = max(worst, float(np.abs(shifted - base).max()) / h)
        return worst


class PerturbedMap:
    """F0 + equivariant displacement; eps = 0 reduces to the exact affine model."""

    def __init__(self, a, model: AffineModel, k: int, eps: float = 0.0,
                 seed: int = 0, n_modes: int = 2):
        self.a = exact.check_unimodular(a, 2)
        if model.e != 1:
            raise ValidationError("perturbed maps need a normalized base model (e = +1)")
        if exact.mat_mul(self.a, model.b) != exact.mat_mul(model.b, self.a):
            raise ValidationError("base model B must commute with A")
        if not isinstance(k, int) or k < 1:
            raise ValidationError("height shift k must be a positive integer")
        self.model = model
        self.k = k
        self.eps = float(eps)
        self.admissible = self.eps <= ADMISSIBLE_EPS
        self.frame = SolFrame(self.a)
        self.pert = TrigPerturbation(self.frame, eps, seed=seed, n_modes=n_modes) if eps > 0 else None

        fr = self.frame.frame
        self.mu_u, self.mu_s = fr.mu_u, fr.mu_s
        self.lam = fr.lam
        self.b_np = np.array(model.b, dtype=float)
        self.w_np = np.array([float(c) for c in model.w])
        self.mu_b_u = exact._eig_on_direction(model.b, fr, unstable=True)
        self.mu_b_s = exact._eig_on_direction(model.b, fr, unstable=False)
        self.u_w, self.s_w = self.frame.to_uv(self.w_np)
        self._phi_cache = {}

    # -- displacement field ----------------------------------------------------
    def delta(self, v, t):
        """Equivariant displacement at arbitrary points; (dv (n,2), dt (n,))."""
        v = np.atleast_2d(np.asarray(v, float))
        t = np.atleast_1d(np.asarray(t, float))
        if self.pert is None:
            return np.zeros_like(v), np.zeros(len(v))
        n = np.floor(t).astype(int)
        tau = t - n
        dv = np.empty_like(v)
        dt = np.empty(len(v))
        for slab in np.unique(n):
            idx = np.where(n == slab)[0]
            an = np.array(self.frame.apow(int(slab)), dtype=float)
            vs = (v[idx] @ an.T) % 1.0
            du0, ds0, dt0 = self.pert.eval_blended(vs, tau[idx])
            du = du0 * self.mu_u ** (-int(slab))
            ds = ds0 * self.mu_s ** (-int(slab))
            dv[idx] = self.frame.from_uv_arr(np.stack([du, ds], axis=1))
            dt[idx] = dt0
        return dv, dt

    # -- evaluation --------------------------------------------------------------
    def evaluate(self, v, t):
        """f(v, t) on arrays: base affine map plus displacement."""
        v = np.atleast_2d(np.asarray(v, float))
        t = np.atleast_1d(np.asarray(t, float))
        dv, dt = self.delta(v, t)
        return v @ self.b_np.T + self.w_np + dv, t + self.k + dt

    def evaluate_point(self, p: CoverPoint) -> CoverPoint:
        v, t = self.evaluate(np.array([p.as_floats()[:2]]), np.array([p.t], float))
        return CoverPoint((float(v[0, 0]), float(v[0, 1])), float(t[0]))

    def _phi_translation(self, n: int):
        """Integer translation part of the induced automorphism at gamma_3^n.

        phi(gamma_3) = alpha_c gamma_3 with c = (I - A^{-1}) w, which equals
        the source automorphism translation and is an exact integer vector.
        """
        if n in self._phi_cache:
            return self._phi_cache[n]
        c = exact.mat_vec(exact.mat_sub(exact.identity(2), exact.mat_pow(self.a, -1)),
                          self.model.w)
        if any(x.denominator != 1 for x in c):
            raise ValidationError("induced automorphism translation is not integral")
        c = (int(c[0]), int(c[1]))
        total = (0, 0)
        if n > 0:
            for i in range(n):
                ai = exact.mat_pow(self.a, -i)
                step = exact.mat_vec(ai, c)
                total = (total[0] + step[0], total[1] + step[1])
        elif n < 0:
            for j in range(1, -n + 1):
                aj = exact.mat_pow(self.a, j)
                step = exact.mat_vec(aj, c)
                total = (total[0] - step[0], total[1] - step[1])
        self._phi_cache[n] = total
        return total

    def inverse(self, v, t, tol: float = 1e-12, max_iter: int = 60):
        """Solve f(q) = (v, t), reducing targets by deck equivariance first.

        In raw coordinates the displacement field oscillates with amplitude
        eps * lambda^{|t|}, so Newton is run on fundamental-domain
        representatives and the preimage is transported back with
        f^{-1} o deck(g) = deck(phi^{-1}(g)) o f^{-1}.
        """
        v = np.atleast_2d(np.asarray(v, float))
        t = np.atleast_1d(np.asarray(t, float))
        b_inv = np.linalg.inv(self.b_np)
        if self.pert is None:
            return (v - self.w_np) @ b_inv.T, t - self.k
        b_inv_exact = exact.mat_inv_unimodular(self.model.b)
        n_arr = np.floor(t).astype(int)
        qv = np.empty_like(v)
        qt = np.empty_like(t)
        for n in np.unique(n_arr):
            idx = np.where(n_arr == n)[0]
            an = np.array(self.frame.apow(int(n)), dtype=float)
            w = v[idx] @ an.T
            zp = np.floor(w)
            v_hat = w - zp
            t_hat = t[idx] - n
            qv_hat, qt_hat = self._newton_inverse(v_hat, t_hat, tol, max_iter)
            # deck element g = (A^{-n} zp, n); transport by phi^{-1}(g)
            a_minus_n = np.array(self.frame.apow(int(-n)), dtype=float)
            z = zp @ a_minus_n.T
            trans = np.array(self._phi_translation(int(n)), dtype=float)
            b_inv_f = np.array(b_inv_exact, dtype=float)
            z_prime = (z - trans) @ b_inv_f.T
            qv[idx] = qv_hat @ a_minus_n.T + z_prime
            qt[idx] = qt_hat + n
        return qv, qt

    def _newton_inverse(self, v, t, tol, max_iter):
        b_inv = np.linalg.inv(self.b_np)
        qv = (v - self.w_np) @ b_inv.T
        qt = t - self.k
        h = 1e-6
        for _ in range(max_iter):
            fv, ft = self.evaluate(qv, qt)
            rv = fv - v
            rt = ft - t
            err = max(np.abs(rv).max(), np.abs(rt).max())
            if err < tol:
                break
            jac = self._fd_jacobian(qv, qt, h)
            res = np.concatenate([rv, rt[:, None]], axis=1)
            step = np.linalg.solve(jac, res[:, :, None])[:, :, 0]
            qv = qv - step[:, :2]
            qt = qt - step[:, 2]
        return qv, qt

    def _fd_jacobian(self, v, t, h):
        n = len(v)
        jac = np.empty((n, 3, 3))
        fv0, ft0 = self.evaluate(v, t)
        for j in range(3):
            dv = np.zeros((n, 2))
            dt = np.zeros(n)
            if j < 2:
                dv[:, j] = h
            else:
                dt[:] = h
            fv, ft = self.evaluate(v + dv, t + dt)
            jac[:, 0, j] = (fv[:, 0] - fv0[:, 0]) / h
            jac[:, 1, j] = (fv[:, 1] - fv0[:, 1]) / h
            jac[:, 2, j] = (ft - ft0) / h
        return jac

    # -- reduced orbit stepping ---------------------------------------------------
    def step_reduced(self, v, t, offsets):
        """One step of the quotient dynamics plus exact integer height bookkeeping."""
        fv, ft = self.evaluate(v, t)
        gain = np.floor(ft).astype(np.int64)
        new_t = ft - gain
        new_v = np.empty_like(fv)
        for g in np.unique(gain):
            idx = np.where(gain == g)[0]
            an = np.array(self.frame.apow(int(g)), dtype=float)
            new_v[idx] = (fv[idx] @ an.T) % 1.0
        return new_v, new_t, offsets + gain

    # -- derivative cocycle in the (s, c, u) sol frame -----------------------------
    def derivative_scu(self, v, t, h: float = 1e-6):
        """Central-difference derivative in sol-orthonormal frames, (n, 3, 3).

        Frame order (s, c, u): column j is the image of the unit sol frame
        vector j at the base point, expressed in the frame at the image.
        """
        v = np.atleast_2d(np.asarray(v, float))
        t = np.atleast_1d(np.asarray(t, float))
        n = len(v)
        lam = self.lam
        e_u = np.array(self.frame.frame.e_u)
        e_s = np.array(self.frame.frame.e_s)
        lam_t = lam ** t
        dirs_v = np.empty((3, n, 2))
        dirs_t = np.zeros((3, n))
        dirs_v[0] = e_s[None, :] * lam_t[:, None]          # unit s at height t
        dirs_v[1] = 0.0
        dirs_t[1] = 1.0                                     # flow direction
        dirs_v[2] = e_u[None, :] * (1.0 / lam_t)[:, None]   # unit u
        # single batched evaluation: base plus all forward/backward probes
        batch_v = np.concatenate([v] + [v + s * h * dirs_v[j] for j in range(3) for s in (1, -1)])
        batch_t = np.concatenate([t] + [t + s * h * dirs_t[j] for j in range(3) for s in (1, -1)])
        fv, ft = self.evaluate(batch_v, batch_t)
        lam_tf = lam ** ft[:n]
        out = np.empty((n, 3, 3))
        for j in range(3):
            sl_p = slice((1 + 2 * j) * n, (2 + 2 * j) * n)
            sl_m = slice((2 + 2 * j) * n, (3 + 2 * j) * n)
            dvec = (fv[sl_p] - fv[sl_m]) / (2 * h)
            dtv = (ft[sl_p] - ft[sl_m]) / (2 * h)
            us = self.frame.to_uv_arr(dvec)
            out[:, 0, j] = us[:, 1] / lam_tf          # s component of image
            out[:, 1, j] = dtv                         # c component
            out[:, 2, j] = us[:, 0] * lam_tf           # u component
        return out

    def lipschitz_report(self):
        if self.pert is None:
            return 0.0
        return self.pert.lipschitz_report()


def evaluate_map(pmap: PerturbedMap, p: CoverPoint) -> CoverPoint:
    """Map a single cover point; exact affine when eps = 0."""
    if pmap.pert is None:
        q = pmap.model.apply(p)
        return CoverPoint(q.v, q.t + pmap.k)
    return pmap.evaluate_point(p)


# ---------------------------------------------------------------------------
# Lyapunov exponents


@dataclass(frozen=True)
class LyapunovResult:
    exponents: tuple
    standard_errors: tuple
    n_steps: int

    def to_json(self) -> dict:
        return {
            "exponents": list(self.exponents),
            "standard_errors": list(self.standard_errors),
            "n_steps": self.n_steps,
        }


def lyapunov_exponents(pmap: PerturbedMap, p0: CoverPoint, n_steps: int,
                       n_windows: int = 10) -> LyapunovResult:
    """QR-reorthonormalized exponents of the sol-frame derivative cocycle.

    The orbit is tracked in reduced coordinates, so arbitrarily long runs
    stay well-conditioned; exponents are averages of log R diagonals with a
    windowed standard error.
    """
    if n_steps < 100:
        raise ValidationError("lyapunov_exponents needs at least 100 steps")
    v = np.array([[float(p0.v[0]) % 1.0, float(p0.v[1]) % 1.0]])
    t = np.array([float(p0.t) % 1.0])
    offsets = np.zeros(1, dtype=np.int64)
    # leading QR column must track the most expanding direction; start in
    # descending (u, c, s) order and let a short warmup align the frame
    q = np.eye(3)[:, ::-1]
    warmup = min(100, n_steps // 10)
    for _ in range(warmup):
        d = pmap.derivative_scu(v, t)[0]
        q, _ = np.linalg.qr(d @ q)
        v, t, offsets = pmap.step_reduced(v, t, offsets)
    t_start = float(t[0]) + float(offsets[0])
    sums = np.zeros(3)
    window_sums = []
    acc = np.zeros(3)
    window = max(1, n_steps // n_windows)
    for step in range(1, n_steps + 1):
        d = pmap.derivative_scu(v, t)[0]
        q, r = np.linalg.qr(d @ q)
        logs = np.log(np.abs(np.diag(r)))
        sums += logs
        acc += logs
        if step % window == 0:
            window_sums.append(acc / window)
            acc = np.zeros(3)
        v, t, offsets = pmap.step_reduced(v, t, offsets)
        if abs(float(t[0]) + float(offsets[0]) - t_start - step * pmap.k) > 1.0 + pmap.eps * step:
            raise ValidationError("orbit height runaway: map is not equivariant")
    order = np.argsort(sums)
    exps = (sums / n_steps)[order]
    if len(window_sums) > 1:
        ws = np.array(window_sums)[:, order]
        se = ws.std(axis=0, ddof=1) / math.sqrt(len(ws))
    else:
        se = np.zeros(3)
    return LyapunovResult(tuple(float(x) for x in exps),
                          tuple(float(x) for x in se), n_steps)


# ---------------------------------------------------------------------------
# sampled cocycle over a fundamental-domain grid


def sampled_cocycle_from_map(pmap: PerturbedMap, mesh: float = 1.0 / 16.0) -> SampledCocycle:
    """Derivative cocycle sampled on a fundamental-domain grid.

    The step map sends each node to the grid node nearest the reduced image,
    matching the grid-index dynamics the cone certifier consumes.
    """
    n_axis = max(2, int(round(1.0 / mesh)))
    xs = np.arange(n_axis) / n_axis
    v1, v2, tt = np.meshgrid(xs, xs, xs, indexing="ij")
    pts = np.stack([v1.ravel(), v2.ravel(), tt.ravel()], axis=1)
    v = pts[:, :2].copy()
    t = pts[:, 2].copy()
    mats = pmap.derivative_scu(v, t)
    fv, ft, _ = pmap.step_reduced(v, t, np.zeros(len(v), dtype=np.int64))
    iv1 = np.rint(fv[:, 0] * n_axis).astype(int) % n_axis
    iv2 = np.rint(fv[:, 1] * n_axis).astype(int) % n_axis
    it = np.rint(ft * n_axis).astype(int) % n_axis
    step = (iv1 * n_axis + iv2) * n_axis + it
    return SampledCocycle(points=pts, matrices=mats, step=step, mesh=1.0 / n_axis)
