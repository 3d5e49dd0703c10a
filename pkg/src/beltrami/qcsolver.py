"""Principal solutions of the Beltrami equation f_zbar = mu f_z.

The default solver works on a polar grid about the domain's anchor.  With
``h = f_zbar`` the principal solution is ``f = z + T h`` where T is the Cauchy
transform, and h solves the fixed point ``h = mu (1 + S h)`` with S the
Beurling transform.  Expanding ``h = Σ h_n(r) e^{inθ}``, both transforms act
mode by mode through the radial integrals

    A_n(r) = ∫_0^r h_n(ρ) (ρ/r)^{1-n} dρ      (n <= 0)
    B_n(r) = ∫_r^R h_n(ρ) (r/ρ)^{n-1} dρ      (n >= 1)

with ``(T h)_{n-1} = 2 A_n`` or ``-2 B_n`` and
``(S h)_{n-2} = h_n + 2(n-1) A_n / r`` or ``h_n - 2(n-1) B_n / r``.  The
radial integrals are evaluated by product integration with h linear on each
radial panel, so modes that are linear in r (constant and radial-stretch
coefficients) are transformed exactly.

``method="fft"`` selects a Cartesian periodic spectral solver (zero padding
factor 2) that handles any mask but converges only at first order across
discontinuities of mu.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RegularGridInterpolator

from .coefficients import Sampled, _evaluate
from .errors import SolverError, ValidationError
from .geometry import ComplexField

LOGGER = logging.getLogger(__name__)

_GL_S, _GL_W = np.polynomial.legendre.leggauss(32)
_GL_S = 0.5 * (_GL_S + 1.0)
_GL_W = 0.5 * _GL_W


def _panel_weights_A(a, p):
    """∫_0^1 (1-s, s) · x^p ds with x = a + (1-a)s, for arrays a (panels) and p (modes)."""
    a = np.broadcast_to(a, np.broadcast(a, p).shape).astype(float)
    p = np.broadcast_to(p, a.shape).astype(float)
    w0 = np.empty(a.shape)
    w1 = np.empty(a.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = p * -np.log(np.where(a > 0, a, 1e-300))
    closed = expo >= 2.0
    if closed.any():
        aa, pp = a[closed], p[closed]
        la = np.log(np.where(aa > 0, aa, 1e-300))
        one_m = 1.0 - aa
        i0 = -np.expm1((pp + 1.0) * la) / ((pp + 1.0) * one_m)
        i0n = -np.expm1((pp + 2.0) * la) / ((pp + 2.0) * one_m)
        i1 = (1.0 - i0n) / ((pp + 1.0) * one_m)
        w0[closed], w1[closed] = i0 - i1, i1
    quad = ~closed
    if quad.any():
        aa, pp = a[quad][:, None], p[quad][:, None]
        x = aa + (1.0 - aa) * _GL_S[None, :]
        v = np.exp(pp * np.log(x))
        w1[quad] = (v * _GL_S * _GL_W).sum(axis=1)
        w0[quad] = (v * (1.0 - _GL_S) * _GL_W).sum(axis=1)
    return w0, w1


def _panel_weights_B(a, q):
    """∫_0^1 (1-s, s) · (a/x)^q ds with x = a + (1-a)s."""
    a = np.broadcast_to(a, np.broadcast(a, q).shape).astype(float)
    q = np.broadcast_to(q, a.shape).astype(float)
    w0 = np.zeros(a.shape)
    w1 = np.zeros(a.shape)
    zero = a == 0
    flat = zero & (q == 0)
    w0[flat], w1[flat] = 0.5, 0.5
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = q * -np.log(np.where(a > 0, a, 1.0))
    closed = ~zero & (expo >= 2.0) & (q >= 3)
    if closed.any():
        aa, qq = a[closed], q[closed]
        la = np.log(aa)
        aq = np.exp(qq * la)
        one_m = 1.0 - aa
        i0 = (aa - aq) / (one_m * (qq - 1.0))
        i1 = ((aa * aa - aq) / (qq - 2.0) - (aa * aa - aq * aa) / (qq - 1.0)) / (one_m * one_m)
        w0[closed], w1[closed] = i0 - i1, i1
    quad = ~zero & ~closed
    if quad.any():
        aa, qq = a[quad][:, None], q[quad][:, None]
        x = aa + (1.0 - aa) * _GL_S[None, :]
        v = np.exp(qq * np.log(aa / x))
        w1[quad] = (v * _GL_S * _GL_W).sum(axis=1)
        w0[quad] = (v * (1.0 - _GL_S) * _GL_W).sum(axis=1)
    return w0, w1


@dataclass(frozen=True, eq=False)
class PolarOperators:
    """Precomputed product-integration weights for the polar transforms."""

    center: complex
    R: float
    J: int
    M: int
    r: np.ndarray = field(init=False)
    theta: np.ndarray = field(init=False)
    modes: np.ndarray = field(init=False)

    def __post_init__(self):
        r = self.R * np.arange(self.J + 1) / self.J
        theta = 2.0 * np.pi * np.arange(self.M) / self.M
        modes = np.fft.fftfreq(self.M, 1.0 / self.M).astype(int)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "modes", modes)
        j = np.arange(self.J)
        a = (j / (j + 1.0))[:, None]
        dr = self.R / self.J
        neg = modes <= 0
        pos = ~neg
        p = (1 - modes[neg]).astype(float)[None, :]
        q = (modes[pos] - 1).astype(float)[None, :]
        wa0, wa1 = _panel_weights_A(a, p)
        wb0, wb1 = _panel_weights_B(a, q)
        with np.errstate(divide="ignore"):
            fa = np.exp(p * np.log(np.where(a > 0, a, 1e-300)))
            fb = np.where(q == 0, 1.0, np.exp(q * np.log(np.where(a > 0, a, 1e-300))))
        object.__setattr__(self, "_neg", neg)
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_A", (fa, dr * wa0, dr * wa1))
        object.__setattr__(self, "_B", (fb, dr * wb0, dr * wb1))

    def points(self):
        return self.center + self.r[:, None] * np.exp(1j * self.theta)[None, :]

    def to_modes(self, v):
        return np.fft.fft(v, axis=1) / self.M

    def from_modes(self, c):
        return np.fft.ifft(c, axis=1) * self.M

    def radial_integrals(self, hm, hr=None):
        """A_n on nonpositive modes and B_n on positive modes, at all radii.

        ``hm`` holds the values approached from larger radii (left ends of the
        radial panels) and ``hr`` those approached from smaller radii (right
        ends), so jumps of h across a node circle are integrated exactly.
        """
        hr = hm if hr is None else hr
        hn, hp = hm[:, self._neg], hm[:, self._pos]
        rn, rp = hr[:, self._neg], hr[:, self._pos]
        fa, wa0, wa1 = self._A
        fb, wb0, wb1 = self._B
        A = np.zeros(hn.shape, dtype=complex)
        for j in range(self.J):
            A[j + 1] = fa[j] * A[j] + wa0[j] * hn[j] + wa1[j] * rn[j + 1]
        B = np.zeros(hp.shape, dtype=complex)
        for j in range(self.J - 1, -1, -1):
            B[j] = fb[j] * B[j + 1] + wb0[j] * hp[j] + wb1[j] * rp[j + 1]
        return A, B

    def _place(self, dst, src, n_src, shift):
        M = self.M
        m = n_src + shift
        ok = (m >= -(M // 2)) & (m <= M // 2 - 1)
        dst[:, np.mod(m[ok], M)] += src[:, ok]

    def _beurling(self, hm, A, B):
        n_neg, n_pos = self.modes[self._neg], self.modes[self._pos]
        r = self.r[:, None]
        safe = np.where(r > 0, r, 1.0)
        S = np.zeros_like(hm)
        s_neg = hm[:, self._neg] + 2.0 * (n_neg - 1) * np.where(r > 0, A / safe, 0.0)
        s_pos = hm[:, self._pos] - 2.0 * (n_pos - 1) * np.where(r > 0, B / safe, 0.0)
        self._place(S, s_neg, n_neg, -2)
        self._place(S, s_pos, n_pos, -2)
        return S

    def transforms(self, hm, hr=None):
        """Mode arrays of T h and S h (same mode layout as ``hm``) and A_n.

        With one-sided values ``hr`` the inner-side S h is returned as a
        fourth item.
        """
        A, B = self.radial_integrals(hm, hr)
        T = np.zeros_like(hm)
        self._place(T, 2.0 * A, self.modes[self._neg], -1)
        self._place(T, -2.0 * B, self.modes[self._pos], -1)
        S = self._beurling(hm, A, B)
        if hr is None:
            return T, S, A
        return T, S, A, self._beurling(hr, A, B)

    def fix_origin(self, hm):
        """Regularise the r = 0 row: only mode 0 survives, extrapolated linearly."""
        hm[0] = 0.0
        hm[0, 0] = 2.0 * hm[1, 0] - hm[2, 0]
        return hm


@dataclass
class QcSolution:
    f: ComplexField
    residual_stats: dict
    jacobian: np.ndarray
    normalization: str
    iterations: int
    history: list
    delta: float
    method: str
    evaluator: object = None
    principal: object = None
    truncated: int = 0

    def __call__(self, z):
        return self.evaluator(z)

    def rows(self):
        pts = self.f.grid.points()
        m = self.f.mask.inside
        return np.column_stack([pts.real[m], pts.imag[m], self.f.values.real[m],
                                self.f.values.imag[m], self.jacobian[m]])

    def to_dict(self):
        return {"normalization": self.normalization, "iterations": self.iterations,
                "delta": self.delta, "method": self.method, "truncated": self.truncated,
                "residual_stats": self.residual_stats,
                "final_fixed_point_residual": self.history[-1] if self.history else 0.0}


def _mu_at(coef, z, domain):
    """mu at points z (zero outside the domain)."""
    z = np.asarray(z, dtype=complex)
    out = np.zeros(z.shape, dtype=complex)
    inside = np.ones(z.shape, dtype=bool) if domain is None else np.asarray(domain.contains(z), dtype=bool)
    if isinstance(coef, Sampled):
        out[inside] = coef.field(z[inside])
        return out
    dom = getattr(coef, "domain", None)
    if dom is not None:
        inside &= np.asarray(dom.contains(z), dtype=bool)
    mu, _ = _evaluate(coef, z[inside])
    out[inside] = mu
    return out


def _truncate(mu, delta):
    a = np.abs(mu)
    cap = 1.0 - delta
    over = a > cap
    if over.any():
        mu = np.where(over, mu / np.where(a > 0, a, 1.0) * cap, mu)
    return mu, int(np.count_nonzero(over))


def _support_radius(domain, center):
    pts = np.concatenate(domain.boundary(2048))
    x0, x1, y0, y1 = domain.bbox()
    corners = np.array([x0 + 1j * y0, x0 + 1j * y1, x1 + 1j * y0, x1 + 1j * y1])
    far = np.abs(np.concatenate([pts, corners]) - center).max()
    return float(np.abs(pts - center).max()) if np.isfinite(far) else far


class _PolarEvaluator:
    """f(z) = z + T h from the mode profiles of T h on the polar grid."""

    def __init__(self, ops, T, A_R):
        self.ops = ops
        Tm = T
        scale = np.abs(Tm).max(initial=0.0)
        keep = np.abs(Tm).max(axis=0) > 1e-15 * max(scale, 1e-300)
        self.keep_modes = ops.modes[keep]
        self.spline = CubicSpline(ops.r, Tm[:, keep], axis=0) if keep.any() else None
        neg = ops.modes <= 0
        self.ext_modes = ops.modes[neg]
        self.ext_coef = 2.0 * A_R
        ext_keep = np.abs(self.ext_coef) > 1e-15 * max(np.abs(self.ext_coef).max(initial=0.0), 1e-300)
        self.ext_modes, self.ext_coef = self.ext_modes[ext_keep], self.ext_coef[ext_keep]

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        shape = z.shape
        zf = z.ravel()
        w = zf - self.ops.center
        r = np.abs(w)
        th = np.angle(w)
        out = zf.copy()
        inside = r <= self.ops.R
        if self.spline is not None and inside.any():
            g = self.spline(r[inside])
            phase = np.exp(1j * np.outer(th[inside], self.keep_modes))
            out[inside] += (g * phase).sum(axis=1)
        outside = ~inside
        if outside.any() and self.ext_modes.size:
            n = self.ext_modes
            R = self.ops.R
            ro = r[outside]
            fac = (R / ro)[:, None] ** (1 - n)[None, :]
            phase = np.exp(1j * np.outer(th[outside], n - 1))
            out[outside] += (fac * self.ext_coef[None, :] * phase).sum(axis=1)
        return out.reshape(shape)


def _normalizer(principal, domain):
    a0 = complex(domain.anchor)
    a1 = a0 + float(domain.extent)
    f0 = complex(principal(np.array([a0]))[0])
    f1 = complex(principal(np.array([a1]))[0])
    if f1 == f0:
        raise SolverError("normalisation points collapse")
    scale = 1.0 / (f1 - f0)

    def evaluator(z):
        return (principal(z) - f0) * scale

    return evaluator


def _solve_polar(coef, domain, n, delta, tol, maxiter):
    # polar grid about the domain's centre when it has one (annuli, frames), else its anchor
    center = complex(getattr(domain, "center", domain.anchor))
    R = _support_radius(domain, center)
    ops = PolarOperators(center, R, max(16, n // 2), 2 * n)
    # one-sided samples: just outside and just inside each node circle
    rel = ops.points() - center
    mu_out = _mu_at(coef, center + rel * (1.0 + 1e-9), domain)
    mu_in = _mu_at(coef, center + rel * (1.0 - 1e-9), domain)
    mu_out[0] = mu_in[0] = 0.0
    mu_out[-1] = 0.0
    mu_out, t_out = _truncate(mu_out, delta)
    mu_in, t_in = _truncate(mu_in, delta)
    truncated = max(t_out, t_in)
    w_area = ops.r[:, None] * np.ones((1, ops.M))
    w_area[0] = 0.0
    w_area[-1] *= 0.5

    def l2(a, b):
        return math.sqrt(0.5 * float((w_area * (np.abs(a) ** 2 + np.abs(b) ** 2)).sum()))

    mu_norm = l2(mu_out, mu_in)
    h_out, h_in = mu_out.copy(), mu_in.copy()
    history = []
    if mu_norm == 0.0:
        T = np.zeros((ops.J + 1, ops.M), dtype=complex)
        A = np.zeros((ops.J + 1, int((ops.modes <= 0).sum())), dtype=complex)
        return ops, T, A[-1], history, truncated

    def step(h_out, h_in):
        hm = ops.fix_origin(ops.to_modes(h_out))
        return ops.transforms(hm, ops.to_modes(h_in))

    increases = 0
    for _ in range(maxiter):
        T, S_out, A, S_in = step(h_out, h_in)
        new_out = mu_out * (1.0 + ops.from_modes(S_out))
        new_in = mu_in * (1.0 + ops.from_modes(S_in))
        new_out[0] = new_in[0] = 0.0
        res = l2(new_out - h_out, new_in - h_in) / mu_norm
        history.append(res)
        h_out, h_in = new_out, new_in
        if len(history) > 1 and res > history[-2]:
            increases += 1
            if increases >= 10:
                raise SolverError(f"fixed-point iteration diverging (residual {res:.3e}); "
                                  "try a larger truncation delta or a finer grid", residual=res)
        else:
            increases = 0
        if res < tol:
            break
    else:
        raise SolverError(f"no convergence in {maxiter} iterations (residual {history[-1]:.3e})",
                          residual=history[-1])
    T, _, A, _ = step(h_out, h_in)
    return ops, T, A[-1], history, truncated


def _solve_fft(coef, mask, delta, tol, maxiter):
    grid = mask.grid
    n = grid.n
    N = 2 * n
    h_sp = grid.spacing
    pts = grid.points()
    mu = np.where(mask.inside, _mu_at(coef, pts, None), 0.0)
    mu, truncated = _truncate(mu, delta)
    kx = np.fft.fftfreq(N, d=h_sp)
    KX, KY = np.meshgrid(kx, kx)
    xi = KX + 1j * KY
    with np.errstate(divide="ignore", invalid="ignore"):
        s_sym = np.where(xi != 0, np.conj(xi) / xi, 0.0)
        t_sym = np.where(xi != 0, 1.0 / (np.pi * 1j * xi), 0.0)

    def pad(v):
        out = np.zeros((N, N), dtype=complex)
        out[:n, :n] = v
        return out

    mu_norm = math.sqrt(float((np.abs(mu) ** 2).sum()))
    h = mu.copy()
    history = []
    if mu_norm > 0:
        increases = 0
        for _ in range(maxiter):
            Sh = np.fft.ifft2(s_sym * np.fft.fft2(pad(h)))[:n, :n]
            h_new = mu * (1.0 + Sh)
            res = math.sqrt(float((np.abs(h_new - h) ** 2).sum())) / mu_norm
            history.append(res)
            h = h_new
            if len(history) > 1 and res > history[-2]:
                increases += 1
                if increases >= 10:
                    raise SolverError("fixed-point iteration diverging", residual=res)
            else:
                increases = 0
            if res < tol:
                break
        else:
            raise SolverError(f"no convergence in {maxiter} iterations", residual=history[-1])
    hp = pad(h)
    mean = hp.mean()
    Th = np.fft.ifft2(t_sym * np.fft.fft2(hp - mean))[:n, :n]
    # the mean of the padded h contributes mean * conj(z) (T of a constant)
    f = pts + Th + mean * np.conj(pts - grid.center)
    ax = grid.axis
    re = RegularGridInterpolator((ax, ax), f.real, bounds_error=False, fill_value=None)
    im = RegularGridInterpolator((ax, ax), f.imag, bounds_error=False, fill_value=None)

    def principal(z):
        z = np.asarray(z, dtype=complex)
        w = z - grid.center
        q = np.stack([w.imag.ravel(), w.real.ravel()], axis=-1)
        return (re(q) + 1j * im(q)).reshape(z.shape)

    return principal, history, truncated


def wirtinger(func, z, step):
    """Central-difference Wirtinger derivatives (f_z, f_zbar) of a vectorised map."""
    z = np.asarray(z, dtype=complex)
    fx = (func(z + step) - func(z - step)) / (2 * step)
    fy = (func(z + 1j * step) - func(z - 1j * step)) / (2 * step)
    return 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)


def _grid_derivatives(values, spacing):
    gy, gx = np.gradient(values, spacing)
    return 0.5 * (gx - 1j * gy), 0.5 * (gx + 1j * gy)


def solve_beltrami(coef, mask, delta=0.01, n=None, method="polar", tol=1e-8, maxiter=2000):
    """Normalised homeomorphic solution of f_zbar = mu f_z on ``mask``.

    mu is truncated to ``|mu| <= 1 - delta`` and set to zero outside the
    mask's domain.  The returned map is the principal solution normalised by
    ``f(anchor) = 0`` and ``f(anchor + extent) = 1`` (``f(0) = 0, f(1) = 1``
    for the unit disk).
    """
    if not 0 < delta <= 0.5:
        raise ValidationError("truncation delta must lie in (0, 0.5]")
    domain = mask.descriptor
    n = mask.grid.n if n is None else int(n)
    if method == "polar":
        ops, T, A_R, history, truncated = _solve_polar(coef, domain, n, delta, tol, maxiter)
        principal = _PolarEvaluator(ops, T, A_R)
    elif method == "fft":
        principal, history, truncated = _solve_fft(coef, mask, delta, tol, maxiter)
    else:
        raise ValidationError("method must be 'polar' or 'fft'")
    evaluator = _normalizer(principal, domain)
    pts = mask.grid.points()
    values = evaluator(pts)
    fz, fzb = _grid_derivatives(values, mask.grid.spacing)
    jac = np.abs(fz) ** 2 - np.abs(fzb) ** 2
    mu = _truncate(_mu_at(coef, pts, domain), delta)[0]
    inside = mask.inside
    interior = inside.copy()
    interior[[0, -1], :] = False
    interior[:, [0, -1]] = False
    for shift in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        interior &= np.roll(inside, shift, axis=(0, 1))
    res = np.abs(fzb - mu * fz)[interior]
    stats = {"l2": float(math.sqrt(np.mean(res ** 2))) if res.size else 0.0,
             "linf": float(res.max()) if res.size else 0.0,
             "fixed_point": history[-1] if history else 0.0}
    LOGGER.info("solved Beltrami equation (%s): %d iterations, grid residual l2=%.2e",
                method, len(history), stats["l2"])
    return QcSolution(ComplexField(mask.grid, values, mask), stats, jac,
                      "f(anchor)=0, f(anchor+extent)=1", len(history), history, delta, method,
                      evaluator, principal, truncated)


@dataclass
class JacobianReport:
    violations: int
    cells: int
    fraction: float
    locations: list

    def to_dict(self):
        return {"violations": self.violations, "cells": self.cells, "fraction": self.fraction,
                "locations": [[z.real, z.imag] for z in self.locations[:50]]}


def jacobian_check(sol):
    """Masked cells where the grid Jacobian of the solution is not positive."""
    inside = sol.f.mask.inside
    bad = inside & ~(sol.jacobian > 0)
    pts = sol.f.grid.points()[bad]
    cells = int(inside.sum())
    return JacobianReport(int(bad.sum()), cells, bad.sum() / max(cells, 1), [complex(p) for p in pts])


@dataclass
class DeltaStudy:
    deltas: list
    differences: list
    solutions: list = field(repr=False, default_factory=list)

    def to_dict(self):
        return {"deltas": self.deltas, "differences": self.differences}


def delta_study(coef, mask, deltas=(0.5, 0.25, 0.125, 0.0625), z0=None, radius=0.1, **kw):
    """Sup-norm changes between solutions for consecutive truncation levels on {|z - z0| > radius}."""
    deltas = sorted(deltas, reverse=True)
    z0 = complex(mask.descriptor.anchor if z0 is None else z0)
    pts = mask.grid.points()
    sel = mask.inside & (np.abs(pts - z0) > radius)
    sols = [solve_beltrami(coef, mask, d, **kw) for d in deltas]
    diffs = [float(np.abs(a.f.values[sel] - b.f.values[sel]).max()) for a, b in zip(sols[:-1], sols[1:])]
    return DeltaStudy(list(deltas), diffs, sols)


def beltrami_residual(func, coef, z, step=1e-5, domain=None):
    """|f_zbar - mu f_z| / |f_z| at points z, by central differences."""
    fz, fzb = wirtinger(func, z, step)
    mu = _mu_at(coef, z, domain)
    return np.abs(fzb - mu * fz) / np.abs(fz)
