"""Conformal normalisation maps onto the unit disk and onto round annuli.

A conformal map g of a simply connected domain onto the disk with
``g(c) = 0`` can be written ``g(z) = (z - c) exp(H(z))`` with H analytic, so
``Re H = -log|z - c|`` on the boundary.  The same form with H a Laurent
series in the hole centre describes maps of doubly connected domains onto
``r* < |w| < 1``, where ``Re H`` takes the values ``-log|z - c|`` on the
outer and ``log r* - log|z - c|`` on the inner boundary.  Both are linear
least-squares problems; the bases are orthogonalised on the boundary samples
by Arnoldi iteration so that high degrees stay well conditioned.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CompositionError, TopologyError, UnsupportedError, ValidationError
from .geometry import TWO_PI, CurveAnnulus, StarlikeCurve, make_mask

LOGGER = logging.getLogger(__name__)


def _arnoldi(Z, degree):
    """Orthonormal basis of polynomials of degree <= ``degree`` on the samples Z."""
    M = Z.size
    Q = np.empty((M, degree + 1), dtype=complex)
    H = np.zeros((degree + 1, degree), dtype=complex)
    Q[:, 0] = 1.0
    for k in range(degree):
        v = Z * Q[:, k]
        for _ in range(2):
            c = Q[:, : k + 1].conj().T @ v / M
            v = v - Q[:, : k + 1] @ c
            H[: k + 1, k] += c
        H[k + 1, k] = np.linalg.norm(v) / math.sqrt(M)
        Q[:, k + 1] = v / H[k + 1, k]
    return Q, H


def _arnoldi_eval(H, Z):
    degree = H.shape[1]
    W = np.empty((Z.size, degree + 1), dtype=complex)
    W[:, 0] = 1.0
    for k in range(degree):
        v = Z * W[:, k] - W[:, : k + 1] @ H[: k + 1, k]
        W[:, k + 1] = v / H[k + 1, k]
    return W


@dataclass(eq=False)
class _SeriesLog:
    """H(z) as a combination of an Arnoldi polynomial basis in (z - c)/s and,
    for annuli, one in s_in/(z - c)."""

    center: complex
    scale: float
    H_pos: np.ndarray
    coef_pos: np.ndarray
    H_neg: np.ndarray = None
    coef_neg: np.ndarray = None
    scale_in: float = 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        w = (z.ravel() - self.center)
        out = _arnoldi_eval(self.H_pos, w / self.scale) @ self.coef_pos
        if self.H_neg is not None:
            out = out + _arnoldi_eval(self.H_neg, self.scale_in / w)[:, 1:] @ self.coef_neg
        return out.reshape(z.shape)


@dataclass(eq=False)
class DiskMap:
    """Conformal map of a catalog domain onto the unit disk (``r_inner = 0``)
    or onto the round annulus ``r_inner < |w| < 1``.

    ``boundary_params`` and ``boundary_images`` form the boundary
    correspondence table; one block per boundary component, outer first.
    """

    domain: object
    center: complex
    log_series: _SeriesLog
    rotation: complex
    r_inner: float
    boundary_params: list
    boundary_images: list
    boundary_residual: float
    cr_defect: float
    normalization: str
    degree: int
    inverse_seeds: tuple = field(repr=False, default=None)

    @property
    def modulus(self):
        return math.log(1.0 / self.r_inner) / TWO_PI if self.r_inner > 0 else math.inf

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.rotation * (z - self.center) * np.exp(self.log_series(z))

    def derivative(self, z, step=1e-6):
        z = np.asarray(z, dtype=complex)
        return (self(z + step) - self(z - step)) / (2 * step)

    def inverse(self, w, tol=1e-12, maxiter=60):
        """Newton inversion seeded from the nearest tabulated image."""
        w = np.asarray(w, dtype=complex)
        src, img = self.inverse_seeds
        flat = w.ravel()
        idx = np.abs(flat[:, None] - img[None, :]).argmin(axis=1)
        z = src[idx].copy()
        for _ in range(maxiter):
            dz = (self(z) - flat) / self.derivative(z)
            z = z - dz
            if np.all(np.abs(dz) < tol * max(1.0, self.domain_scale)):
                break
        return z.reshape(w.shape)

    @property
    def domain_scale(self):
        return self.log_series.scale

    def table(self):
        """Rows (component, θ, re w, im w) of the boundary correspondence."""
        rows = []
        for k, (t, w) in enumerate(zip(self.boundary_params, self.boundary_images)):
            rows.append(np.column_stack([np.full(t.size, k), t, w.real, w.imag]))
        return np.vstack(rows)

    def to_dict(self):
        return {"kind": "annulus" if self.r_inner > 0 else "disk", "r_inner": self.r_inner,
                "modulus": self.modulus, "boundary_residual": self.boundary_residual,
                "cr_defect": self.cr_defect, "normalization": self.normalization,
                "degree": self.degree}


def _check_oriented(images):
    """Boundary images must wind once, monotonically, in the positive sense."""
    steps = np.angle(np.roll(images, -1) / images)
    return bool(np.all(steps > 0) and abs(steps.sum() - TWO_PI) < 1e-6)


def cr_defect(func, z, step=1e-5):
    """Relative L² size of the z-bar derivative of ``func`` at the points z."""
    z = np.asarray(z, dtype=complex)
    fx = (func(z + step) - func(z - step)) / (2 * step)
    fy = (func(z + 1j * step) - func(z - 1j * step)) / (2 * step)
    dz, dzb = 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)
    return float(np.sqrt(np.mean(np.abs(dzb) ** 2) / np.mean(np.abs(dz) ** 2)))


def _interior_samples(mask, count=400, rng_seed=0):
    pts = mask.grid.points()[mask.inside]
    rng = np.random.default_rng(rng_seed)
    pick = rng.choice(pts.size, size=min(count, pts.size), replace=False)
    jitter = 0.25 * mask.grid.spacing * (rng.random(pick.size) - 0.5 + 1j * (rng.random(pick.size) - 0.5))
    z = pts[pick] + jitter
    lvl = mask.descriptor.level(z)
    return z[lvl < -2 * mask.grid.spacing]


def _fit(domain, center, degree, samples, annulus):
    comps = domain.boundary(samples)
    outer = comps[0]
    scale = float(np.abs(outer - center).max())
    allpts = np.concatenate(comps)
    Qp, Hp = _arnoldi((allpts - center) / scale, degree)
    blocks = [Qp]
    Hn = None
    scale_in = 1.0
    if annulus:
        inner = comps[1]
        scale_in = float(np.abs(inner - center).min())
        Qn, Hn = _arnoldi(scale_in / (allpts - center), degree)
        blocks.append(Qn[:, 1:])
    B = np.hstack(blocks)
    cols = [B.real, -B.imag]
    rhs = -np.log(np.abs(allpts - center))
    if annulus:
        ind = np.zeros(allpts.size)
        ind[outer.size:] = 1.0
        cols.append(-ind[:, None])
    A = np.hstack(cols)
    sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    nb = B.shape[1]
    coef = sol[:nb] + 1j * sol[nb:2 * nb]
    log_r = float(sol[-1]) if annulus else 0.0
    series = _SeriesLog(center, scale, Hp, coef[: degree + 1],
                        Hn, coef[degree + 1:] if annulus else None, scale_in)
    return series, log_r, comps


def _boundary_error(series, center, domain, log_r, samples):
    comps = domain.boundary(samples)
    err = 0.0
    for k, pts in enumerate(comps):
        target = log_r if k == 1 else 0.0
        val = np.log(np.abs(pts - center)) + series(pts).real
        err = max(err, float(np.abs(val - target).max()))
    return err


def _build(mask, annulus, degree, samples):
    domain = mask.descriptor
    if annulus:
        center = complex(getattr(domain, "center", domain.anchor))
    else:
        center = complex(domain.anchor)
    degrees = [degree] if degree else [16, 32, 64, 128]
    best = None
    for d in degrees:
        m = samples or max(8 * d, 512)
        series, log_r, comps = _fit(domain, center, d, m, annulus)
        # residual measured on an independent, offset sample set
        err = _boundary_error(series, center, domain, log_r, 2 * m + 7)
        LOGGER.debug("series degree %d: boundary residual %.2e", d, err)
        if best is None or err < best[0]:
            best = (err, d, series, log_r)
        if err < 1e-10:
            break
    err, d, series, log_r = best
    return domain, center, series, log_r, err, d


def _finish(mask, domain, center, series, log_r, err, degree, annulus):
    b = complex(domain.anchor) + float(domain.extent)
    gb = (b - center) * np.exp(series(np.array([b]))[0])
    rotation = abs(gb) / gb
    params, images = [], []
    for pts in domain.boundary(1024):
        w = rotation * (pts - center) * np.exp(series(pts))
        params.append(np.angle(pts - center) % TWO_PI)
        images.append(w)
    if not _check_oriented(images[0]) or (annulus and not _check_oriented(images[1])):
        raise ValidationError("boundary correspondence is not injective and positively oriented")
    g = DiskMap(domain, center, series, rotation, math.exp(log_r) if annulus else 0.0,
                params, images, err, 0.0,
                "g(anchor)=0, g(anchor+extent)=1" if not annulus else "g(outer point on +x)>0",
                degree)
    z = _interior_samples(mask)
    g.cr_defect = cr_defect(g, z)
    src = mask.grid.points()[mask.inside]
    g.inverse_seeds = (src, g(src))
    return g


def riemann_map(mask, degree=None, samples=None):
    """Conformal map of a simply connected Jordan domain onto the unit disk,
    normalised by ``g(anchor) = 0`` and ``g(anchor + extent) = 1``."""
    domain = mask.descriptor
    if getattr(domain, "connectivity", 1) != 1:
        raise TopologyError(f"{domain.kind} is not simply connected; use annulus_map")
    if domain.kind == "slit_disk":
        raise UnsupportedError("slit disk boundary is not a Jordan curve; use the explicit map in primeends")
    parts = _build(mask, False, degree, samples)
    g = _finish(mask, *parts, annulus=False)
    LOGGER.info("riemann map of %s: degree %d, boundary residual %.2e, CR defect %.2e",
                domain.kind, g.degree, g.boundary_residual, g.cr_defect)
    return g


def annulus_map(mask, degree=None, samples=None):
    """Conformal map of a doubly connected domain onto ``r* < |w| < 1``.

    The conformal modulus is ``log(1/r*) / 2π`` (``DiskMap.modulus``).
    """
    domain = mask.descriptor
    if getattr(domain, "connectivity", 1) != 2:
        raise TopologyError(f"{domain.kind} is not doubly connected")
    parts = _build(mask, True, degree, samples)
    g = _finish(mask, *parts, annulus=True)
    LOGGER.info("annulus map of %s: r*=%.6f, boundary residual %.2e", domain.kind,
                g.r_inner, g.boundary_residual)
    return g


@dataclass(eq=False)
class ComposedMap:
    """g = R ∘ f for a normalised Beltrami solution f and a conformal map R."""

    solution: object
    mapper: DiskMap
    values: np.ndarray
    boundary_params: list
    boundary_images: list

    def __call__(self, z):
        return self.mapper(self.solution(z))

    def table(self):
        rows = []
        for k, (t, w) in enumerate(zip(self.boundary_params, self.boundary_images)):
            rows.append(np.column_stack([np.full(t.size, k), t, w.real, w.imag]))
        return np.vstack(rows)


def image_domain(sol, samples=1024):
    """Starlike description of f(D) for a solution on a disk-like or annular domain."""
    domain = sol.f.mask.descriptor
    comps = domain.boundary(samples)
    try:
        if domain.connectivity == 1:
            c = complex(sol(np.array([complex(domain.anchor)]))[0])
            return StarlikeCurve.from_points(c, sol(comps[0]))
        hole = complex(getattr(domain, "center", domain.anchor))
        c = complex(sol(np.array([hole]))[0])
        return CurveAnnulus(StarlikeCurve.from_points(c, sol(comps[0])),
                            StarlikeCurve.from_points(c, sol(comps[1])))
    except ValidationError as exc:
        raise CompositionError(f"image domain is not starlike: {exc}") from exc


def compose_normalized(sol, mapper=None, n=None):
    """Compose a normalised Beltrami solution with a conformal map of its image.

    Without ``mapper`` the image f(D) is described by its boundary curve and
    mapped with :func:`riemann_map` or :func:`annulus_map`.
    """
    mask = sol.f.mask
    n = n or mask.grid.n
    if mapper is None:
        img = image_domain(sol)
        img_mask = make_mask(img, n)
        mapper = riemann_map(img_mask) if img.connectivity == 1 else annulus_map(img_mask)
    vals = sol.f.values[mask.inside]
    img_dom = mapper.domain
    x0, x1, y0, y1 = img_dom.bbox()
    cell = max(x1 - x0, y1 - y0) / n
    out = img_dom.level(vals) > 2 * cell
    if np.any(out):
        raise CompositionError(f"{int(out.sum())} image points lie outside the mapper's domain")
    values = np.full(mask.inside.shape, np.nan + 0j)
    values[mask.inside] = mapper(vals)
    params, images = [], []
    for pts in mask.descriptor.boundary(1024):
        params.append(np.angle(pts - mask.descriptor.anchor) % TWO_PI)
        images.append(mapper(sol(pts)))
    return ComposedMap(sol, mapper, values, params, images)
