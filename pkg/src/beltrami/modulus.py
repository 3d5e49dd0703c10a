"""Condenser capacity on a cell grid and the ring modulus inequality.

The modulus of the family of curves joining two plates E, F inside D is
computed as the capacity of the condenser (E, F; D): the minimal Dirichlet
energy of a potential equal to 0 on E and 1 on F with a reflecting condition
on the rest of the boundary of D.

Discretisation: unknowns live at cell centers in the closure of D outside the
plates; the energy is the 5-point edge sum ``Σ c_e (u_i - u_j)²``.  An edge
from an unknown cell into a plate carries the plate value at the fractional
position where the plate's level function changes sign (conductance
``1/θ``), which keeps curved plates second-order accurate.  Edges leaving D
elsewhere are dropped (reflecting boundary).
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import pyamg
import scipy.sparse as sp
from scipy import ndimage

from .criteria import circle_norm
from .errors import GeometryError, PreconditionError, SolverError, ValidationError
from .geometry import Complement, Disk, GridSpec, MappedShape, Rectangle, Segment

LOGGER = logging.getLogger(__name__)

THETA_MIN = 0.01


@dataclass(frozen=True, eq=False)
class CondenserSpec:
    """Plates E, F (shapes with a level function) inside an optional domain D."""

    grid: GridSpec
    E: object
    F: object
    domain: object = None

    def cells(self):
        """Cell classes: 0 unknown, 1 plate E, 2 plate F, -1 outside D."""
        pts = self.grid.points()
        lE = np.asarray(self.E.level(pts), dtype=float)
        lF = np.asarray(self.F.level(pts), dtype=float)
        inE, inF = lE <= 0, lF <= 0
        if np.any(inE & inF):
            raise ValidationError("plates E and F overlap")
        if not inE.any() or not inF.any():
            raise ValidationError("each plate must contain at least one cell center")
        cls = np.zeros(pts.shape, dtype=np.int8)
        if self.domain is not None:
            cls[np.asarray(self.domain.level(pts)) > 0] = -1
        cls[inE] = 1
        cls[inF] = 2
        return cls, lE, lF

    def check_separation(self, cls, cells=2):
        grown = ndimage.binary_dilation(cls == 1, structure=np.ones((3, 3), bool), iterations=cells)
        if np.any(grown & (cls == 2)):
            raise ValidationError(f"plates are closer than {cells} cells")


@dataclass
class CapacityResult:
    value: float
    residual: float
    n: int
    iterations: int
    spacing: float
    potential: np.ndarray | None = None
    error_estimate: float | None = None

    def to_dict(self):
        d = {"value": self.value, "residual": self.residual, "n": self.n,
             "iterations": self.iterations, "spacing": self.spacing}
        if self.error_estimate is not None:
            d["error_estimate"] = self.error_estimate
        return d


def _plate_key(shape):
    try:
        return json.dumps(shape.to_dict(), sort_keys=True)
    except Exception:  # shapes without a serialisable form keep their given order
        return ""


def _assemble(cls, lE, lF):
    n = cls.shape[0]
    idx = -np.ones(cls.shape, dtype=np.int64)
    unknown = cls == 0
    idx[unknown] = np.arange(int(unknown.sum()))
    m = int(unknown.sum())
    rows, cols, vals = [], [], []
    diag = np.zeros(m)
    rhs = np.zeros(m)
    dirichlet = []  # (unknown index, conductance, plate value)

    def edges(a_sl, b_sl):
        ca, cb = cls[a_sl], cls[b_sl]
        ia, ib = idx[a_sl], idx[b_sl]
        la_E, lb_E = lE[a_sl], lE[b_sl]
        la_F, lb_F = lF[a_sl], lF[b_sl]
        both = (ca == 0) & (cb == 0)
        i, j = ia[both], ib[both]
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([-np.ones(i.size), -np.ones(i.size)])
        np.add.at(diag, i, 1.0)
        np.add.at(diag, j, 1.0)
        for u_cls, p_cls, u_idx, lu, lp, value in (
                (ca, cb, ia, la_E, lb_E, 0.0), (cb, ca, ib, lb_E, la_E, 0.0),
                (ca, cb, ia, la_F, lb_F, 1.0), (cb, ca, ib, lb_F, la_F, 1.0)):
            plate = 1 if value == 0.0 else 2
            sel = (u_cls == 0) & (p_cls == plate)
            if not sel.any():
                continue
            theta = lu[sel] / (lu[sel] - lp[sel])
            c = 1.0 / np.maximum(theta, THETA_MIN)
            k = u_idx[sel]
            np.add.at(diag, k, c)
            np.add.at(rhs, k, c * value)
            dirichlet.append((k, c, value))

    edges((slice(None), slice(0, n - 1)), (slice(None), slice(1, n)))
    edges((slice(0, n - 1), slice(None)), (slice(1, n), slice(None)))
    rows.append(np.arange(m))
    cols.append(np.arange(m))
    vals.append(diag)
    A = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(m, m))
    return A, rhs, idx, dirichlet


def _energy(u, cls, idx, dirichlet, n):
    full = np.zeros(cls.shape)
    full[cls == 0] = u
    e = 0.0
    for a, b in (((slice(None), slice(0, n - 1)), (slice(None), slice(1, n))),
                 ((slice(0, n - 1), slice(None)), (slice(1, n), slice(None)))):
        both = (cls[a] == 0) & (cls[b] == 0)
        d = (full[a] - full[b])[both]
        e += float(np.dot(d, d))
    for k, c, value in dirichlet:
        d = u[k] - value
        e += float(np.dot(c, d * d))
    return e


def condenser_capacity(spec, tol=1e-10, maxiter=500, keep_potential=False, estimate_error=False):
    """Capacity of the condenser (E, F; D) on ``spec.grid``."""
    swapped = _plate_key(spec.E) > _plate_key(spec.F)
    work = CondenserSpec(spec.grid, spec.F, spec.E, spec.domain) if swapped else spec
    cls, lE, lF = work.cells()
    work.check_separation(cls)
    A, b, idx, dirichlet = _assemble(cls, lE, lF)
    if A.shape[0] == 0:
        raise GeometryError("no free cells between the plates")
    if not np.any(b):
        raise GeometryError("plate F is not adjacent to any free cell")
    # local weighting avoids the randomised spectral-radius estimate, keeping runs reproducible
    ml = pyamg.smoothed_aggregation_solver(A, symmetry="symmetric", max_coarse=200,
                                           smooth=("jacobi", {"omega": 4.0 / 3.0, "weighting": "local"}))
    res = []
    u = ml.solve(b, tol=tol, accel="cg", maxiter=maxiter, residuals=res)
    rel = float(np.linalg.norm(b - A @ u) / np.linalg.norm(b))
    if not np.isfinite(rel) or rel > max(100 * tol, 1e-8):
        raise SolverError(f"capacity solve stalled at relative residual {rel:.3e}", residual=rel)
    value = _energy(u, cls, idx, dirichlet, cls.shape[0])
    potential = None
    if keep_potential:
        potential = np.full(cls.shape, np.nan)
        potential[cls == 0] = 1.0 - u if swapped else u
        potential[cls == 1] = 1.0 if swapped else 0.0
        potential[cls == 2] = 0.0 if swapped else 1.0
    err = None
    if estimate_error:
        coarse = CondenserSpec(GridSpec(spec.grid.center, spec.grid.half_width, spec.grid.n // 2),
                               spec.E, spec.F, spec.domain)
        err = abs(value - condenser_capacity(coarse, tol, maxiter).value)
    LOGGER.debug("capacity %.6g (n=%d, %d iterations, residual %.2e)", value, spec.grid.n, len(res), rel)
    return CapacityResult(value, rel, spec.grid.n, len(res), spec.grid.spacing, potential, err)


def fitted_grid(bbox, n, pad=0.05):
    x0, x1, y0, y1 = bbox
    half = 0.5 * max(x1 - x0, y1 - y0) * (1.0 + pad)
    return GridSpec(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), half, int(n))


# ---------------------------------------------------------------- plane minorant

@dataclass
class MinorantResult:
    holds: bool
    capacity: float
    bound: float
    margin: float
    discretization: float

    def to_dict(self):
        return dict(holds=self.holds, capacity=self.capacity, bound=self.bound,
                    margin=self.margin, discretization=self.discretization)


def _meets_circles(shape, z0, r, R, samples=720, count=24):
    t = 2 * np.pi * np.arange(samples) / samples
    slack = 2 * np.pi / samples
    for rho in np.exp(np.linspace(math.log(r), math.log(R), count + 2)[1:-1]):
        if not np.any(shape.level(z0 + rho * np.exp(1j * t)) <= slack * rho):
            return False
    return True


def plane_minorant_check(E, F, r, R, z0=0j, n=512, box=4.0):
    """Check capacity(E, F) >= (2/π) log(R/r) for plates meeting every circle S(z0, ρ), r < ρ < R.

    The capacity is computed in the square of half width ``box·R`` with a
    reflecting outer boundary, which can only lower the plane value, so a
    passing check is conservative.  The discretisation term is the change
    between grids n/2 and n.
    """
    if not 0 < r < R:
        raise ValidationError("need 0 < r < R")
    if not (_meets_circles(E, z0, r, R) and _meets_circles(F, z0, r, R)):
        raise PreconditionError("plates do not meet every circle S(z0, rho), r < rho < R")
    values = []
    for m in (n // 2, n):
        grid = GridSpec(complex(z0), box * R, m)
        values.append(condenser_capacity(
            CondenserSpec(grid, _resolve(E, grid.spacing), _resolve(F, grid.spacing))).value)
    disc = abs(values[1] - values[0])
    bound = 2.0 / math.pi * math.log(R / r)
    margin = values[1] - bound - disc
    return MinorantResult(bool(margin >= 0), values[1], bound, margin, disc)


def _resolve(shape, spacing):
    """Thicken zero-width segments to 3/4 of a cell so the grid sees them."""
    if isinstance(shape, Segment) and shape.thickness < 0.75 * spacing:
        return Segment(shape.a, shape.b, 0.75 * spacing)
    return shape


def radial_segments(r, R, z0=0j):
    """The plates [z0 + r, z0 + R] and [z0 - R, z0 - r]."""
    z0 = complex(z0)
    return Segment(z0 + r, z0 + R), Segment(z0 - R, z0 - r)


# ---------------------------------------------------------------- ring inequality

@dataclass(frozen=True)
class PlaneMap:
    """A homeomorphism given by vectorised forward and inverse callables."""

    forward: object
    inverse: object
    name: str = "map"

    def __call__(self, z):
        return self.forward(np.asarray(z, dtype=complex))


def identity_map():
    return PlaneMap(lambda z: z, lambda w: w, "identity")


def mobius_map(a):
    """Disk automorphism z -> (z - a)/(1 - conj(a) z)."""
    a = complex(a)
    if abs(a) >= 1:
        raise ValidationError("Möbius parameter must lie in the unit disk")
    return PlaneMap(lambda z: (z - a) / (1 - np.conj(a) * z),
                    lambda w: (w + a) / (1 + np.conj(a) * w), f"mobius({a})")


def radial_stretch_map(K, z0=0j):
    """z0 + (z - z0)|z - z0|^(K-1) and its inverse."""
    def fwd(z):
        w = z - z0
        return z0 + w * np.abs(w) ** (K - 1.0)

    def inv(w):
        v = w - z0
        return z0 + v * np.abs(v) ** (1.0 / K - 1.0)

    return PlaneMap(fwd, inv, f"radial_stretch({K})")


@dataclass
class RingCheck:
    holds: bool
    lhs: float
    rhs: float
    slack: float
    tol_geom: float
    n: int

    def to_dict(self):
        return dict(holds=self.holds, lhs=self.lhs, rhs=self.rhs, slack=self.slack,
                    tol_geom=self.tol_geom, n=self.n)


def ring_inequality_check(fmap, z0, r1, r2, Q, domain=None, n=512, tol_geom=0.05, nodes_per_decade=48):
    """Compare M(f(S1), f(S2); f(D)) with (∫_{r1}^{r2} dr/||Q||(z0, r))^-1.

    The image condenser uses filled plates f(D ∩ B̄(z0, r1)) and
    f(D \\ B(z0, r2)), computed on a fresh grid fitted to the image of the
    closed disk B̄(z0, 1.15 r2).
    """
    z0 = complex(z0)
    if not 0 < r1 < r2:
        raise ValidationError("need 0 < r1 < r2")
    t = np.linspace(0, 2 * np.pi, 1024, endpoint=False)
    probe = z0 + 1.15 * r2 * np.exp(1j * t)
    img = fmap(probe)
    if not np.all(np.isfinite(img)):
        raise GeometryError("map is not finite near the outer circle")
    grid = fitted_grid((img.real.min(), img.real.max(), img.imag.min(), img.imag.max()), n, pad=0.02)
    inner = MappedShape(Disk(z0, r1), fmap.inverse, "f(B1)")
    outer = MappedShape(Complement(Disk(z0, r2)), fmap.inverse, "f(C\\B2)")
    image_domain = MappedShape(domain, fmap.inverse, "f(D)") if domain is not None else None
    try:
        cap = condenser_capacity(CondenserSpec(grid, inner, outer, image_domain))
    except ValidationError as exc:
        raise GeometryError(f"image plates degenerate on the grid: {exc}") from None
    m = max(16, int(math.ceil(math.log10(r2 / r1) * nodes_per_decade)))
    radii = r2 * (r1 / r2) ** (np.arange(m + 1) / m)
    norm = circle_norm(Q, z0, radii, domain)
    from scipy.integrate import simpson

    g = np.where(norm.values > 0, radii / np.maximum(norm.values, 1e-300), np.inf)
    integral = float(simpson(g, x=np.log(r2 / radii)))
    rhs = 0.0 if math.isinf(integral) else 1.0 / integral
    lhs = cap.value
    holds = lhs <= rhs * (1.0 + tol_geom)
    slack = (rhs - lhs) / rhs if rhs > 0 else -math.inf
    return RingCheck(bool(holds), lhs, rhs, slack, tol_geom, n)


def hole_condenser(domain, n=512, pad=0.1):
    """Condenser of a doubly connected catalog domain: hole against exterior.

    Its capacity equals 2π / log(1/r*) for the conformal annulus
    {r* < |w| < 1} of the domain.
    """
    c = complex(domain.center)
    if domain.kind == "annulus":
        E, F = Disk(c, domain.inner), Complement(Disk(c, domain.outer))
    elif domain.kind == "square_frame":
        E = Rectangle(c, domain.inner, domain.inner)
        F = Complement(Rectangle(c, domain.outer, domain.outer))
    else:
        raise ValidationError(f"no hole condenser for domain kind {domain.kind!r}")
    return CondenserSpec(GridSpec(c, domain.outer * (1.0 + pad), n), E, F)
