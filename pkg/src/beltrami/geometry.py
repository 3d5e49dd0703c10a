"""Grids, catalog domains, masks and sampled fields.

All domains are frozen dataclasses exposing a small common surface:

``contains(z)``
    vectorised membership of the open domain,
``level(z)``
    a continuous function that is negative inside and positive outside,
``bbox()``
    ``(xmin, xmax, ymin, ymax)``,
``boundary(n)``
    list of closed boundary curves (outer first), each sampled at ``n`` points,
``anchor`` / ``extent``
    an interior reference point and the distance from it to the boundary along
    the positive real direction (used by normalisations).

Starlike domains additionally provide ``radial(phi)``, the boundary distance
from ``anchor`` in direction ``phi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.interpolate import CubicSpline

from .errors import DomainError, UnsupportedError, ValidationError

TWO_PI = 2.0 * math.pi


def _as_complex(z):
    return np.asarray(z, dtype=complex)


@dataclass(frozen=True)
class Disk:
    center: complex = 0j
    radius: float = 1.0

    kind = "disk"
    connectivity = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("disk radius must be positive")

    @property
    def anchor(self):
        return complex(self.center)

    @property
    def extent(self):
        return float(self.radius)

    def contains(self, z):
        return np.abs(_as_complex(z) - self.center) < self.radius

    def level(self, z):
        return np.abs(_as_complex(z) - self.center) - self.radius

    def radial(self, phi):
        return np.full(np.shape(phi), float(self.radius))

    def bbox(self):
        c, r = complex(self.center), self.radius
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return [self.center + self.radius * np.exp(1j * t)]

    def to_dict(self):
        return {"kind": "disk", "center": [self.center.real, self.center.imag],
                "radius": self.radius}


@dataclass(frozen=True)
class Annulus:
    center: complex = 0j
    inner: float = 0.5
    outer: float = 1.0

    kind = "annulus"
    connectivity = 2

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValidationError("annulus needs 0 < inner < outer")

    @property
    def anchor(self):
        return complex(self.center) + 0.5 * (self.inner + self.outer)

    @property
    def extent(self):
        return 0.5 * (self.outer - self.inner)

    def contains(self, z):
        d = np.abs(_as_complex(z) - self.center)
        return (d > self.inner) & (d < self.outer)

    def level(self, z):
        d = np.abs(_as_complex(z) - self.center)
        return np.maximum(self.inner - d, d - self.outer)

    def bbox(self):
        c, r = complex(self.center), self.outer
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        e = np.exp(1j * t)
        return [self.center + self.outer * e, self.center + self.inner * e]

    def to_dict(self):
        return {"kind": "annulus", "center": [self.center.real, self.center.imag],
                "inner": self.inner, "outer": self.outer}


@dataclass(frozen=True)
class SlitDisk:
    """Unit disk minus the radial slit ``[x0, x1)`` on the real axis.

    Only slits reaching the circle (``x1 == 1``) are in the catalog, so the
    domain stays simply connected.
    """

    x0: float = 0.0
    x1: float = 1.0

    kind = "slit_disk"
    connectivity = 1

    def __post_init__(self):
        if not 0.0 <= self.x0 < self.x1:
            raise ValidationError("slit needs 0 <= x0 < x1")
        if self.x1 != 1.0:
            raise UnsupportedError("only slits ending on the unit circle (x1 = 1) are supported")

    @property
    def anchor(self):
        return -0.5 + 0j

    @property
    def extent(self):
        return 0.5

    def on_slit(self, z):
        z = _as_complex(z)
        return (z.imag == 0.0) & (z.real >= self.x0) & (z.real < self.x1)

    def contains(self, z):
        z = _as_complex(z)
        return (np.abs(z) < 1.0) & ~self.on_slit(z)

    def level(self, z):
        return np.abs(_as_complex(z)) - 1.0

    def barrier_angles(self, z0, r):
        """Angles at which the circle S(z0, r) crosses the slit."""
        z0 = complex(z0)
        s = -z0.imag / r
        if abs(s) > 1.0:
            return np.empty(0)
        a = math.asin(s)
        out = []
        for t in (a, math.pi - a):
            x = z0.real + r * math.cos(t)
            if self.x0 <= x <= self.x1:
                out.append(t % TWO_PI)
        return np.unique(np.array(out))

    def bbox(self):
        return (-1.0, 1.0, -1.0, 1.0)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return [np.exp(1j * t)]

    def to_dict(self):
        return {"kind": "slit_disk", "x0": self.x0, "x1": self.x1}


@dataclass(frozen=True)
class Rectangle:
    center: complex = 0.5 + 0.5j
    half_width: float = 0.5
    half_height: float = 0.5

    kind = "rectangle"
    connectivity = 1

    def __post_init__(self):
        if not (self.half_width > 0 and self.half_height > 0):
            raise ValidationError("rectangle half sizes must be positive")

    @property
    def anchor(self):
        return complex(self.center)

    @property
    def extent(self):
        return float(self.half_width)

    def level(self, z):
        w = _as_complex(z) - self.center
        return np.maximum(np.abs(w.real) - self.half_width, np.abs(w.imag) - self.half_height)

    def contains(self, z):
        return self.level(z) < 0

    def radial(self, phi):
        c, s = np.abs(np.cos(phi)), np.abs(np.sin(phi))
        with np.errstate(divide="ignore"):
            return np.minimum(self.half_width / c, self.half_height / s)

    def bbox(self):
        c = complex(self.center)
        return (c.real - self.half_width, c.real + self.half_width,
                c.imag - self.half_height, c.imag + self.half_height)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return [self.center + self.radial(t) * np.exp(1j * t)]

    def to_dict(self):
        return {"kind": "rectangle", "center": [self.center.real, self.center.imag],
                "half_width": self.half_width, "half_height": self.half_height}


@dataclass(frozen=True)
class HalfDisk:
    """Upper half of the disk B(center, radius)."""

    center: complex = 0j
    radius: float = 1.0

    kind = "half_disk"
    connectivity = 1

    def __post_init__(self):
        if not self.radius > 0:
            raise ValidationError("half disk radius must be positive")

    @property
    def anchor(self):
        return complex(self.center) + 0.5j * self.radius

    @property
    def extent(self):
        return 0.5 * math.sqrt(3.0) * self.radius

    def level(self, z):
        w = _as_complex(z) - self.center
        return np.maximum(np.abs(w) - self.radius, -w.imag)

    def contains(self, z):
        return self.level(z) < 0

    def bbox(self):
        c, r = complex(self.center), self.radius
        return (c.real - r, c.real + r, c.imag, c.imag + r)

    def boundary(self, n):
        m = n // 2
        t = np.linspace(0.0, math.pi, n - m, endpoint=False)
        x = np.linspace(-1.0, 1.0, m, endpoint=False)
        return [self.center + self.radius * np.concatenate([np.exp(1j * t), x])]

    def to_dict(self):
        return {"kind": "half_disk", "center": [self.center.real, self.center.imag],
                "radius": self.radius}


@dataclass(frozen=True)
class Ellipse:
    center: complex = 0j
    a: float = 1.0
    b: float = 0.6

    kind = "ellipse"
    connectivity = 1

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValidationError("ellipse semi-axes must be positive")

    @property
    def anchor(self):
        return complex(self.center)

    @property
    def extent(self):
        return float(self.a)

    def level(self, z):
        w = _as_complex(z) - self.center
        return np.hypot(w.real / self.a, w.imag / self.b) - 1.0

    def contains(self, z):
        return self.level(z) < 0

    def radial(self, phi):
        return self.a * self.b / np.hypot(self.b * np.cos(phi), self.a * np.sin(phi))

    def bbox(self):
        c = complex(self.center)
        return (c.real - self.a, c.real + self.a, c.imag - self.b, c.imag + self.b)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return [self.center + self.a * np.cos(t) + 1j * self.b * np.sin(t)]

    def to_dict(self):
        return {"kind": "ellipse", "center": [self.center.real, self.center.imag],
                "a": self.a, "b": self.b}


@dataclass(frozen=True)
class SquareFrame:
    """Square of half side ``outer`` minus the concentric square of half side ``inner``."""

    center: complex = 0j
    outer: float = 1.0
    inner: float = 0.5

    kind = "square_frame"
    connectivity = 2

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValidationError("square frame needs 0 < inner < outer")

    @property
    def anchor(self):
        return complex(self.center) + 0.5 * (self.inner + self.outer)

    @property
    def extent(self):
        return 0.5 * (self.outer - self.inner)

    def _sup(self, z):
        w = _as_complex(z) - self.center
        return np.maximum(np.abs(w.real), np.abs(w.imag))

    def contains(self, z):
        d = self._sup(z)
        return (d > self.inner) & (d < self.outer)

    def level(self, z):
        d = self._sup(z)
        return np.maximum(self.inner - d, d - self.outer)

    def bbox(self):
        c, r = complex(self.center), self.outer
        return (c.real - r, c.real + r, c.imag - r, c.imag + r)

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        sq = Rectangle(self.center, 1.0, 1.0)
        unit = sq.radial(t) * np.exp(1j * t)
        return [self.center + self.outer * unit, self.center + self.inner * unit]

    def to_dict(self):
        return {"kind": "square_frame", "center": [self.center.real, self.center.imag],
                "outer": self.outer, "inner": self.inner}


@dataclass(frozen=True, eq=False)
class StarlikeCurve:
    """Domain bounded by a curve starlike about ``center``, given by samples
    of the boundary distance on an angle lattice (periodic cubic spline)."""

    center: complex
    angles: np.ndarray
    radii: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    kind = "starlike"
    connectivity = 1

    def __post_init__(self):
        phi = np.asarray(self.angles, dtype=float)
        rad = np.asarray(self.radii, dtype=float)
        order = np.argsort(phi % TWO_PI)
        phi, rad = phi[order] % TWO_PI, rad[order]
        if np.any(rad <= 0) or np.any(np.diff(phi) <= 0):
            raise ValidationError("starlike curve needs positive radii at distinct angles")
        x = np.concatenate([phi, [phi[0] + TWO_PI]])
        y = np.concatenate([rad, [rad[0]]])
        object.__setattr__(self, "angles", phi)
        object.__setattr__(self, "radii", rad)
        object.__setattr__(self, "_spline", CubicSpline(x, y, bc_type="periodic"))

    @classmethod
    def from_points(cls, center, points):
        """Build from boundary samples; raises if the curve is not starlike."""
        w = _as_complex(points) - center
        phi = np.angle(w) % TWO_PI
        dphi = np.diff(np.unwrap(np.angle(w)))
        if not (np.all(dphi > 0) or np.all(dphi < 0)):
            raise ValidationError("curve is not starlike about the given center")
        return cls(complex(center), phi, np.abs(w))

    @property
    def anchor(self):
        return complex(self.center)

    @property
    def extent(self):
        return float(self.radial(np.array(0.0)))

    def radial(self, phi):
        p = np.asarray(phi, dtype=float)
        x0 = self.angles[0]
        return self._spline((p - x0) % TWO_PI + x0)

    def level(self, z):
        w = _as_complex(z) - self.center
        return np.abs(w) - self.radial(np.angle(w))

    def contains(self, z):
        return self.level(z) < 0

    def bbox(self):
        pts = self.boundary(1024)[0]
        return (pts.real.min(), pts.real.max(), pts.imag.min(), pts.imag.max())

    def boundary(self, n):
        t = np.linspace(0.0, TWO_PI, n, endpoint=False)
        return [self.center + self.radial(t) * np.exp(1j * t)]

    def to_dict(self):
        return {"kind": "starlike", "center": [self.center.real, self.center.imag],
                "angles": self.angles.tolist(), "radii": self.radii.tolist()}


@dataclass(frozen=True, eq=False)
class CurveAnnulus:
    """Doubly connected domain between two starlike curves about a common center."""

    outer: StarlikeCurve
    inner: StarlikeCurve

    kind = "curve_annulus"
    connectivity = 2

    @property
    def center(self):
        return self.outer.center

    @property
    def anchor(self):
        c = self.center
        return c + 0.5 * (self.outer.radial(np.array(0.0)) + self.inner.radial(np.array(0.0)))

    @property
    def extent(self):
        return 0.5 * float(self.outer.radial(np.array(0.0)) - self.inner.radial(np.array(0.0)))

    def level(self, z):
        return np.maximum(-self.inner.level(z), self.outer.level(z))

    def contains(self, z):
        return self.level(z) < 0

    def bbox(self):
        return self.outer.bbox()

    def boundary(self, n):
        return [self.outer.boundary(n)[0], self.inner.boundary(n)[0]]

    def to_dict(self):
        return {"kind": "curve_annulus", "outer": self.outer.to_dict(),
                "inner": self.inner.to_dict()}


DOMAIN_KINDS = {
    "disk": Disk,
    "annulus": Annulus,
    "slit_disk": SlitDisk,
    "rectangle": Rectangle,
    "half_disk": HalfDisk,
    "ellipse": Ellipse,
    "square_frame": SquareFrame,
}


def domain_from_dict(d):
    """Inverse of ``Domain.to_dict`` for catalog domains."""
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in DOMAIN_KINDS:
        raise UnsupportedError(f"unknown domain kind {kind!r}")
    if "center" in d:
        c = d["center"]
        d["center"] = complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c)
    try:
        return DOMAIN_KINDS[kind](**d)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {kind}: {exc}") from None


def circle_arcs(domain, z0, r, n_probe=720):
    """Angular intervals ``(t0, t1)`` of ``S(z0, r) ∩ domain``.

    Returns a list of intervals with ``t0 < t1 <= t0 + 2π``.  A circle lying
    entirely in the domain yields ``[(0, 2π)]``.  Transitions are located by
    bisection on membership, zero-width slits through ``barrier_angles``.
    """
    z0 = complex(z0)
    offset = 0.5 * TWO_PI / n_probe * (math.sqrt(5.0) - 1.0)
    t = offset + TWO_PI * np.arange(n_probe) / n_probe
    inside = np.asarray(domain.contains(z0 + r * np.exp(1j * t)))
    barriers = getattr(domain, "barrier_angles", None)
    cuts = list(barriers(z0, r)) if barriers is not None else []
    if not inside.any():
        return []

    def member(a):
        return bool(domain.contains(z0 + r * np.exp(1j * a)))

    def refine(a, b, a_in):
        for _ in range(60):
            m = 0.5 * (a + b)
            if member(m) == a_in:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    starts, ends = [], []
    for j in range(n_probe):
        k = (j + 1) % n_probe
        if inside[j] != inside[k]:
            a, b = t[j], t[j] + TWO_PI / n_probe
            x = refine(a, b, bool(inside[j]))
            (ends if inside[j] else starts).append(x % TWO_PI)
    if not starts:
        if not cuts:
            return [(0.0, TWO_PI)]
        cuts = sorted(c % TWO_PI for c in cuts)
        arcs = []
        for i, c in enumerate(cuts):
            nxt = cuts[(i + 1) % len(cuts)]
            arcs.append((c, nxt if nxt > c else nxt + TWO_PI))
        return arcs
    starts.sort()
    ends.sort()
    arcs = []
    for s in starts:
        e = min((x if x > s else x + TWO_PI) for x in ends)
        arcs.append((s, e))
    out = []
    for s, e in arcs:
        inner = sorted(((c - s) % TWO_PI) + s for c in cuts if 0 < ((c - s) % TWO_PI) < e - s)
        pts = [s] + inner + [e]
        out.extend((pts[i], pts[i + 1]) for i in range(len(pts) - 1))
    return sorted(out)


@dataclass(frozen=True)
class GridSpec:
    center: complex
    half_width: float
    n: int

    def __post_init__(self):
        n = int(self.n)
        if n < 16 or n & (n - 1):
            raise ValidationError("grid n must be a power of two >= 16")
        if not self.half_width > 0:
            raise ValidationError("grid half_width must be positive")

    @property
    def spacing(self):
        return 2.0 * self.half_width / self.n

    @property
    def axis(self):
        h = self.spacing
        return -self.half_width + h * (np.arange(self.n) + 0.5)

    def points(self):
        """Cell centers as a complex ``(n, n)`` array indexed ``[iy, ix]``."""
        a = self.axis
        return complex(self.center) + a[None, :] + 1j * a[:, None]

    def locate(self, z):
        """Continuous cell coordinates ``(ix, iy)`` of points ``z``."""
        w = (_as_complex(z) - self.center + self.half_width * (1 + 1j)) / self.spacing - 0.5 * (1 + 1j)
        return w.real, w.imag


@dataclass(frozen=True, eq=False)
class DomainMask:
    grid: GridSpec
    inside: np.ndarray
    descriptor: object

    def __post_init__(self):
        inside = np.asarray(self.inside, dtype=bool)
        if inside.shape != (self.grid.n, self.grid.n):
            raise ValidationError("mask shape does not match grid")
        labels, count = ndimage.label(inside)
        if count != 1:
            raise ValidationError(f"mask must be one connected component, found {count}")
        inside.setflags(write=False)
        object.__setattr__(self, "inside", inside)

    @property
    def spacing(self):
        return self.grid.spacing

    def points(self):
        return self.grid.points()


def make_mask(domain, n, pad=0.05):
    """Square grid fitted to the domain's bounding box, cells tested at centers."""
    x0, x1, y0, y1 = domain.bbox()
    half = 0.5 * max(x1 - x0, y1 - y0) * (1.0 + pad)
    grid = GridSpec(complex(0.5 * (x0 + x1), 0.5 * (y0 + y1)), half, int(n))
    return DomainMask(grid, domain.contains(grid.points()), domain)


@dataclass(frozen=True, eq=False)
class ComplexField:
    grid: GridSpec
    values: np.ndarray
    mask: DomainMask
    clamped: int = 0

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (self.grid.n, self.grid.n):
            raise ValidationError("field shape does not match grid")
        if not np.all(np.isfinite(v[self.mask.inside])):
            raise ValidationError("field has non-finite values on masked cells")

    def masked(self):
        return self.values[self.mask.inside]

    def __call__(self, z):
        """Bilinear interpolation; zero outside the mask (zero extension)."""
        z = _as_complex(z)
        n = self.grid.n
        fx, fy = self.grid.locate(z)
        ix = np.clip(np.floor(fx).astype(int), 0, n - 2)
        iy = np.clip(np.floor(fy).astype(int), 0, n - 2)
        tx, ty = np.clip(fx - ix, 0, 1), np.clip(fy - iy, 0, 1)
        vals = np.where(self.mask.inside, self.values, 0)
        out = ((1 - tx) * (1 - ty) * vals[iy, ix] + tx * (1 - ty) * vals[iy, ix + 1]
               + (1 - tx) * ty * vals[iy + 1, ix] + tx * ty * vals[iy + 1, ix + 1])
        ok = (fx >= -0.5) & (fx <= n - 0.5) & (fy >= -0.5) & (fy <= n - 0.5)
        ci = np.clip(np.rint(fx).astype(int), 0, n - 1)
        cj = np.clip(np.rint(fy).astype(int), 0, n - 1)
        return np.where(ok & self.mask.inside[cj, ci], out, 0)

    @property
    def spacing(self):
        return self.grid.spacing


def require_inside(domain, z):
    z = _as_complex(z)
    bad = ~np.asarray(domain.contains(z))
    if np.any(bad):
        where = np.atleast_1d(z)[np.atleast_1d(bad)][0]
        raise DomainError(f"point {where} lies outside the domain")


@dataclass(frozen=True, eq=False)
class Complement:
    """Closed complement of a shape (level negated)."""

    shape: object

    kind = "complement"

    def level(self, z):
        return -self.shape.level(z)

    def contains(self, z):
        return self.level(z) < 0

    def to_dict(self):
        return {"kind": "complement", "shape": self.shape.to_dict()}


@dataclass(frozen=True)
class Segment:
    """Closed segment [a, b] thickened by ``thickness`` (distance level set)."""

    a: complex
    b: complex
    thickness: float = 0.0

    kind = "segment"

    def level(self, z):
        z = _as_complex(z)
        d = self.b - self.a
        t = np.clip(((z - self.a) * np.conj(d)).real / abs(d) ** 2, 0.0, 1.0)
        return np.abs(z - (self.a + t * d)) - self.thickness

    def contains(self, z):
        return self.level(z) < 0

    def to_dict(self):
        return {"kind": "segment", "a": [self.a.real, self.a.imag],
                "b": [self.b.real, self.b.imag], "thickness": self.thickness}


@dataclass(frozen=True, eq=False)
class MappedShape:
    """Image f(S) of a shape, described through the inverse map: level(w) = S.level(f^-1(w))."""

    shape: object
    inverse: object
    label: str = "mapped"

    kind = "mapped"

    def level(self, w):
        return self.shape.level(self.inverse(_as_complex(w)))

    def contains(self, w):
        return self.level(w) < 0

    def to_dict(self):
        return {"kind": "mapped", "label": self.label, "shape": self.shape.to_dict()}


def shape_from_dict(d):
    """Plate shapes for condensers: catalog domains, complements and segments."""
    d = dict(d)
    kind = d.get("kind")
    if kind == "complement":
        return Complement(shape_from_dict(d.get("shape", {})))
    if kind == "segment":
        try:
            return Segment(complex(*d["a"]), complex(*d["b"]), float(d.get("thickness", 0.0)))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad segment parameters: {exc}") from None
    return domain_from_dict(d)
