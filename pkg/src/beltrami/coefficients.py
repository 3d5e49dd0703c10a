"""Beltrami coefficient families and pointwise dilatation quotients.

A coefficient is an immutable object with a vectorised ``_raw(z)`` returning
complex values of mu.  The public functions :func:`eval_mu`,
:func:`dilatation`, :func:`tangent_dilatation` and :func:`sample_field` add
domain checks, degeneracy checks and clamping on top of it.

Degenerate families never return ``|mu| = 1``: their modulus is clamped to
``1 - CLAMP_EPS`` and the number of clamped points is reported by
:func:`sample_field` through ``ComplexField.clamped``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DegeneracyError, DomainError, ValidationError
from .geometry import ComplexField, domain_from_dict

LOGGER = logging.getLogger(__name__)

CLAMP_EPS = 1e-14


def _unit_phase(z, z0):
    """(z - z0) / conj(z - z0), with value 1 at z = z0."""
    w = np.asarray(z, dtype=complex) - z0
    a = np.abs(w)
    safe = np.where(a > 0, a, 1.0)
    u = np.where(a > 0, w / safe, 1.0)
    return u * u


def _cpoint(c):
    if isinstance(c, (list, tuple)):
        return complex(c[0], c[1])
    return complex(c)


def _dump(c):
    c = complex(c)
    return [c.real, c.imag]


@dataclass(frozen=True)
class Constant:
    k: complex = 0j
    domain: object = None

    kind = "constant"
    degenerate = False

    def _raw(self, z):
        return np.full(np.shape(z), complex(self.k))

    def to_dict(self):
        return {"family": "constant", "k": _dump(self.k)}


@dataclass(frozen=True)
class RadialStretch:
    """mu of f(z) = (z - z0) |z - z0|^(K - 1)."""

    K: float = 2.0
    z0: complex = 0j
    domain: object = None

    kind = "radial_stretch"
    degenerate = False

    def __post_init__(self):
        if not self.K > 0:
            raise ValidationError("radial stretch needs K > 0")

    def _raw(self, z):
        k = (self.K - 1.0) / (self.K + 1.0)
        w = np.asarray(z, dtype=complex) - self.z0
        return np.where(w != 0, k * _unit_phase(z, self.z0), 0)

    def to_dict(self):
        return {"family": "radial_stretch", "K": self.K, "z0": _dump(self.z0)}


@dataclass(frozen=True, eq=False)
class RadialProfile:
    """mu of the radial map f(z) = z0 + rho(|z - z0|) e^{i arg(z - z0)}.

    ``rho`` is given as a strictly increasing table over strictly increasing
    radii and interpolated monotone-cubically.
    """

    radii: tuple
    values: tuple
    z0: complex = 0j
    domain: object = None
    _interp: PchipInterpolator = field(init=False, repr=False)

    kind = "radial_profile"
    degenerate = False

    def __post_init__(self):
        r = np.asarray(self.radii, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValidationError("radial profile needs matching 1-d tables of length >= 2")
        if np.any(np.diff(r) <= 0) or np.any(np.diff(v) <= 0) or r[0] < 0 or v[0] < 0:
            raise ValidationError("radial profile table must be strictly increasing and nonnegative")
        object.__setattr__(self, "radii", tuple(r))
        object.__setattr__(self, "values", tuple(v))
        object.__setattr__(self, "_interp", PchipInterpolator(r, v))

    def rho(self, r):
        return self._interp(r)

    def _raw(self, z):
        r = np.abs(np.asarray(z, dtype=complex) - self.z0)
        lo, hi = self.radii[0], self.radii[-1]
        if np.any((r < lo) | (r > hi)):
            raise DomainError(f"radius outside profile table [{lo}, {hi}]")
        rp = r * self._interp(r, 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = rp / self._interp(r)
        k = np.where(np.isfinite(s), (s - 1.0) / (s + 1.0), 0.0)
        return np.where(r > 0, k * _unit_phase(z, self.z0), 0)

    def to_dict(self):
        return {"family": "radial_profile", "radii": list(self.radii),
                "values": list(self.values), "z0": _dump(self.z0)}


@dataclass(frozen=True)
class Angular:
    """mu = sign * k (z - z0) / conj(z - z0)."""

    k: float = 0.5
    z0: complex = 0j
    sign: int = 1
    domain: object = None

    kind = "angular"
    degenerate = False

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValidationError("angular sign must be +1 or -1")

    def _raw(self, z):
        return self.sign * self.k * _unit_phase(z, self.z0)

    def to_dict(self):
        return {"family": "angular", "k": self.k, "z0": _dump(self.z0), "sign": self.sign}


@dataclass(frozen=True)
class DegenerateLog:
    """K_mu = max(1, 1 + log(1/|z - z0|)), phase sign * (z - z0)/conj(z - z0).

    ``sign = -1`` aligns the stretching with circles about z0, so the tangent
    dilatation with respect to z0 equals K_mu.
    """

    z0: complex = 0j
    sign: int = -1
    domain: object = None

    kind = "degenerate_log"
    degenerate = True

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValidationError("degenerate_log sign must be +1 or -1")

    def _raw(self, z):
        r = np.abs(np.asarray(z, dtype=complex) - self.z0)
        with np.errstate(divide="ignore"):
            L = np.where(r < 1.0, -np.log(np.where(r > 0, r, 1e-300)), 0.0)
        a = L / (2.0 + L)
        a = np.where(r > 0, a, 1.0)
        return self.sign * a * _unit_phase(z, self.z0)

    def to_dict(self):
        return {"family": "degenerate_log", "z0": _dump(self.z0), "sign": self.sign}


@dataclass(frozen=True, eq=False)
class Sampled:
    """mu given on a grid; bilinear in between, zero outside the mask."""

    field: ComplexField
    domain: object = None

    kind = "sampled"
    degenerate = False

    def _raw(self, z):
        if self.domain is None:
            z_arr = np.asarray(z, dtype=complex)
            fx, fy = self.field.grid.locate(z_arr)
            n = self.field.grid.n
            if np.any((fx < -0.5) | (fx > n - 0.5) | (fy < -0.5) | (fy > n - 0.5)):
                raise DomainError("point outside the sampling grid")
        return self.field(z)

    def to_dict(self):
        raise ValidationError("sampled coefficients are not serialisable")


FAMILIES = {
    "constant": Constant,
    "radial_stretch": RadialStretch,
    "radial_profile": RadialProfile,
    "angular": Angular,
    "degenerate_log": DegenerateLog,
}


def coefficient_from_dict(d):
    """Build a family from its config dictionary."""
    d = dict(d)
    fam = d.pop("family", None)
    if fam not in FAMILIES:
        raise ValidationError(f"unknown coefficient family {fam!r}")
    for key in ("z0", "k"):
        if key in d and isinstance(d[key], (list, tuple)):
            d[key] = _cpoint(d[key])
    if "domain" in d and d["domain"] is not None:
        d["domain"] = domain_from_dict(d["domain"])
    try:
        return FAMILIES[fam](**d)
    except TypeError as exc:
        raise ValidationError(f"bad parameters for {fam}: {exc}") from None


def _evaluate(coef, z):
    """Return (mu, number of clamped points); raises on domain/degeneracy errors."""
    z = np.asarray(z, dtype=complex)
    dom = getattr(coef, "domain", None)
    if dom is not None:
        bad = ~np.asarray(dom.contains(z), dtype=bool)
        if np.any(bad):
            raise DomainError(f"point {np.atleast_1d(z)[np.atleast_1d(bad)][0]} outside the coefficient's domain")
    mu = np.asarray(coef._raw(z), dtype=complex)
    a = np.abs(mu)
    limit = 1.0 - CLAMP_EPS
    over = a > limit
    if not np.any(over):
        return mu, 0
    if coef.degenerate:
        mu = np.where(over, mu / np.where(a > 0, a, 1.0) * limit, mu)
        return mu, int(np.count_nonzero(over))
    loc = complex(np.atleast_1d(z)[np.atleast_1d(over)][0])
    raise DegeneracyError(f"|mu| >= 1 at z = {loc}", location=loc)


def eval_mu(coef, z):
    """mu(z) for a coefficient; vectorised over ``z``."""
    mu, _ = _evaluate(coef, z)
    return mu if np.ndim(mu) else complex(mu)


def dilatation_from_mu(mu):
    """(1 + |mu|) / (1 - |mu|) for values with |mu| < 1."""
    a = np.abs(np.asarray(mu, dtype=complex))
    if np.any(a >= 1.0):
        raise DegeneracyError("|mu| >= 1")
    k = (1.0 + a) / (1.0 - a)
    return k if np.ndim(k) else float(k)


def dilatation(coef, z):
    """Dilatation quotient K_mu(z)."""
    return dilatation_from_mu(eval_mu(coef, z))


def tangent_from_mu(mu, z, z0):
    """Tangent dilatation quotient for given values of mu.

    Written as ``(1-a)/(1+a) + 4 a sin^2(psi/2) / (1-a^2)`` with ``a = |mu|``
    and ``psi = arg mu - 2 arg(z - z0)``, which avoids cancellation and keeps
    the result inside ``[1/K, K]``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z == z0):
        raise ValidationError("tangent dilatation needs z != z0")
    mu = np.asarray(mu, dtype=complex)
    a = np.abs(mu)
    if np.any(a >= 1.0):
        raise DegeneracyError("|mu| >= 1")
    psi = np.angle(mu) - 2.0 * np.angle(z - z0)
    s = np.sin(0.5 * psi)
    kt = (1.0 - a) / (1.0 + a) + 4.0 * a * s * s / ((1.0 - a) * (1.0 + a))
    K = (1.0 + a) / (1.0 - a)
    kt = np.clip(kt, 1.0 / K, K)
    return kt if np.ndim(kt) else float(kt)


def tangent_dilatation(coef, z, z0):
    """K^T_mu(z, z0) = |1 - conj(z - z0)/(z - z0) mu|^2 / (1 - |mu|^2)."""
    return tangent_from_mu(eval_mu(coef, z), z, z0)


def sample_field(coef, mask):
    """Evaluate mu at the masked cell centers; zero elsewhere."""
    pts = mask.points()
    vals = np.zeros(pts.shape, dtype=complex)
    inside = mask.inside
    try:
        mu, clamped = _evaluate(coef, pts[inside])
    except DegeneracyError as exc:
        iy, ix = np.argwhere(inside & (pts == exc.location))[0]
        raise DegeneracyError(f"{exc} (cell iy={iy}, ix={ix})", location=(int(iy), int(ix))) from None
    vals[inside] = mu
    if clamped:
        LOGGER.info("clamped |mu| on %d cells", clamped)
    return ComplexField(mask.grid, vals, mask, clamped=clamped)
