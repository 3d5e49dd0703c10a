"""Dirichlet problems for the Beltrami equation through f = h ∘ g.

g is a normalised homeomorphic solution mapping the domain onto the unit
disk (or onto a round annulus), and h is analytic there.  The boundary datum
is pulled back to the circle through g's boundary correspondence, h is built
from it by the Schwarz formula, and ``Re f`` then takes the boundary values.
On annuli the harmonic part may carry a period ω around the hole; the
analytic completion is multivalent and is tracked with a winding counter.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import Constant
from .conformal import annulus_map, compose_normalized, riemann_map
from .criteria import SATISFIED, circle_norm, divergence_test, log_radii
from .errors import ContinuationError, TopologyError, UnsupportedError, ValidationError
from .geometry import TWO_PI, ComplexField, make_mask
from .primeends import PrimeEnd, SlitMap, build_prime_end_space, cross_cut_chain
from .qcsolver import jacobian_check, solve_beltrami

LOGGER = logging.getLogger(__name__)

DATUM_KINDS = ("constant", "fourier", "reference_fourier", "sided", "function")


@dataclass(frozen=True, eq=False)
class BoundaryDatum:
    """Real boundary datum on the prime ends of a domain.

    ``fourier`` is a trigonometric polynomial in the angle of the support
    point about ``center``; ``reference_fourier`` uses the angle of the
    end's reference coordinate, so it can tell the two sides of a slit apart
    while staying continuous in the prime-end metric.  ``sided`` assigns
    constants to the slit sides and the circle (discontinuous on purpose).
    """

    kind: str
    cos: tuple = ()
    sin: tuple = ()
    value: float = 0.0
    center: complex = 0j
    upper: float = 0.0
    lower: float = 0.0
    func: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in DATUM_KINDS:
            raise ValidationError(f"unknown datum kind {self.kind!r}")

    @classmethod
    def constant(cls, c):
        return cls("constant", value=float(c))

    @classmethod
    def fourier(cls, cos=(), sin=(), center=0j, reference=False):
        return cls("reference_fourier" if reference else "fourier",
                   tuple(map(float, cos)), tuple(map(float, sin)), center=complex(center))

    @classmethod
    def from_function(cls, func):
        return cls("function", func=func)

    def _trig(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for k, a in enumerate(self.cos):
            out += a * np.cos(k * t)
        for k, b in enumerate(self.sin):
            out += b * np.sin(k * t)
        return out

    def evaluate(self, z, side="none", ref=None):
        """Values at support points z (with sides and reference coordinates for sided data)."""
        z = np.asarray(z, dtype=complex)
        if self.kind == "constant":
            return np.full(z.shape, self.value)
        if self.kind == "fourier":
            return self._trig(np.angle(z - self.center))
        if self.kind == "reference_fourier":
            if ref is None:
                raise ValidationError("reference_fourier datum needs reference coordinates")
            return self._trig(np.angle(np.asarray(ref, dtype=complex)))
        if self.kind == "sided":
            sides = np.broadcast_to(np.asarray(side), z.shape)
            return np.where(sides == "upper", self.upper,
                            np.where(sides == "lower", self.lower, self.value)).astype(float)
        out = np.asarray(self.func(z), dtype=complex)
        if np.any(np.abs(out.imag) > 1e-12 * max(1.0, float(np.abs(out).max(initial=0.0)))):
            raise ValidationError("boundary datum must be real-valued")
        return out.real

    def on_ends(self, ends):
        z = np.array([e.support for e in ends])
        sides = np.array([e.side for e in ends])
        refs = np.array([e.ref for e in ends])
        return self.evaluate(z, sides, refs)

    def to_dict(self):
        if self.kind == "function":
            raise ValidationError("function data cannot be serialised")
        d = {"kind": self.kind}
        if self.kind == "constant":
            d["value"] = self.value
        elif self.kind in ("fourier", "reference_fourier"):
            d.update(cos=list(self.cos), sin=list(self.sin), center=[self.center.real, self.center.imag])
        else:
            d.update(upper=self.upper, lower=self.lower, value=self.value)
        return d


def datum_from_dict(d):
    d = dict(d)
    kind = d.pop("kind", None)
    if kind == "constant":
        return BoundaryDatum.constant(d.get("value", 0.0))
    if kind in ("fourier", "reference_fourier"):
        c = d.get("center", [0.0, 0.0])
        return BoundaryDatum.fourier(d.get("cos", ()), d.get("sin", ()), complex(c[0], c[1]),
                                     reference=kind == "reference_fourier")
    if kind == "sided":
        return BoundaryDatum("sided", upper=d.get("upper", 0.0), lower=d.get("lower", 0.0),
                             value=d.get("value", 0.0))
    raise ValidationError(f"unknown datum kind {kind!r}")


def _boundary_ends(domain, n):
    """Prime ends of catalog spaces, or plain boundary samples for other Jordan domains."""
    try:
        return build_prime_end_space(domain, n).ends
    except UnsupportedError:
        pts = domain.boundary(n)[0]
        return [PrimeEnd(f"b:{k}", complex(z), "none", complex(z)) for k, z in enumerate(pts)]


def _max_jump(datum, domain, n):
    ends = _boundary_ends(domain, n)
    order = np.argsort([np.angle(e.ref) % TWO_PI for e in ends])
    v = datum.on_ends([ends[i] for i in order])
    return float(np.abs(np.diff(np.concatenate([v, v[:1]]))).max()), float(np.ptp(v))


def check_continuity(datum, domain, n=64):
    """Neighbour jumps (in prime-end order) must shrink under lattice refinement."""
    j1, span = _max_jump(datum, domain, n)
    j2, _ = _max_jump(datum, domain, 4 * n)
    if j2 > 1e-9 * max(1.0, span) and j2 > 0.7 * j1:
        raise ValidationError(f"boundary datum is not continuous in the prime-end metric "
                              f"(neighbour jump {j2:.3g} does not shrink under refinement)")
    return j2


@dataclass(eq=False)
class SchwarzResult:
    coefficients: np.ndarray
    N: int
    imag_constant: float = 0.0

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        return np.polynomial.polynomial.polyval(w, self.coefficients)

    def to_dict(self):
        return {"N": self.N, "imag_constant": self.imag_constant,
                "coefficients": [[c.real, c.imag] for c in self.coefficients]}


def _samples_on_circle(datum, M):
    t = TWO_PI * np.arange(M) / M
    if isinstance(datum, BoundaryDatum):
        return np.asarray(datum.evaluate(np.exp(1j * t)), dtype=complex)
    if callable(datum):
        return np.asarray(datum(t), dtype=complex)
    arr = np.asarray(datum, dtype=complex)
    if arr.ndim != 1 or arr.size < 16:
        raise ValidationError("sampled datum must be a 1-d array of at least 16 values")
    return arr


def schwarz_operator(datum, N=64):
    """h(z) = c₀ + 2 Σ_{k=1..N} c_k z^k from the Fourier coefficients c_k of φ.

    ``datum`` may be a callable of the angle, a BoundaryDatum on the unit
    circle, or uniform samples over [0, 2π).  Im h(0) = 0.
    """
    if N < 8:
        raise ValidationError("Schwarz truncation N must be at least 8")
    vals = _samples_on_circle(datum, max(4 * N, 256))
    if np.any(np.abs(vals.imag) > 1e-12 * max(1.0, float(np.abs(vals).max()))):
        raise ValidationError("Schwarz operator needs a real datum")
    c = np.fft.fft(vals.real) / vals.size
    N = min(N, vals.size // 2 - 1)
    coef = np.empty(N + 1, dtype=complex)
    coef[0] = c[0].real
    coef[1:] = 2.0 * c[1:N + 1]
    return SchwarzResult(coef, N)


@dataclass(eq=False)
class DirichletSolution:
    evaluator: object
    f: ComplexField
    g: object
    h: SchwarzResult
    datum: BoundaryDatum
    domain: object
    warnings: list
    jacobian_stats: dict
    spacing: float

    def __call__(self, z):
        return self.evaluator(z)

    def to_dict(self):
        return {"warnings": self.warnings, "jacobian": self.jacobian_stats,
                "schwarz": None if self.h is None else {"N": self.h.N}}


def _is_zero(coef):
    return isinstance(coef, Constant) and coef.k == 0


def _probe_warnings(coef, domain, probes):
    out = []
    for z0 in domain.boundary(probes)[0]:
        try:
            norm = circle_norm(coef, z0, log_radii(0.25), domain)
            v = divergence_test(norm)
        except Exception as exc:  # a probe failure only degrades to a warning
            out.append(f"divergence probe at {z0:.3f} failed: {exc}")
            continue
        if v.status != SATISFIED:
            out.append(f"divergence test {v.status} at boundary point {complex(z0):.3f}")
    return out


def _pull_back(g_images, values, M):
    """Datum as a function of the image angle, resampled uniformly."""
    ang = np.angle(g_images) % TWO_PI
    order = np.argsort(ang)
    steps = np.mod(np.diff(ang), TWO_PI)
    if not (np.all(steps > 0) and abs(steps.sum() + ((ang[0] - ang[-1]) % TWO_PI) - TWO_PI) < 1e-6):
        raise ValidationError("boundary correspondence of g is not monotone")
    t = TWO_PI * np.arange(M) / M
    return np.interp(t, ang[order], values[order], period=TWO_PI)


def _constant_solution(c, domain, n, datum):
    mask = make_mask(domain, n)
    vals = np.full(mask.inside.shape, complex(c))

    def ev(z):
        return np.full(np.shape(z), complex(c))

    return DirichletSolution(ev, ComplexField(mask.grid, vals, mask), None, None, datum, domain,
                             [], {"violations": 0, "fraction": 0.0}, mask.grid.spacing)


def solve_dirichlet_sc(coef, domain, datum, n=128, N=128, delta=0.01, probes=8, g=None,
                       boundary_samples=2048):
    """Regular solution f = h ∘ g of the Dirichlet problem on a simply connected domain."""
    if getattr(domain, "connectivity", 1) != 1:
        raise TopologyError("solve_dirichlet_sc needs a simply connected domain")
    check_continuity(datum, domain)
    ends = _boundary_ends(domain, boundary_samples)
    vals = datum.on_ends(ends)
    if np.ptp(vals) <= 1e-14 * max(1.0, float(np.abs(vals).max())):
        LOGGER.info("constant datum: returning the constant solution")
        return _constant_solution(float(vals[0]), domain, n, datum)
    warnings = _probe_warnings(coef, domain, probes)
    for w in warnings:
        LOGGER.warning(w)
    mask = make_mask(domain, n)
    jac = {"violations": 0, "fraction": 0.0}
    if g is None:
        if domain.kind == "slit_disk":
            if not _is_zero(coef):
                raise UnsupportedError("slit-disk Dirichlet problems are limited to mu = 0")
            g = SlitMap(domain.x0)
        elif _is_zero(coef):
            g = riemann_map(mask)
        else:
            sol = solve_beltrami(coef, mask, delta)
            rep = jacobian_check(sol)
            jac = {"violations": rep.violations, "fraction": rep.fraction}
            g = compose_normalized(sol)
    if domain.kind == "slit_disk":
        images = np.array([e.ref for e in ends]) if isinstance(g, SlitMap) else \
            np.array([complex(g(np.array([e.support + (1e-13j if e.side == "upper" else -1e-13j
                                                       if e.side == "lower" else 0)]))[0]) for e in ends])
        order = np.argsort(np.angle(np.array([e.ref for e in ends])) % TWO_PI)
        images, vals = images[order], vals[order]
    else:
        images = g(np.array([e.support for e in ends]))
    samples = _pull_back(images, vals, max(4 * N, 512))
    h = schwarz_operator(samples, N)

    def evaluator(z):
        return h(g(z))

    pts = mask.grid.points()
    values = np.full(pts.shape, np.nan + 0j)
    values[mask.inside] = evaluator(pts[mask.inside])
    LOGGER.info("Dirichlet solution on %s with %d Fourier modes", domain.kind, h.N)
    return DirichletSolution(evaluator, ComplexField(mask.grid, values, mask), g, h, datum, domain,
                             warnings, jac, mask.grid.spacing)


def maximum_principle_check(sol, samples=2048):
    """Range of Re f on the grid against the range of the datum on the boundary.

    Returns a dict with both ranges and ``excess``, the largest amount by
    which Re f leaves the datum range (zero when the principle holds).
    """
    vals = sol.datum.on_ends(_boundary_ends(sol.domain, samples))
    u = sol.f.values.real[sol.f.mask.inside]
    lo, hi = float(vals.min()), float(vals.max())
    excess = max(0.0, lo - float(u.min()), float(u.max()) - hi)
    return {"u_min": float(u.min()), "u_max": float(u.max()),
            "datum_min": lo, "datum_max": hi, "excess": excess}


@dataclass
class ResidualRow:
    end_id: str
    depth: int
    radius: float
    residual: float
    extrapolated: float
    truncated: bool

    def row(self):
        return [self.end_id, self.depth, self.radius, self.residual, self.extrapolated, self.truncated]


def boundary_residual(sol, datum, ends, eps0=0.5, depth=None, space=None, min_cells=4):
    """|Re f - φ(P)| along the cross-cut chain of each end.

    Chains use radii ``eps0 2^-m`` down to ``min_cells`` grid cells.  Besides
    the raw residual at the deepest level, the limit of ``Re f`` along the
    chain is estimated by two Richardson steps in the halving radius.
    """
    space = space or build_prime_end_space(sol.domain, 64)
    floor = min_cells * sol.spacing
    max_depth = int(math.floor(math.log2(eps0 / floor))) if eps0 > floor else 0
    want = max_depth if depth is None else int(depth)
    rows = []
    for e in ends:
        e = space[e] if isinstance(e, str) else e
        chain = cross_cut_chain(space, e, eps0, min(want, max_depth))
        truncated = chain.truncated or want > max_depth
        target = float(datum.on_ends([e])[0])
        if len(chain.radii) == 0:
            rows.append(ResidualRow(e.id, 0, eps0, math.nan, math.nan, True))
            continue
        u = sol(chain.midpoints()).real
        raw = abs(u[-1] - target)
        est = u[-1]
        if u.size >= 3:
            r1 = 2.0 * u[1:] - u[:-1]
            r2 = (4.0 * r1[1:] - r1[:-1]) / 3.0
            est = r2[-1]
        elif u.size == 2:
            est = 2.0 * u[1] - u[0]
        rows.append(ResidualRow(e.id, len(chain.radii), float(chain.radii[-1]), float(raw),
                                float(abs(est - target)), bool(truncated)))
    return rows


@dataclass
class PeriodReport:
    omega: float
    contour_values: list
    single_valued: bool
    homology_consistent: bool

    def to_dict(self):
        return {"omega": self.omega, "contours": self.contour_values,
                "single_valued": self.single_valued, "homology_consistent": self.homology_consistent}


@dataclass(eq=False)
class HarmonicAnnulus:
    r_star: float
    A: float
    B: float
    alpha: np.ndarray
    beta: np.ndarray
    period: PeriodReport = None

    def H(self, w, k=0):
        """Analytic completion on branch k: u + i(v₀ + k ω)."""
        w = np.asarray(w, dtype=complex)
        out = self.A + self.B * (np.log(np.abs(w)) + 1j * (np.angle(w) + TWO_PI * k))
        kk = np.arange(1, self.alpha.size + 1)
        wf = w.ravel()[:, None]
        out = out + (2.0 * (self.alpha[None, :] * wf ** kk[None, :]).sum(axis=1)
                     + 2.0 * (np.conj(self.beta)[None, :] * (self.r_star / wf) ** kk[None, :]).sum(axis=1)
                     ).reshape(w.shape)
        return out

    def u(self, w):
        return self.H(w).real


def _coeffs(datum, N, M):
    vals = _samples_on_circle(datum, M) if not np.isscalar(datum) else np.full(M, float(datum), dtype=complex)
    return np.fft.fft(vals.real) / vals.size


def _conjugate_period(u, rho, m=512, step=1e-6):
    t = TWO_PI * np.arange(m) / m
    e = np.exp(1j * t)
    dr = (u((rho + step) * e) - u((rho - step) * e)) / (2 * step)
    return float(rho * dr.mean() * TWO_PI)


def harmonic_annulus(inner, outer, r_star, N=64):
    """Harmonic u on r* < |w| < 1 with the given data on |w| = r* and |w| = 1.

    Each frequency solves a 2×2 system; ω = 2πB is the period of the
    conjugate function around the hole.
    """
    if not 0.0 < r_star < 1.0:
        raise ValidationError("annulus inner radius must lie in (0, 1)")
    M = max(4 * N, 256)
    ci, co = _coeffs(inner, N, M), _coeffs(outer, N, M)
    A = co[0].real
    B = (ci[0].real - co[0].real) / math.log(r_star)
    k = np.arange(1, N + 1)
    rk = r_star ** k
    det = 1.0 - rk * rk
    # u_k = alpha r^k + beta (r*/r)^k on frequency k
    alpha = (co[1:N + 1] - rk * ci[1:N + 1]) / det
    beta = (ci[1:N + 1] - rk * co[1:N + 1]) / det
    res = HarmonicAnnulus(r_star, A, B, alpha, beta)
    omega = TWO_PI * B
    rhos = [r_star ** (2.0 / 3.0), r_star ** (1.0 / 3.0)]
    contours = [_conjugate_period(res.u, rho) for rho in rhos]
    scale = max(1.0, abs(A), abs(B))
    tol = 1e-6 * scale
    consistent = abs(contours[0] - contours[1]) <= max(0.01 * abs(omega), tol)
    res.period = PeriodReport(float(omega), contours, bool(abs(omega) < 1e-8 * scale), bool(consistent))
    return res


@dataclass(eq=False)
class MultivalentSolution:
    g: object
    harmonic: HarmonicAnnulus
    domain: object
    constant: complex = None

    @property
    def omega(self):
        return 0.0 if self.constant is not None else self.harmonic.period.omega

    def __call__(self, z, k=0):
        if self.constant is not None:
            return np.full(np.shape(z), self.constant)
        return self.harmonic.H(self.g(z), k)

    def continue_along(self, path, k0=0):
        """Continue the branch k0 at path[0] along a polyline; returns (value, winding)."""
        path = np.asarray(path, dtype=complex)
        dense = np.concatenate([np.linspace(a, b, 32, endpoint=False) for a, b in zip(path[:-1], path[1:])]
                               + [path[-1:]])
        if not np.all(self.domain.contains(dense)):
            raise ContinuationError("continuation path leaves the domain")
        if self.constant is not None:
            return self.constant, k0
        w = self.g(dense)
        ang = np.unwrap(np.angle(w))
        turns = (ang[-1] - ang[0]) - (np.angle(w[-1]) - np.angle(w[0]))
        k = k0 + int(round(turns / TWO_PI))
        return complex(self.harmonic.H(w[-1:], k)[0]), k


def multivalent_solution(coef, domain, inner, outer, n=128, N=64, delta=0.01, boundary_samples=1024):
    """Branch-tracked analytic completion of the Dirichlet problem on a doubly connected domain.

    ``inner`` and ``outer`` are BoundaryDatum objects on the inner and outer
    boundary components.
    """
    if getattr(domain, "connectivity", 1) != 2:
        raise TopologyError("multivalent_solution needs a doubly connected domain")
    comps = domain.boundary(boundary_samples)
    vi = inner.evaluate(comps[1])
    vo = outer.evaluate(comps[0])
    allv = np.concatenate([vi, vo])
    if np.ptp(allv) <= 1e-14 * max(1.0, float(np.abs(allv).max())):
        return MultivalentSolution(None, None, domain, complex(allv[0]))
    mask = make_mask(domain, n)
    if _is_zero(coef):
        g = annulus_map(mask)
        r_star = g.r_inner
    else:
        g = compose_normalized(solve_beltrami(coef, mask, delta))
        r_star = g.mapper.r_inner
    M = max(4 * N, 256)
    si = _pull_back(g(comps[1]), vi, M)
    so = _pull_back(g(comps[0]), vo, M)
    ha = harmonic_annulus(si, so, r_star, N)
    LOGGER.info("multivalent solution: r*=%.6f, period %.3e", r_star, ha.period.omega)
    return MultivalentSolution(g, ha, domain)
