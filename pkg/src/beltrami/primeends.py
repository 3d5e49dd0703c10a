"""Prime ends of catalog domains through explicit maps onto circular domains.

The prime-end metric is ``ρ₀(P₁, P₂) = |g₀(P₁) - g₀(P₂)|`` for a conformal
reference map g₀ onto a circular domain.  Disks and round annuli are their
own circular domains (g₀ = identity).  For the slit disk ``D \\ [x0, 1)`` the
map is explicit: a disk automorphism moving x0 to 0, the square root with
the cut along the slit, ``s ↦ ((1+s)/(1-s))²`` onto the upper half plane,
and the Cayley transform onto the disk.  The two sides of the slit are
separate prime ends; the square root branch is chosen by side.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import UnsupportedError, ValidationError
from .geometry import TWO_PI, Annulus, Disk, SlitDisk, circle_arcs

LOGGER = logging.getLogger(__name__)

SIDES = ("none", "upper", "lower", "tip")


@dataclass(frozen=True)
class PrimeEnd:
    id: str
    support: complex
    side: str
    ref: complex
    component: int = 0

    def row(self):
        return [self.id, self.support.real, self.support.imag, self.side,
                float(np.angle(self.ref) % TWO_PI)]


def _cayley(t):
    t = np.asarray(t, dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = (t - 1j) / (t + 1j)
    return np.where(np.isinf(t), 1.0 + 0j, w)


def _slit_tail(s):
    """Upper half disk in s onto the unit disk."""
    s = np.asarray(s, dtype=complex)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = ((1.0 + s) / (1.0 - s)) ** 2
    t = np.where(s == 1.0, np.inf, t)
    return _cayley(t)


@dataclass(frozen=True, eq=False)
class SlitMap:
    """Explicit conformal map of the slit disk onto the unit disk."""

    x0: float = 0.0

    def _pre(self, z):
        return (z - self.x0) / (1.0 - self.x0 * z)

    def __call__(self, z):
        w = self._pre(np.asarray(z, dtype=complex))
        arg = np.mod(np.angle(w), TWO_PI)
        s = np.sqrt(np.abs(w)) * np.exp(0.5j * arg)
        return _slit_tail(s)

    def sided(self, x, side):
        """Boundary values at slit points x from the given side."""
        w = self._pre(np.asarray(x, dtype=complex)).real
        s = np.sqrt(np.maximum(w, 0.0)) * (1.0 if side == "upper" else -1.0)
        return _slit_tail(s + 0j)

    def inverse(self, w):
        w = np.asarray(w, dtype=complex)
        with np.errstate(invalid="ignore", divide="ignore"):
            t = 1j * (1.0 + w) / (1.0 - w)
        q = np.sqrt(t)
        q = np.where(q.imag < 0, -q, q)
        q = np.where(q.real < 0, -q, q)
        s = (q - 1.0) / (q + 1.0)
        v = s * s
        return (v + self.x0) / (1.0 + self.x0 * v)


@dataclass(frozen=True, eq=False)
class IdentityMap:
    def __call__(self, z):
        return np.asarray(z, dtype=complex)

    def inverse(self, w):
        return np.asarray(w, dtype=complex)


@dataclass(eq=False)
class PrimeEndSpace:
    domain: object
    ends: list
    reference: object
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._index = {e.id: e for e in self.ends}
        refs = np.array([e.ref for e in self.ends])
        if refs.size > 1:
            d = np.abs(refs[:, None] - refs[None, :]) + np.eye(refs.size)
            if d.min() <= 0:
                raise ValidationError("distinct prime ends share a reference coordinate")

    def __getitem__(self, key):
        return self._index[key] if isinstance(key, str) else key

    def refs(self):
        return np.array([e.ref for e in self.ends])

    def find(self, support, side="none"):
        """The sampled end with the given side closest to ``support``."""
        cands = [e for e in self.ends if e.side == side]
        if not cands:
            raise ValidationError(f"no prime ends with side {side!r}")
        d = [abs(e.support - support) for e in cands]
        return cands[int(np.argmin(d))]

    def end_at(self, support, side="none"):
        """A prime end at an arbitrary support point (not necessarily sampled)."""
        return _make_end(self.domain, self.reference, complex(support), side, "probe")

    def rows(self):
        return [e.row() for e in self.ends]


def _make_end(domain, ref_map, z, side, eid, component=0):
    if domain.kind == "slit_disk" and not hasattr(ref_map, "sided"):
        # generic maps: approach the slit from just off its sides
        shift = {"upper": 1e-13j, "lower": -1e-13j, "tip": -1e-13}.get(side, 0.0)
        if side == "tip":
            z = complex(domain.x0)
        ref = complex(ref_map(np.array([z + shift]))[0])
    elif domain.kind == "slit_disk":
        if side in ("upper", "lower"):
            ref = complex(ref_map.sided(np.array([z.real]), side)[0])
        elif side == "tip":
            ref = complex(ref_map.sided(np.array([domain.x0]), "upper")[0])
        else:
            ref = complex(ref_map(np.array([z]))[0])
    else:
        ref = complex(ref_map(np.array([z]))[0])
    return PrimeEnd(eid, z, side, ref, component)


def build_prime_end_space(domain, n=256):
    """Prime-end lattice and reference map for a disk, round annulus or slit disk."""
    if isinstance(domain, Disk):
        ref = _DiskNormal(domain)
        t = TWO_PI * np.arange(n) / n
        z = domain.center + domain.radius * np.exp(1j * t)
        ends = [PrimeEnd(f"circle:{k}", complex(z[k]), "none", complex(ref(z[k])))
                for k in range(n)]
        return PrimeEndSpace(domain, ends, ref)
    if isinstance(domain, Annulus):
        ref = _DiskNormal(Disk(domain.center, domain.outer))
        t = TWO_PI * np.arange(n) / n
        ends = []
        for comp, rad in ((0, domain.outer), (1, domain.inner)):
            z = domain.center + rad * np.exp(1j * t)
            ends += [PrimeEnd(f"circle{comp}:{k}", complex(z[k]), "none", complex(ref(z[k])), comp)
                     for k in range(n)]
        return PrimeEndSpace(domain, ends, ref)
    if isinstance(domain, SlitDisk):
        ref = SlitMap(domain.x0)
        t = TWO_PI * np.arange(1, n) / n
        ends = [_make_end(domain, ref, complex(np.exp(1j * a)), "none", f"circle:{k + 1}")
                for k, a in enumerate(t)]
        xs = domain.x0 + (domain.x1 - domain.x0) * np.arange(1, n) / n
        for k, x in enumerate(xs):
            for side in ("upper", "lower"):
                ends.append(_make_end(domain, ref, complex(x), side, f"slit:{k + 1}:{side}"))
        ends.append(_make_end(domain, ref, complex(domain.x0), "tip", "tip"))
        for side in ("upper", "lower"):
            ends.append(_make_end(domain, ref, 1.0 + 0j, side, f"junction:{side}"))
        return PrimeEndSpace(domain, ends, ref)
    raise UnsupportedError(f"no prime-end reference map for {getattr(domain, 'kind', domain)!r}")


@dataclass(frozen=True, eq=False)
class _DiskNormal:
    """Affine normalisation of a disk onto the unit disk."""

    disk: Disk

    def __call__(self, z):
        return (np.asarray(z, dtype=complex) - self.disk.center) / self.disk.radius

    def inverse(self, w):
        return self.disk.center + self.disk.radius * np.asarray(w, dtype=complex)


def prime_end_metric(space, p1, p2, reference=None):
    """``|g₀(P₁) - g₀(P₂)|``; with ``reference`` the second map is used instead."""
    a, b = space[p1], space[p2]
    if reference is None:
        return float(abs(a.ref - b.ref))
    ra = _make_end(space.domain, reference, a.support, a.side, a.id).ref
    rb = _make_end(space.domain, reference, b.support, b.side, b.id).ref
    return float(abs(ra - rb))


@dataclass
class EquivalenceReport:
    classifications: list
    equivalent: bool

    def to_dict(self):
        return {"equivalent": self.equivalent, "classifications": self.classifications}


def metric_equivalence(space, reference, battery, tol=1e-2):
    """Classify test sequences as convergent/divergent under both metrics.

    ``battery`` holds pairs ``(sequence of ends, limit end)``; a sequence
    converges when its last distance is below ``tol`` and below its first.
    """
    rows = []
    for seq, limit in battery:
        out = []
        for ref in (None, reference):
            d = [prime_end_metric(space, p, limit, ref) for p in seq]
            out.append(bool(d[-1] < tol and d[-1] < d[0]))
        rows.append(out)
    return EquivalenceReport(rows, all(a == b for a, b in rows))


def slit_test_battery(space, m=12):
    """Sequences on the slit disk: same-side, alternating-side and tip approaches."""
    dom = space.domain
    mid = 0.5 * (dom.x0 + dom.x1)
    xs = mid + (dom.x1 - mid) * 0.5 ** np.arange(1, m + 1)
    up = [space.end_at(x, "upper") for x in xs]
    low = [space.end_at(x, "lower") for x in xs]
    alt = [u if k % 2 == 0 else l for k, (u, l) in enumerate(zip(up, low))]
    tip_x = dom.x0 + 0.25 ** np.arange(2, m + 2)
    to_tip = [space.end_at(x, "upper") for x in tip_x]
    target = space.end_at(mid, "upper")
    tip = space.end_at(dom.x0, "tip")
    return [(up, target), (low, target), (alt, target), (to_tip, tip)]


@dataclass
class CrossCutChain:
    end: PrimeEnd
    radii: np.ndarray
    arcs: list
    separating: list
    truncated: bool = False

    def midpoints(self):
        z0 = self.end.support
        return np.array([z0 + r * np.exp(0.5j * (a + b)) for r, (a, b) in zip(self.radii, self.arcs)])

    def arc_points(self, m, k=64):
        a, b = self.arcs[m]
        t = a + (b - a) * (np.arange(k) + 0.5) / k
        return self.end.support + self.radii[m] * np.exp(1j * t)


def _select_arc(space, end, z0, r, arcs):
    if len(arcs) == 1:
        return arcs[0]
    best, score = None, math.inf
    for a, b in arcs:
        mid = z0 + r * np.exp(0.5j * (a + b))
        d = abs(complex(space.reference(np.array([mid]))[0]) - end.ref)
        if d < score:
            best, score = (a, b), d
    return best


def _separates(domain, z0, r, arc, base, res=96):
    """Flood-fill check that the arc cuts the tail region off from ``base``."""
    if abs(base - z0) <= r:
        return False
    h = 2.4 * r / res
    ax = (np.arange(res) + 0.5) * h - 1.2 * r
    X, Y = np.meshgrid(ax, ax)
    Z = z0 + X + 1j * Y
    free = np.asarray(domain.contains(Z), dtype=bool)
    if domain.kind == "slit_disk":
        free &= ~((np.abs(Z.imag) < 0.75 * h) & (Z.real >= domain.x0 - 0.75 * h))
    a, b = arc
    rho = np.abs(Z - z0)
    ang = np.mod(np.angle(Z - z0) - a, TWO_PI)
    on_arc = (np.abs(rho - r) < 1.5 * h) & (ang <= (b - a) + 2 * h / r)
    free &= ~on_arc
    lab, _ = ndimage.label(free)
    tail = z0 + 0.5 * r * np.exp(0.5j * (a + b))
    iy = int((tail.imag - z0.imag + 1.2 * r) / h)
    ix = int((tail.real - z0.real + 1.2 * r) / h)
    k = lab[iy, ix]
    if k == 0:
        return False
    comp = lab == k
    # the tail component must stay inside the circle
    return not np.any(comp & (rho > r + 2 * h))


def cross_cut_chain(space, end, eps0=0.25, depth=6, min_radius=0.0):
    """Circular cross-cuts on S(z0, eps0 2^-m), m = 1..depth, on the end's side."""
    end = space[end]
    z0 = end.support
    base = complex(space.domain.anchor)
    radii, arcs, seps = [], [], []
    truncated = False
    for m in range(1, depth + 1):
        r = eps0 * 2.0 ** (-m)
        if r < min_radius:
            truncated = True
            break
        found = circle_arcs(space.domain, z0, r)
        if not found:
            truncated = True
            break
        arc = _select_arc(space, end, z0, r, found)
        radii.append(r)
        arcs.append(arc)
        seps.append(_separates(space.domain, z0, r, arc, base))
    return CrossCutChain(end, np.array(radii), arcs, seps, truncated)


@dataclass
class ContinuityReport:
    oscillations: dict
    boundary_values: dict
    oscillation_ok: bool
    injective: bool
    surjective: bool
    max_gap: float
    passed: bool

    def to_dict(self):
        return {"passed": self.passed, "oscillation_ok": self.oscillation_ok,
                "injective": self.injective, "surjective": self.surjective,
                "max_gap": self.max_gap,
                "oscillations": {k: list(map(float, v)) for k, v in self.oscillations.items()},
                "boundary_values": {k: [v.real, v.imag] for k, v in self.boundary_values.items()}}


def _cyclic_monotone(angles):
    steps = np.mod(np.diff(np.concatenate([angles, angles[:1]])), TWO_PI)
    return bool(np.all(steps > 0) and abs(steps.sum() - TWO_PI) < 1e-6)


def _decays(vals, tol, rate=0.25):
    """Oscillations tend to zero: below ``tol`` at the deepest level, or
    shrinking geometrically (by at least 2^-rate per halving) over the last three."""
    if vals[-1] <= tol and vals[-1] <= vals[0]:
        return True
    if len(vals) < 4:
        return False
    tail = np.asarray(vals[-4:])
    return bool(np.all(tail[1:] <= 2.0 ** (-rate) * tail[:-1]))


def extension_continuity_check(g, space, eps0=0.25, depth=6, tol=0.05, stride=None):
    """Oscillation of g over the cross-cuts of sampled ends, and injectivity and
    surjectivity of the induced boundary correspondence."""
    ends = space.ends
    stride = stride or max(1, len(ends) // 128)
    sample = ends[::stride]
    osc, bvals = {}, {}
    ok = True
    for e in sample:
        chain = cross_cut_chain(space, e, eps0, depth)
        vals = []
        for m in range(len(chain.radii)):
            w = g(chain.arc_points(m))
            vals.append(float(np.abs(w[:, None] - w[None, :]).max()))
        osc[e.id] = vals
        if vals:
            ok &= _decays(vals, tol)
            bvals[e.id] = complex(g(chain.midpoints()[-1:])[0])
    injective = surjective = True
    gap = 0.0
    ref_gap = 0.0
    comps = sorted({e.component for e in sample})
    for c in comps:
        es = [e for e in sample if e.component == c and e.id in bvals]
        order = np.argsort([np.angle(e.ref) % TWO_PI for e in es])
        img = np.array([bvals[es[i].id] for i in order])
        ang = np.angle(img) % TWO_PI
        injective &= _cyclic_monotone(ang)
        srt = np.sort(ang)
        gaps = np.diff(np.concatenate([srt, srt[:1] + TWO_PI]))
        rsrt = np.sort([np.angle(e.ref) % TWO_PI for e in es])
        rgaps = np.diff(np.concatenate([rsrt, rsrt[:1] + TWO_PI]))
        gap = max(gap, float(gaps.max()))
        ref_gap = max(ref_gap, float(rgaps.max()))
        surjective &= bool(gaps.max() <= rgaps.max() + tol * TWO_PI)
    passed = bool(ok and injective and surjective)
    LOGGER.info("extension check: oscillation %s, injective %s, surjective %s",
                ok, injective, surjective)
    return ContinuityReport(osc, bvals, bool(ok), bool(injective), bool(surjective), gap, passed)
