"""Circle norms and asymptotic admissibility tests at a point z0.

Every test here reduces to the behaviour of a positive sampled integrand
``G(v)`` as ``v -> infinity``, where ``v = log(R/r)`` for radial integrals.
The decision uses a Bertrand-type local index: writing
``G(v) = v^{-1} (log v)^{-q}`` locally, ``q`` is the negative slope of
``log G + log v`` against ``log log v`` fitted over the last two decades of
radii.  ``q <= 1`` means the integral diverges, ``q > 1`` that it converges;
pure powers ``v^{-p}`` give ``q = (p - 1) log v``, so the same index separates
power-law, logarithmic and exponential tails and is invariant under scaling of
``G``.  Decision thresholds live in :class:`CriteriaConfig`.
"""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, cumulative_trapezoid

from .coefficients import _evaluate, tangent_from_mu
from .errors import QuadratureError, ValidationError
from .geometry import TWO_PI, ComplexField, circle_arcs

LOGGER = logging.getLogger(__name__)

SATISFIED = "Satisfied"
FAILS = "Fails"
INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class CriteriaConfig:
    """Thresholds of the finite-range asymptotic tests."""

    per_decade: int = 12
    decades: float = 5.0
    fit_decades: float = 2.0
    # divergence of integrals: Bertrand index q
    q_diverge: float = 1.05
    q_converge: float = 1.25
    # O(model) growth: slope of log(q/model) against log model
    bounded_slope: float = 0.1
    unbounded_slope: float = 0.25
    # o(model) tests: slope against log model (annular) or log log v (averages)
    small_slope: float = -0.25
    not_small_slope: float = -0.1
    average_small_slope: float = -0.2
    average_not_small_slope: float = -0.05
    min_nodes: int = 128
    sampled_exclusion: float = 2.0


DEFAULT_CONFIG = CriteriaConfig()


@dataclass
class CriterionVerdict:
    status: str
    evidence: dict = field(default_factory=dict)
    reason: str = ""

    def __post_init__(self):
        if self.status not in (SATISFIED, FAILS, INCONCLUSIVE):
            raise ValidationError(f"unknown verdict status {self.status!r}")
        if self.status == INCONCLUSIVE and not self.reason:
            raise ValidationError("an inconclusive verdict needs a reason")

    def to_dict(self):
        return {"status": self.status, "reason": self.reason,
                "evidence": _jsonable(self.evidence)}


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


# ---------------------------------------------------------------- densities

@dataclass(frozen=True)
class Density:
    """A nonnegative scalar function with an optional grid resolution."""

    func: object
    spacing: float | None = None

    def __call__(self, z):
        return self.func(z)


def as_density(Q, z0=None):
    """Wrap a callable, a sampled field or a coefficient as a density.

    A coefficient becomes its tangent dilatation about ``z0``, set to zero
    at ``z0`` itself.
    """
    if isinstance(Q, Density):
        return Q
    if isinstance(Q, ComplexField):
        return Density(lambda z: np.real(Q(z)), Q.spacing)
    if hasattr(Q, "_raw"):
        if z0 is None:
            raise ValidationError("a coefficient needs z0 to define its tangent dilatation")
        z0c = complex(z0)

        def kt(z):
            z = np.asarray(z, dtype=complex)
            out = np.zeros(z.shape)
            ok = z != z0c
            mu, _ = _evaluate(Q, z[ok])
            out[ok] = tangent_from_mu(mu, z[ok], z0c)
            return out

        return Density(kt, getattr(getattr(Q, "field", None), "spacing", None))
    if callable(Q):
        return Density(Q)
    raise ValidationError("Q must be callable, a sampled field or a coefficient")


# ---------------------------------------------------------------- circle norms

@dataclass(frozen=True, eq=False)
class CircleNorm:
    z0: complex
    radii: np.ndarray
    values: np.ndarray
    arc_lengths: np.ndarray
    usable: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.radii) >= 0):
            raise ValidationError("circle-norm radii must be strictly decreasing")
        if np.any(self.values < 0) or not np.all(np.isfinite(self.values)):
            raise ValidationError("circle-norm values must be finite and nonnegative")

    def average(self, normalize="circle"):
        """q(r): circle average with Q = 0 outside D, or the D-arc average."""
        if normalize == "circle":
            return self.values / (TWO_PI * self.radii)
        if normalize == "arc":
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(self.arc_lengths > 0, self.values / self.arc_lengths, 0.0)
        raise ValidationError("normalize must be 'circle' or 'arc'")

    def rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]


def log_radii(eps0, decades=None, per_decade=None, config=DEFAULT_CONFIG):
    """Decreasing radii ``eps0 * 10^(-k/per_decade)`` over ``decades`` decades."""
    decades = config.decades if decades is None else decades
    per_decade = config.per_decade if per_decade is None else per_decade
    k = np.arange(int(round(decades * per_decade)) + 1)
    return eps0 * 10.0 ** (-k / per_decade)


@functools.lru_cache(maxsize=None)
def _gauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def circle_norm(Q, z0, radii, domain=None, config=DEFAULT_CONFIG):
    """||Q||(r) = integral of Q over D ∩ S(z0, r), with Q = 0 outside D.

    Full circles use the trapezoidal rule with ``max(min_nodes, 2πr/spacing)``
    nodes; arcs cut by the boundary use Gauss-Legendre on each arc.
    """
    dens = as_density(Q, z0)
    z0 = complex(z0)
    radii = np.asarray(radii, dtype=float)
    if np.any(radii <= 0):
        raise ValidationError("radii must be positive")
    vals = np.empty(radii.size)
    lengths = np.empty(radii.size)
    for i, r in enumerate(radii):
        n = config.min_nodes
        if dens.spacing:
            n = max(n, int(math.ceil(TWO_PI * r / dens.spacing)))
        arcs = [(0.0, TWO_PI)] if domain is None else circle_arcs(domain, z0, r)
        if arcs == [(0.0, TWO_PI)]:
            t = TWO_PI * (np.arange(n) + 0.5) / n
            wts = np.full(n, TWO_PI / n)
        elif not arcs:
            vals[i] = 0.0
            lengths[i] = 0.0
            continue
        else:
            ts, ws = [], []
            for a, b in arcs:
                m = max(32, int(math.ceil(n * (b - a) / TWO_PI)))
                x, w = _gauss(min(m, 400))
                ts.append(0.5 * (a + b) + 0.5 * (b - a) * x)
                ws.append(0.5 * (b - a) * w)
            t, wts = np.concatenate(ts), np.concatenate(ws)
        q = np.asarray(dens(z0 + r * np.exp(1j * t)), dtype=float)
        if not np.all(np.isfinite(q)):
            j = int(np.flatnonzero(~np.isfinite(q))[0])
            raise QuadratureError(f"non-finite Q at r={r:.6g}, angle={t[j]:.6g}", location=(float(r), float(t[j])))
        vals[i] = r * np.dot(wts, q)
        lengths[i] = r * wts.sum()
    usable = np.ones(radii.size, dtype=bool)
    if dens.spacing:
        usable = radii >= config.sampled_exclusion * dens.spacing
    return CircleNorm(z0, radii, vals, lengths, usable)


# ---------------------------------------------------------------- asymptotic fits

def _log_variable(radii):
    ref = max(1.0, math.e * float(np.max(radii)))
    return np.log(ref / radii)


def _window(radii, fit_decades):
    return radii <= radii.min() * 10.0 ** fit_decades * (1 + 1e-9)


def bertrand_index(v, G):
    """Local index q of a positive integrand ``G(v)`` on ``v > 1``.

    Returns ``-inf`` when G is infinite somewhere (divergence by the a/0
    convention) and ``+inf`` when it vanishes identically.
    """
    v = np.asarray(v, dtype=float)
    G = np.asarray(G, dtype=float)
    if np.any(np.isinf(G)):
        return -math.inf
    pos = G > 0
    if not pos.any():
        return math.inf
    if pos.sum() < 3:
        return math.inf
    x = np.log(np.log(v[pos]))
    y = np.log(G[pos]) + np.log(v[pos])
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def _classify_q(q, config, what):
    ev = {"bertrand_index": q}
    if q <= config.q_diverge:
        return SATISFIED, ev, ""
    if q >= config.q_converge:
        return FAILS, ev, ""
    return INCONCLUSIVE, ev, f"{what}: index {q:.3f} between {config.q_diverge} and {config.q_converge}"


def _check_range(norm, config, min_decades=4.0, min_radii=20):
    r = norm.radii[norm.usable]
    if r.size < min_radii:
        return f"only {r.size} usable radii (need {min_radii})"
    span = math.log10(r.max() / r.min())
    if span < min_decades - 1e-9:
        return f"usable radii span {span:.2f} decades (need {min_decades})"
    return ""


def _cumulative(g, u):
    if g.size > 2:
        return np.concatenate([[0.0], cumulative_simpson(g, x=u)])
    return np.concatenate([[0.0], cumulative_trapezoid(g, u)])


def partial_integrals(norm):
    """I(eps) = integral from eps0 down to eps of dr / ||Q||(r), per radius."""
    r = norm.radii
    with np.errstate(divide="ignore", over="ignore"):
        g = np.where(norm.values > 0, r / np.where(norm.values > 0, norm.values, 1.0), np.inf)
    u = np.log(r[0] / r)
    if np.any(np.isinf(g)):
        first = int(np.flatnonzero(np.isinf(g))[0])
        out = np.full(r.size, np.inf)
        if first > 0:
            out[:first] = _cumulative(g[:first], u[:first])[:first]
        return out
    return _cumulative(g, u)


def divergence_test(norm, config=DEFAULT_CONFIG):
    """Does the integral of dr/||Q||(r) diverge at 0?  Satisfied iff it does."""
    reason = _check_range(norm, config)
    I = partial_integrals(norm)
    evidence = {"radii": norm.radii, "partial_integrals": I}
    if reason:
        return CriterionVerdict(INCONCLUSIVE, evidence, reason)
    m = norm.usable
    r = norm.radii[m]
    with np.errstate(divide="ignore", over="ignore"):
        g = np.where(norm.values[m] > 0, r / np.where(norm.values[m] > 0, norm.values[m], 1.0), np.inf)
    v = _log_variable(r)
    w = _window(r, config.fit_decades)
    q = bertrand_index(v[w], g[w])
    status, ev, why = _classify_q(q, config, "divergence")
    evidence.update(ev)
    evidence["fit_radii"] = [float(r[w].max()), float(r[w].min())]
    return CriterionVerdict(status, evidence, why)


def _slope(x, y):
    return float(np.polyfit(x, y, 1)[0])


def circle_average_growth(norm, model="O(log)", normalize="circle", config=DEFAULT_CONFIG):
    """Is q(r) = O(log 1/r) (``"O(log)"``) or o(log 1/r · log log 1/r) (``"o(loglog)"``)?"""
    reason = _check_range(norm, config)
    q = norm.average(normalize)
    evidence = {"radii": norm.radii, "averages": q, "model": model}
    if reason:
        return CriterionVerdict(INCONCLUSIVE, evidence, reason)
    m = norm.usable
    r = norm.radii[m]
    v = _log_variable(r)
    w = _window(r, config.fit_decades)
    qq = q[m][w]
    if np.all(qq == 0):
        return CriterionVerdict(SATISFIED, evidence, "")
    if np.any(qq <= 0):
        return CriterionVerdict(INCONCLUSIVE, evidence, "circle averages vanish on part of the fit window")
    vw = v[w]
    if model == "O(log)":
        s = _slope(np.log(vw), np.log(qq / vw))
        evidence["slope"] = s
        if s <= config.bounded_slope:
            return CriterionVerdict(SATISFIED, evidence)
        if s >= config.unbounded_slope:
            return CriterionVerdict(FAILS, evidence)
    elif model == "o(loglog)":
        s = _slope(np.log(np.log(vw)), np.log(qq / (vw * np.log(vw))))
        evidence["slope"] = s
        if s <= config.average_small_slope:
            return CriterionVerdict(SATISFIED, evidence)
        if s >= config.average_not_small_slope:
            return CriterionVerdict(FAILS, evidence)
    else:
        raise ValidationError("model must be 'O(log)' or 'o(loglog)'")
    return CriterionVerdict(INCONCLUSIVE, evidence, f"slope {s:.3f} inside the undecided band")


# ---------------------------------------------------------------- annular integrals

WEIGHTS = ("r^-2", "(r log 1/r)^-2")


def _weight(kind, r):
    if kind == "r^-2":
        return r ** -2.0
    if kind == "(r log 1/r)^-2":
        if np.any(r >= 1):
            raise ValidationError("the logarithmic weight needs radii < 1")
        return (r * np.log(1.0 / r)) ** -2.0
    raise ValidationError(f"weight must be one of {WEIGHTS}")


@dataclass
class AnnularResult:
    value: float
    radii: np.ndarray
    partial: np.ndarray
    verdict: CriterionVerdict

    def to_dict(self):
        return {"value": _jsonable(self.value), "verdict": self.verdict.to_dict()}


def _norm_between(Q, z0, eps, eps0, domain, config):
    if not 0 < eps < eps0:
        raise ValidationError("need 0 < eps < eps0")
    decades = math.log10(eps0 / eps)
    n = max(2, int(math.ceil(decades * config.per_decade)))
    radii = eps0 * (eps / eps0) ** (np.arange(n + 1) / n)
    return circle_norm(Q, z0, radii, domain, config)


def annular_weighted_integral(Q, z0, eps, eps0, weight="r^-2", domain=None,
                              config=DEFAULT_CONFIG, norm=None):
    """Integral of Q·w(|z - z0|) over eps < |z - z0| < eps0, with an o-model verdict.

    The model is ``log^2(1/eps)`` for ``r^-2`` and ``(log log 1/eps)^2`` for
    the logarithmic weight.  The verdict compares the growth rates of the
    integral and of the model (their derivative ratio) over the last two decades.
    """
    if norm is None:
        norm = _norm_between(Q, z0, eps, eps0, domain, config)
    r = norm.radii
    u = np.log(r[0] / r)
    dA = r * _weight(weight, r) * norm.values
    partial = np.concatenate([[0.0], cumulative_simpson(dA, x=u)]) if r.size > 2 else \
        np.concatenate([[0.0], cumulative_trapezoid(dA, u)])
    evidence = {"radii": r, "partial": partial, "weight": weight}
    reason = _check_range(norm, config)
    if reason:
        return AnnularResult(float(partial[-1]), r, partial, CriterionVerdict(INCONCLUSIVE, evidence, reason))
    m = norm.usable
    rr, d = r[m], dA[m]
    v = _log_variable(rr)
    w = _window(rr, config.fit_decades)
    if weight == "r^-2":
        logM = 2.0 * np.log(v[w])
        dM = 2.0 * v[w]
    else:
        logM = 2.0 * np.log(np.log(v[w]))
        dM = 2.0 * np.log(v[w]) / v[w]
    dd = d[w]
    if np.all(dd == 0):
        verdict = CriterionVerdict(SATISFIED, evidence)
    elif np.any(dd <= 0):
        verdict = CriterionVerdict(INCONCLUSIVE, evidence, "integrand vanishes on part of the fit window")
    else:
        s = _slope(logM, np.log(dd / dM))
        evidence["slope"] = s
        if s <= config.small_slope:
            verdict = CriterionVerdict(SATISFIED, evidence)
        elif s >= config.not_small_slope:
            verdict = CriterionVerdict(FAILS, evidence)
        else:
            verdict = CriterionVerdict(INCONCLUSIVE, evidence, f"slope {s:.3f} inside the undecided band")
    return AnnularResult(float(partial[-1]), r, partial, verdict)


# ---------------------------------------------------------------- psi family

PSI_FAMILIES = ("1/t", "1/(t log 1/t)", "1/||Q||")


def psi_family_test(Q, z0, psi="1/t", eps0=0.5, eps=None, domain=None, config=DEFAULT_CONFIG):
    """Check ∫ Q ψ²(|z - z0|) dm over eps < |z - z0| < eps0 = o(I(eps)²), I = ∫ψ.

    For ``psi = "1/||Q||"`` the left side is also computed by a separate 2-D
    tensor Gauss quadrature and compared with I(eps) (Fubini identity).
    """
    if psi not in PSI_FAMILIES:
        raise ValidationError(f"psi must be one of {PSI_FAMILIES}")
    eps = eps0 * 10.0 ** -config.decades if eps is None else eps
    norm = _norm_between(Q, z0, eps, eps0, domain, config)
    r = norm.radii
    u = np.log(r[0] / r)
    if psi == "1/t":
        ps = 1.0 / r
    elif psi == "1/(t log 1/t)":
        if eps0 >= 1:
            raise ValidationError("psi = 1/(t log 1/t) needs eps0 < 1")
        ps = 1.0 / (r * np.log(1.0 / r))
    else:
        with np.errstate(divide="ignore"):
            ps = np.where(norm.values > 0, 1.0 / np.where(norm.values > 0, norm.values, 1.0), np.inf)
    if np.any(np.isinf(ps)):
        raise ValidationError("psi is not locally integrable: ||Q|| vanishes on a circle")
    I = np.concatenate([[0.0], cumulative_simpson(r * ps, x=u)])
    L = np.concatenate([[0.0], cumulative_simpson(r * ps ** 2 * norm.values, x=u)])
    if I[-1] <= 0:
        raise ValidationError("I(eps) = 0")
    evidence = {"radii": r, "I": I, "lhs": L, "psi": psi}
    if psi == "1/||Q||":
        lhs2 = _fubini_lhs(Q, z0, norm, domain)
        rel = abs(lhs2 - I[-1]) / I[-1]
        evidence["fubini_lhs"] = lhs2
        evidence["fubini_rel_error"] = rel
        evidence["fubini_ok"] = bool(rel <= 0.01)
    reason = _check_range(norm, config)
    if reason:
        return CriterionVerdict(INCONCLUSIVE, evidence, reason)
    m = norm.usable
    v = _log_variable(r[m])
    w = _window(r[m], config.fit_decades)
    q = bertrand_index(v[w], (r * ps)[m][w])
    evidence["bertrand_index"] = q
    if q >= config.q_converge:
        return CriterionVerdict(FAILS, evidence)
    if q > config.q_diverge:
        return CriterionVerdict(INCONCLUSIVE, evidence, f"I(eps) index {q:.3f} undecided")
    tail = m.copy()
    tail[m] = w
    tail &= (I > 0) & (L > 0)
    s = _slope(np.log(I[tail] ** 2), np.log(L[tail] / I[tail] ** 2))
    evidence["slope"] = s
    if s <= config.small_slope:
        return CriterionVerdict(SATISFIED, evidence)
    if s >= config.not_small_slope:
        return CriterionVerdict(FAILS, evidence)
    return CriterionVerdict(INCONCLUSIVE, evidence, f"slope {s:.3f} inside the undecided band")


def _fubini_lhs(Q, z0, norm, domain, nr=8, nt=96):
    """∫∫ Q(z)/||Q||(|z - z0|)² dm by tensor Gauss quadrature in (log r, θ)."""
    from scipy.interpolate import CubicSpline

    dens = as_density(Q, z0)
    lr = np.log(norm.radii[::-1])
    spline = CubicSpline(lr, np.log(np.maximum(norm.values[::-1], 1e-300)))
    xg, wg = _gauss(nr)
    total = 0.0
    tg, tw = _gauss(nt)
    theta = np.pi * (tg + 1.0)
    wtheta = np.pi * tw
    for a, b in zip(lr[:-1], lr[1:]):
        s = 0.5 * (a + b) + 0.5 * (b - a) * xg
        rr = np.exp(s)
        z = complex(z0) + rr[:, None] * np.exp(1j * theta)[None, :]
        q = np.asarray(dens(z), dtype=float)
        if domain is not None:
            q = np.where(domain.contains(z), q, 0.0)
        nq = np.exp(spline(s))
        inner = (q * wtheta[None, :]).sum(axis=1) * rr * rr / nq ** 2
        total += 0.5 * (b - a) * np.dot(wg, inner)
    return float(total)


# ---------------------------------------------------------------- exponential integrability

def exp_integrability(Q, z0, alpha, eps0, domain=None, decades=16, per_decade=40,
                      config=DEFAULT_CONFIG):
    """∫ exp(α Q) over D ∩ B(z0, eps0); ``inf`` when the integral diverges.

    Integrated in ``u = log(eps0/r)`` with an exponential-decay tail; a tail
    that does not decay, or an overflow, gives ``inf``.
    """
    if not alpha > 0:
        raise ValidationError("alpha must be positive")
    dens = as_density(Q, z0)
    lo = decades
    if dens.spacing:
        lo = min(decades, math.log10(eps0 / (config.sampled_exclusion * dens.spacing)))
    n = int(math.ceil(lo * per_decade))
    radii = eps0 * 10.0 ** (-np.arange(n + 1) / per_decade)

    def expq(z):
        a = alpha * np.asarray(dens(z), dtype=float)
        if np.any(a > 700):
            raise OverflowError
        return np.exp(a)

    try:
        norm = circle_norm(Density(expq, dens.spacing), z0, radii, domain, config)
    except OverflowError:
        return math.inf
    u = np.log(eps0 / radii)
    J = radii * norm.values
    body = float(cumulative_simpson(J, x=u)[-1])
    tail_u = u >= u[-1] - 2.0 * math.log(10.0)
    Jt = J[tail_u]
    if np.all(Jt == 0):
        return body
    if np.any(Jt <= 0):
        return body
    lam = -_slope(u[tail_u], np.log(Jt))
    if lam <= 0.05:
        return math.inf
    return body + float(J[-1] / lam)


@dataclass
class BatteryResult:
    """All radial criteria for one density at one point."""

    z0: complex
    norm: CircleNorm
    partial: np.ndarray
    verdicts: dict

    def statuses(self):
        return {k: v.status for k, v in self.verdicts.items()}

    def to_dict(self):
        return {"z0": [self.z0.real, self.z0.imag],
                "verdicts": {k: v.to_dict() for k, v in self.verdicts.items()}}

    def rows(self):
        """(r_or_eps, value) rows of the partial integrals I(eps)."""
        return [(float(r), float(v)) for r, v in zip(self.norm.radii, self.partial)]


def criteria_battery(Q, z0, eps0=0.5, domain=None, config=DEFAULT_CONFIG):
    """Divergence, circle-average and annular criteria on one shared radius lattice.

    The lattice is ``log_radii(eps0)``; the annular integrals use the same
    circle norms, so every verdict refers to the same samples of Q.
    """
    if not 0 < eps0 < 1:
        raise ValidationError("eps0 must lie in (0, 1)")
    z0 = complex(z0)
    norm = circle_norm(Q, z0, log_radii(eps0, config=config), domain, config)
    eps = float(norm.radii[-1])
    verdicts = {
        "divergence": divergence_test(norm, config),
        "O(log)": circle_average_growth(norm, "O(log)", config=config),
        "o(loglog)": circle_average_growth(norm, "o(loglog)", config=config),
    }
    for weight in WEIGHTS:
        res = annular_weighted_integral(Q, z0, eps, eps0, weight, domain, config, norm=norm)
        verdicts[f"annular {weight}"] = res.verdict
    return BatteryResult(z0, norm, partial_integrals(norm), verdicts)
