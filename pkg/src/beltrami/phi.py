"""Convex weight functions Φ and the family of equivalent divergence conditions.

Every condition is an improper integral ``∫^∞ G(v) dv`` in its own natural
variable; each is sampled on a log lattice, summed, and classified with the
Bertrand index of :func:`beltrami.criteria.bertrand_index`.  All quantities
are evaluated in log space (``H = log Φ``) so exponential weights never
overflow.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.optimize import brentq

from .criteria import (DEFAULT_CONFIG, FAILS, INCONCLUSIVE, SATISFIED, CriterionVerdict,
                       _classify_q, _jsonable, bertrand_index)
from .errors import ValidationError

LOGGER = logging.getLogger(__name__)

CONDITIONS = ("inverse_tau", "dH_over_t", "stieltjes_dH_over_t", "H_over_t2", "H_reciprocal", "inverse_H", "log_phi_over_t2")
CONDITION_TEXT = {
    "inverse_tau": "∫ dτ / (τ Φ⁻¹(τ))",
    "dH_over_t": "∫ H'(t) dt / t",
    "stieltjes_dH_over_t": "∫ dH(t) / t (Stieltjes)",
    "H_over_t2": "∫ H(t) dt / t²",
    "H_reciprocal": "∫₀ H(1/t) dt",
    "inverse_H": "∫ dη / H⁻¹(η)",
    "log_phi_over_t2": "∫ log Φ(t) dt / t²",
}


@dataclass(frozen=True)
class PhiSpec:
    """A nondecreasing convex Φ on [0, ∞).

    Families: ``power`` (Φ = t^p, p ≥ 1), ``exponential`` (Φ = e^{αt}),
    ``exp_sqrt`` (Φ = e^{√t} for t ≥ 1, tangent line below), ``tlog``
    (Φ = t log^β t for t ≥ 1, zero below, β ≥ 1) and ``table`` (piecewise
    linear through given points, power-law tail from the last two points).
    """

    family: str
    p: float = 2.0
    alpha: float = 1.0
    beta: float = 1.0
    table_t: tuple = ()
    table_phi: tuple = ()

    def __post_init__(self):
        f = self.family
        if f == "power" and not self.p >= 1:
            raise ValidationError("power family needs p >= 1")
        if f == "exponential" and not self.alpha > 0:
            raise ValidationError("exponential family needs alpha > 0")
        if f == "tlog" and not self.beta >= 1:
            raise ValidationError("tlog family needs beta >= 1")
        if f == "table":
            t = np.asarray(self.table_t, dtype=float)
            v = np.asarray(self.table_phi, dtype=float)
            if t.ndim != 1 or t.shape != v.shape or t.size < 3 or t[0] != 0:
                raise ValidationError("table needs >= 3 points starting at t = 0")
            if np.any(np.diff(t) <= 0) or np.any(v < 0):
                raise ValidationError("table t must increase and Φ must be nonnegative")
            slopes = np.diff(v) / np.diff(t)
            if np.any(slopes < -1e-12) or np.any(np.diff(slopes) < -1e-9 * max(1.0, np.abs(slopes).max())):
                raise ValidationError("table Φ is not nondecreasing and convex")
            if v[-1] <= 0 or v[-2] <= 0:
                raise ValidationError("table tail needs positive Φ")
            q = math.log(v[-1] / v[-2]) / math.log(t[-1] / t[-2])
            if q < 1 or q * v[-1] / t[-1] < slopes[-1] - 1e-9:
                raise ValidationError("table power-law tail is not convex")
            object.__setattr__(self, "table_t", tuple(t))
            object.__setattr__(self, "table_phi", tuple(v))
        elif f not in ("power", "exponential", "exp_sqrt", "tlog"):
            raise ValidationError(f"unknown Φ family {f!r}")
        self._check_convex()

    # -- basic quantities in log space

    @property
    def t_star(self):
        """sup{t : Φ(t) = 0} (0 when Φ(0) > 0)."""
        if self.family in ("power",):
            return 0.0
        if self.family == "tlog":
            return 1.0
        if self.family == "table":
            v = np.asarray(self.table_phi)
            zero = np.flatnonzero(v == 0)
            return float(self.table_t[zero[-1]]) if zero.size else 0.0
        return 0.0

    def _tail_exponent(self):
        t, v = self.table_t, self.table_phi
        return math.log(v[-1] / v[-2]) / math.log(t[-1] / t[-2])

    def H(self, t):
        """log Φ(t); -inf where Φ vanishes."""
        t = np.asarray(t, dtype=float)
        f = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if f == "power":
                return self.p * np.log(t)
            if f == "exponential":
                return self.alpha * t
            if f == "exp_sqrt":
                lin = np.log(np.maximum(math.e * (1.0 + 0.5 * (t - 1.0)), 1e-300))
                return np.where(t >= 1.0, np.sqrt(np.maximum(t, 1.0)), lin)
            if f == "tlog":
                tt = np.maximum(t, 1.0)
                return np.where(t > 1.0, np.log(tt) + self.beta * np.log(np.log(tt)), -np.inf)
            tt, vv = np.asarray(self.table_t), np.asarray(self.table_phi)
            inside = np.log(np.interp(np.minimum(t, tt[-1]), tt, vv))
            tail = math.log(vv[-1]) + self._tail_exponent() * np.log(np.maximum(t, tt[-1]) / tt[-1])
            return np.where(t <= tt[-1], inside, tail)

    def phi(self, t):
        return np.exp(self.H(t))

    def dH(self, t):
        """H'(t), zero where Φ vanishes."""
        t = np.asarray(t, dtype=float)
        f = self.family
        with np.errstate(divide="ignore", invalid="ignore"):
            if f == "power":
                return self.p / t
            if f == "exponential":
                return np.full(t.shape, self.alpha)
            if f == "exp_sqrt":
                return np.where(t >= 1.0, 0.5 / np.sqrt(np.maximum(t, 1.0)),
                                0.5 / (1.0 + 0.5 * (t - 1.0)))
            if f == "tlog":
                L = np.log(np.maximum(t, 1.0))
                return np.where(t > 1.0, (1.0 + self.beta / np.where(L > 0, L, 1.0)) / t, 0.0)
            tt, vv = np.asarray(self.table_t), np.asarray(self.table_phi)
            k = np.clip(np.searchsorted(tt, t) - 1, 0, tt.size - 2)
            slope = (vv[k + 1] - vv[k]) / (tt[k + 1] - tt[k])
            val = np.interp(np.minimum(t, tt[-1]), tt, vv)
            inside = np.where(val > 0, slope / np.where(val > 0, val, 1.0), 0.0)
            return np.where(t <= tt[-1], inside, self._tail_exponent() / t)

    def H_inv(self, eta):
        """Smallest t with H(t) = η."""
        eta = np.asarray(eta, dtype=float)
        f = self.family
        if f == "power":
            return np.exp(eta / self.p)
        if f == "exponential":
            return eta / self.alpha
        if f == "exp_sqrt":
            lin = 1.0 + 2.0 * (np.exp(np.minimum(eta, 1.0) - 1.0) - 1.0)
            return np.where(eta >= 1.0, eta * eta, lin)
        if f == "table":
            tt, vv = np.asarray(self.table_t), np.asarray(self.table_phi)
            top = math.log(vv[-1])
            tail = tt[-1] * np.exp((eta - top) / self._tail_exponent())
            pos = vv > 0
            inside = np.interp(np.exp(np.minimum(eta, top)), vv[pos], tt[pos])
            return np.where(eta > top, tail, inside)
        out = np.empty(eta.shape)
        for i, e in np.ndenumerate(eta):
            # log t + β log log t = e, t > 1
            g = lambda s: s + self.beta * math.log(s) - e if s > 0 else -math.inf
            hi = max(2.0, e + 1.0)
            lo = 1e-300
            s = brentq(g, lo, hi, xtol=1e-15, rtol=1e-14) if g(hi) > 0 else hi
            out[i] = math.exp(s)
        return out

    def phi_inv(self, tau):
        """Φ⁻¹(τ) for τ > Φ(0)."""
        tau = np.asarray(tau, dtype=float)
        f = self.family
        if f == "power":
            return tau ** (1.0 / self.p)
        if f == "exponential":
            return np.log(tau) / self.alpha
        return self.H_inv(np.log(tau))

    def _check_convex(self):
        t = np.linspace(0.0, 20.0, 401)
        v = self.phi(t)
        d1 = np.diff(v)
        d2 = np.diff(v, 2)
        scale = np.maximum(np.abs(v[1:-1]), 1.0)
        if np.any(d1 < -1e-12 * np.maximum(np.abs(v[1:]), 1.0)) or np.any(d2 < -1e-9 * scale):
            raise ValidationError(f"Φ family {self.family} is not nondecreasing and convex on the check lattice")

    def to_dict(self):
        d = {"family": self.family}
        if self.family == "power":
            d["p"] = self.p
        elif self.family == "exponential":
            d["alpha"] = self.alpha
        elif self.family == "tlog":
            d["beta"] = self.beta
        elif self.family == "table":
            d["table_t"] = list(self.table_t)
            d["table_phi"] = list(self.table_phi)
        return d


def phi_from_dict(d):
    d = dict(d)
    try:
        return PhiSpec(**d)
    except TypeError as exc:
        raise ValidationError(f"bad Φ parameters: {exc}") from None


@dataclass
class PhiSuiteResult:
    verdicts: dict
    agreement: bool

    def to_dict(self):
        return {"agreement": self.agreement,
                "conditions": {k: v.to_dict() for k, v in self.verdicts.items()}}


def _log_lattice(lo, hi, per_decade):
    n = max(8, int(math.ceil(math.log10(hi / lo) * per_decade)))
    return lo * (hi / lo) ** (np.arange(n + 1) / n)


def _fit_window(v, fit_decades):
    return (v >= v[-1] * 10.0 ** -fit_decades) & (v > math.e)


def _tail(v, G, w):
    """Power-law tail estimate of ∫_{v_max}^∞ G for a converging integrand."""
    pos = w & (G > 0)
    if pos.sum() < 3:
        return 0.0
    p = -np.polyfit(np.log(v[pos]), np.log(G[pos]), 1)[0]
    if p <= 1.0:
        return math.inf
    return float(G[-1] * v[-1] / (p - 1.0))


def _verdict(v, G, config, what, partial):
    w = _fit_window(v, config.fit_decades)
    q = bertrand_index(v[w], G[w])
    status, ev, why = _classify_q(q, config, what)
    ev["partial_integral"] = partial
    ev["variable_range"] = [float(v[0]), float(v[-1])]
    if status == SATISFIED:
        ev["estimate"] = math.inf
    elif status == FAILS:
        ev["estimate"] = partial + _tail(v, G, w)
    return CriterionVerdict(status, ev, why)


def phi_condition_suite(spec, delta=None, t_max=1e12, per_decade=40, config=DEFAULT_CONFIG):
    """Evaluate the seven equivalent divergence conditions for Φ.

    ``delta`` is the lower limit in t (and Δ = 1/delta for the condition in
    the reciprocal variable); it must exceed t_* = sup{Φ = 0} and, for the
    τ-integral, the lower limit is ``max(Φ(delta), Φ(0))``.
    """
    t_star = spec.t_star
    delta = max(math.e, 2.0 * t_star + 1.0) if delta is None else float(delta)
    if delta <= t_star:
        raise ValidationError("delta must exceed sup{t : Φ(t) = 0}")
    if t_max <= 100 * delta:
        raise ValidationError("t_max must exceed delta by at least two decades")
    out = {}
    t = _log_lattice(delta, t_max, per_decade)
    lt = np.log(t)

    def integrate(v, G):
        return float(trapezoid(G * v, np.log(v)))

    # ∫ dτ / (τ Φ⁻¹(τ)), limited to the float range
    tau_lo = max(float(spec.phi(delta)), float(spec.phi(0.0)) * (1 + 1e-9), 1e-300)
    tau_hi = min(1e300, float(np.exp(min(spec.H(t_max), 690.0))))
    if tau_hi > 100 * tau_lo:
        tau = _log_lattice(tau_lo, tau_hi, per_decade)
        G = 1.0 / (tau * spec.phi_inv(tau))
        out["inverse_tau"] = _verdict(tau, G, config, "inverse_tau", integrate(tau, G))
    else:
        out["inverse_tau"] = CriterionVerdict(INCONCLUSIVE, {}, "Φ grows too slowly for a τ lattice of two decades")

    G = spec.dH(t) / t
    out["dH_over_t"] = _verdict(t, G, config, "dH_over_t", integrate(t, G))

    Ht = spec.H(t)
    tm = np.sqrt(t[1:] * t[:-1])
    dens = np.diff(Ht) / np.diff(t) / tm
    out["stieltjes_dH_over_t"] = _verdict(tm, dens, config, "stieltjes_dH_over_t", float(np.sum(np.diff(Ht) / tm)))

    G = Ht / t ** 2
    out["H_over_t2"] = _verdict(t, G, config, "H_over_t2", integrate(t, G))

    # ∫_0^Δ H(1/s) ds with s = e^{-u}
    u = np.linspace(math.log(delta), math.log(t_max), t.size)
    G = spec.H(np.exp(u)) * np.exp(-u)
    out["H_reciprocal"] = _verdict(u, G, config, "H_reciprocal", float(trapezoid(G, u)))

    eta_lo = max(float(spec.H(delta)), math.e)
    eta_hi = float(spec.H(t_max))
    if eta_hi > 100 * eta_lo:
        eta = _log_lattice(eta_lo, eta_hi, per_decade)
        G = 1.0 / spec.H_inv(eta)
        out["inverse_H"] = _verdict(eta, G, config, "inverse_H", integrate(eta, G))
    else:
        eta = np.linspace(eta_lo, eta_hi, 400)
        G = 1.0 / spec.H_inv(eta)
        # H(t_max) stays small: H grows at most logarithmically, decide on the range available
        w = eta > math.e
        q = bertrand_index(eta[w], G[w]) if w.sum() >= 3 else math.inf
        status, ev, why = _classify_q(q, config, "inverse_H")
        ev["partial_integral"] = float(trapezoid(G, eta))
        ev["variable_range"] = [eta_lo, eta_hi]
        out["inverse_H"] = CriterionVerdict(status, ev, why)

    G = np.log(spec.phi(t)) / t ** 2 if spec.family in ("power", "tlog", "table") else spec.H(t) / t ** 2
    out["log_phi_over_t2"] = _verdict(t, G, config, "log_phi_over_t2", integrate(t, G))

    statuses = {v.status for v in out.values()}
    agreement = len(statuses) == 1 and INCONCLUSIVE not in statuses
    return PhiSuiteResult(out, agreement)
