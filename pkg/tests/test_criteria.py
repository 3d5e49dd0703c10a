import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.coefficients import Angular, Constant, DegenerateLog
from beltrami.criteria import (
    FAILS, INCONCLUSIVE, SATISFIED, CircleNorm, CriterionVerdict,
    annular_weighted_integral, bertrand_index, circle_average_growth,
    circle_norm, divergence_test, exp_integrability, log_radii,
    partial_integrals, psi_family_test,
)
from beltrami.errors import QuadratureError, ValidationError
from beltrami.geometry import Disk, HalfDisk, make_mask
from beltrami.coefficients import sample_field


def one(z):
    return np.ones(np.shape(z))


def log_inv(z):
    return np.log(1 / np.abs(z))


def inv(z):
    return 1 / np.abs(z)


def log_sq(z):
    return np.log(1 / np.abs(z)) ** 2


def one_plus_log(z):
    return 1 + np.log(1 / np.abs(z))


BATTERY = [one, log_inv, inv, log_sq, one_plus_log]
RADII = log_radii(0.5)


def test_circle_norm_examples():
    r = np.array([0.5, 0.1, 0.01])
    n = circle_norm(one, 0, r, domain=Disk(0, 2))
    assert np.allclose(n.values, 2 * np.pi * r, rtol=1e-3)
    n = circle_norm(log_inv, 0, r)
    assert np.allclose(n.values, 2 * np.pi * r * np.log(1 / r), rtol=1e-3)
    n = circle_norm(one, 0, r, domain=HalfDisk(0, 1))
    assert np.allclose(n.values, np.pi * r, rtol=1e-3)


def test_circle_norm_off_center_arc():
    # circle of radius 1/2 about 1: only the arc inside the unit disk counts
    n = circle_norm(one, 1.0, [0.5], domain=Disk())
    assert abs(n.values[0] - 0.5 * 2 * math.acos(0.25)) < 1e-9


def test_circle_norm_rejects_nonfinite():
    with pytest.raises(QuadratureError) as info:
        circle_norm(lambda z: np.where(np.real(z) > 0, np.nan, 1.0), 0, [0.1])
    assert info.value.location[0] == 0.1


def test_circle_norm_of_coefficient_is_tangent_dilatation():
    # angular family with sign -1: K^T = K = 3 everywhere
    n = circle_norm(Angular(0.5, 0, -1), 0, [0.3, 0.1])
    assert np.allclose(n.values, 3 * 2 * np.pi * np.array([0.3, 0.1]))


def test_sampled_density_excludes_small_radii():
    mask = make_mask(Disk(), 64)
    field = sample_field(Constant(0.5), mask)
    n = circle_norm(field, 0, log_radii(0.5, decades=3))
    assert not n.usable[-1] and n.usable[0]


def test_divergence_examples():
    assert divergence_test(circle_norm(one, 0, RADII)).status == SATISFIED
    assert divergence_test(circle_norm(inv, 0, RADII)).status == FAILS
    assert divergence_test(circle_norm(log_inv, 0, RADII)).status == SATISFIED


def test_partial_integrals_closed_forms():
    n = circle_norm(one, 0, RADII)
    I = partial_integrals(n)
    assert np.allclose(I, np.log(RADII[0] / RADII) / (2 * np.pi), rtol=1e-10, atol=1e-14)
    n = circle_norm(inv, 0, RADII)
    I = partial_integrals(n)
    assert abs(I[-1] - (RADII[0] - RADII[-1]) / (2 * np.pi)) < 1e-3 * I[-1]


def test_divergence_zero_norm_is_infinite():
    n = circle_norm(lambda z: np.where(np.abs(z) < 1e-3, 0.0, 1.0), 0, RADII)
    v = divergence_test(n)
    assert v.status == SATISFIED
    assert math.isinf(v.evidence["partial_integrals"][-1])


def test_divergence_needs_four_decades():
    v = divergence_test(circle_norm(one, 0, log_radii(0.5, decades=2)))
    assert v.status == INCONCLUSIVE and v.reason


def test_verdict_requires_reason():
    with pytest.raises(ValidationError):
        CriterionVerdict(INCONCLUSIVE)


def test_circle_average_examples():
    assert circle_average_growth(circle_norm(log_inv, 0, RADII), "O(log)").status == SATISFIED
    assert circle_average_growth(circle_norm(one, 0, RADII), "O(log)").status == SATISFIED
    n = circle_norm(inv, 0, RADII)
    assert circle_average_growth(n, "O(log)").status == FAILS
    assert circle_average_growth(n, "o(loglog)").status == FAILS


def test_circle_average_arc_normalisation():
    n = circle_norm(one, 0, RADII, domain=HalfDisk(0, 1))
    assert np.allclose(n.average("circle"), 0.5, rtol=1e-3)
    assert np.allclose(n.average("arc"), 1.0, rtol=1e-3)


def test_annular_examples():
    eps, eps0 = 1e-5, 0.5
    a = annular_weighted_integral(one, 0, eps, eps0, "r^-2")
    assert abs(a.value - 2 * np.pi * math.log(eps0 / eps)) < 1e-6 * a.value
    assert a.verdict.status == SATISFIED
    a = annular_weighted_integral(log_inv, 0, eps, eps0, "r^-2")
    exact = np.pi * (math.log(1 / eps) ** 2 - math.log(1 / eps0) ** 2)
    assert abs(a.value - exact) < 1e-6 * exact
    assert a.verdict.status == FAILS
    a = annular_weighted_integral(log_inv, 0, eps, eps0, "(r log 1/r)^-2")
    exact = 2 * np.pi * (math.log(math.log(1 / eps)) - math.log(math.log(1 / eps0)))
    assert abs(a.value - exact) < 1e-4 * exact
    assert a.verdict.status == SATISFIED


def test_psi_family_examples():
    assert psi_family_test(one, 0, "1/t", eps0=0.5).status == SATISFIED
    assert psi_family_test(log_inv, 0, "1/(t log 1/t)", eps0=0.5).status == SATISFIED
    for Q in BATTERY:
        v = psi_family_test(Q, 0, "1/||Q||", eps0=0.5)
        assert np.allclose(v.evidence["lhs"], v.evidence["I"], rtol=1e-9)
        assert v.evidence["fubini_ok"], v.evidence["fubini_rel_error"]
        assert v.status == divergence_test(circle_norm(Q, 0, RADII)).status


def test_psi_fubini_with_angular_dependence():
    v = psi_family_test(Angular(0.6, 0, 1), 0, "1/||Q||", eps0=0.5)
    assert v.evidence["fubini_ok"]


def test_exp_integrability_examples():
    eps0 = 0.5
    val = exp_integrability(one, 0, 1.0, eps0)
    assert abs(val - math.e * np.pi * eps0 ** 2) < 1e-3 * val
    val = exp_integrability(log_inv, 0, 1.0, eps0)
    assert abs(val - 2 * np.pi * eps0) < 1e-3 * val
    assert exp_integrability(lambda z: 2 * log_inv(z), 0, 1.0, eps0) == math.inf
    assert exp_integrability(lambda z: 1e4 * one(z), 0, 1.0, eps0) == math.inf


def test_bertrand_index_reference_shapes():
    v = np.linspace(10, 100, 50)
    assert abs(bertrand_index(v, 1 / v)) < 1e-12
    assert abs(bertrand_index(v, 1 / (v * np.log(v) ** 2)) - 2) < 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.floats(0.1, 10))
def test_divergence_scale_invariance(k, c):
    Q = BATTERY[k]
    base = divergence_test(circle_norm(Q, 0, RADII)).status
    scaled = divergence_test(circle_norm(lambda z: c * Q(z), 0, RADII)).status
    assert base == scaled


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 4), st.floats(0.0, 1.0))
def test_monotonicity(k, s):
    Q2 = BATTERY[k]
    Q1 = lambda z: s * Q2(z) * (0.5 + 0.5 * np.cos(np.angle(z)) ** 2)
    n1 = circle_norm(Q1, 0, RADII)
    n2 = circle_norm(Q2, 0, RADII)
    assert np.all(n1.values <= n2.values * (1 + 1e-12))
    I1, I2 = partial_integrals(n1), partial_integrals(n2)
    assert np.all(I1 >= I2 * (1 - 1e-12))


def test_degenerate_coefficient_dilatation_battery():
    # K^T of the degenerate log family about z0 equals 1 + log(1/r) for r < 1
    n = circle_norm(DegenerateLog(0j, -1), 0, RADII)
    assert np.allclose(n.values, 2 * np.pi * RADII * (1 + np.log(1 / RADII)), rtol=1e-9)
    assert divergence_test(n).status == SATISFIED


def test_circle_norm_radii_must_decrease():
    with pytest.raises(ValidationError):
        CircleNorm(0j, np.array([0.1, 0.2]), np.ones(2), np.ones(2), np.ones(2, bool))
