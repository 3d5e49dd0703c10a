import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.coefficients import (
    Angular, Constant, DegenerateLog, RadialProfile, RadialStretch, Sampled,
    coefficient_from_dict, dilatation, dilatation_from_mu, eval_mu,
    sample_field, tangent_dilatation,
)
from beltrami.errors import DegeneracyError, DomainError, ValidationError
from beltrami.geometry import (
    Annulus, Disk, DomainMask, GridSpec, Rectangle, SlitDisk, circle_arcs,
    domain_from_dict, make_mask,
)

EPS = np.finfo(float).eps


def test_eval_mu_examples():
    assert eval_mu(Constant(0.5), 0.3 + 0.1j) == 0.5
    assert abs(eval_mu(RadialStretch(K=3), 0.5) - 0.5) < 1e-15
    assert abs(eval_mu(Angular(0.5, 0, 1), 1j) + 0.5) < 1e-15


def test_radial_stretch_matches_finite_difference():
    # mu of z|z|^(K-1) from central differences
    K, z, h = 2.5, 0.3 + 0.4j, 1e-6
    f = lambda w: w * abs(w) ** (K - 1)
    fx = (f(z + h) - f(z - h)) / (2 * h)
    fy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    fz, fzb = 0.5 * (fx - 1j * fy), 0.5 * (fx + 1j * fy)
    assert abs(eval_mu(RadialStretch(K), z) - fzb / fz) < 1e-8


def test_radial_profile_power_matches_stretch():
    r = np.linspace(0.05, 1.0, 200)
    prof = RadialProfile(tuple(r), tuple(r ** 2))
    z = 0.3 - 0.2j
    assert abs(eval_mu(prof, z) - eval_mu(RadialStretch(2.0), z)) < 1e-4
    with pytest.raises(DomainError):
        eval_mu(prof, 0.01)
    with pytest.raises(ValidationError):
        RadialProfile((0.1, 0.2, 0.3), (1.0, 0.5, 2.0))


def test_dilatation_examples():
    assert dilatation(Constant(0), 0.2) == 1.0
    assert abs(dilatation_from_mu(0.5) - 3.0) < 1e-15
    assert abs(dilatation(DegenerateLog(), math.exp(-2)) - 3.0) < 1e-12
    with pytest.raises(DegeneracyError):
        dilatation_from_mu(1.0)


def test_tangent_dilatation_examples():
    assert tangent_dilatation(Constant(0), 0.3j, 0) == 1.0
    z = 0.4 + 0.7j
    assert abs(tangent_dilatation(Angular(0.5, 0, 1), z, 0) - 1 / 3) < 1e-15
    assert abs(tangent_dilatation(Angular(0.5, 0, -1), z, 0) - 3.0) < 1e-14
    with pytest.raises(ValidationError):
        tangent_dilatation(Constant(0.1), 0.5, 0.5)


def test_eval_errors():
    coef = Constant(0.2, domain=Disk())
    with pytest.raises(DomainError):
        eval_mu(coef, 2.0)
    with pytest.raises(DegeneracyError) as info:
        eval_mu(Constant(1.0), 0.1)
    assert info.value.location == 0.1


def test_degenerate_log_clamps():
    mu = eval_mu(DegenerateLog(), np.array([0.0, 1e-300, 0.5]))
    assert np.all(np.abs(mu) <= 1 - 1e-14)
    assert np.all(np.abs(mu) < 1)


def test_sample_field_examples():
    m16 = make_mask(Disk(), 16)
    f = sample_field(Constant(0.3), m16)
    assert np.all(f.values[m16.inside] == 0.3)
    assert np.all(f.values[~m16.inside] == 0)
    assert np.all(sample_field(Constant(0), m16).values == 0)
    m64 = make_mask(Annulus(0, 0.25, 1), 64)
    f = sample_field(RadialStretch(2), m64)
    assert np.allclose(np.abs(f.masked()), 1 / 3, atol=1e-15)
    assert f.clamped == 0


def test_sample_field_records_clamps():
    grid = GridSpec(0j, 1.0, 16)
    pts = grid.points()
    mask = DomainMask(grid, np.ones((16, 16), bool), Rectangle(0j, 1, 1))
    coef = DegenerateLog(z0=complex(pts[5, 5]))
    assert sample_field(coef, mask).clamped == 1


def test_sample_field_degeneracy_reports_cell():
    with pytest.raises(DegeneracyError) as info:
        sample_field(Constant(1.5), make_mask(Disk(), 16))
    assert isinstance(info.value.location, tuple)


def test_sampled_coefficient_interpolates():
    mask = make_mask(Disk(), 64)
    f = sample_field(Constant(0.25), mask)
    coef = Sampled(f)
    assert abs(eval_mu(coef, 0.1 + 0.1j) - 0.25) < 1e-14
    assert eval_mu(coef, 0.99 + 0.99j) == 0
    with pytest.raises(DomainError):
        eval_mu(coef, 5.0)


def test_gridspec_validation():
    assert GridSpec(0j, 1.0, 16).spacing == 0.125
    with pytest.raises(ValidationError):
        GridSpec(0j, 1.0, 8)
    with pytest.raises(ValidationError):
        GridSpec(0j, 1.0, 24)


def test_mask_must_be_connected():
    grid = GridSpec(0j, 1.0, 16)
    inside = np.zeros((16, 16), bool)
    inside[1:3, 1:3] = True
    inside[10:12, 10:12] = True
    with pytest.raises(ValidationError):
        DomainMask(grid, inside, Disk())


def test_mask_matches_descriptor_within_one_cell():
    for dom in (Disk(0.2j, 0.7), Annulus(0, 0.3, 1), Rectangle(0.5 + 0.5j, 0.5, 0.3)):
        m = make_mask(dom, 64)
        pts = m.points()
        h = m.spacing
        mismatch = m.inside != dom.contains(pts)
        assert not mismatch.any()
        near = np.abs(dom.level(pts)) < 2 * h
        assert np.all(near | (m.inside == (dom.level(pts) < 0)))


def test_slit_disk_mask_connected_and_arcs():
    m = make_mask(SlitDisk(0.0), 64)
    assert m.inside.sum() > 0
    arcs = circle_arcs(SlitDisk(0.2), 0.5 + 0.1j, 0.2)
    assert len(arcs) == 2
    total = sum(b - a for a, b in arcs)
    assert abs(total - 2 * math.pi) < 1e-9
    # a circle crossing the slit once is cut into a single arc
    assert len(circle_arcs(SlitDisk(0.5), 0.5, 0.25)) == 1


def test_circle_arcs_disk_boundary():
    arcs = circle_arcs(Disk(), 1.0, 0.5)
    assert len(arcs) == 1
    a, b = arcs[0]
    # exact half angle of a circle of radius 1/2 about 1 inside the unit disk
    half = math.acos(0.25)
    assert abs((b - a) - 2 * half) < 1e-9
    assert circle_arcs(Disk(), 0, 0.5) == [(0.0, 2 * math.pi)]
    assert circle_arcs(Disk(), 5, 0.5) == []


def test_domain_round_trip():
    for dom in (Disk(0.1j, 2), Annulus(0, 0.2, 1), SlitDisk(0.25), Rectangle(0j, 1, 2)):
        assert domain_from_dict(dom.to_dict()) == dom


def test_coefficient_round_trip():
    for c in (Constant(0.3 + 0.1j), RadialStretch(3, 0.1), Angular(0.4, 1j, -1), DegenerateLog(0.2)):
        assert coefficient_from_dict(c.to_dict()) == c
    prof = RadialProfile((0.1, 0.5, 1.0), (0.2, 0.6, 1.0))
    back = coefficient_from_dict(prof.to_dict())
    assert back.radii == prof.radii and back.values == prof.values


finite = st.floats(-3, 3, allow_nan=False)
points = st.builds(complex, finite, finite)


def _families():
    return st.one_of(
        st.builds(Constant, st.builds(complex, st.floats(-0.7, 0.7), st.floats(-0.7, 0.7))),
        st.builds(RadialStretch, st.floats(0.05, 50), points),
        st.builds(Angular, st.floats(0, 0.999), points, st.sampled_from([1, -1])),
        st.builds(DegenerateLog, points, st.sampled_from([1, -1])),
    )


@settings(max_examples=300, deadline=None)
@given(_families(), points, points)
def test_tangent_dilatation_bounds(coef, z, z0):
    if abs(z - z0) < 1e-9 or (hasattr(coef, "z0") and z == coef.z0):
        return
    K = dilatation(coef, z)
    kt = tangent_dilatation(coef, z, z0)
    assert 1 / K - 8 * EPS * K <= kt <= K + 8 * EPS * K


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 0.99), st.sampled_from([1, -1]), points, points, st.floats(-math.pi, math.pi))
def test_tangent_rotation_invariance(k, sign, z, z0, t):
    if abs(z - z0) < 1e-6:
        return
    rot = complex(math.cos(t), math.sin(t))
    base = tangent_dilatation(Angular(k, z0, sign), z, z0)
    # rotating z about z0 and the constant phase of mu together
    k1 = Constant(eval_mu(Angular(k, z0, sign), z) * rot ** 2)
    rotated = tangent_dilatation(k1, z0 + rot * (z - z0), z0)
    assert abs(base - rotated) <= 1e-12 * max(1.0, base)


@settings(max_examples=200, deadline=None)
@given(st.builds(complex, st.floats(-0.99, 0.99), st.floats(-0.99, 0.99)))
def test_dilatation_at_least_one(mu):
    if abs(mu) >= 1:
        return
    K = dilatation_from_mu(mu)
    assert K >= 1
    if abs(mu) > 1e-15:
        assert K > 1
    assert dilatation_from_mu(0) == 1
