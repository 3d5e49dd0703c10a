import math

import numpy as np
import pytest

from beltrami.coefficients import Angular, RadialStretch
from beltrami.errors import PreconditionError, ValidationError
from beltrami.geometry import Complement, Disk, GridSpec, MappedShape, Rectangle
from beltrami.modulus import (
    CondenserSpec, condenser_capacity, identity_map, mobius_map,
    plane_minorant_check, radial_segments, radial_stretch_map,
    ring_inequality_check,
)


def one(z):
    return np.ones(np.shape(z))


def annulus_spec(n, r=1.0, R=math.e):
    return CondenserSpec(GridSpec(0j, R * 1.05, n), Disk(0, r), Complement(Disk(0, R)))


def test_annulus_capacity():
    res = condenser_capacity(annulus_spec(256))
    assert abs(res.value - 2 * math.pi) < 0.02 * 2 * math.pi
    assert res.residual < 1e-8


def test_unit_square_opposite_sides():
    sq = Rectangle(0.5 + 0.5j, 0.5, 0.5)
    spec = CondenserSpec(GridSpec(0.5 + 0.5j, 0.625, 256),
                         Rectangle(-0.1 + 0.5j, 0.1, 0.7), Rectangle(1.1 + 0.5j, 0.1, 0.7), domain=sq)
    assert abs(condenser_capacity(spec).value - 1.0) < 0.01


def test_identical_or_touching_plates_rejected():
    g = GridSpec(0j, 2.0, 64)
    with pytest.raises(ValidationError):
        condenser_capacity(CondenserSpec(g, Disk(0, 0.5), Disk(0, 0.5)))
    with pytest.raises(ValidationError):
        condenser_capacity(CondenserSpec(g, Disk(-0.5, 0.5), Disk(0.52, 0.5)))


def test_symmetry_is_exact():
    g = GridSpec(0j, 1.0, 128)
    E, F = Disk(-0.4, 0.2), Disk(0.5j, 0.15)
    a = condenser_capacity(CondenserSpec(g, E, F, Disk()))
    b = condenser_capacity(CondenserSpec(g, F, E, Disk()))
    assert a.value == b.value


def test_monotone_in_plates():
    g = GridSpec(0j, 1.0, 128)
    F = Disk(0.5, 0.2)
    small = condenser_capacity(CondenserSpec(g, Disk(-0.5, 0.1), F, Disk())).value
    big = condenser_capacity(CondenserSpec(g, Disk(-0.5, 0.2), F, Disk())).value
    assert small <= big


def test_grid_refinement_converges():
    vals = [condenser_capacity(annulus_spec(n)).value for n in (64, 128, 256)]
    assert abs(vals[1] - vals[2]) < abs(vals[0] - vals[1])


def test_mobius_invariance():
    g = GridSpec(0j, 1.0, 512)
    E, F = Disk(-0.4, 0.2), Disk(0.3 + 0.3j, 0.2)
    base = condenser_capacity(CondenserSpec(g, E, F, Disk())).value
    m = mobius_map(0.35 - 0.2j)
    moved = CondenserSpec(g, MappedShape(E, m.inverse), MappedShape(F, m.inverse), MappedShape(Disk(), m.inverse))
    assert abs(condenser_capacity(moved).value - base) < 0.03 * base


def test_potential_and_error_estimate():
    res = condenser_capacity(annulus_spec(128), keep_potential=True, estimate_error=True)
    u = res.potential
    assert np.nanmin(u) >= -1e-9 and np.nanmax(u) <= 1 + 1e-9
    assert res.error_estimate is not None and res.error_estimate < 0.01


def test_plane_minorant_segments():
    E, F = radial_segments(0.1, 1.0)
    res = plane_minorant_check(E, F, 0.1, 1.0, n=256)
    assert abs(res.bound - 2 / math.pi * math.log(10)) < 1e-12
    assert res.holds and res.margin > 0


def test_plane_minorant_full_circles():
    # circles do not meet the intermediate circles: the check refuses them
    E, F = Disk(0, 1.0), Complement(Disk(0, math.e))
    with pytest.raises(PreconditionError):
        plane_minorant_check(E, F, 1.0, math.e)
    # the joining-family capacity itself still exceeds the plane bound
    assert condenser_capacity(annulus_spec(256)).value >= 2 / math.pi * 1.0


def test_plane_minorant_rejects_equal_radii():
    E, F = radial_segments(0.5, 0.5 + 1e-9)
    with pytest.raises(ValidationError):
        plane_minorant_check(E, F, 0.5, 0.5)


def test_ring_identity_is_sharp():
    res = ring_inequality_check(identity_map(), 0, 0.2, 0.6, one, n=256)
    exact = 2 * math.pi / math.log(3)
    assert abs(res.lhs - exact) < 0.03 * exact
    assert abs(res.rhs - exact) < 1e-6 * exact
    assert res.holds


def test_ring_mobius_conformal():
    res = ring_inequality_check(mobius_map(0.3 + 0.2j), 0, 0.2, 0.6, one, domain=Disk(), n=256)
    exact = 2 * math.pi / math.log(3)
    assert abs(res.lhs - exact) < 0.03 * exact
    assert res.holds


@pytest.mark.parametrize("z0", [0j, 0.3 + 0.1j])
def test_ring_radial_stretch_holds(z0):
    res = ring_inequality_check(radial_stretch_map(2.0), z0, 0.1, 0.4, RadialStretch(2.0), n=256)
    assert res.holds
    assert res.slack > -0.05


def test_ring_angular_coefficient_upper_bound_density():
    # with Q = K_mu the right side only grows, so the identity map still passes
    res = ring_inequality_check(identity_map(), 0, 0.2, 0.6, Angular(0.5, 0, -1), n=128)
    assert res.holds and res.slack > 0.5
