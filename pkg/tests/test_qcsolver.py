import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beltrami.coefficients import Angular, Constant, DegenerateLog, RadialStretch
from beltrami.conformal import annulus_map, compose_normalized, cr_defect, riemann_map
from beltrami.errors import SolverError, TopologyError, UnsupportedError, ValidationError
from beltrami.geometry import Annulus, Disk, Ellipse, GridSpec, Rectangle, SlitDisk, SquareFrame, make_mask
from beltrami.modulus import CondenserSpec, condenser_capacity
from beltrami.geometry import Complement
from beltrami.qcsolver import (
    PolarOperators, beltrami_residual, delta_study, jacobian_check, solve_beltrami,
)

sys.path.insert(0, str(Path(__file__).parent))
from oracles import szego_boundary_map  # noqa: E402

DISK = make_mask(Disk(), 128)


def test_identity():
    sol = solve_beltrami(Constant(0.0), DISK)
    pts = DISK.points()
    assert np.abs(sol.f.values - pts).max() < 1e-14
    assert sol.residual_stats["l2"] < 1e-12
    assert jacobian_check(sol).violations == 0


def test_affine_solution():
    mask = make_mask(Disk(), 256)
    sol = solve_beltrami(Constant(0.3), mask)
    pts = mask.points()
    exact = (pts + 0.3 * np.conj(pts)) / 1.3
    assert np.abs(sol.f.values - exact)[mask.inside].max() < 1e-6
    rep = jacobian_check(sol)
    assert rep.violations == 0
    deep = mask.inside & (np.abs(pts) < 1 - 2 * mask.spacing)
    assert np.allclose(sol.jacobian[deep], (1 - 0.09) / 1.69, atol=1e-8)


def test_radial_stretch_solution():
    mask = make_mask(Disk(), 256)
    sol = solve_beltrami(RadialStretch(2.0), mask)
    pts = mask.points()
    away = mask.inside & (np.abs(pts) > 2 * mask.spacing)
    assert np.abs(sol.f.values - pts * np.abs(pts))[away].max() < 1e-3


def test_exterior_is_conformal():
    sol = solve_beltrami(Constant(0.3), DISK)
    z = 1.5 * np.exp(1j * np.linspace(0, 6, 7))
    # outside the support the principal solution is z + k/z
    assert np.allclose(sol.principal(z), z + 0.3 / z, atol=1e-12)


def test_cauchy_transform_of_monomial():
    # T[conj(z)^m] inside the unit disk: conj(z)^{m+1}/(m+1) - correction on modes
    ops = PolarOperators(0j, 1.0, 64, 64)
    pts = ops.points()
    h = np.conj(pts) ** 2
    T, S, _ = ops.transforms(ops.to_modes(h))
    Tv = ops.from_modes(T)
    # T(zbar^2 χ) = zbar^3/3 inside (no analytic correction since ∫ zbar^2 zbar^k... vanish)
    assert np.abs(Tv - np.conj(pts) ** 3 / 3).max() < 1e-3


def test_residual_monotone_after_three_steps():
    sol = solve_beltrami(Angular(0.7, 0, 1), DISK)
    hist = sol.history[3:]
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_degenerate_truncated_jacobian():
    mask = make_mask(Disk(), 256)
    sol = solve_beltrami(DegenerateLog(0), mask, delta=1e-3)
    assert jacobian_check(sol).fraction <= 1e-3
    assert math.isfinite(sol.residual_stats["l2"])


def test_delta_study_cauchy():
    study = delta_study(DegenerateLog(0), make_mask(Disk(), 64))
    d = study.differences
    assert all(b <= a + 1e-12 for a, b in zip(d, d[1:]))


def test_invalid_delta_and_method():
    with pytest.raises(ValidationError):
        solve_beltrami(Constant(0.1), DISK, delta=0.0)
    with pytest.raises(ValidationError):
        solve_beltrami(Constant(0.1), DISK, method="nope")


def test_divergence_reported():
    with pytest.raises(SolverError):
        solve_beltrami(Angular(0.9, 0, -1), DISK, maxiter=3)


def test_fft_method_agrees_roughly():
    sol = solve_beltrami(Constant(0.3), DISK, method="fft")
    pts = DISK.points()
    exact = (pts + 0.3 * np.conj(pts)) / 1.3
    assert np.abs(sol.f.values - exact)[DISK.inside].max() < 2e-2


@settings(max_examples=10, deadline=None)
@given(st.floats(-0.6, 0.6), st.floats(-0.6, 0.6))
def test_constant_coefficient_is_affine(a, b):
    k = complex(a, b)
    if abs(k) > 0.8:
        return
    sol = solve_beltrami(Constant(k), make_mask(Disk(), 32))
    pts = DISK.points()[::4, ::4]
    pts = pts[np.abs(pts) < 1]
    exact = (pts + k * np.conj(pts)) / (1 + k)
    assert np.abs(sol(pts) - exact).max() < 1e-9


def test_beltrami_residual_pointwise():
    sol = solve_beltrami(Angular(0.5, 0, 1), DISK)
    z = np.array([0.3 + 0.2j, -0.5 + 0.1j, 0.1 - 0.6j])
    assert beltrami_residual(sol, Angular(0.5, 0, 1), z).max() < 1e-3


def _ellipse(a, b, n):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return a * np.cos(t) + 1j * b * np.sin(t), -a * np.sin(t) + 1j * b * np.cos(t)


def test_riemann_map_disks():
    z = np.array([0.5, 0.3j, -0.2 - 0.4j])
    g = riemann_map(make_mask(Disk(), 64))
    assert np.abs(g(z) - z).max() < 1e-6
    assert np.abs(np.abs(g.boundary_images[0]) - 1).max() < 1e-6
    g2 = riemann_map(make_mask(Disk(0, 2.0), 64))
    assert np.abs(g2(z) - z / 2).max() < 1e-6


def test_riemann_map_ellipse_matches_szego_oracle():
    z, dz = _ellipse(1.0, 0.6, 400)
    w = szego_boundary_map(z, dz)
    g = riemann_map(make_mask(Ellipse(0, 1.0, 0.6), 128))
    assert np.abs(np.angle(g(z) / w)).max() < 1e-3
    assert g.cr_defect < 1e-4


def test_riemann_map_inverse_and_orientation():
    g = riemann_map(make_mask(Rectangle(0, 1.0, 0.5), 128))
    w = np.array([0.2 + 0.1j, -0.5j, 0.7])
    assert np.abs(g(g.inverse(w)) - w).max() < 1e-9
    steps = np.angle(np.roll(g.boundary_images[0], -1) / g.boundary_images[0])
    assert np.all(steps > 0)


def test_riemann_map_rejects_wrong_topology():
    with pytest.raises(TopologyError):
        riemann_map(make_mask(Annulus(0, 0.5, 1.0), 64))
    with pytest.raises(UnsupportedError):
        riemann_map(make_mask(SlitDisk(0.0), 64))
    with pytest.raises(TopologyError):
        annulus_map(DISK)


@pytest.mark.parametrize("center", [0j, 0.3 - 0.2j])
def test_annulus_map_round(center):
    g = annulus_map(make_mask(Annulus(center, 0.5, 1.0), 64))
    assert abs(g.r_inner - 0.5) < 0.005
    assert g.cr_defect < 1e-4


def test_square_frame_modulus_matches_capacity():
    g = annulus_map(make_mask(SquareFrame(0, 1.0, 0.5), 128))
    spec = CondenserSpec(GridSpec(0j, 1.1, 512), Rectangle(0, 0.5, 0.5), Complement(Rectangle(0, 1, 1)))
    cap = condenser_capacity(spec).value
    assert abs(2 * math.pi / math.log(1 / g.r_inner) - cap) < 0.02 * cap
    assert g.cr_defect < 1e-4


def test_compose_identity():
    sol = solve_beltrami(Constant(0.0), DISK)
    comp = compose_normalized(sol)
    pts = DISK.points()[DISK.inside]
    assert np.abs(comp.values[DISK.inside] - pts).max() < 1e-6


def test_compose_affine_lands_on_disk():
    sol = solve_beltrami(Constant(0.3), DISK)
    comp = compose_normalized(sol)
    assert np.abs(np.abs(comp.boundary_images[0]) - 1).max() < 1e-2
    # composition keeps the Beltrami coefficient
    z = np.array([0.2 + 0.1j, -0.4j])
    assert beltrami_residual(comp, Constant(0.3), z).max() < 1e-3


def test_compose_radial_stretch_is_rotation_of_f():
    mask = make_mask(Disk(), 128)
    sol = solve_beltrami(RadialStretch(2.0), mask)
    comp = compose_normalized(sol)
    m = mask.inside
    ratio = comp.values[m] / np.where(np.abs(sol.f.values[m]) > 0, sol.f.values[m], 1)
    big = np.abs(sol.f.values[m]) > 0.05
    rot = np.median(ratio[big])
    assert abs(abs(rot) - 1) < 1e-3
    assert np.abs(comp.values[m] - rot * sol.f.values[m]).max() < 1e-3


def test_mobius_postcomposition_keeps_residual():
    sol = solve_beltrami(Angular(0.4, 0, 1), DISK)
    comp = compose_normalized(sol)
    a = 0.3 + 0.2j

    def moved(z):
        w = comp(z)
        return (w - a) / (1 - np.conj(a) * w)

    z = np.array([0.2 + 0.1j, -0.4j, 0.5])
    r1 = beltrami_residual(comp, Angular(0.4, 0, 1), z)
    r2 = beltrami_residual(moved, Angular(0.4, 0, 1), z)
    assert np.abs(r1 - r2).max() < 1e-4


def test_cr_defect_detects_non_analytic():
    z = np.array([0.1, 0.2j, 0.3 + 0.3j])
    assert cr_defect(lambda w: w * w, z) < 1e-8
    assert cr_defect(np.conj, z) > 0.5
