import math

import numpy as np
import pytest

from beltrami.errors import UnsupportedError
from beltrami.geometry import Annulus, Disk, Ellipse, SlitDisk
from beltrami.primeends import (
    SlitMap, build_prime_end_space, cross_cut_chain, extension_continuity_check,
    metric_equivalence, prime_end_metric, slit_test_battery,
)

# gap between the two sides of the slit at x = 1/2 under the explicit map,
# frozen from an independent evaluation: 2 sqrt(1 - 1/17^2)
SLIT_GAP = 1.9965367939384873


@pytest.fixture(scope="module")
def slit():
    return build_prime_end_space(SlitDisk(0.0), 64)


def test_disk_metric_is_chordal():
    sp = build_prime_end_space(Disk(), 64)
    assert prime_end_metric(sp, "circle:0", "circle:0") == 0.0
    assert abs(prime_end_metric(sp, "circle:0", "circle:32") - 2.0) < 1e-12


def test_slit_map_is_conformal_onto_disk():
    g = SlitMap(0.0)
    rng = np.random.default_rng(1)
    z = 0.95 * np.sqrt(rng.random(200)) * np.exp(2j * np.pi * rng.random(200))
    w = g(z)
    assert np.all(np.abs(w) < 1)
    assert np.abs(g.inverse(w) - z).max() < 1e-10
    t = np.linspace(0.1, 6.1, 50)
    assert np.abs(np.abs(g(np.exp(1j * t))) - 1).max() < 1e-12


def test_slit_sides_are_distinct_ends(slit):
    up, low = slit.end_at(0.5, "upper"), slit.end_at(0.5, "lower")
    assert up.support == low.support
    assert abs(prime_end_metric(slit, up, low) - SLIT_GAP) < 1e-9


def test_slit_gap_matches_closed_form():
    assert abs(SLIT_GAP - 2 * math.sqrt(1 - 1 / 17 ** 2)) < 1e-12


def test_tip_is_limit_of_both_sides(slit):
    tip = slit["tip"]
    for side in ("upper", "lower"):
        d = [prime_end_metric(slit, slit.end_at(x, side), tip) for x in (1e-2, 1e-4, 1e-8)]
        assert d[0] > d[1] > d[2] and d[2] < 1e-3


def test_metric_axioms_on_lattice(slit):
    refs = slit.refs()[::7]
    d = np.abs(refs[:, None] - refs[None, :])
    assert np.allclose(d, d.T)
    assert np.all(d[:, :, None] <= d[:, None, :] + d.T[None, :, :] + 1e-15)


def test_reference_maps_induce_same_topology(slit):
    g = SlitMap(0.0)
    a = 0.3 - 0.2j

    def other(z):
        w = g(z)
        return (w - a) / (1 - np.conj(a) * w)

    rep = metric_equivalence(slit, other, slit_test_battery(slit))
    assert rep.equivalent
    assert [c[0] for c in rep.classifications] == [True, False, False, True]


def test_disk_chain():
    sp = build_prime_end_space(Disk(), 64)
    chain = cross_cut_chain(sp, "circle:0", 0.5, 5)
    assert np.all(np.diff(chain.radii) < 0)
    assert all(chain.separating)
    for a, b in chain.arcs:
        assert abs(0.5 * (a + b) - math.pi) < 1e-6
        assert b - a < math.pi + 1e-9
    assert len(cross_cut_chain(sp, "circle:0", 0.5, 0).radii) == 0


def test_slit_chain_side_selection(slit):
    for side, lo, hi in (("upper", 0.0, math.pi), ("lower", math.pi, 2 * math.pi)):
        chain = cross_cut_chain(slit, slit.end_at(0.5, side), 0.25, 4)
        assert all(chain.separating)
        for a, b in chain.arcs:
            assert abs(a - lo) < 1e-9 and abs(b - hi) < 1e-9


def test_identity_chain_oscillation_is_arc_diameter():
    sp = build_prime_end_space(Disk(), 32)
    rep = extension_continuity_check(lambda z: np.asarray(z), sp, eps0=0.5, depth=5)
    assert rep.passed
    for vals in rep.oscillations.values():
        assert all(v <= 2 * 0.5 * 2.0 ** -(m + 1) + 1e-12 for m, v in enumerate(vals))


def test_slit_map_extension_passes(slit):
    rep = extension_continuity_check(SlitMap(0.0), slit)
    assert rep.passed
    up = rep.boundary_values["slit:32:upper"]
    low = rep.boundary_values["slit:32:lower"]
    assert abs(up - low) > 1.0


def test_identity_on_slit_fails_injectivity(slit):
    rep = extension_continuity_check(lambda z: np.asarray(z), slit)
    assert not rep.injective and not rep.passed


def test_annulus_ends_and_unsupported():
    sp = build_prime_end_space(Annulus(0, 0.5, 1.0), 16)
    assert {e.component for e in sp.ends} == {0, 1}
    with pytest.raises(UnsupportedError):
        build_prime_end_space(Ellipse(), 16)


def test_end_rows():
    sp = build_prime_end_space(SlitDisk(0.25), 8)
    rows = sp.rows()
    assert len(rows) == len(sp.ends)
    assert {r[3] for r in rows} == {"none", "upper", "lower", "tip"}
