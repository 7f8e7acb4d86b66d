import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialrsp.errors import DegeneratePoint, DegenerateWindow
from spatialrsp.geometry import OpticalGeometry, slit_amplitudes
from spatialrsp.postselect import (
    DetectorWindow,
    bucket_width,
    common_plane_placements,
    figures_from_overlaps,
    invert_target,
    prep_figures,
    prep_probability,
    remote_state_finite,
    remote_state_from_overlaps,
    remote_target_point,
    window_overlaps,
)
from spatialrsp.states import PureKet, bloch_angles, fidelity


def test_remote_ket_is_reversed_conjugate(table1):
    x, z = 60e-6, 0.4
    phi = slit_amplitudes(table1, x, z)
    ket = remote_target_point(table1, x, z)
    expected = PureKet(np.conj(phi[::-1])).normalized()
    assert abs(np.vdot(expected.amplitudes, ket.amplitudes)) == pytest.approx(1, abs=1e-12)


def test_focal_plane_centre_gives_plus_state(table1):
    ket = remote_target_point(table1, 0.0, table1.focal_length)
    assert ket.amplitudes == pytest.approx([1 / math.sqrt(2)] * 2)


def test_degenerate_point_at_envelope_zero(table1):
    with pytest.raises(DegeneratePoint):
        remote_target_point(table1, table1.first_zone_half_width, table1.focal_length)


def test_remote_state_from_overlaps_layout():
    phi = np.array([[4, 1 + 2j], [1 - 2j, 2]])
    rho = remote_state_from_overlaps(phi)
    assert rho == pytest.approx(np.array([[2, 1 + 2j], [1 - 2j, 4]]) / 6)
    with pytest.raises(DegenerateWindow):
        remote_state_from_overlaps(np.zeros((2, 2)))


def test_window_overlaps_small_width_tends_to_point(table1):
    x, z, w = 33e-6, 0.42, 1e-9
    values = window_overlaps(table1, x, w, z)
    phi = slit_amplitudes(table1, x, z)
    assert values / w == pytest.approx(np.outer(phi, phi.conj()), rel=1e-6)


def test_window_overlaps_independent_of_batch(table1):
    xs = np.array([-100e-6, 15e-6, 240e-6])
    batch = window_overlaps(table1, xs, 20e-6, 0.5)
    for i, x in enumerate(xs):
        assert np.array_equal(batch[..., i], window_overlaps(table1, x, 20e-6, 0.5))


def test_window_overlaps_hermitian_psd(table1):
    values = window_overlaps(table1, np.linspace(-300e-6, 300e-6, 9), 20e-6, 0.55)
    for i in range(values.shape[-1]):
        m = values[..., i]
        assert np.array_equal(m, m.conj().T)
        assert np.linalg.eigvalsh(m).min() > -1e-12 * np.trace(m).real


def test_image_plane_window_is_diagonal(table1):
    f = table1.focal_length
    m = window_overlaps(table1, 125e-6, 20e-6, 2 * f)
    assert m == pytest.approx(np.diag([20e-6 / 80e-6, 0]))


def test_bucket_detector_is_maximally_mixed(table1):
    for z in (table1.focal_length, 0.45, 0.57):
        rho = remote_state_finite(table1, DetectorWindow(0.0, math.inf, z))
        assert np.abs(rho.matrix - np.eye(2) / 2).max() < 1e-3
        fig = prep_figures(table1, DetectorWindow(0.0, math.inf, z))
        assert fig.probability == pytest.approx(1, abs=1e-6)
        assert fig.fidelity == pytest.approx(0.5, abs=1e-3)
        assert fig.purity == pytest.approx(0.5, abs=1e-3)


def test_bucket_width_window_collects_almost_everything(table1):
    z = table1.focal_length
    w = bucket_width(table1, z, missing=1e-2)
    p = prep_probability(table1, DetectorWindow(0.0, w, z))
    assert p == pytest.approx(1, abs=2e-2)


def test_near_point_detector_is_pure(table1):
    fig = prep_figures(table1, DetectorWindow(50e-6, 1e-9, 0.45))
    assert fig.fidelity >= 1 - 1e-6 and fig.purity >= 1 - 1e-6


def test_figures_vectorised_match_scalar(table1):
    xs = np.array([-50e-6, 70e-6])
    values = window_overlaps(table1, xs, 20e-6, 0.4)
    phi = slit_amplitudes(table1, xs, 0.4)
    P, F, Pur = figures_from_overlaps(values, phi)
    for i, x in enumerate(xs):
        fig = prep_figures(table1, DetectorWindow(x, 20e-6, 0.4))
        assert (P[i], F[i], Pur[i]) == pytest.approx((fig.probability, fig.fidelity, fig.purity))


def test_fidelity_matches_generic_functional(table1):
    w = DetectorWindow(80e-6, 20e-6, 0.5)
    rho = remote_state_finite(table1, w)
    target = remote_target_point(table1, w.x, w.z)
    assert fidelity(target, rho) == pytest.approx(prep_figures(table1, w).fidelity, abs=1e-12)


@given(x=st.floats(-300e-6, 300e-6), frac=st.floats(0, 0.95), width=st.floats(1e-6, 60e-6))
def test_figures_in_range(x, frac, width):
    g = OpticalGeometry.table1()
    z = g.focal_length * (1 + frac)
    try:
        fig = prep_figures(g, DetectorWindow(x, width, z))
    except DegeneratePoint:
        return
    assert 0 <= fig.probability <= 1
    assert 0 <= fig.fidelity <= 1
    assert 0.5 - 1e-9 <= fig.purity <= 1 + 1e-9


def test_invert_target_recovers_placement(table1):
    f = table1.focal_length
    x0, z0 = 47e-6, 1.3 * f
    target = remote_target_point(table1, x0, z0)
    zs = np.linspace(f, 1.6 * f, 31)
    xs = np.linspace(-table1.first_zone_half_width, table1.first_zone_half_width, 201)
    cands = invert_target(table1, target, zs, xs, angle_tol=1e-6)
    assert cands
    best = min(cands, key=lambda c: abs(c.z - z0) + abs(c.x - x0))
    th, ph = bloch_angles(*remote_target_point(table1, best.x, best.z).amplitudes)
    t0, p0 = bloch_angles(*target.amplitudes)
    assert abs(th - t0) < 1e-6 and abs(np.angle(np.exp(1j * (ph - p0)))) < 1e-5


def test_common_plane_symmetric_targets(taguchi):
    f = taguchi.focal_length
    a, ph = 0.742, -1.159
    t1 = PureKet([a, math.sqrt(1 - a * a) * np.exp(1j * ph)])
    t2 = PureKet([math.sqrt(1 - a * a), a * np.exp(-1j * ph)])
    zs = np.linspace(1.79 * f, 1.81 * f, 21)
    xs = np.linspace(-taguchi.first_zone_half_width, taguchi.first_zone_half_width, 2001)
    z, (p1, p2) = common_plane_placements(taguchi, [t1, t2], zs, xs, 20e-6)
    assert z in zs
    assert p1.x == pytest.approx(-p2.x, rel=1e-3)
    assert p1.fidelity == pytest.approx(p2.fidelity, abs=1e-4)
    assert max(p1.angle_error, p2.angle_error) <= 1e-2


def test_common_plane_picks_brightest_consistent_plane(taguchi):
    f = taguchi.focal_length
    xs = np.linspace(-taguchi.first_zone_half_width, taguchi.first_zone_half_width, 1001)
    zs = np.array([1.3 * f, 1.5 * f, 1.7 * f])
    # Targets taken from the grid itself are matched exactly in their own plane.
    targets = [remote_target_point(taguchi, x, zs[1]) for x in (-30e-6, 0.0, 30e-6)]
    z, placements = common_plane_placements(taguchi, targets, zs, xs, 20e-6, angle_tol=1e-6)
    assert z == zs[1]
    for p in placements:
        assert p.angle_error <= 1e-6
        assert p.probability == pytest.approx(
            prep_probability(taguchi, DetectorWindow(p.x, 20e-6, z)))


def test_common_plane_none_when_inconsistent(taguchi):
    f = taguchi.focal_length
    xs = np.linspace(-taguchi.first_zone_half_width, taguchi.first_zone_half_width, 201)
    targets = [PureKet([1.0, 0.3j]), PureKet([0.2, -1.0])]
    z, placements = common_plane_placements(taguchi, targets, [1.5 * f], xs, 20e-6, angle_tol=0.0)
    assert z is None and placements == [None, None]
