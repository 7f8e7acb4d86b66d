import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialrsp.errors import DomainError
from spatialrsp.geometry import OpticalGeometry
from spatialrsp.qudit import (
    SlitArraySettings,
    discarded_probability,
    entangled_qudit_state,
    pair_phases,
    qudit_postselect_reachability,
    qudit_prepared_state,
    qudit_prepared_state_finite,
    qudit_settings_for_target,
    random_targets,
    slit_indices,
)
from spatialrsp.states import PureKet, fidelity, ket_overlap


def test_slit_indices():
    assert slit_indices(5).tolist() == [-2, -1, 0, 1, 2]
    assert slit_indices(2).tolist() == [-0.5, 0.5]
    with pytest.raises(DomainError):
        slit_indices(4)


def test_entangled_state_pairs_opposite_slits():
    psi = entangled_qudit_state(None, 3)
    c = psi.amplitudes.reshape(3, 3)
    assert c == pytest.approx(np.fliplr(np.eye(3)) / math.sqrt(3))


def test_pair_phases_need_aperture_distance():
    g = OpticalGeometry.table1(num_slits=3)
    with pytest.raises(DomainError):
        pair_phases(g)
    g = OpticalGeometry.table1(num_slits=3, aperture_distance=0.5)
    mu = pair_phases(g)
    assert mu[0] == pytest.approx(mu[2]) and mu[1] == 0


def test_uniform_target():
    s = qudit_settings_for_target(PureKet(np.ones(3)))
    ket, p = qudit_prepared_state(s)
    assert p == pytest.approx(1 / 3, abs=1e-12)
    assert ket.amplitudes == pytest.approx(np.ones(3) / math.sqrt(3))


def test_basis_target_has_one_zero_angle():
    s = qudit_settings_for_target(PureKet.basis(5, 1))
    assert np.count_nonzero(s.thetas == 0) == 1
    assert np.count_nonzero(np.isclose(s.thetas, math.pi / 4)) == 4


@given(st.sampled_from([3, 5, 7]), st.integers(0, 2**32 - 1))
def test_probability_is_one_over_d(D, seed):
    t = PureKet(random_targets(D, 1, np.random.default_rng(seed))[0])
    s = qudit_settings_for_target(t)
    ket, p = qudit_prepared_state(s)
    assert p == pytest.approx(1 / D, abs=1e-12)
    assert ket_overlap(ket, t.normalized()) == pytest.approx(1, abs=1e-12)
    assert discarded_probability(s) == pytest.approx(1 - 1 / D, abs=1e-12)


def test_settings_validation():
    with pytest.raises(DomainError):
        SlitArraySettings([0.1, 1.0], [0, 0])


def test_finite_focal_window_close_to_target():
    g = OpticalGeometry.table1(num_slits=3)
    t = PureKet([1, 1j, -0.5]).normalized()
    rho = qudit_prepared_state_finite(qudit_settings_for_target(t), g, 5e-6)
    assert fidelity(t, rho.validate()) > 0.99


def test_uniform_target_matched_at_focal_centre():
    g = OpticalGeometry.table1(num_slits=3)
    f = g.focal_length
    rep = qudit_postselect_reachability(g, [0.0], [f], targets=[np.ones(3)], threshold=1 - 1e-12)
    assert rep.matched == 1


def test_random_targets_rarely_reachable():
    g = OpticalGeometry.table1(num_slits=3)
    f = g.focal_length
    xs = np.linspace(-300e-6, 300e-6, 61)
    zs = np.linspace(f, 1.9 * f, 10)
    rep = qudit_postselect_reachability(g, xs, zs, samples=50, seed=3)
    assert rep.fraction < 0.2
