import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialrsp.errors import DomainError
from spatialrsp.povm import (
    CORRECTIONS,
    OUTCOMES,
    PAULI,
    PovmSettings,
    compositional_figures,
    detector_layout,
    oplus,
    outcome_probability,
    point_prepared_state,
    port_probability,
    povm_elements,
    povm_fidelity,
    povm_figures,
    povm_purity,
    remote_state_povm_finite,
    settings_for_target,
    target_ket,
    total_probability,
    wrap_position,
)
from spatialrsp.states import PureKet, fidelity, ket_overlap

settings_st = st.builds(PovmSettings, st.floats(0, math.pi / 4), st.floats(-math.pi, math.pi))


@given(st.floats(0, math.pi / 4))
def test_elements_complete_and_positive(Theta):
    pi_h, pi_v = povm_elements(Theta)
    assert np.array_equal(pi_h + pi_v, np.eye(2))
    for m in (pi_h, pi_v):
        assert np.linalg.eigvalsh(m).min() >= -1e-15


def test_port_probability_half(table1):
    for T in np.linspace(0, math.pi / 4, 7):
        assert port_probability(T, "H") == pytest.approx(0.5)


def test_corrections_table():
    assert CORRECTIONS == {(1, "V"): "I", (2, "V"): "Z", (1, "H"): "X", (2, "H"): "Y"}


@given(settings_st)
def test_pauli_correction_recovers_target(s):
    target = target_ket(s)
    for outcome in OUTCOMES:
        ket, U = point_prepared_state(s, outcome)
        fixed = PureKet(U @ ket.amplitudes)
        assert ket_overlap(target, fixed) == pytest.approx(1, abs=1e-12)


@given(st.floats(0.001, 0.999), st.floats(-3.1, 3.1))
def test_settings_round_trip(a, chi):
    target = PureKet([a, math.sqrt(1 - a * a) * np.exp(1j * chi)])
    s = settings_for_target(target)
    assert ket_overlap(target_ket(s), target) == pytest.approx(1, abs=1e-12)


def test_settings_validation():
    with pytest.raises(DomainError):
        PovmSettings(1.0)
    with pytest.raises(DomainError):
        PovmSettings(0.1, 4.0)


def test_layout(table1):
    L = table1.focal_half_period
    s = PovmSettings(0.2, 1.0)
    lay = detector_layout(s, table1)
    f, k, d = table1.focal_length, table1.k, table1.slit_separation
    assert lay.x1V == pytest.approx(f * 1.0 / (k * d))
    assert lay.x2V == pytest.approx(lay.x1V - L)
    assert lay.x1H == pytest.approx(-lay.x1V)
    assert lay.x2H == pytest.approx(-lay.x2V)


@given(st.floats(-1e-2, 1e-2))
def test_wrap_into_interval(x):
    L = 6e-4
    w = wrap_position(x, L)
    assert -L <= w < L
    assert (x - w) / (2 * L) == pytest.approx(round((x - w) / (2 * L)), abs=1e-6)
    assert oplus(w, L, L) == pytest.approx(wrap_position(x + L, L))


def test_total_probability_oracle(table1):
    # detectors at 0 and L: window area of the sinc^2 density
    k, a, f = table1.k, table1.slit_half_width, table1.focal_length
    L = table1.focal_half_period
    approx = k * a / (math.pi * f) * 20e-6 * (1 + np.sinc(k * a * L / (math.pi * f)) ** 2)
    assert total_probability(0.0, table1, 20e-6) == pytest.approx(approx, rel=1e-3)
    assert total_probability(0.0, table1, 20e-6) == pytest.approx(0.0153, abs=1e-4)


@given(settings_st)
def test_outcomes_sum_to_total(s):
    from spatialrsp.geometry import OpticalGeometry
    g = OpticalGeometry.table1()
    parts = sum(outcome_probability(s, o, g, 20e-6) for o in OUTCOMES)
    assert parts == pytest.approx(total_probability(s, g, 20e-6), rel=1e-9)


def test_symmetric_setting_equal_clicks(table1):
    s = PovmSettings(math.pi / 8, 0.0)
    p = {o: outcome_probability(s, o, table1, 20e-6) for o in OUTCOMES}
    assert p[(1, "V")] == pytest.approx(p[(1, "H")], rel=1e-12)
    assert p[(2, "V")] == pytest.approx(p[(2, "H")], rel=1e-12)


@pytest.mark.parametrize("Theta,chi", [(math.pi / 8, 0.0), (0.3, -2.0), (0.05, 2.7)])
def test_closed_forms_equal_composition(table1, Theta, chi):
    s = PovmSettings(Theta, chi)
    for o in OUTCOMES:
        F, P = compositional_figures(s, o, table1, 20e-6)
        assert povm_fidelity(s, o, table1, 20e-6) == pytest.approx(F, abs=1e-12)
        assert povm_purity(s, o, table1, 20e-6) == pytest.approx(P, abs=1e-12)


def test_reference_setting_figures(table1):
    fig = povm_figures(PovmSettings(math.pi / 8), table1, 20e-6)
    assert fig.fidelity == pytest.approx(0.9995, abs=2e-4)
    assert fig.purity == pytest.approx(0.9989, abs=3e-4)


def test_finite_state_physical(table1):
    rho = remote_state_povm_finite(PovmSettings(0.3, 1.0), (2, "H"), table1, 20e-6, corrected=True)
    rho.validate()
    assert fidelity(target_ket(PovmSettings(0.3, 1.0)), rho) > 0.999


def test_basis_target_is_unblurred(table1):
    assert povm_fidelity(PovmSettings(0.0), (1, "V"), table1, 20e-6) == 1.0
