import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spatialrsp.errors import DomainError
from spatialrsp.geometry import (
    OpticalGeometry,
    Regime,
    classify_regime,
    fraunhofer_amplitude,
    fresnel_amplitude,
    fresnel_amplitude_special,
    image_plane_amplitude,
    line_overlaps,
    propagation_params,
    slit_amplitude,
    slit_amplitudes,
)


def test_presets(table1, taguchi):
    assert (table1.slit_half_width, table1.slit_separation) == (40e-6, 250e-6)
    assert table1.wavelength == 670e-9 and table1.focal_length == 0.3
    assert (taguchi.slit_half_width, taguchi.slit_separation) == (20e-6, 150e-6)
    assert taguchi.wavelength == 810e-9 and taguchi.focal_length == 0.05


def test_offsets_and_labels(table1):
    assert table1.labels == ("l", "r")
    assert table1.offsets == pytest.approx([-125e-6, 125e-6])
    g5 = OpticalGeometry.table1(num_slits=5)
    assert g5.offsets == pytest.approx(np.arange(-2, 3) * 250e-6)


@pytest.mark.parametrize("kwargs", [
    dict(slit_separation=70e-6),
    dict(wavelength=-1.0),
    dict(num_slits=4),
])
def test_invalid_geometry(kwargs):
    with pytest.raises(DomainError):
        OpticalGeometry.table1(**kwargs)


def test_propagation_params_closed_form(table1):
    f = table1.focal_length
    p = propagation_params(table1, 1.8 * f)
    assert p.Z == pytest.approx(0.25 * f)
    assert p.eta == pytest.approx(0.8)
    assert p.eta_Z == pytest.approx(0.2 * f)
    k, a = table1.k, table1.slit_half_width
    assert p.kappa == pytest.approx(k * a**2 / (2 * 0.25 * f))
    assert p.kappa == pytest.approx(0.1, abs=1e-3)
    focal = propagation_params(table1, f)
    assert math.isinf(focal.Z) and focal.kappa == 0 and focal.eta_Z == pytest.approx(f)


def test_regimes(table1):
    f = table1.focal_length
    assert classify_regime(table1, f) is Regime.FRAUNHOFER
    assert classify_regime(table1, 1.5 * f) is Regime.FRAUNHOFER
    assert classify_regime(table1, 1.9 * f) is Regime.FRESNEL
    assert classify_regime(table1, 2 * f) is Regime.IMAGE_PLANE


@pytest.mark.parametrize("z", [0.29, 0.61])
def test_plane_out_of_range(table1, z):
    with pytest.raises(DomainError, match=r"\[0.3, 0.6\]"):
        slit_amplitude(table1, "l", 0.0, z)


def test_focal_plane_peak(table1):
    k, a, f = table1.k, table1.slit_half_width, table1.focal_length
    value = slit_amplitude(table1, "l", 0.0, f)
    assert value == pytest.approx(math.sqrt(k * a / (math.pi * f)), rel=1e-14)
    assert value.imag == 0


def test_focal_plane_fringe_phase(table1):
    k, d, f = table1.k, table1.slit_separation, table1.focal_length
    x = 37e-6
    l, r = slit_amplitudes(table1, x, f)
    assert np.angle(r / l) == pytest.approx(k * d * x / f, rel=1e-12)


def test_fraunhofer_first_zero(table1):
    f = table1.focal_length
    assert abs(fraunhofer_amplitude(table1, "l", table1.first_zone_half_width, f)) < 1e-12


def test_special_matches_quadrature(table1):
    f = table1.focal_length
    x = np.linspace(-400e-6, 400e-6, 41)
    for z in (1.85 * f, 1.95 * f, 1.999 * f):
        for j in ("l", "r"):
            a = fresnel_amplitude(table1, j, x, z)
            b = fresnel_amplitude_special(table1, j, x, z)
            assert np.max(np.abs(a - b)) < 1e-7 * np.max(np.abs(b))


def test_boundary_formulas_agree_in_modulus(table1):
    x = np.linspace(-300e-6, 300e-6, 61)
    z = 1.8 * table1.focal_length
    a = np.abs(fraunhofer_amplitude(table1, "l", x, z))
    b = np.abs(fresnel_amplitude_special(table1, "l", x, z))
    assert np.max(np.abs(a - b)) < 1e-3 * a.max()


def test_continuity_across_regime_boundary(table1):
    # plane where kappa crosses the threshold
    k, a, f = table1.k, table1.slit_half_width, table1.focal_length
    Z = k * a**2 / (2 * 0.1)
    zb = f + f * f / (Z + f)
    assert classify_regime(table1, zb - 1e-6) is Regime.FRAUNHOFER
    assert classify_regime(table1, zb + 1e-6) is Regime.FRESNEL
    x = np.linspace(-300e-6, 300e-6, 61)
    lo = np.abs(slit_amplitudes(table1, x, zb - 1e-6))
    hi = np.abs(slit_amplitudes(table1, x, zb + 1e-6))
    assert np.max(np.abs(lo - hi)) < 1e-3 * lo.max()


def test_image_plane_top_hat(table1):
    a = table1.slit_half_width
    x = np.array([125e-6, 125e-6 + 0.9 * a, 125e-6 + 1.1 * a, -125e-6])
    vals = image_plane_amplitude(table1, "l", x)
    assert vals == pytest.approx([1 / math.sqrt(2 * a)] * 2 + [0, 0])


@given(x=st.floats(-1e-3, 1e-3), frac=st.floats(0.0, 1.0))
def test_mirror_symmetry(x, frac):
    g = OpticalGeometry.table1()
    f = g.focal_length
    z = f + frac * (f - 1e-6)
    l_minus = slit_amplitude(g, "l", -x, z)
    r_plus = slit_amplitude(g, "r", x, z)
    assert abs(l_minus - r_plus) <= 1e-9 * max(1.0, abs(r_plus))


@pytest.mark.parametrize("frac", [0.0, 0.4, 0.8, 0.9, 0.99, 1.0])
def test_line_normalization_and_orthogonality(table1, frac):
    f = table1.focal_length
    m = line_overlaps(table1, f + frac * f)
    assert m[0, 0].real == pytest.approx(1, abs=1e-6)
    assert m[1, 1].real == pytest.approx(1, abs=1e-6)
    assert abs(m[0, 1]) < 1e-6


def test_qudit_geometry_normalization():
    g = OpticalGeometry.table1(num_slits=3)
    m = line_overlaps(g, 1.5 * g.focal_length)
    assert np.abs(m - np.eye(3)).max() < 1e-6


def test_unknown_method(table1):
    with pytest.raises(DomainError):
        slit_amplitudes(table1, 0.0, 0.5, method="fft")
