import math

import numpy as np
import pytest

from spatialrsp import quadrature
from spatialrsp.errors import QuadratureError


def test_polynomial_exact():
    # 8-node Gauss-Legendre integrates degree 15 exactly
    out = quadrature.integrate(lambda x, rows: x**15 + 3 * x**2, [0.0], [2.0], panels=1)
    assert out[0] == pytest.approx(2**16 / 16 + 8, rel=1e-14)


def test_oscillatory_matches_closed_form():
    w = 200.0
    out = quadrature.integrate(lambda x, rows: np.exp(1j * w * x), [0.0], [1.0], tol=1e-12)
    exact = (np.exp(1j * w) - 1) / (1j * w)
    assert abs(out[0] - exact) < 1e-12


def test_rows_refined_independently():
    lo, hi = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    freqs = np.array([1.0, 500.0])
    out = quadrature.integrate(lambda x, rows: np.cos(freqs[rows, None] * x), lo, hi, tol=1e-12)
    assert out == pytest.approx(np.sin(freqs) / freqs, abs=1e-12)
    single = quadrature.integrate(lambda x, rows: np.cos(1.0 * x), [0.0], [1.0], tol=1e-12)
    assert out[0] == single[0]


def test_cap_raises_with_achieved_error():
    with pytest.raises(QuadratureError) as info:
        quadrature.integrate(lambda x, rows: np.sin(1e7 * x**2), [0.0], [1.0],
                             tol=1e-14, max_panels=8)
    assert info.value.achieved > 0
