"""Remote state preparation through a polarization-ancilla POVM.

A half-wave plate at angle ``theta_n`` behind slit ``n`` followed by a
polarizing beam splitter realizes the two-outcome POVM

    Pi_p = sum_n |<p|theta_n>|^2 |n><n|,   |theta_n> = cos 2theta_n |H> + sin 2theta_n |V>.

The wave plates are set to ``theta_l = Theta`` and ``theta_r = pi/4 - Theta``.
Each port carries a two-pixel detector in the focal plane whose pixels are
half an interference period ``L = pi f / (k d)`` apart, so four clicks are
possible, each followed by a Pauli correction on Bob's side.

The ancilla never appears explicitly: port ``p`` only rescales slit ``n`` by
the real weight ``c_n = <p|theta_n>``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import DegenerateWindow, DomainError
from .geometry import OpticalGeometry, slit_amplitudes
from .postselect import remote_state_from_overlaps, window_overlaps
from .states import DensityOperator, FigureTriple, PureKet, fidelity, purity

PORTS = ("H", "V")
OUTCOMES = ((1, "V"), (2, "V"), (1, "H"), (2, "H"))

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
CORRECTIONS = {(1, "V"): "I", (2, "V"): "Z", (1, "H"): "X", (2, "H"): "Y"}


@dataclass(frozen=True)
class PovmSettings:
    """Wave-plate angle ``Theta`` (= theta_l) and target phase ``chi = arg(beta/alpha)``."""

    Theta: float
    chi: float = 0.0

    def __post_init__(self):
        if not -1e-12 <= self.Theta <= math.pi / 4 + 1e-12:
            raise DomainError(f"Theta must lie in [0, pi/4], got {self.Theta!r}")
        if not -math.pi - 1e-12 <= self.chi <= math.pi + 1e-12:
            raise DomainError(f"chi must lie in [-pi, pi], got {self.chi!r}")

    @property
    def theta_r(self) -> float:
        return math.pi / 4 - self.Theta


@dataclass(frozen=True)
class DetectorLayout:
    x1V: float
    x2V: float
    x1H: float
    x2H: float
    half_period: float

    def position(self, j: int, port: str) -> float:
        return {(1, "V"): self.x1V, (2, "V"): self.x2V,
                (1, "H"): self.x1H, (2, "H"): self.x2H}[(j, port)]


def port_weights(Theta: float, port: str) -> np.ndarray:
    """``(<p|theta_l>, <p|theta_r>)``."""
    thetas = np.array([Theta, math.pi / 4 - Theta])
    if port == "H":
        return np.cos(2 * thetas)
    if port == "V":
        return np.sin(2 * thetas)
    raise DomainError(f"unknown port {port!r}; expected 'H' or 'V'")


def povm_elements(Theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Pi_H, Pi_V)`` in the ``(|l>, |r>)`` basis; ``Pi_V`` is built as ``I - Pi_H``."""
    pi_h = np.diag(port_weights(Theta, "H") ** 2).astype(complex)
    return pi_h, np.eye(2) - pi_h


def port_probability(Theta: float, port: str) -> float:
    """Chance of exiting port ``p`` when Alice holds half of a maximally entangled pair."""
    pi_h, pi_v = povm_elements(Theta)
    return float(np.trace(pi_h if port == "H" else pi_v).real / 2)


def settings_for_target(target: PureKet) -> PovmSettings:
    """``Theta = arccos|alpha| / 2`` and ``chi = arg(beta/alpha)`` (0 at the poles)."""
    if target.dim != 2:
        raise DomainError("POVM settings are defined for qubit targets")
    alpha, beta = target.normalized().amplitudes
    Theta = 0.5 * math.acos(min(1.0, abs(alpha)))
    chi = 0.0 if abs(alpha) < 1e-15 or abs(beta) < 1e-15 else float(np.angle(beta / alpha))
    return PovmSettings(Theta, chi)


def wrap_position(x, half_period: float):
    """Wrap into ``[-L, L)``: ``((x + L) mod 2L) - L``."""
    L = half_period
    return np.mod(np.asarray(x, dtype=float) + L, 2 * L) - L


def oplus(x, y, half_period: float):
    """Modular addition of transverse positions on the interval ``[-L, L)``."""
    return wrap_position(np.asarray(x) + np.asarray(y), half_period)


def detector_layout(settings: PovmSettings, geom: OpticalGeometry) -> DetectorLayout:
    L = geom.focal_half_period
    x1V = float(wrap_position(geom.focal_length / (geom.k * geom.slit_separation) * settings.chi, L))
    x2V = float(oplus(x1V, L, L))
    x1H = float(wrap_position(-x1V, L))
    x2H = float(wrap_position(-x2V, L))
    return DetectorLayout(x1V, x2V, x1H, x2H, L)


def target_ket(settings: PovmSettings) -> PureKet:
    """``cos 2Theta |l> + e^{i chi} sin 2Theta |r>``."""
    T = settings.Theta
    return PureKet([math.cos(2 * T), np.exp(1j * settings.chi) * math.sin(2 * T)])


def point_prepared_state(settings: PovmSettings, outcome: tuple[int, str], geom=None):
    """Bob's ket for an ideal click and the Pauli matrix that maps it to the target.

    With ``alpha = cos 2Theta`` and ``beta = e^{i chi} sin 2Theta`` the four
    kets are ``alpha|l> + beta|r>``, ``alpha|l> - beta|r>``,
    ``beta|l> + alpha|r>`` and ``beta|l> - alpha|r>`` for 1V, 2V, 1H, 2H.
    """
    if outcome not in CORRECTIONS:
        raise DomainError(f"unknown outcome {outcome!r}")
    alpha, beta = target_ket(settings).amplitudes
    j, port = outcome
    sign = 1 if j == 1 else -1
    ket = [alpha, sign * beta] if port == "V" else [beta, sign * alpha]
    return PureKet(ket), PAULI[CORRECTIONS[outcome]]


def _focal_overlaps(geom: OpticalGeometry, x, width: float):
    return window_overlaps(geom, x, width, geom.focal_length)


def prepared_state_matrix(settings: PovmSettings, outcome, geom: OpticalGeometry, width: float,
                          overlaps=None) -> np.ndarray:
    """Uncorrected ``rho_B^{jp}`` from the port-weighted focal-plane overlaps."""
    j, port = outcome
    layout = detector_layout(settings, geom)
    x = layout.position(j, port)
    values = overlaps if overlaps is not None else _focal_overlaps(geom, x, width)
    c = port_weights(settings.Theta, port)
    if width == 0:
        phi = slit_amplitudes(geom, x, geom.focal_length)
        values = np.outer(phi, phi.conj())
    weighted = c[:, None] * values * c[None, :]
    return remote_state_from_overlaps(weighted)


def remote_state_povm_finite(settings: PovmSettings, outcome, geom: OpticalGeometry,
                             width: float, *, corrected: bool = False) -> DensityOperator:
    """Bob's normalized state after a click of detector ``outcome`` of width ``width``.

    Set ``corrected`` to apply the Pauli correction.
    """
    if width < 0:
        raise DomainError("detector width must be >= 0")
    try:
        rho = prepared_state_matrix(settings, outcome, geom, width)
    except DegenerateWindow:
        raise DegenerateWindow(f"detector {outcome} collects no probability") from None
    if corrected:
        U = PAULI[CORRECTIONS[outcome]]
        rho = U @ rho @ U.conj().T
    return DensityOperator(rho)


def outcome_probability(settings: PovmSettings, outcome, geom: OpticalGeometry, width: float) -> float:
    """``(c_l^2 Phi_ll + c_r^2 Phi_rr) / 2`` at the detector's position."""
    j, port = outcome
    x = detector_layout(settings, geom).position(j, port)
    values = _focal_overlaps(geom, x, width)
    c = port_weights(settings.Theta, port)
    return float(np.sum(c**2 * np.diag(values).real) / 2)


def _focal_density(geom: OpticalGeometry, x):
    k, a, f = geom.k, geom.slit_half_width, geom.focal_length
    return k * a / (math.pi * f) * np.sinc(k * a * np.asarray(x) / (math.pi * f)) ** 2


def total_probability(settings_or_x1V, geom: OpticalGeometry, width: float, *, tol: float = 1e-10):
    """Sum of the four click probabilities, ``sum_jp Phi_ll(x_jp) / 2``.

    Accepts settings or a (vector of) ``x1V`` position(s). The focal-plane
    density is ``(ka / pi f) sinc^2(k a x / f)``, integrated over each
    detector window; by the mirror symmetry of the envelope the H pixels
    repeat the V pixels.
    """
    if isinstance(settings_or_x1V, PovmSettings):
        x1V = detector_layout(settings_or_x1V, geom).x1V
    else:
        x1V = settings_or_x1V
    x1V = np.asarray(x1V, dtype=float)
    flat = np.atleast_1d(x1V).ravel()
    L = geom.focal_half_period
    if width == 0:
        return np.zeros_like(x1V)
    x2V = oplus(flat, L, L)
    centres = np.concatenate([flat, x2V])
    lo, hi = centres - width / 2, centres + width / 2

    def integrand(nodes, rows):
        return _focal_density(geom, nodes)

    vals = quadrature.integrate(integrand, lo, hi, panels=2, tol=tol)
    # Phi_ll(x1V) + Phi_ll(x2V), each counted for the V and H pixel, halved
    out = vals[: flat.size] + vals[flat.size:]
    return out.reshape(x1V.shape) if x1V.ndim else float(out[0])


def povm_fidelity(settings: PovmSettings, outcome, geom: OpticalGeometry, width: float) -> float:
    """Closed form ``cos^4 + sin^4 + 2 cos^2 sin^2 <cos(kd(x_jp - x')/f)>``.

    The average runs over the window, weighted by ``|phi_l(x', f)|^2``.
    """
    c2 = math.cos(2 * settings.Theta) ** 2
    s2 = math.sin(2 * settings.Theta) ** 2
    if width == 0 or c2 * s2 == 0:
        # point detector, or a basis target that no window can blur
        return 1.0
    j, port = outcome
    x = detector_layout(settings, geom).position(j, port)
    kd_f = geom.k * geom.slit_separation / geom.focal_length

    def integrand(nodes, rows):
        dens = _focal_density(geom, nodes)
        return np.stack([dens, dens * np.cos(kd_f * (x - nodes))])

    num = quadrature.integrate(integrand, [x - width / 2], [x + width / 2], panels=2, tol=1e-12)
    phi_ll, weighted = num[0, 0], num[1, 0]
    return float(c2**2 + s2**2 + 2 * c2 * s2 * weighted / phi_ll)


def povm_purity(settings: PovmSettings, outcome, geom: OpticalGeometry, width: float) -> float:
    """Closed form ``cos^4 + sin^4 + sin^2(4 Theta) |Phi_lr / Phi_ll|^2 / 2``."""
    c2 = math.cos(2 * settings.Theta) ** 2
    s2 = math.sin(2 * settings.Theta) ** 2
    if width == 0:
        return 1.0
    j, port = outcome
    x = detector_layout(settings, geom).position(j, port)
    values = _focal_overlaps(geom, x, width)
    ratio = abs(values[0, 1]) ** 2 / values[0, 0].real ** 2
    return float(c2**2 + s2**2 + 0.5 * math.sin(4 * settings.Theta) ** 2 * ratio)


def compositional_figures(settings: PovmSettings, outcome, geom: OpticalGeometry, width: float):
    """Fidelity and purity of the corrected state against the target via the generic functionals."""
    rho = remote_state_povm_finite(settings, outcome, geom, width, corrected=True)
    return fidelity(target_ket(settings), rho), purity(rho)


def povm_figures(settings: PovmSettings, geom: OpticalGeometry, width: float) -> FigureTriple:
    """Total probability and click-weighted mean fidelity and purity over the four detectors."""
    weights, fids, purs = [], [], []
    for outcome in OUTCOMES:
        weights.append(outcome_probability(settings, outcome, geom, width))
        fids.append(povm_fidelity(settings, outcome, geom, width))
        purs.append(povm_purity(settings, outcome, geom, width))
    w = np.asarray(weights)
    total = w.sum()
    if not total > 0:
        return FigureTriple(0.0, float(np.mean(fids)), float(np.mean(purs)))
    return FigureTriple(float(total), float(w @ fids / total), float(w @ purs / total))
