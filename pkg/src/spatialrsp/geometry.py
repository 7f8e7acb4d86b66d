"""Single-slit propagation amplitudes between the focal and image planes.

A slit array sits a distance ``2f`` in front of a lens of focal length ``f``
and the detector plane ``z`` is measured from the lens, ``f <= z <= 2f``.
Amplitudes are in m^(-1/2) so that ``|phi_j(x, z)|**2`` is a density per
metre.

Three evaluators are provided:

* the far-field sinc closed form (:func:`fraunhofer_amplitude`),
* the near-field chirp integral, either by composite Gauss-Legendre
  quadrature (:func:`fresnel_amplitude`) or through Fresnel integrals
  (:func:`fresnel_amplitude_special`),
* the geometric top-hat at the image plane (:func:`image_plane_amplitude`).

:func:`slit_amplitude` / :func:`slit_amplitudes` dispatch between them with
:func:`classify_regime`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import special

from . import quadrature
from .errors import DomainError, QuadratureError

KAPPA_THRESHOLD = 0.1
IMAGE_TOL = 0.5e-6  # m
QUAD_TOL = 1e-9

SlitIndex = Union[int, str]


@dataclass(frozen=True)
class OpticalGeometry:
    """Slit array, photon and lens parameters (SI units).

    ``num_slits`` is 2 for the qubit double slit or an odd number for
    qudits. ``aperture_distance`` only enters the qudit pair phases.
    """

    slit_half_width: float
    slit_separation: float
    wavelength: float
    focal_length: float
    num_slits: int = 2
    aperture_distance: float | None = None

    def __post_init__(self):
        a, d = self.slit_half_width, self.slit_separation
        if not (a > 0 and self.wavelength > 0 and self.focal_length > 0):
            raise DomainError("slit half-width, wavelength and focal length must be positive")
        if not d > 2 * a:
            raise DomainError(f"slits overlap: need d > 2a, got d={d:g}, a={a:g}")
        D = self.num_slits
        if not (isinstance(D, (int, np.integer)) and (D == 2 or (D >= 1 and D % 2 == 1))):
            raise DomainError(f"num_slits must be 2 or an odd positive integer, got {D!r}")
        if self.aperture_distance is not None and not self.aperture_distance > 0:
            raise DomainError("aperture_distance must be positive")

    @classmethod
    def table1(cls, **overrides) -> "OpticalGeometry":
        """The reference simulation parameters (a=40 um, d=250 um, 670 nm, f=30 cm)."""
        params = dict(slit_half_width=40e-6, slit_separation=250e-6,
                      wavelength=670e-9, focal_length=0.30)
        params.update(overrides)
        return cls(**params)

    @classmethod
    def taguchi(cls, **overrides) -> "OpticalGeometry":
        """Parameters of the six-state postselection experiment (a=20 um, d=150 um, 810 nm, f=5 cm)."""
        params = dict(slit_half_width=20e-6, slit_separation=150e-6,
                      wavelength=810e-9, focal_length=0.05)
        params.update(overrides)
        return cls(**params)

    @property
    def k(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def ell(self) -> int:
        return (self.num_slits - 1) // 2

    @property
    def labels(self) -> tuple:
        """Slit labels in array order: ``('l', 'r')`` or ``(-ell, ..., ell)``."""
        if self.num_slits == 2:
            return ("l", "r")
        return tuple(range(-self.ell, self.ell + 1))

    @property
    def offsets(self) -> np.ndarray:
        """Transverse slit centres in array order."""
        if self.num_slits == 2:
            return np.array([-0.5, 0.5]) * self.slit_separation
        return np.arange(-self.ell, self.ell + 1) * self.slit_separation

    def index(self, j: SlitIndex) -> int:
        """Array position of slit ``j`` (``'l'``/``'r'`` or a signed qudit index)."""
        try:
            return self.labels.index(j)
        except ValueError:
            raise DomainError(f"unknown slit {j!r}; expected one of {self.labels}") from None

    def offset(self, j: SlitIndex) -> float:
        return float(self.offsets[self.index(j)])

    @property
    def focal_half_period(self) -> float:
        """pi f / (k d): half the interference period at the focal plane."""
        return math.pi * self.focal_length / (self.k * self.slit_separation)

    @property
    def first_zone_half_width(self) -> float:
        """pi f / (k a): first zero of the single-slit envelope at the focal plane."""
        return math.pi * self.focal_length / (self.k * self.slit_half_width)


class Regime(str, enum.Enum):
    FRAUNHOFER = "fraunhofer"
    FRESNEL = "fresnel"
    IMAGE_PLANE = "image_plane"


@dataclass(frozen=True)
class PropagationParams:
    """Effective distance ``Z``, scale factor ``eta`` and quadratic phase ``kappa``.

    ``eta_Z`` is stored separately because it stays finite (``2f - z``) where
    ``Z`` diverges at the focal plane.
    """

    Z: float
    eta: float
    kappa: float
    eta_Z: float


def _check_plane(geom: OpticalGeometry, z: float) -> float:
    f = geom.focal_length
    z = float(z)
    slack = 1e-12 * f
    if not (f - slack <= z <= 2 * f + slack):
        raise DomainError(f"plane z={z:g} m outside [f, 2f] = [{f:g}, {2 * f:g}] m")
    return min(max(z, f), 2 * f)


def propagation_params(geom: OpticalGeometry, z: float) -> PropagationParams:
    z = _check_plane(geom, z)
    f = geom.focal_length
    eta_Z = 2 * f - z
    if z == f:
        return PropagationParams(Z=math.inf, eta=0.0, kappa=0.0, eta_Z=eta_Z)
    eta = (z - f) / f
    if z == 2 * f:
        return PropagationParams(Z=0.0, eta=eta, kappa=math.inf, eta_Z=0.0)
    Z = f * (2 * f - z) / (z - f)
    kappa = geom.k * geom.slit_half_width**2 / (2 * Z)
    return PropagationParams(Z=Z, eta=eta, kappa=kappa, eta_Z=eta_Z)


def classify_regime(
    geom: OpticalGeometry,
    z: float,
    kappa_threshold: float = KAPPA_THRESHOLD,
    image_tol: float = IMAGE_TOL,
) -> Regime:
    z = _check_plane(geom, z)
    if 2 * geom.focal_length - z <= image_tol:
        return Regime.IMAGE_PLANE
    if propagation_params(geom, z).kappa <= kappa_threshold:
        return Regime.FRAUNHOFER
    return Regime.FRESNEL


def fraunhofer_amplitude(geom: OpticalGeometry, j: SlitIndex, x, z: float):
    """sqrt(ka/(pi eta Z)) exp(i k delta x / eta Z) sinc(k a (x + delta eta) / eta Z)."""
    p = propagation_params(geom, z)
    if p.eta_Z <= 0:
        raise DomainError("far-field amplitude undefined at the image plane")
    return _fraunhofer(geom, geom.offset(j), np.asarray(x, dtype=float), p)


def _fraunhofer(geom, delta, x, p):
    k, a = geom.k, geom.slit_half_width
    arg = k * a * (x + delta * p.eta) / p.eta_Z
    amp = math.sqrt(k * a / (math.pi * p.eta_Z)) * np.sinc(arg / math.pi)
    return amp * np.exp(1j * k * delta * x / p.eta_Z)


def _fresnel_prefactor(geom, p):
    return math.sqrt(geom.k / (4 * math.pi * geom.slit_half_width * p.eta_Z))


def _require_fresnel_plane(geom, z):
    p = propagation_params(geom, z)
    if not (0 < p.eta and p.eta_Z > 0 and math.isfinite(p.Z)):
        raise DomainError("near-field integral requires f < z < 2f")
    return p


def _chirp_panels(excursion) -> np.ndarray:
    """Panel count: 8 per 2*pi of phase excursion, at least 16, rounded up to a power of two."""
    need = np.maximum(16, 8 * np.ceil(np.asarray(excursion) / (2 * math.pi)))
    return (2 ** np.ceil(np.log2(need))).astype(np.int64)


def fresnel_amplitude(geom: OpticalGeometry, j: SlitIndex, x, z: float, quad_tol: float = QUAD_TOL):
    """Near-field amplitude by composite Gauss-Legendre quadrature of the slit integral.

    The panel count follows the total phase excursion ``kappa + k a |x + eta
    delta| / (eta Z)`` and is doubled until successive estimates agree to
    ``quad_tol`` relative to ``max(|I|, 1e-3 * 2a)``.

    Raises QuadratureError if the panel cap is hit first.
    """
    p = _require_fresnel_plane(geom, z)
    delta = geom.offset(j)
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    k, a = geom.k, geom.slit_half_width
    u = flat + p.eta * delta
    b = k * u / p.eta_Z
    c = k / (2 * p.Z)
    excursion = p.kappa + a * np.abs(b)
    panels = _chirp_panels(excursion)
    integral = np.empty(flat.shape, dtype=complex)
    for n in np.unique(panels):
        sel = np.nonzero(panels == n)[0]
        bs = b[sel]

        def integrand(nodes, rows, bs=bs):
            return np.exp(1j * (bs[rows, None] * nodes + c * nodes**2))

        integral[sel] = quadrature.integrate(
            integrand,
            np.full(sel.size, -a),
            np.full(sel.size, a),
            panels=max(1, int(n) // 2),
            tol=quad_tol,
            floor=2e-3 * a,
        )
    out = _fresnel_prefactor(geom, p) * np.exp(1j * k * delta * flat / p.eta_Z) * integral
    return out.reshape(x.shape) if x.ndim else out[0]


def fresnel_amplitude_special(geom: OpticalGeometry, j: SlitIndex, x, z: float):
    """Near-field amplitude in closed form through the Fresnel integrals C and S.

    Completing the square in the slit integral leaves a chirp over the
    shifted interval ``[-a + u/eta, a + u/eta]`` with ``u = x + eta delta``;
    the linear phase prefactor cancels against the completed square, leaving
    ``exp(-i k (x**2 / eta**2 + delta**2) / 2Z)``.
    """
    p = _require_fresnel_plane(geom, z)
    return _fresnel_special(geom, geom.offset(j), np.asarray(x, dtype=float), p)


def _fresnel_special(geom, delta, x, p):
    k, a = geom.k, geom.slit_half_width
    shift = x / p.eta + delta
    scale = math.sqrt(k / (math.pi * p.Z))
    s_hi, c_hi = special.fresnel((shift + a) * scale)
    s_lo, c_lo = special.fresnel((shift - a) * scale)
    chirp = ((c_hi - c_lo) + 1j * (s_hi - s_lo)) / scale
    phase = -k * ((x / p.eta) ** 2 + delta**2) / (2 * p.Z)
    return _fresnel_prefactor(geom, p) * np.exp(1j * phase) * chirp


def image_plane_amplitude(geom: OpticalGeometry, j: SlitIndex, x):
    """Unit-magnification inverted top-hat: ``1/sqrt(2a)`` on ``(-delta - a, -delta + a)``."""
    return _image(geom, geom.offset(j), np.asarray(x, dtype=float))


def _image(geom, delta, x):
    a = geom.slit_half_width
    inside = np.abs(x + delta) < a
    return np.where(inside, 1 / math.sqrt(2 * a), 0.0).astype(complex)


METHODS = ("special", "quadrature")


def slit_amplitudes(
    geom: OpticalGeometry,
    x,
    z: float,
    *,
    method: str = "special",
    kappa_threshold: float = KAPPA_THRESHOLD,
    quad_tol: float = QUAD_TOL,
) -> np.ndarray:
    """All slit amplitudes at positions ``x``: shape ``(num_slits,) + x.shape``."""
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")
    regime = classify_regime(geom, z, kappa_threshold)
    x = np.asarray(x, dtype=float)
    if regime is Regime.IMAGE_PLANE:
        return np.stack([_image(geom, dl, x) for dl in geom.offsets])
    p = propagation_params(geom, z)
    if regime is Regime.FRAUNHOFER:
        return np.stack([_fraunhofer(geom, dl, x, p) for dl in geom.offsets])
    if method == "special":
        return np.stack([_fresnel_special(geom, dl, x, p) for dl in geom.offsets])
    return np.stack([fresnel_amplitude(geom, j, x, z, quad_tol) for j in geom.labels])


def slit_amplitude(geom: OpticalGeometry, j: SlitIndex, x, z: float, **kwargs):
    """Amplitude of slit ``j`` at ``(x, z)`` in whichever regime applies."""
    return slit_amplitudes(geom, x, z, **kwargs)[geom.index(j)]


def peak_density(geom: OpticalGeometry, z: float) -> float:
    """Summed slit density at the brightest slit-image centre, the reference for degeneracy."""
    p = propagation_params(geom, z)
    centres = -p.eta * geom.offsets
    amps = slit_amplitudes(geom, centres, z)
    return float(np.max(np.sum(np.abs(amps) ** 2, axis=0)))


def _tail_mass(geom: OpticalGeometry, p: PropagationParams, regime: Regime, gap: float) -> float:
    """Mean (fringe-averaged) probability beyond distance ``gap`` from a slit pattern centre, one side."""
    k, a = geom.k, geom.slit_half_width
    if regime is Regime.IMAGE_PLANE:
        return 0.0
    if regime is Regime.FRAUNHOFER:
        return p.eta_Z / (2 * math.pi * k * a * gap)
    v = gap / p.eta
    return p.Z / (4 * math.pi * k * a) * (1 / (v + a) + 1 / (v - a))


def line_overlaps(
    geom: OpticalGeometry,
    z: float,
    *,
    span: float = 500.0,
    tol: float = 1e-9,
) -> np.ndarray:
    """Whole-line overlaps ``int phi_i phi_j^* dx`` for all slit pairs.

    The core ``|x| <= X`` is integrated by composite quadrature, with ``X``
    reaching ``span`` far-field zero spacings (or Fresnel zones) beyond the
    outermost slit pattern. The fringe-averaged 1/x**2 tails of the diagonal
    terms are added in closed form; off-diagonal tails are purely
    oscillatory and dropped.
    """
    regime = classify_regime(geom, z)
    p = propagation_params(geom, z)
    k, a = geom.k, geom.slit_half_width
    centres = -p.eta * geom.offsets
    reach = float(np.max(np.abs(centres)))
    if regime is Regime.IMAGE_PLANE:
        gap = 2 * a
    elif regime is Regime.FRAUNHOFER:
        gap = span * math.pi * p.eta_Z / (k * a)
    else:
        gap = p.eta * a + span * max(math.pi * p.eta_Z / (k * a), p.eta * math.sqrt(math.pi * p.Z / k))
    X = reach + gap
    # fringe-resolving panel count: 8 panels per local period of the fastest component
    spatial_freq = k * (reach * 2 + 2 * a + 2 * np.max(np.abs(geom.offsets))) / max(p.eta_Z, 1e-300)
    if regime is Regime.FRESNEL:
        spatial_freq += k * X / (p.eta * p.eta_Z)
    if regime is Regime.IMAGE_PLANE:
        edges = np.sort(np.concatenate([centres - a, centres + a, [-X, X]]))
        lo, hi = edges[:-1], edges[1:]
    else:
        n_seg = int(min(1 << 14, max(8, math.ceil(2 * X * spatial_freq / (2 * math.pi) / 4))))
        grid = np.linspace(-X, X, n_seg + 1)
        lo, hi = grid[:-1], grid[1:]

    D = geom.num_slits

    def integrand(nodes, rows):
        amps = slit_amplitudes(geom, nodes, z)
        return amps[:, None] * amps[None, :].conj()

    parts = quadrature.integrate(integrand, lo, hi, panels=2, tol=tol, floor=1e-12)
    total = parts.sum(axis=-1)
    for n in range(D):
        left = X + centres[n]
        right = X - centres[n]
        total[n, n] += _tail_mass(geom, p, regime, left) + _tail_mass(geom, p, regime, right)
    return total
