"""Remote state preparation by postselecting the photon position.

Alice's photon passes the slit array and is detected at ``(x, z)`` behind
the lens. With the anti-correlated pair ``sum_j |j>_A |-j>_B`` a click
projects Bob onto ``sum_j phi_j(x, z)^* |-j>``, i.e. the conjugated Alice
amplitudes in reversed slit order. A detector of width ``dx`` replaces the
outer product ``phi phi^dagger`` by the window overlaps

    Phi_ij = integral over the window of phi_i(x') phi_j(x')^* dx'

and Bob is left with ``rho_B = R Phi^T R / tr(Phi)`` (``R`` reverses slit
order). In the ``(|l>, |r>)`` basis this is ``[[Phi_rr, Phi_lr], [Phi_rl,
Phi_ll]] / (Phi_ll + Phi_rr)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares, minimize_scalar

from . import quadrature
from .errors import DegeneratePoint, DegenerateWindow, DomainError
from .geometry import (
    OpticalGeometry,
    Regime,
    _check_plane,
    classify_regime,
    line_overlaps,
    peak_density,
    propagation_params,
    slit_amplitudes,
)
from .states import DensityOperator, FigureTriple, PureKet, bloch_angles, ket_overlap

EPS_DEN = 1e-6
OVERLAP_TOL = 1e-9
# relative floor for the window quadrature, as a fraction of peak density * width
_FLOOR = 1e-12


@dataclass(frozen=True)
class DetectorWindow:
    """Detector centred at ``x`` with width ``width`` in plane ``z``.

    ``width == 0`` is a point detector and ``width == inf`` a bucket that
    collects the whole line.
    """

    x: float
    width: float
    z: float

    def __post_init__(self):
        if not self.width >= 0:
            raise DomainError(f"detector width must be >= 0, got {self.width!r}")
        if not math.isfinite(self.x):
            raise DomainError("detector centre must be finite")


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    """Window overlaps ``Phi_ij`` in slit array order (``l, r`` for qubits)."""

    values: np.ndarray
    window: DetectorWindow

    @property
    def trace(self) -> float:
        return float(np.trace(self.values).real)


# ---------------------------------------------------------------------------
# point detector


def point_postselect_ket(geom: OpticalGeometry, x: float, z: float) -> PureKet:
    """Non-normalized ``sum_j phi_j(x, z) |j>`` that a point click projects Alice onto."""
    return PureKet(slit_amplitudes(geom, float(x), z))


def remote_amplitudes(phi: np.ndarray) -> np.ndarray:
    """Bob's (unnormalized) amplitudes from Alice's, along axis 0: reverse and conjugate."""
    return np.conj(np.asarray(phi)[::-1])


@lru_cache(maxsize=4096)
def _peak_density(geom: OpticalGeometry, z: float) -> float:
    return peak_density(geom, z)


def degenerate_mask(geom: OpticalGeometry, phi: np.ndarray, z: float, eps_den: float = EPS_DEN):
    """True where the summed slit density is below ``eps_den`` of the plane's peak density."""
    density = np.sum(np.abs(phi) ** 2, axis=0)
    return density < eps_den * _peak_density(geom, float(z))


def remote_target_point(
    geom: OpticalGeometry, x: float, z: float, eps_den: float = EPS_DEN
) -> PureKet:
    """Bob's normalized state after a point click at ``(x, z)``.

    Raises DegeneratePoint near diffraction zeros, where the state is
    numerically meaningless.
    """
    phi = slit_amplitudes(geom, float(x), z)
    if degenerate_mask(geom, phi, z, eps_den):
        raise DegeneratePoint(f"slit amplitudes vanish at x={x:g} m, z={z:g} m")
    return PureKet(remote_amplitudes(phi)).normalized()


# ---------------------------------------------------------------------------
# finite windows


def _resolution_scale(geom: OpticalGeometry, z: float) -> float:
    """Shortest period of the slit-pair products in plane ``z``.

    Edge waves from two slit edges a distance ``e`` apart beat with spatial
    frequency ``k e / (eta Z)`` in both the far- and near-field forms; the
    widest edge pair sets the scale.
    """
    p = propagation_params(geom, z)
    spread = float(np.ptp(geom.offsets)) + 2 * geom.slit_half_width
    return 2 * math.pi * p.eta_Z / (geom.k * spread)


def _image_window_overlaps(geom, lo, hi):
    a = geom.slit_half_width
    out = np.zeros((geom.num_slits, geom.num_slits) + lo.shape, dtype=complex)
    for n, delta in enumerate(geom.offsets):
        left = np.maximum(lo, -delta - a)
        right = np.minimum(hi, -delta + a)
        out[n, n] = np.clip(right - left, 0, None) / (2 * a)
    return out


def window_overlaps(
    geom: OpticalGeometry,
    x,
    width: float,
    z: float,
    *,
    tol: float = OVERLAP_TOL,
) -> np.ndarray:
    """Overlap matrices for windows of common ``width`` centred at each ``x``.

    Returns shape ``(D, D) + x.shape``. Each window is integrated with at
    least 32 Gauss-Legendre nodes and refined independently until two
    successive rules agree to ``tol``; results therefore do not depend on
    which other windows share the call.
    """
    z = _check_plane(geom, z)
    x = np.asarray(x, dtype=float)
    flat = np.atleast_1d(x).ravel()
    D = geom.num_slits
    width = float(width)
    if not width >= 0:
        raise DomainError(f"detector width must be >= 0, got {width!r}")
    if math.isinf(width):
        whole = line_overlaps(geom, z)
        out = np.broadcast_to(whole[..., None], (D, D, flat.size)).copy()
        return out.reshape((D, D) + x.shape)
    if width == 0:
        return np.zeros((D, D) + x.shape, dtype=complex)
    lo, hi = flat - width / 2, flat + width / 2
    if classify_regime(geom, z) is Regime.IMAGE_PLANE:
        return _image_window_overlaps(geom, lo, hi).reshape((D, D) + x.shape)

    panels = max(2, int(2 ** math.ceil(math.log2(max(1.0, width / _resolution_scale(geom, z))))))

    def integrand(nodes, rows):
        amps = slit_amplitudes(geom, nodes, z)
        return amps[:, None] * amps[None, :].conj()

    floor = _FLOOR * _peak_density(geom, z) * width
    out = quadrature.integrate(integrand, lo, hi, panels=panels, tol=tol, floor=floor)
    # the integrand is Hermitian at every node; enforce it exactly on the result
    out = 0.5 * (out + np.conj(np.swapaxes(out, 0, 1)))
    return out.reshape((D, D) + x.shape)


@lru_cache(maxsize=65536)
def _cached_overlaps(geom: OpticalGeometry, x: float, width: float, z: float) -> np.ndarray:
    values = window_overlaps(geom, x, width, z)
    values.setflags(write=False)
    return values


def overlap_matrix(geom: OpticalGeometry, window: DetectorWindow, *, cache: bool = True) -> OverlapMatrix:
    """``Phi_ij`` for one detector window.

    The cache is transparent: a cached entry is the exact array a fresh
    evaluation would return.
    """
    if cache:
        values = _cached_overlaps(geom, float(window.x), float(window.width), float(window.z))
    else:
        values = window_overlaps(geom, window.x, window.width, window.z)
    return OverlapMatrix(values, window)


def bucket_width(geom: OpticalGeometry, z: float, missing: float = 1e-4) -> float:
    """Width of a centred window whose per-slit uncollected probability is below ``missing``.

    Uses the fringe-averaged ``1/x**2`` tails of the single-slit pattern.
    """
    if not 0 < missing < 1:
        raise DomainError("missing fraction must lie in (0, 1)")
    regime = classify_regime(geom, z)
    p = propagation_params(geom, z)
    k, a = geom.k, geom.slit_half_width
    reach = float(np.max(np.abs(p.eta * geom.offsets)))
    if regime is Regime.IMAGE_PLANE:
        return 2 * (reach + a)
    if regime is Regime.FRAUNHOFER:
        gap = p.eta_Z / (math.pi * k * a * missing)
    else:
        # the two-sided Fresnel tail ~ Z eta / (pi k a gap) for gap >> eta a
        gap = p.eta * a + p.Z * p.eta / (math.pi * k * a * missing)
    return 2 * (reach + gap)


# ---------------------------------------------------------------------------
# figures of merit


def remote_state_from_overlaps(values: np.ndarray) -> np.ndarray:
    """``R Phi^T R / tr(Phi)`` for a ``(D, D)`` overlap matrix."""
    values = np.asarray(values)
    tr = np.trace(values).real
    if not tr > 0:
        raise DegenerateWindow("detector window collects no probability")
    return values.T[::-1, ::-1] / tr


def figures_from_overlaps(values: np.ndarray, phi: np.ndarray):
    """Probability, fidelity and purity for stacks of windows.

    ``values`` has shape ``(D, D, ...)`` and ``phi`` (the point amplitudes
    at the window centres that define the target) ``(D, ...)``. The
    fidelity of Bob's state to his point-limit target reduces to
    ``phi^dagger Phi phi / (|phi|^2 tr Phi)`` because the reversal and
    conjugation act on both sides alike. Windows with zero trace give
    NaN fidelity and purity.
    """
    values = np.asarray(values)
    phi = np.asarray(phi)
    D = values.shape[0]
    tr = np.einsum("ii...->...", values).real
    quad = np.einsum("i...,ij...,j...->...", phi.conj(), values, phi).real
    norm2 = np.sum(np.abs(phi) ** 2, axis=0)
    sq = np.sum(np.abs(values) ** 2, axis=(0, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        fid = np.clip(quad / (norm2 * tr), 0.0, 1.0)
        pur = sq / tr**2
    return tr / D, fid, pur


def remote_state_finite(geom: OpticalGeometry, window: DetectorWindow) -> DensityOperator:
    """Bob's normalized state after a click in ``window``."""
    phi = overlap_matrix(geom, window).values
    try:
        return DensityOperator(remote_state_from_overlaps(phi))
    except DegenerateWindow:
        if window.width == 0:
            # zero-measure window: fall back to the point limit
            return remote_target_point(geom, window.x, window.z).projector()
        raise


def prep_probability(geom: OpticalGeometry, window: DetectorWindow) -> float:
    """``tr(Phi) / D``: chance that the click lands in the window."""
    return float(np.trace(overlap_matrix(geom, window).values).real / geom.num_slits)


def _point_and_window(geom, window):
    phi = slit_amplitudes(geom, float(window.x), window.z)
    if degenerate_mask(geom, phi, window.z):
        raise DegeneratePoint(f"slit amplitudes vanish at x={window.x:g} m, z={window.z:g} m")
    if window.width == 0:
        return phi, np.outer(phi, phi.conj())
    values = overlap_matrix(geom, window).values
    if not np.trace(values).real > 0:
        raise DegenerateWindow("detector window collects no probability")
    return phi, values


def prep_fidelity(geom: OpticalGeometry, window: DetectorWindow) -> float:
    """Fidelity of Bob's state to the point-detector target at the window centre."""
    phi, values = _point_and_window(geom, window)
    return float(figures_from_overlaps(values, phi)[1])


def prep_purity(geom: OpticalGeometry, window: DetectorWindow) -> float:
    """``sum |Phi_ij|^2 / tr(Phi)^2``."""
    if window.width == 0:
        return 1.0
    values = overlap_matrix(geom, window).values
    tr = np.trace(values).real
    if not tr > 0:
        raise DegenerateWindow("detector window collects no probability")
    return float(np.sum(np.abs(values) ** 2) / tr**2)


def prep_figures(geom: OpticalGeometry, window: DetectorWindow) -> FigureTriple:
    phi, values = _point_and_window(geom, window)
    if window.width == 0:
        return FigureTriple(0.0, 1.0, 1.0)
    p, f, q = figures_from_overlaps(values, phi)
    return FigureTriple(float(p), float(f), float(q))


# ---------------------------------------------------------------------------
# target inversion


@dataclass(frozen=True)
class Candidate:
    x: float
    z: float
    angle_error: float
    probability: float


def _bloch_vector(theta, phi):
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)])


def _bloch_distance(theta1, phi1, theta2, phi2):
    """Great-circle angle between Bloch vectors."""
    c = (np.cos(theta1) * np.cos(theta2)
         + np.sin(theta1) * np.sin(theta2) * np.cos(phi1 - phi2))
    return np.arccos(np.clip(c, -1.0, 1.0))


def _target_angles(geom, x, z):
    phi = slit_amplitudes(geom, x, z)
    bob = remote_amplitudes(phi)
    theta, az = bloch_angles(bob[0], bob[1])
    return theta, az, degenerate_mask(geom, phi, z)


def _row_minima(err: np.ndarray) -> np.ndarray:
    """``(row, col)`` of finite entries no larger than their neighbours along each row."""
    padded = np.pad(err, ((0, 0), (1, 1)), constant_values=np.inf)
    centre = padded[:, 1:-1]
    mask = np.isfinite(centre) & (centre <= padded[:, :-2]) & (centre <= padded[:, 2:])
    return np.argwhere(mask)


def invert_target(
    geom: OpticalGeometry,
    target: PureKet,
    z_grid,
    x_grid,
    *,
    width: float = 0.0,
    angle_tol: float = 1e-3,
    refine: bool = True,
    seed_tol: float = 0.05,
) -> list[Candidate]:
    """Detector placements that prepare ``target`` with a point detector.

    The mismatch (Bloch-sphere angle) is tabulated on ``z_grid x x_grid``.
    Grid points within ``angle_tol`` are candidates. With ``refine``, every
    minimum along x of each plane below ``seed_tol`` also seeds a 2-D
    least-squares solve for an exact placement, since the target's two
    real parameters generically fix isolated points ``(x, z)``.

    Candidates are sorted by preparation probability for windows of
    ``width`` centred on them (probability density when ``width == 0``),
    highest first. The list may be empty.
    """

    if geom.num_slits != 2:
        raise DomainError("target inversion is implemented for qubits")
    t = target.normalized().amplitudes
    t_theta, t_phi = bloch_angles(t[0], t[1])
    t_vec = _bloch_vector(t_theta, t_phi)
    xs = np.asarray(x_grid, dtype=float)
    zs = np.asarray(z_grid, dtype=float)
    f = geom.focal_length

    err = np.empty((zs.size, xs.size))
    for n, z in enumerate(zs):
        th, az, deg = _target_angles(geom, xs, z)
        err[n] = np.where(deg, np.inf, _bloch_distance(th, az, t_theta, t_phi))

    found: dict[tuple[float, float], float] = {}
    for n, m in np.argwhere(err <= angle_tol):
        found[(float(xs[m]), float(zs[n]))] = float(err[n, m])

    if refine:
        x_scale = max(float(np.ptp(xs)), 1e-9) / max(xs.size - 1, 1)
        z_scale = max(float(np.ptp(zs)), 1e-9) / max(zs.size - 1, 1)
        lo = (xs.min() - x_scale, f)
        hi = (xs.max() + x_scale, 2 * f * (1 - 1e-9))

        def residual(v):
            z = min(max(v[1], f), hi[1])
            th, az, _ = _target_angles(geom, np.asarray(v[0]), z)
            return _bloch_vector(th, az) - t_vec

        for n, m in _row_minima(err):
            if err[n, m] > seed_tol:
                continue
            start = np.clip([xs[m], zs[n]], lo, hi)
            res = least_squares(residual, start, bounds=(lo, hi), x_scale=[x_scale, z_scale],
                                xtol=1e-14, ftol=1e-14, gtol=1e-14)
            x, z = (float(v) for v in res.x)
            th, az, deg = _target_angles(geom, np.asarray(x), z)
            e = float(_bloch_distance(th, az, t_theta, t_phi))
            if deg or e > angle_tol:
                continue
            duplicate = any(abs(x - x0) < 1e-3 * x_scale and abs(z - z0) < 1e-3 * z_scale
                            for x0, z0 in found)
            if not duplicate:
                found[(x, z)] = e

    out = []
    for (x, z), e in found.items():
        if width > 0:
            prob = prep_probability(geom, DetectorWindow(x, width, z))
        else:
            prob = float(np.sum(np.abs(slit_amplitudes(geom, x, z)) ** 2) / 2)
        out.append(Candidate(x, z, e, prob))
    out.sort(key=lambda c: (-c.probability, c.z, c.x))
    return out


@dataclass(frozen=True)
class Placement:
    x: float
    z: float
    angle_error: float
    probability: float
    fidelity: float


def _best_x_in_plane(geom, target_angles, z, x_grid, max_minima=None):
    """Best-matching x in plane ``z`` and its Bloch-sphere angle to the target.

    Grid minima are polished with a bounded scalar search; ``max_minima``
    limits the polishing to that many of the lowest ones.
    """
    t_theta, t_phi = target_angles
    xs = np.asarray(x_grid, dtype=float)

    def mismatch(x):
        th, az, deg = _target_angles(geom, np.asarray(x, dtype=float), z)
        return np.where(deg, 2 * np.pi, _bloch_distance(th, az, t_theta, t_phi))  # finite for the optimizer

    err = mismatch(xs)
    best = (float(xs[int(np.argmin(err))]), float(np.min(err)))
    minima = _row_minima(err[None, :])[:, 1]
    minima = minima[np.argsort(err[minima], kind="stable")][:max_minima]
    for m in minima:
        lo, hi = xs[max(m - 1, 0)], xs[min(m + 1, xs.size - 1)]
        res = minimize_scalar(lambda v: float(mismatch(v)), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13})
        if res.fun < best[1]:
            best = (float(res.x), float(res.fun))
    return best


def common_plane_placements(
    geom: OpticalGeometry,
    targets,
    z_grid,
    x_grid,
    width: float,
    *,
    angle_tol: float = 1e-2,
    max_minima: int = 3,
):
    """Place the detector for a set of targets prepared in one shared plane.

    In every plane of ``z_grid`` each target gets its best-matching x. A
    plane is consistent when all targets are matched within ``angle_tol``
    (radians on the Bloch sphere), and ``z*`` is the consistent plane with
    the largest mean preparation probability. Returns ``z*`` and a list of
    :class:`Placement` in that plane, or ``(None, [None, ...])`` when no
    plane is consistent.
    """
    targets = [t.normalized() for t in targets]
    angles = [bloch_angles(*t.amplitudes) for t in targets]
    best = None
    for z in np.asarray(z_grid, dtype=float):
        z = float(z)
        matches = [_best_x_in_plane(geom, a, z, x_grid, max_minima) for a in angles]
        if max(e for _, e in matches) > angle_tol:
            continue
        xs = np.array([x for x, _ in matches])
        values = window_overlaps(geom, xs, width, z)
        mean_p = float(np.mean(np.einsum("ii...->...", values).real) / geom.num_slits)
        if best is None or mean_p > best[0]:
            best = (mean_p, z, matches)
    if best is None:
        return None, [None] * len(targets)
    _, z_star, matches = best
    out = []
    for x, e in matches:
        window = DetectorWindow(x, width, z_star)
        out.append(Placement(x, z_star, e, prep_probability(geom, window), prep_fidelity(geom, window)))
    return z_star, out


def target_fidelity(target: PureKet, geom: OpticalGeometry, x: float, z: float) -> float:
    """|<target|psi_B(x, z)>|^2 for a point detector."""
    return ket_overlap(target.normalized(), remote_target_point(geom, x, z))
