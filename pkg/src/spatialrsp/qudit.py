"""Remote preparation of spatial qudits.

The pair source yields ``(1/sqrt D) sum_j e^{i mu_j} |j>_A |-j>_B`` over the
slit indices ``j = -ell..ell``. Postselection alone projects Bob onto
``sum_j phi_j(x, z)^* |-j>``, which does not reach every pure state. Placing
a wave plate (angle ``theta_j``) and a phase shifter (``phi_j``) behind each
slit, keeping only the H port and detecting at ``x = 0`` in the focal plane
instead leaves Bob in ``sum_j e^{i phi_j} cos(2 theta_j) |-j>`` with
probability ``1/D`` for any target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import OpticalGeometry, slit_amplitudes
from .postselect import degenerate_mask, remote_amplitudes, remote_state_from_overlaps, window_overlaps
from .states import DensityOperator, PureKet


def _check_dim(D: int) -> int:
    if not (isinstance(D, (int, np.integer)) and (D == 2 or (D >= 3 and D % 2 == 1))):
        raise DomainError(f"qudit dimension must be 2 or an odd integer >= 3, got {D!r}")
    return int(D)


def slit_indices(D: int) -> np.ndarray:
    """Slit offsets in units of ``d``, in array order: ``-ell..ell``, or ``-1/2, +1/2`` for the double slit."""
    D = _check_dim(D)
    if D == 2:
        return np.array([-0.5, 0.5])
    ell = (D - 1) // 2
    return np.arange(-ell, ell + 1, dtype=float)


def pair_phases(geom: OpticalGeometry, D: int | None = None) -> np.ndarray:
    """``mu_j = k delta_j**2 / (2 z_ap)`` with ``delta_j = j d``; needs ``aperture_distance``."""
    D = geom.num_slits if D is None else _check_dim(D)
    if geom.aperture_distance is None:
        raise DomainError("pair phases need the geometry's aperture_distance")
    delta = slit_indices(D) * geom.slit_separation
    return geom.k * delta**2 / (2 * geom.aperture_distance)


def entangled_qudit_state(geom: OpticalGeometry | None, D: int, with_mu: bool = False) -> PureKet:
    """Two-photon ket on ``D * D`` amplitudes, index ``a * D + b`` for ``|a>_A |b>_B``.

    Array position ``a`` holds slit ``j`` and its partner ``-j`` sits at ``D - 1 - a``.
    """
    D = _check_dim(D)
    mu = pair_phases(geom, D) if with_mu else np.zeros(D)
    c = np.zeros(D * D, dtype=complex)
    for a in range(D):
        c[a * D + (D - 1 - a)] = np.exp(1j * mu[a]) / math.sqrt(D)
    return PureKet(c)


def qudit_postselect_ket(geom: OpticalGeometry, x: float, z: float) -> PureKet:
    """Non-normalized ``sum_j phi_j(x, z) |j>`` for the geometry's slit array."""
    return PureKet(slit_amplitudes(geom, float(x), z))


@dataclass(frozen=True, eq=False)
class SlitArraySettings:
    """Wave-plate angles and phase shifts behind each slit, in slit array order."""

    thetas: np.ndarray
    phases: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.thetas, dtype=float).copy()
        p = np.asarray(self.phases, dtype=float).copy()
        if t.shape != p.shape or t.ndim != 1:
            raise DomainError("thetas and phases must be 1-D arrays of equal length")
        if np.any(t < -1e-12) or np.any(t > math.pi / 4 + 1e-12):
            raise DomainError("wave-plate angles must lie in [0, pi/4]")
        object.__setattr__(self, "thetas", t)
        object.__setattr__(self, "phases", p)

    @property
    def dim(self) -> int:
        return self.thetas.size

    @property
    def weights(self) -> np.ndarray:
        """H-port amplitude factors ``e^{i phi_j} cos 2theta_j``."""
        return np.exp(1j * self.phases) * np.cos(2 * self.thetas)


def qudit_settings_for_target(target: PureKet) -> SlitArraySettings:
    """``theta_j = arccos|c_{-j}| / 2`` and ``phi_j = arg c_{-j}``.

    Slit ``j`` feeds Bob's component ``-j``, hence the reflected index.
    """
    c = target.normalized().amplitudes[::-1]
    thetas = 0.5 * np.arccos(np.clip(np.abs(c), 0.0, 1.0))
    phases = np.where(np.abs(c) > 0, np.angle(c), 0.0)
    return SlitArraySettings(thetas, phases)


def qudit_prepared_state(settings: SlitArraySettings, D: int | None = None):
    """Bob's normalized state for the H outcome and its probability.

    The detector sits at ``x = 0`` in the focal plane, where every slit
    amplitude is the same, so it only fixes the overall rate.
    """
    D = settings.dim if D is None else _check_dim(D)
    if D != settings.dim:
        raise DomainError(f"settings have {settings.dim} slits, expected {D}")
    w = settings.weights
    probability = float(np.sum(np.abs(w) ** 2) / D)
    ket = PureKet(w[::-1]).normalized()
    return ket, probability


def discarded_probability(settings: SlitArraySettings) -> float:
    """Probability of the V port, after which Alice does nothing."""
    return 1.0 - qudit_prepared_state(settings)[1]


def qudit_prepared_state_finite(settings: SlitArraySettings, geom: OpticalGeometry, width: float) -> DensityOperator:
    """Extension beyond the point-detector treatment: a focal-plane window at ``x = 0``."""
    if geom.num_slits != settings.dim:
        raise DomainError("geometry and settings disagree on the slit count")
    w = settings.weights
    if width == 0:
        phi = slit_amplitudes(geom, 0.0, geom.focal_length)
        values = np.outer(phi, phi.conj())
    else:
        values = window_overlaps(geom, 0.0, width, geom.focal_length)
    weighted = w[:, None] * values * w.conj()[None, :]
    # Bob's amplitudes are w_j phi_j with no conjugation (see qudit_prepared_state),
    # so undo the transpose that remote_state_from_overlaps applies
    return DensityOperator(remote_state_from_overlaps(weighted.T))


# ---------------------------------------------------------------------------
# reachability by postselection alone


@dataclass(frozen=True)
class ReachabilityReport:
    dim: int
    samples: int
    matched: int
    best_fidelity: np.ndarray
    threshold: float

    @property
    def fraction(self) -> float:
        return self.matched / self.samples if self.samples else 0.0


def random_targets(D: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar-random unit vectors in ``C^D`` (rows)."""
    v = rng.standard_normal((n, D)) + 1j * rng.standard_normal((n, D))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def reachable_kets(geom: OpticalGeometry, x_grid, z_grid) -> np.ndarray:
    """Normalized Bob kets (rows) for every non-degenerate grid placement."""
    xs = np.asarray(x_grid, dtype=float)
    out = []
    for z in np.atleast_1d(np.asarray(z_grid, dtype=float)):
        phi = slit_amplitudes(geom, xs, z)
        keep = ~degenerate_mask(geom, phi, z)
        bob = remote_amplitudes(phi[:, keep]).T
        out.append(bob / np.linalg.norm(bob, axis=1, keepdims=True))
    return np.concatenate(out) if out else np.zeros((0, geom.num_slits), complex)


def qudit_postselect_reachability(
    geom: OpticalGeometry,
    x_grid,
    z_grid,
    *,
    targets=None,
    samples: int = 100,
    seed: int = 0,
    threshold: float = 1 - 1e-3,
) -> ReachabilityReport:
    """Fraction of targets some grid placement prepares with fidelity above ``threshold``.

    ``targets`` (rows) default to ``samples`` Haar-random states drawn with ``seed``.
    """
    D = geom.num_slits
    if targets is None:
        targets = random_targets(D, samples, np.random.default_rng(seed))
    targets = np.atleast_2d(np.asarray(targets, dtype=complex))
    targets = targets / np.linalg.norm(targets, axis=1, keepdims=True)
    kets = reachable_kets(geom, x_grid, z_grid)
    best = np.zeros(targets.shape[0])
    step = 4096
    for start in range(0, kets.shape[0], step):
        block = kets[start:start + step]
        fid = np.abs(targets.conj() @ block.T) ** 2
        best = np.maximum(best, fid.max(axis=1))
    matched = int(np.count_nonzero(best >= threshold))
    return ReachabilityReport(D, targets.shape[0], matched, best, threshold)
