"""Pure kets, density operators and the fidelity/purity functionals.

Qubit kets are stored in the slit order ``(|l>, |r>)``, so ``alpha`` is the
first amplitude and ``beta`` the second. Qudit kets run over slit indices
``-ell, ..., ell``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
NEG_EIG_TOL = 1e-10


def _fix_phase(c: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the first nonzero amplitude is real and nonnegative."""
    nz = np.flatnonzero(np.abs(c) > 0)
    if nz.size == 0:
        return c
    lead = c[nz[0]]
    return c * np.exp(-1j * np.angle(lead))


@dataclass(frozen=True, eq=False)
class PureKet:
    """Column of amplitudes. Use :meth:`normalized` to get a unit ket."""

    amplitudes: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.amplitudes, dtype=complex).ravel().copy()
        if c.size < 2:
            raise DomainError("a ket needs at least two amplitudes")
        c.setflags(write=False)
        object.__setattr__(self, "amplitudes", c)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "PureKet":
        n = self.norm
        if n == 0:
            raise DomainError("cannot normalize the zero vector")
        return PureKet(_fix_phase(self.amplitudes / n))

    def projector(self) -> "DensityOperator":
        c = self.amplitudes
        return DensityOperator(np.outer(c, c.conj()))

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureKet":
        c = np.zeros(dim, dtype=complex)
        c[index] = 1.0
        return cls(c)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.amplitudes, dtype=dtype)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Square complex matrix; :meth:`validate` checks it is a physical state."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError(f"density matrix must be square, got shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def validate(self) -> "DensityOperator":
        """Check hermiticity, unit trace and positivity; clamp tiny negative eigenvalues.

        Returns a (possibly repaired) operator, raising DomainError when the
        violations exceed the tolerances.
        """
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > HERMITIAN_TOL:
            raise DomainError("density matrix is not Hermitian")
        if abs(np.trace(m) - 1) > TRACE_TOL:
            raise DomainError(f"density matrix trace {np.trace(m).real:.15g} != 1")
        w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
        if w.min() < -NEG_EIG_TOL:
            raise DomainError(f"density matrix has negative eigenvalue {w.min():.3e}")
        if w.min() < 0:
            w = np.clip(w, 0, None)
            w /= w.sum()
            return DensityOperator((v * w) @ v.conj().T)
        return self

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityOperator":
        return cls(np.eye(dim) / dim)


@dataclass(frozen=True)
class BlochPoint:
    """Polar angle ``theta`` in [0, pi] and azimuth ``phi`` in [-pi, pi)."""

    theta: float
    phi: float


@dataclass(frozen=True)
class FigureTriple:
    probability: float
    fidelity: float
    purity: float


def _check_dims(target: PureKet, rho: DensityOperator):
    if target.dim != rho.dim:
        raise DomainError(f"dimension mismatch: ket {target.dim}, state {rho.dim}")


def fidelity(target: PureKet, rho: DensityOperator) -> float:
    """<psi|rho|psi>, clamped to [0, 1]."""
    _check_dims(target, rho)
    c = target.amplitudes
    value = np.vdot(c, rho.matrix @ c).real
    return float(min(max(value, 0.0), 1.0))


def purity(rho: DensityOperator) -> float:
    """Tr(rho^2)."""
    m = rho.matrix
    return float(np.trace(m @ m).real)


def wrap_phase(phi):
    """Map angles into [-pi, pi)."""
    return (np.asarray(phi) + math.pi) % (2 * math.pi) - math.pi


def bloch_to_ket(b: BlochPoint) -> PureKet:
    return PureKet([math.cos(b.theta / 2), np.exp(1j * b.phi) * math.sin(b.theta / 2)])


def bloch_angles(alpha, beta, pole_tol: float = 1e-15):
    """Vectorised ``(theta, phi)`` of the (normalized) qubit ``alpha|l> + beta|r>``.

    ``phi`` is zero where either amplitude vanishes.
    """
    alpha = np.asarray(alpha, dtype=complex)
    beta = np.asarray(beta, dtype=complex)
    ra, rb = np.abs(alpha), np.abs(beta)
    theta = 2 * np.arctan2(rb, ra)
    pole = (ra <= pole_tol * (ra + rb)) | (rb <= pole_tol * (ra + rb))
    phi = np.where(pole, 0.0, np.angle(beta * alpha.conj()))
    return theta, wrap_phase(phi)


def ket_to_bloch(psi: PureKet, norm_tol: float = 1e-10) -> BlochPoint:
    if psi.dim != 2:
        raise DomainError(f"Bloch angles need a qubit, got dimension {psi.dim}")
    if abs(psi.norm - 1) > norm_tol:
        raise DomainError(f"ket is not normalized (norm {psi.norm:.12g})")
    theta, phi = bloch_angles(*psi.amplitudes)
    return BlochPoint(float(theta), float(phi))


def ket_overlap(a: PureKet, b: PureKet) -> float:
    """|<a|b>|^2 for normalized kets."""
    if a.dim != b.dim:
        raise DomainError(f"dimension mismatch: {a.dim} vs {b.dim}")
    return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
