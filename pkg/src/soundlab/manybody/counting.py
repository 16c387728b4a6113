"""Good/bad particle bookkeeping: projectors, counting operators, truncated states."""

from __future__ import annotations

from dataclasses import dataclass
from math import floor

import numpy as np
import scipy.linalg as la

from ..meanfield import MeanFieldState
from .fock import FockBasis, one_particle_rdm, site_vector

__all__ = [
    "projectors",
    "CountingWeight",
    "m_weight",
    "n_weight",
    "BadParticleDecomposition",
    "pk_projector",
    "weighted_counting",
    "tilde_psi",
    "density_comparisons",
]


def projectors(phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-particle ``p = |phi><phi| / ||phi||^2`` and ``q = 1 - p``."""
    phi = np.asarray(phi, dtype=complex).ravel()
    nrm2 = np.vdot(phi, phi).real
    if nrm2 == 0:
        raise ValueError("projector onto the zero vector")
    p = np.outer(phi, phi.conj()) / nrm2
    return p, np.eye(phi.size) - p


@dataclass(frozen=True)
class CountingWeight:
    """Weight ``w(k)`` on ``k = 0..N``, read with an index shift ``d``: ``w_d(k) = w(k + d)``.

    Outside ``0..N`` the weight is zero.
    """

    values: tuple[float, ...]
    shift: int = 0

    def __post_init__(self):
        if any(v < 0 for v in self.values):
            raise ValueError("counting weights must be non-negative")

    @property
    def particles(self) -> int:
        return len(self.values) - 1

    def at(self, k: int) -> float:
        j = k + self.shift
        return self.values[j] if 0 <= j < len(self.values) else 0.0

    def shifted(self, d: int) -> "CountingWeight":
        return CountingWeight(self.values, self.shift + d)

    def table(self) -> np.ndarray:
        """``w_d(k)`` for ``k = 0..N``."""
        return np.array([self.at(k) for k in range(len(self.values))])

    def __mul__(self, other: "CountingWeight") -> "CountingWeight":
        return CountingWeight(tuple(self.table() * other.table()))


def m_weight(N: int, rho: float) -> CountingWeight:
    """``m(k) = k/rho`` for ``k <= rho`` and 1 beyond."""
    if not rho > 0:
        raise ValueError(f"density must be positive, got {rho}")
    return CountingWeight(tuple(k / rho if k <= rho * (1 + 1e-12) else 1.0 for k in range(N + 1)))


def n_weight(N: int) -> CountingWeight:
    """``n(k) = sqrt(k/N)``, whose operator squares to the mean bad fraction."""
    return CountingWeight(tuple(np.sqrt(k / N) for k in range(N + 1)))


class BadParticleDecomposition:
    """Spectral resolution of the bad-particle number ``N - a_phi^+ a_phi``.

    ``P_k`` is the projector onto its eigenvalue ``k``; this equals the
    symmetrised product of ``k`` factors ``q`` and ``N - k`` factors ``p``.
    """

    def __init__(self, basis: FockBasis, phi: np.ndarray):
        phi = np.asarray(phi, dtype=complex).ravel()
        if phi.size != basis.modes:
            raise ValueError("orbital does not match the number of lattice modes")
        v = phi / np.linalg.norm(phi)
        self.basis = basis
        self.orbital = v
        n_phi = basis.one_body(np.outer(v, v.conj())).toarray()
        evals, vecs = la.eigh(0.5 * (n_phi + n_phi.conj().T))
        bad = basis.particles - evals
        labels = np.rint(bad).astype(int)
        if np.max(np.abs(bad - labels)) > 1e-8:
            raise RuntimeError("bad-particle number has non-integer eigenvalues")
        self._vectors = vecs
        self._labels = labels

    @property
    def particles(self) -> int:
        return self.basis.particles

    def components(self, psi: np.ndarray) -> np.ndarray:
        return self._vectors.conj().T @ psi

    def project(self, psi: np.ndarray, k: int) -> np.ndarray:
        if not 0 <= k <= self.particles:
            return np.zeros_like(psi, dtype=complex)
        c = self.components(psi)
        c[self._labels != k] = 0
        return self._vectors @ c

    def matrix(self, k: int) -> np.ndarray:
        if not 0 <= k <= self.particles:
            return np.zeros((len(self.basis),) * 2, dtype=complex)
        V = self._vectors[:, self._labels == k]
        return V @ V.conj().T

    def sector_weights(self, psi: np.ndarray) -> np.ndarray:
        """``||P_k psi||^2`` for ``k = 0..N``."""
        c2 = np.abs(self.components(psi)) ** 2
        return np.bincount(self._labels, weights=c2, minlength=self.particles + 1)

    def apply(self, psi: np.ndarray, w: CountingWeight) -> np.ndarray:
        """``w_hat psi = sum_k w_d(k) P_k psi``."""
        c = self.components(psi) * w.table()[self._labels]
        return self._vectors @ c

    def expectation(self, psi: np.ndarray, w: CountingWeight) -> float:
        return float(np.dot(w.table(), self.sector_weights(psi)))

    def truncate(self, psi: np.ndarray, kmax: float) -> np.ndarray:
        c = self.components(psi)
        c[self._labels > kmax] = 0
        return self._vectors @ c


def pk_projector(basis: FockBasis, phi: np.ndarray, k: int) -> np.ndarray:
    """Dense matrix of ``P_k`` (zero for ``k`` outside ``0..N``)."""
    return BadParticleDecomposition(basis, phi).matrix(k)


def weighted_counting(basis: FockBasis, phi: np.ndarray, w: CountingWeight) -> np.ndarray:
    """Dense matrix of ``sum_k w_d(k) P_k``."""
    dec = BadParticleDecomposition(basis, phi)
    return sum(w.at(k) * dec.matrix(k) for k in range(basis.particles + 1))


def tilde_psi(psi: np.ndarray, decomposition: BadParticleDecomposition, rho: float) -> np.ndarray:
    """Keep the sectors with at most ``rho`` bad particles."""
    return decomposition.truncate(psi, floor(rho + 1e-12))


def density_comparisons(psi: np.ndarray, basis: FockBasis, state: MeanFieldState, rho: float) -> dict[str, float]:
    """Distances between the rescaled many-body density matrices and ``|eps><eps|``.

    ``state`` must live on the same 1-D lattice as ``basis``.  Distances use
    the spectral norm; ``m_expect`` uses the instantaneous orbital ``varphi_t``.
    """
    grid = state.grid
    if grid.dim != 1 or grid.n != basis.modes:
        raise ValueError("mean-field state and Fock basis live on different lattices")
    lam = grid.volume
    dec = BadParticleDecomposition(basis, site_vector(grid, state.varphi))
    psi_t = tilde_psi(psi, dec, rho)
    _, q_ref = projectors(site_vector(grid, state.phi_ref))
    e = site_vector(grid, state.epsilon)
    macro = np.outer(e, e.conj())
    micro = lam * q_ref @ one_particle_rdm(psi, basis) @ q_ref
    micro_t = lam * q_ref @ one_particle_rdm(psi_t, basis, normalize=False) @ q_ref
    weights = dec.sector_weights(psi)
    return {
        "m_expect": float(np.dot(m_weight(basis.particles, rho).table(), weights)),
        "psi_gap_sq": float(np.linalg.norm(psi - psi_t) ** 2),
        "tilde_norm": float(np.linalg.norm(psi_t)),
        "d_micro": float(np.linalg.norm(micro - macro, 2)),
        "d_tilde": float(np.linalg.norm(micro_t - macro, 2)),
    }
