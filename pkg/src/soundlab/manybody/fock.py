"""Occupation-number representation of N bosons on a periodic 1-D lattice.

One-particle vectors live in the orthonormal site basis: a lattice function
``f`` with grid measure ``h`` corresponds to the coefficient vector
``sqrt(h) * f``.  Operators ``a_x`` are the annihilators of those site
modes.
"""

from __future__ import annotations

from functools import cached_property
from itertools import combinations_with_replacement
from math import comb, lgamma

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from ..grid import TorusGrid
from ..potential import PairPotential

__all__ = [
    "MAX_DIMENSION",
    "EIGH_DIMENSION",
    "FockBasis",
    "site_vector",
    "build_hamiltonian",
    "diagonalize",
    "evolve",
    "product_state",
    "one_particle_rdm",
    "expectation",
]

MAX_DIMENSION = 200_000
EIGH_DIMENSION = 3000


class FockBasis:
    """All occupation tuples ``(n_1..n_M)`` with ``sum n = N``, in reverse-lexicographic order."""

    def __init__(self, modes: int, particles: int):
        if modes < 1 or particles < 0:
            raise ValueError("need at least one mode and a non-negative particle number")
        self.modes = modes
        self.particles = particles
        self.dimension = comb(particles + modes - 1, particles)
        if self.dimension > MAX_DIMENSION:
            raise ValueError(f"Fock dimension {self.dimension} exceeds the guard {MAX_DIMENSION}")
        states = np.zeros((self.dimension, modes), dtype=np.int64)
        for i, sites in enumerate(combinations_with_replacement(range(modes), particles)):
            np.add.at(states[i], list(sites), 1)
        self.states = states
        self._index = {tuple(s): i for i, s in enumerate(states.tolist())}

    def index(self, occupation) -> int:
        return self._index[tuple(occupation)]

    def __len__(self) -> int:
        return self.dimension

    @cached_property
    def _hops(self) -> dict[tuple[int, int], sp.csr_matrix]:
        ops = {}
        for x in range(self.modes):
            for y in range(self.modes):
                ops[x, y] = self._build_hop(x, y)
        return ops

    def hop(self, x: int, y: int) -> sp.csr_matrix:
        """Sparse matrix of ``a_x^dagger a_y``."""
        return self._hops[x, y]

    def _build_hop(self, x: int, y: int) -> sp.csr_matrix:
        n = self.states
        if x == y:
            return sp.diags(n[:, x].astype(float)).tocsr()
        src = np.nonzero(n[:, y] > 0)[0]
        rows, vals = [], []
        for i in src:
            occ = n[i].copy()
            amp = np.sqrt(occ[y])
            occ[y] -= 1
            amp *= np.sqrt(occ[x] + 1)
            occ[x] += 1
            rows.append(self._index[tuple(occ.tolist())])
            vals.append(amp)
        return sp.csr_matrix((vals, (rows, src)), shape=(self.dimension,) * 2)

    def one_body(self, matrix: np.ndarray) -> sp.csr_matrix:
        """Second quantisation ``sum_xy T_xy a_x^dagger a_y`` of an M x M matrix."""
        matrix = np.asarray(matrix)
        out = sp.csr_matrix((self.dimension,) * 2, dtype=complex)
        for (x, y), op in self._hops.items():
            if matrix[x, y] != 0:
                out = out + matrix[x, y] * op
        return out


def site_vector(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    """Orthonormal-site coefficients ``sqrt(h) f`` of a lattice function."""
    return np.sqrt(grid.h) * np.asarray(f, dtype=complex).ravel()


def _lattice_laplacian_kinetic(grid: TorusGrid) -> np.ndarray:
    """``-Lap/2`` as the periodic nearest-neighbour difference matrix."""
    M, h = grid.n, grid.h
    T = np.zeros((M, M))
    for x in range(M):
        T[x, x] += 1.0 / h**2
        T[x, (x + 1) % M] -= 0.5 / h**2
        T[x, (x - 1) % M] -= 0.5 / h**2
    return T


def build_hamiltonian(grid: TorusGrid, U: PairPotential, N: int, rho: float, basis: FockBasis | None = None) -> sp.csr_matrix:
    """Hamiltonian ``sum_j -Lap_j/2 + (1/rho) sum_{j<k} U(x_j - x_k)`` on the Fock space.

    The pair term is ``(1/2 rho) sum_xy U(x-y) a_x^+ a_y^+ a_y a_x =
    (1/2 rho) [sum_xy U(x-y) n_x n_y - U(0) sum_x n_x]``.
    """
    if grid.dim != 1:
        raise ValueError("many-body lattice must be one-dimensional")
    if not rho > 0:
        raise ValueError(f"density must be positive, got {rho}")
    basis = basis or FockBasis(grid.n, N)
    if basis.modes != grid.n or basis.particles != N:
        raise ValueError("basis does not match grid and particle number")
    H = basis.one_body(_lattice_laplacian_kinetic(grid))
    n = basis.states.astype(float)
    Uxy = _pair_matrix(grid, U)
    diag = (np.einsum("ix,xy,iy->i", n, Uxy, n) - np.diag(Uxy)[0] * n.sum(axis=1)) / (2.0 * rho)
    H = H + sp.diags(diag)
    return sp.csr_matrix(H.real) if np.isrealobj(U.samples) else sp.csr_matrix(H)


def _pair_matrix(grid: TorusGrid, U: PairPotential) -> np.ndarray:
    M = grid.n
    idx = (np.arange(M)[:, None] - np.arange(M)[None, :]) % M
    return np.asarray(U.samples, dtype=float)[idx]


def diagonalize(H) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of a Hermitian Fock operator, reusable across many :func:`evolve` calls."""
    dense = H.toarray() if sp.issparse(H) else np.asarray(H)
    return la.eigh(dense)


def evolve(psi0: np.ndarray, H, t: float, method: str = "auto") -> np.ndarray:
    """``exp(-i H t) psi0``.

    ``H`` is a (sparse) Hermitian matrix or an ``(energies, vectors)`` pair
    from :func:`diagonalize`.  ``method="eigh"`` uses the eigenbasis,
    ``"krylov"`` scipy's scaled truncated-Taylor action of the exponential;
    ``"auto"`` picks ``eigh`` up to dimension 3000.
    """
    psi0 = np.asarray(psi0, dtype=complex)
    if isinstance(H, tuple):
        E, V = H
        return V @ (np.exp(-1j * E * t) * (V.conj().T @ psi0))
    dim = H.shape[0]
    if method == "auto":
        method = "eigh" if dim <= EIGH_DIMENSION else "krylov"
    if t == 0:
        return psi0.copy()
    if method == "eigh":
        return evolve(psi0, diagonalize(H), t)
    if method == "krylov":
        out = expm_multiply(-1j * t * sp.csr_matrix(H), psi0)
        if not np.all(np.isfinite(out)):
            raise RuntimeError(f"time stepping failed to converge at t={t}")
        return out
    raise ValueError(f"unknown method {method!r}")


def product_state(phi: np.ndarray, N: int, basis: FockBasis | None = None) -> np.ndarray:
    """``(a_phi^dagger)^N |vac> / sqrt(N!)`` for the normalised site vector ``phi``."""
    phi = np.asarray(phi, dtype=complex).ravel()
    nrm = np.linalg.norm(phi)
    if nrm == 0:
        raise ValueError("cannot build a product state from the zero vector")
    v = phi / nrm
    basis = basis or FockBasis(phi.size, N)
    n = basis.states
    # sqrt(N! / prod n_x!) * prod v_x^n_x
    log_c = 0.5 * (lgamma(N + 1) - np.sum([[lgamma(k + 1) for k in occ] for occ in n.tolist()], axis=1))
    return np.exp(log_c) * np.prod(v[None, :] ** n, axis=1)


def one_particle_rdm(psi: np.ndarray, basis: FockBasis, normalize: bool = True) -> np.ndarray:
    """``gamma_xy = <psi, a_y^+ a_x psi> / N`` in the orthonormal site basis.

    With ``normalize=False`` the vector's own norm is kept (trace = ||psi||^2).
    """
    M, N = basis.modes, basis.particles
    gamma = np.empty((M, M), dtype=complex)
    for x in range(M):
        for y in range(M):
            gamma[x, y] = np.vdot(psi, basis.hop(y, x) @ psi)
    gamma /= N
    if normalize:
        nrm = np.vdot(psi, psi).real
        gamma /= nrm
    return 0.5 * (gamma + gamma.conj().T)


def expectation(psi: np.ndarray, op) -> complex:
    return complex(np.vdot(psi, op @ psi))

