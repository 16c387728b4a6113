"""Linearised excitation dynamics in momentum space.

Each mode k couples ``eta_hat(k)`` to ``conj(eta_hat(-k))`` through the 2x2
generator ``H(k) = [[w0 + u, u], [-u, -w0 - u]]`` with ``w0 = k^2/2`` and
``u`` the unnormalised transform of the pair potential.  Its eigenvalues are
``+-sqrt(w0 (w0 + 2u))``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import TorusGrid, dft_forward, dft_inverse, l2_norm
from .meanfield import NumericalError, _whole_steps, epsilon_direct_step, kinetic_symbol
from .potential import PairPotential

__all__ = [
    "MARGINAL_TOL",
    "BogolyubovMode",
    "omega_squared",
    "frequency",
    "classify",
    "generator",
    "bogolyubov_mode",
    "dispersion",
    "sound_speed",
    "propagator_coefficients",
    "linear_propagate",
    "linear_split_step",
    "unstable_modes",
    "marginal_modes",
    "LinearizationResult",
    "compare_linearization",
]

MARGINAL_TOL = 1e-12


def omega_squared(omega0, u_hat):
    return omega0 * (omega0 + 2.0 * np.real(u_hat))


def frequency(omega0, u_hat):
    """Principal root of ``omega0 (omega0 + 2 u_hat)``: real >= 0 or positive imaginary."""
    w2 = np.asarray(omega_squared(omega0, u_hat), dtype=float)
    out = np.where(w2 >= 0, np.sqrt(np.abs(w2)) + 0j, 1j * np.sqrt(np.abs(w2)))
    return out if out.ndim else complex(out)


def classify(omega_sq: float) -> str:
    if abs(omega_sq) < MARGINAL_TOL:
        return "marginal"
    return "unstable" if omega_sq < 0 else "oscillatory"


def generator(omega0: float, u_hat: complex) -> np.ndarray:
    return np.array([[omega0 + u_hat, u_hat], [-u_hat, -omega0 - u_hat]], dtype=complex)


@dataclass(frozen=True)
class BogolyubovMode:
    k: tuple[float, ...]
    omega0: float
    u_hat: complex
    omega_sq: float
    classification: str

    @property
    def generator(self) -> np.ndarray:
        return generator(self.omega0, self.u_hat)

    @property
    def omega(self) -> complex:
        return frequency(self.omega0, self.u_hat)


def bogolyubov_mode(U: PairPotential, k) -> BogolyubovMode:
    k = np.atleast_1d(np.asarray(k, dtype=float))
    omega0 = 0.5 * float(k @ k)
    u_hat = complex(U.hat_at(k[None, :])[0])
    w2 = float(omega_squared(omega0, u_hat))
    return BogolyubovMode(tuple(k), omega0, u_hat, w2, classify(w2))


def dispersion(U: PairPotential, k) -> complex:
    """Bogolyubov frequency at wavevector ``k`` (any real vector)."""
    return bogolyubov_mode(U, k).omega


def sound_speed(U: PairPotential) -> float:
    u0 = U.hat_zero
    if not u0 > 0:
        raise ValueError(f"no real sound speed: U_hat(0) = {u0} <= 0")
    return float(np.sqrt(u0))


def propagator_coefficients(omega_sq: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``c = cos(w t)`` and ``s = sin(w t)/w`` as functions of ``w^2``.

    Unstable modes use cosh/sinh, marginal ones the Jordan-block limit (1, t).
    """
    w2 = np.asarray(omega_sq, dtype=float)
    c = np.ones_like(w2)
    s = np.full_like(w2, float(t))
    osc = w2 >= MARGINAL_TOL
    uns = w2 <= -MARGINAL_TOL
    w = np.sqrt(w2[osc])
    c[osc] = np.cos(w * t)
    s[osc] = np.sin(w * t) / w
    g = np.sqrt(-w2[uns])
    with np.errstate(over="ignore"):
        c[uns] = np.cosh(g * t)
        s[uns] = np.sinh(g * t) / g
    return c, s


def _propagate_hat(grid: TorusGrid, eta_hat: np.ndarray, u_hat: np.ndarray, omega0: np.ndarray, t: float) -> np.ndarray:
    # first row of exp(-i H t) = c I - i s H acting on (eta(k), conj eta(-k))
    c, s = propagator_coefficients(omega_squared(omega0, u_hat), t)
    partner = np.conj(grid.reflect(eta_hat))
    with np.errstate(over="ignore", invalid="ignore"):
        return c * eta_hat - 1j * s * ((omega0 + u_hat) * eta_hat + u_hat * partner)


def linear_propagate(
    grid: TorusGrid, eta0: np.ndarray, U: PairPotential, t: float, kinetic: str = "spectral"
) -> np.ndarray:
    """Exact solution at time ``t`` of ``i d/dt eta = -Lap/2 eta + U*(2 Re eta)``."""
    omega0 = kinetic_symbol(grid, kinetic)
    out_hat = _propagate_hat(grid, dft_forward(grid, eta0), U.hat_table, omega0, t)
    bad = ~np.isfinite(out_hat)
    if bad.any():
        idx = np.argwhere(bad)[0]
        k = tuple(float(kv[tuple(idx)]) for kv in grid.wavevectors)
        raise NumericalError(f"linear propagation overflowed at k={k}, t={t}")
    return dft_inverse(grid, out_hat)


def linear_split_step(grid: TorusGrid, eta: np.ndarray, U: PairPotential, dt: float, kinetic: str = "spectral") -> np.ndarray:
    """One Strang step of the linear equation, independent of the closed form.

    The potential substep ``i d/dt eta = U*(2 Re eta)`` keeps ``Re eta`` fixed,
    so it is solved exactly by ``eta -= i dt U*(2 Re eta)``.
    """
    half = np.exp(-0.5j * dt * kinetic_symbol(grid, kinetic))
    eta = np.fft.ifftn(half * np.fft.fftn(eta))
    eta = eta - 1j * dt * np.fft.ifftn(U.hat_table * np.fft.fftn(2.0 * eta.real))
    return np.fft.ifftn(half * np.fft.fftn(eta))


def unstable_modes(U: PairPotential, grid: TorusGrid | None = None) -> list[tuple[tuple[float, ...], float]]:
    """Grid modes with negative ``omega^2``, as ``(k, growth_rate)`` sorted by k."""
    grid = grid or U.grid
    if grid != U.grid:
        raise ValueError("potential is sampled on a different grid")
    omega0 = 0.5 * grid.k_squared
    w2 = omega_squared(omega0, U.hat_table)
    out = []
    for idx in np.argwhere(w2 <= -MARGINAL_TOL):
        idx = tuple(idx)
        k = tuple(float(kv[idx]) for kv in grid.wavevectors)
        out.append((k, float(np.sqrt(-w2[idx]))))
    return sorted(out)


def marginal_modes(U: PairPotential) -> list[tuple[float, ...]]:
    """Nonzero grid modes sitting on ``omega0 = -2 U_hat`` (static modes)."""
    grid = U.grid
    omega0 = 0.5 * grid.k_squared
    w2 = omega_squared(omega0, U.hat_table)
    hits = np.argwhere((np.abs(w2) < MARGINAL_TOL) & (grid.k_squared > 0))
    return sorted(tuple(float(kv[tuple(i)]) for kv in grid.wavevectors) for i in hits)


@dataclass(frozen=True)
class LinearizationResult:
    l2_gap: float
    eps_l2_sup: float
    eps_norm_history: np.ndarray


def compare_linearization(
    grid: TorusGrid, eps0: np.ndarray, U: PairPotential, t: float, dt: float
) -> LinearizationResult:
    """Run the nonlinear excitation equation (reference fixed at 1) and its linearisation.

    Requires a repulsive potential so that the constant reference is stationary.
    """
    if abs(U.hat_zero - U.l1_norm) > 1e-12 * max(1.0, U.l1_norm):
        raise ValueError("torus comparison needs U_hat(0) = ||U||_1 (a non-negative potential)")
    n = _whole_steps(t, dt, "t")
    ref = grid.ones()
    eps = np.array(eps0, dtype=complex)
    hist = [l2_norm(grid, eps)]
    for _ in range(n):
        eps = epsilon_direct_step(grid, eps, ref, U, dt)
        hist.append(l2_norm(grid, eps))
    eta = linear_propagate(grid, eps0, U, t)
    hist = np.asarray(hist)
    return LinearizationResult(l2_norm(grid, eta - eps), float(hist.max()), hist)
