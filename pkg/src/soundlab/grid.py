"""Periodic simulation box and its discrete Fourier transform.

Fields are plain complex numpy arrays of shape ``(n,) * dim`` stored in FFT
order: index ``j`` along an axis sits at position ``x_j = j*h`` for
``j < n/2`` and ``(j - n)*h`` otherwise, so every coordinate is already the
minimum-image displacement from the origin, and index 0 is the box centre.

Transform convention (continuum normalisation with grid weights)::

    f_hat(k) = (2 pi)^(-d/2) * h^d * sum_x exp(-i k.x) f(x)
    f(x)     = (2 pi)^(-d/2) * dk^d * sum_k exp(+i k.x) f_hat(k),   dk = 2 pi / L

With these constants Parseval reads ``sum_k |f_hat(k)|^2 dk^d = ||f||_2^2``
where ``||f||_2^2 = h^d sum_x |f(x)|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "TorusGrid",
    "make_grid",
    "dft_forward",
    "dft_inverse",
    "l2_norm",
    "linf_norm",
    "hat_l1_norm",
    "inner",
    "shift",
]


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic lattice of ``n`` points per axis on a box of side ``L``."""

    dim: int
    n: int
    L: float

    def __post_init__(self) -> None:
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.n < 2 or self.n % 2:
            raise ValueError(f"points per axis must be even and >= 2, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"side length must be positive, got {self.L}")

    @property
    def h(self) -> float:
        return self.L / self.n

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / self.L

    @property
    def volume(self) -> float:
        return float(self.L) ** self.dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def cell(self) -> float:
        """Real-space measure weight ``h^dim``."""
        return self.h**self.dim

    @property
    def k_cell(self) -> float:
        """Momentum-space measure weight ``dk^dim``."""
        return self.dk**self.dim

    @cached_property
    def axis_positions(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, d=1.0 / self.n) * self.h

    @cached_property
    def axis_wavevectors(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)

    @cached_property
    def positions(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_positions] * self.dim), indexing="ij"))

    @cached_property
    def wavevectors(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*([self.axis_wavevectors] * self.dim), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """Minimum-image distance of every grid point from the origin."""
        return np.sqrt(sum(x**2 for x in self.positions))

    @cached_property
    def k_squared(self) -> np.ndarray:
        return sum(k**2 for k in self.wavevectors)

    @cached_property
    def neg_index(self) -> tuple[np.ndarray, ...]:
        """Index arrays mapping each mode k to the mode -k (Nyquist maps to itself)."""
        idx = (-np.arange(self.n)) % self.n
        return tuple(np.meshgrid(*([idx] * self.dim), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)

    def ones(self) -> np.ndarray:
        return np.ones(self.shape, dtype=complex)

    def check(self, f: np.ndarray) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != self.shape:
            raise ValueError(f"field of shape {f.shape} does not live on grid {self.shape}")
        return f

    def reflect(self, f_hat: np.ndarray) -> np.ndarray:
        """Return g with g(k) = f(-k)."""
        return f_hat[self.neg_index]

    @property
    def forward_scale(self) -> float:
        return (2.0 * np.pi) ** (-self.dim / 2.0) * self.cell

    @property
    def inverse_scale(self) -> float:
        # ifftn already divides by n^dim
        return (2.0 * np.pi) ** (-self.dim / 2.0) * self.k_cell * self.n**self.dim


def make_grid(dim: int, n: int, L: float) -> TorusGrid:
    """Build a simulation grid; ``n`` must be even and at least 4."""
    if n < 4 or n % 2:
        raise ValueError(f"n must be even and >= 4, got {n}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    return TorusGrid(int(dim), int(n), float(L))


def dft_forward(grid: TorusGrid, f: np.ndarray) -> np.ndarray:
    return np.fft.fftn(grid.check(f)) * grid.forward_scale


def dft_inverse(grid: TorusGrid, f_hat: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(grid.check(f_hat)) * grid.inverse_scale


def l2_norm(grid: TorusGrid, f: np.ndarray) -> float:
    return float(np.sqrt(grid.cell * np.sum(np.abs(f) ** 2)))


def linf_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))


def hat_l1_norm(grid: TorusGrid, f: np.ndarray) -> float:
    """Discrete ``||f_hat||_1 = dk^d sum_k |f_hat(k)|``."""
    return float(grid.k_cell * np.sum(np.abs(dft_forward(grid, f))))


def inner(grid: TorusGrid, f: np.ndarray, g: np.ndarray) -> complex:
    """``<f, g> = h^d sum conj(f) g``."""
    return complex(grid.cell * np.vdot(f, g))


def shift(f: np.ndarray, steps: tuple[int, ...] | int) -> np.ndarray:
    """Translate a field by whole lattice steps: ``shift(f, s)(x) = f(x - s*h)``."""
    if isinstance(steps, int):
        steps = (steps,) * f.ndim
    return np.roll(f, steps, axis=tuple(range(f.ndim)))
