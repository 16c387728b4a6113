"""Compactly supported pair potentials and periodic convolution."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any, Mapping

import numpy as np

from .grid import TorusGrid, dft_forward, dft_inverse

__all__ = ["PairPotential", "bump_profile", "bump_potential", "zero_potential", "convolve", "potential_from_spec"]


@dataclass(frozen=True, eq=False)
class PairPotential:
    """Real pair potential sampled on a grid.

    ``hat_table`` is the *unnormalised* transform ``sum_x h^d U(x) exp(-i k.x)``,
    i.e. the multiplier for which ``dft_forward(U * f) = hat_table * dft_forward(f)``.
    """

    grid: TorusGrid
    samples: np.ndarray
    range: float
    strength: float
    sign: int

    @property
    def l1_norm(self) -> float:
        return float(self.grid.cell * np.sum(np.abs(self.samples)))

    @cached_property
    def hat_table(self) -> np.ndarray:
        hat = np.fft.fftn(self.samples) * self.grid.cell
        if np.array_equal(self.samples, self.grid.reflect(self.samples)):
            # even U: drop the rounding-level imaginary part
            hat = hat.real.astype(complex)
        return hat

    @property
    def hat_zero(self) -> float:
        return float(self.hat_table.flat[0].real)

    def hat_at(self, k: np.ndarray | float) -> np.ndarray:
        """Evaluate the unnormalised transform at arbitrary wavevectors.

        ``k`` has shape ``(..., dim)`` (or is scalar / 1-D for ``dim == 1``).
        """
        k = np.asarray(k, dtype=float)
        if self.grid.dim == 1 and (k.ndim == 0 or k.shape[-1] != 1):
            k = k[..., None]
        pts = np.stack([x.ravel() for x in self.grid.positions], axis=-1)
        mask = self.samples.ravel() != 0
        phase = np.exp(-1j * (k @ pts[mask].T))
        return self.grid.cell * (phase @ self.samples.ravel()[mask])


def bump_profile(r: np.ndarray, width: float) -> np.ndarray:
    """Standard mollifier ``exp(1 - 1/(1 - (r/w)^2))`` on ``r < w``, peak 1 at r = 0."""
    s = np.asarray(r, dtype=float) / width
    out = np.zeros_like(s)
    inside = s < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


def bump_potential(grid: TorusGrid, strength: float, range: float, sign: int = 1) -> PairPotential:
    if not strength > 0:
        raise ValueError(f"strength must be positive, got {strength}")
    if not 0 < range < grid.L / 2:
        raise ValueError(f"range must lie in (0, L/2) = (0, {grid.L / 2}), got {range}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    samples = sign * strength * bump_profile(grid.radius, range)
    return PairPotential(grid, samples, float(range), float(strength), int(sign))


def zero_potential(grid: TorusGrid) -> PairPotential:
    return PairPotential(grid, np.zeros(grid.shape), 0.0, 0.0, 1)


def convolve(U: PairPotential, f: np.ndarray) -> np.ndarray:
    """Periodic convolution ``(U*f)(x) = h^d sum_y U(x - y) f(y)``."""
    grid = U.grid
    return dft_inverse(grid, U.hat_table * dft_forward(grid, f))


def potential_from_spec(grid: TorusGrid, spec: Mapping[str, Any]) -> PairPotential:
    kind = spec.get("kind", "bump")
    if kind == "zero":
        return zero_potential(grid)
    if kind != "bump":
        raise ValueError(f"unknown potential kind {kind!r}")
    return bump_potential(grid, float(spec["strength"]), float(spec["range"]), int(spec.get("sign", 1)))
