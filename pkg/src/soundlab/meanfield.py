"""Split-step integration of the Hartree, reference and excitation equations.

All three flows share one Strang splitting: a half kinetic step applied
exactly in momentum space, a full potential step in position space, and
another half kinetic step.  The potential step of the Hartree and
reference flows is an exact phase rotation, so every substep is unitary.

The excitation equation is integrated by its own route
(:func:`epsilon_direct_step`) which treats the inhomogeneous source term by
a midpoint rule; comparing it with :func:`extract_excitation` gives a
second-order consistency check.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .grid import TorusGrid, hat_l1_norm, inner, l2_norm, linf_norm
from .potential import PairPotential, bump_profile

__all__ = [
    "NumericalError",
    "ExcitationSpec",
    "CutoffFunction",
    "MeanFieldState",
    "DiagnosticsRecord",
    "kinetic_symbol",
    "smoothstep",
    "make_cutoff",
    "plateau_profile",
    "initial_state",
    "hartree_step",
    "reference_step",
    "epsilon_direct_step",
    "advance",
    "extract_excitation",
    "energy",
    "diagnostics",
    "default_dt",
    "integrate",
]

PLATEAU_MARGIN = 1.0 / 8.0


class NumericalError(RuntimeError):
    """A simulation produced non-finite values or otherwise broke down."""


def kinetic_symbol(grid: TorusGrid, kind: str = "spectral") -> np.ndarray:
    """Momentum-space symbol of ``-Laplacian/2``.

    ``"spectral"`` is the exact ``k^2/2``; ``"lattice"`` is the symbol of the
    nearest-neighbour finite-difference Laplacian, ``sum_i (1 - cos(k_i h))/h^2``.
    """
    if kind == "spectral":
        return 0.5 * grid.k_squared
    if kind == "lattice":
        h = grid.h
        return sum((1.0 - np.cos(k * h)) / h**2 for k in grid.wavevectors)
    raise ValueError(f"unknown kinetic kind {kind!r}")


def smoothstep(s: np.ndarray) -> np.ndarray:
    """C^2 ramp from 0 (s <= 0) to 1 (s >= 1)."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True, eq=False)
class ExcitationSpec:
    amplitude: float
    width: float
    shape: str = "smooth-bump"

    @classmethod
    def from_mapping(cls, spec: Mapping[str, Any]) -> "ExcitationSpec":
        return cls(float(spec["amplitude"]), float(spec["width"]), str(spec.get("shape", "smooth-bump")))

    def profile(self, grid: TorusGrid) -> np.ndarray:
        r = grid.radius
        if self.shape == "smooth-bump":
            return self.amplitude * bump_profile(r, self.width)
        if self.shape == "gaussian-bump":
            # tail at the support radius L/8 is below exp(-32)
            return self.amplitude * np.exp(-0.5 * (r / self.width) ** 2)
        raise ValueError(f"unknown excitation shape {self.shape!r}")


@dataclass(frozen=True, eq=False)
class CutoffFunction:
    r: float
    samples: np.ndarray


def make_cutoff(grid: TorusGrid, r: float) -> CutoffFunction:
    """Radial cutoff: 0 for |x| < r*L/2, 1 for |x| >= L/2, C^2 in between."""
    if not 0 < r < 1:
        raise ValueError(f"cutoff radius fraction must lie in (0, 1), got {r}")
    R = grid.L / 2
    samples = smoothstep((grid.radius - r * R) / ((1.0 - r) * R))
    return CutoffFunction(float(r), samples)


def plateau_profile(grid: TorusGrid, margin: float = PLATEAU_MARGIN) -> np.ndarray:
    """Equal to 1 for |x| < L(1-margin)/2, falling smoothly to 0 at |x| = L/2."""
    r_in = grid.L * (1.0 - margin) / 2
    r_out = grid.L / 2
    return 1.0 - smoothstep((grid.radius - r_in) / (r_out - r_in))


@dataclass(frozen=True, eq=False)
class MeanFieldState:
    """Hartree orbital and reference state at a common time ``time``."""

    grid: TorusGrid
    time: float
    varphi: np.ndarray
    phi_ref: np.ndarray
    u_l1: float

    @property
    def epsilon(self) -> np.ndarray:
        return extract_excitation(self)


def initial_state(
    grid: TorusGrid,
    excitation: ExcitationSpec | Mapping[str, Any],
    mode: str,
    U: PairPotential,
    *,
    normalize: bool = False,
) -> MeanFieldState:
    """Assemble ``varphi_0 = phi_ref_0 + epsilon_0``.

    With ``normalize=True`` the orbital is rescaled to ``||varphi_0||_2^2 = L^dim``
    and ``epsilon_0`` is redefined as ``varphi_0 - phi_ref_0``; this is the form
    needed when the orbital is compared with an N-particle product state.
    """
    if not isinstance(excitation, ExcitationSpec):
        excitation = ExcitationSpec.from_mapping(excitation)
    if not 0 < excitation.width < grid.L / 8:
        raise ValueError(f"excitation width must lie in (0, L/8) = (0, {grid.L / 8}), got {excitation.width}")
    if mode == "torus":
        phi_ref = grid.ones()
    elif mode == "plateau":
        phi_ref = plateau_profile(grid).astype(complex)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    varphi = phi_ref + excitation.profile(grid)
    if normalize:
        varphi = varphi * (np.sqrt(grid.volume) / l2_norm(grid, varphi))
    return MeanFieldState(grid, 0.0, varphi, phi_ref, U.l1_norm)


def _check_finite(f: np.ndarray, what: str, t: float | None = None) -> None:
    if not np.all(np.isfinite(f)):
        when = "" if t is None else f" at t={t:.6g}"
        raise NumericalError(f"non-finite values in {what}{when}")


def _conv(U: PairPotential, f: np.ndarray) -> np.ndarray:
    # forward/inverse scale constants cancel for the unnormalised multiplier
    return np.fft.ifftn(U.hat_table * np.fft.fftn(f))


def _conv_real(U: PairPotential, f: np.ndarray) -> np.ndarray:
    return _conv(U, f).real


def _kinetic_half(grid: TorusGrid, f: np.ndarray, dt: float, kinetic: str) -> np.ndarray:
    return np.fft.ifftn(np.exp(-0.5j * dt * kinetic_symbol(grid, kinetic)) * np.fft.fftn(f))


def _split_step(grid, f, dt, kinetic, potential: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    f = _kinetic_half(grid, f, dt, kinetic)
    f = np.exp(-1j * dt * potential(f)) * f
    return _kinetic_half(grid, f, dt, kinetic)


def _hartree_array(grid, varphi, U, dt, kinetic) -> np.ndarray:
    out = _split_step(grid, varphi, dt, kinetic, lambda f: _conv_real(U, np.abs(f) ** 2))
    _check_finite(out, "Hartree orbital")
    return out


def _reference_array(grid, phi_ref, U, dt, kinetic) -> np.ndarray:
    u1 = U.l1_norm
    out = _split_step(grid, phi_ref, dt, kinetic, lambda f: _conv_real(U, np.abs(f) ** 2) - u1)
    _check_finite(out, "reference state")
    return out


def hartree_step(state: MeanFieldState, U: PairPotential, dt: float, kinetic: str = "spectral") -> MeanFieldState:
    """Advance only ``varphi`` by one Strang step; ``time`` is left to :func:`advance`."""
    return replace(state, varphi=_hartree_array(state.grid, state.varphi, U, dt, kinetic))


def reference_step(state: MeanFieldState, U: PairPotential, dt: float, kinetic: str = "spectral") -> MeanFieldState:
    """Advance only ``phi_ref`` by one Strang step (potential shifted by ``-||U||_1``)."""
    return replace(state, phi_ref=_reference_array(state.grid, state.phi_ref, U, dt, kinetic))


def advance(state: MeanFieldState, U: PairPotential, dt: float, kinetic: str = "spectral") -> MeanFieldState:
    """Advance both flows and the clock by ``dt``."""
    grid = state.grid
    return MeanFieldState(
        grid,
        state.time + dt,
        _hartree_array(grid, state.varphi, U, dt, kinetic),
        _reference_array(grid, state.phi_ref, U, dt, kinetic),
        state.u_l1,
    )


def epsilon_direct_step(
    grid: TorusGrid,
    epsilon: np.ndarray,
    phi_ref: np.ndarray,
    U: PairPotential,
    dt: float,
    kinetic: str = "spectral",
) -> np.ndarray:
    """One Strang step of the excitation equation, given ``phi_ref`` at the step start.

    Inside the potential substep the reference only rotates by its own phase
    and the interaction field ``W = U*(|eps|^2 + 2 Re(conj(eps) phi_ref))``
    is frozen, so the substep is a linear ODE with a source ``W * phi_ref(s)``.
    Its Duhamel integral is evaluated with the midpoint rule.  The caller
    advances ``phi_ref`` separately with :func:`reference_step`.
    """
    eps = _kinetic_half(grid, epsilon, dt, kinetic)
    ref = _kinetic_half(grid, phi_ref, dt, kinetic)
    V = _conv_real(U, np.abs(ref) ** 2) - U.l1_norm
    W = _conv_real(U, np.abs(eps) ** 2 + 2.0 * (np.conj(eps) * ref).real)
    A = V + W
    eps = np.exp(-1j * dt * A) * eps - 1j * dt * np.exp(-0.5j * dt * A) * W * np.exp(-0.5j * dt * V) * ref
    out = _kinetic_half(grid, eps, dt, kinetic)
    _check_finite(out, "excitation")
    return out


def extract_excitation(state: MeanFieldState) -> np.ndarray:
    """``epsilon_t = varphi_t exp(i ||U||_1 t) - phi_ref_t``."""
    return state.varphi * np.exp(1j * state.u_l1 * state.time) - state.phi_ref


def energy(grid: TorusGrid, f: np.ndarray, U: PairPotential, kinetic: str = "spectral") -> float:
    """Conserved Hartree energy ``<f, -Lap/2 f> + (1/2)<|f|^2, U*|f|^2>``."""
    f_hat_sq = np.abs(np.fft.fftn(f)) ** 2
    # sum_k w(k)|f_hat|^2 dk^d == h^d/n^d sum_k w(k)|fft f|^2
    kin = grid.cell / f.size * float(np.sum(kinetic_symbol(grid, kinetic) * f_hat_sq))
    rho = np.abs(f) ** 2
    pot = 0.5 * grid.cell * float(np.sum(rho * _conv_real(U, rho)))
    return kin + pot


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    eps_l2: float
    eps_inf: float
    grad_eps_l2: float
    p_ref_eps: float
    chi_eps: tuple[float, ...]
    energy: float
    mass: float
    phi_hat_l1: float
    cutoff_r: tuple[float, ...] = field(default=())

    def as_row(self) -> dict[str, float]:
        row = {
            "t": self.t,
            "eps_l2": self.eps_l2,
            "eps_inf": self.eps_inf,
            "grad_eps_l2": self.grad_eps_l2,
            "p_ref_eps": self.p_ref_eps,
        }
        for r, v in zip(self.cutoff_r, self.chi_eps):
            row[f"chi_eps_r{r:g}"] = v
        row.update(energy=self.energy, mass=self.mass, phi_hat_l1=self.phi_hat_l1)
        return row


def diagnostics(
    state: MeanFieldState,
    U: PairPotential,
    cutoffs: Sequence[CutoffFunction] = (),
    kinetic: str = "spectral",
    epsilon: np.ndarray | None = None,
) -> DiagnosticsRecord:
    """Norms used by the propagation estimates, for the state's excitation.

    ``epsilon`` overrides the extracted excitation (e.g. with the directly
    integrated one).
    """
    grid = state.grid
    eps = extract_excitation(state) if epsilon is None else epsilon
    grad_sq = 2.0 * grid.cell / eps.size * float(np.sum(kinetic_symbol(grid, kinetic) * np.abs(np.fft.fftn(eps)) ** 2))
    ref_norm = l2_norm(grid, state.phi_ref)
    p_ref = abs(inner(grid, state.phi_ref, eps)) / ref_norm if ref_norm > 0 else 0.0
    return DiagnosticsRecord(
        t=state.time,
        eps_l2=l2_norm(grid, eps),
        eps_inf=linf_norm(eps),
        grad_eps_l2=float(np.sqrt(grad_sq)),
        p_ref_eps=p_ref,
        chi_eps=tuple(l2_norm(grid, c.samples * eps) for c in cutoffs),
        energy=energy(grid, state.varphi, U, kinetic),
        mass=l2_norm(grid, state.varphi) ** 2,
        phi_hat_l1=hat_l1_norm(grid, state.varphi),
        cutoff_r=tuple(c.r for c in cutoffs),
    )


def default_dt(grid: TorusGrid, U: PairPotential) -> float:
    """``1e-3`` of the shortest period among modes resolving the potential range.

    The kinetic substep is exact, so the band ``|k| <= 2 pi / D`` (``D`` the
    interaction range, or 1 without interaction) sets the time scale rather
    than the grid's Nyquist mode.
    """
    k_cut = 2.0 * np.pi / (U.range if U.range > 0 else 1.0)
    band = np.sqrt(grid.k_squared) <= k_cut
    omega0 = 0.5 * grid.k_squared[band]
    omega_sq = omega0 * (omega0 + 2.0 * U.hat_table.real[band])
    omega_max = float(np.sqrt(np.max(np.abs(omega_sq))))
    return 1e-3 * 2.0 * np.pi / max(omega_max, 1.0)


def integrate(
    state: MeanFieldState,
    U: PairPotential,
    dt: float,
    t_end: float,
    *,
    sample_interval: float | None = None,
    kinetic: str = "spectral",
    direct_epsilon: bool = False,
    on_sample: Callable[[MeanFieldState, np.ndarray | None], None] | None = None,
) -> tuple[MeanFieldState, np.ndarray | None]:
    """Run Hartree and reference flows (and optionally the direct excitation) to ``t_end``.

    ``t_end`` and ``sample_interval`` must be whole multiples of ``dt``.
    ``on_sample`` is called at t=0 and at every sample time with the state
    and the directly integrated excitation (or None).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_steps = _whole_steps(t_end, dt, "t_end")
    every = _whole_steps(sample_interval, dt, "sample_interval") if sample_interval else n_steps or 1
    eps = extract_excitation(state) if direct_epsilon else None
    t0 = state.time
    if on_sample:
        on_sample(state, eps)
    for i in range(1, n_steps + 1):
        if eps is not None:
            eps = epsilon_direct_step(state.grid, eps, state.phi_ref, U, dt, kinetic)
        try:
            state = advance(state, U, dt, kinetic)
        except NumericalError as exc:
            raise NumericalError(f"{exc} (step {i}, t={t0 + i * dt:.6g})") from None
        # keep the clock free of accumulated rounding
        state = replace(state, time=t0 + i * dt)
        if on_sample and i % every == 0:
            on_sample(state, eps)
    return state, eps


def _whole_steps(span: float, dt: float, what: str) -> int:
    steps = int(round(span / dt))
    if steps < 0 or abs(steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"{what}={span} is not a whole multiple of dt={dt}")
    return steps
