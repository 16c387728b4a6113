"""Experiment drivers behind the ``soundlab`` subcommands.

Each ``run_*`` function takes a resolved config (see :mod:`soundlab.config`)
and returns an :class:`~soundlab.results.ExperimentResult`.  Scan points are
independent and may run in worker processes; rows are sorted afterwards so
the output never depends on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from functools import partial
from math import ceil
from typing import Any, Callable, Mapping

import numpy as np

from . import meanfield as mf
from .bogolyubov import (
    classify,
    compare_linearization,
    frequency,
    generator,
    linear_propagate,
    linear_split_step,
    omega_squared,
    unstable_modes,
)
from .config import ConfigError, as_list, grid_sizes
from .grid import TorusGrid, l2_norm
from .manybody import FockBasis, build_hamiltonian, density_comparisons, diagonalize, evolve, product_state, site_vector
from .meanfield import NumericalError
from .potential import PairPotential, bump_profile, potential_from_spec
from .results import ExperimentResult, ResultTable

__all__ = [
    "RUNNERS",
    "run",
    "run_dispersion",
    "run_soundspeed",
    "run_linearize",
    "run_manybody_converge",
    "run_instability",
    "run_evolve",
    "measure_modes",
    "loglog_slope",
]


# ---------------------------------------------------------------- helpers


def _grids(cfg: Mapping[str, Any]) -> list[TorusGrid]:
    return [TorusGrid(cfg["grid"]["dim"], n, L) for n, L in grid_sizes(cfg["grid"])]


def _potential(cfg: Mapping[str, Any], grid: TorusGrid, strength: float | None = None) -> PairPotential:
    spec = dict(cfg["potential"])
    if strength is not None:
        spec["strength"] = strength
    return potential_from_spec(grid, spec)


def _dt(cfg: Mapping[str, Any], grid: TorusGrid, U: PairPotential) -> float:
    """Configured step, or the default step shrunk to divide the sampling interval."""
    if "dt" in cfg:
        return float(cfg["dt"])
    base = mf.default_dt(grid, U)
    unit = cfg.get("sample_interval") or cfg["t_end"]
    if not unit:
        return base
    return unit / ceil(unit / base - 1e-9)


def _excitation(cfg: Mapping[str, Any], grid: TorusGrid, amplitude: float | None = None) -> np.ndarray:
    """Deterministic excitation profile plus optional seeded noise under the same envelope."""
    exc = cfg["excitation"]
    amp = exc["amplitude"] if amplitude is None else amplitude
    eps = mf.ExcitationSpec(float(amp), exc["width"], exc["shape"]).profile(grid).astype(complex)
    if exc["noise"] > 0:
        rng = np.random.default_rng(cfg["seed"])
        z = rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)
        eps += exc["noise"] * bump_profile(grid.radius, exc["width"]) * z
    return eps


def _initial(cfg, grid, U, amplitude=None, normalize=False) -> mf.MeanFieldState:
    exc = cfg["excitation"]
    amp = exc["amplitude"] if amplitude is None else amplitude
    st = mf.initial_state(grid, mf.ExcitationSpec(float(amp), exc["width"], exc["shape"]), cfg["mode"], U)
    varphi = st.phi_ref + _excitation(cfg, grid, amplitude)
    if normalize:
        varphi = varphi * (np.sqrt(grid.volume) / l2_norm(grid, varphi))
    return replace(st, varphi=varphi)


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def _drift_rate(values: list[float], t_end: float) -> float:
    """``max_t |Q_t - Q_0| / |Q_0|`` per unit time."""
    q0 = values[0]
    scale = abs(q0) if q0 != 0 else 1.0
    return float(max(abs(v - q0) for v in values) / scale / max(t_end, 1e-300))


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


# ---------------------------------------------------------------- mode fitting


def _gaussian(grid: TorusGrid, width: float) -> np.ndarray:
    return np.exp(-0.5 * (grid.radius / width) ** 2).astype(complex)


def _sample_spectra(grid, U, eta0, dt, t_end, sample_interval, kinetic, integrator):
    """FFT of the linear excitation at every sample time."""
    times = np.arange(int(round(t_end / sample_interval)) + 1) * sample_interval
    if integrator == "closed-form":
        return times, np.array([np.fft.fft(linear_propagate(grid, eta0, U, t, kinetic)) for t in times])
    every = int(round(sample_interval / dt))
    eta = np.array(eta0, dtype=complex)
    out = [np.fft.fft(eta)]
    for i in range(1, every * (len(times) - 1) + 1):
        eta = linear_split_step(grid, eta, U, dt, kinetic)
        if i % every == 0:
            if not np.all(np.isfinite(eta)):
                raise NumericalError(f"linear excitation overflowed at t={i * dt:.6g}")
            out.append(np.fft.fft(eta))
    return times, np.array(out)


def measure_modes(
    grid: TorusGrid,
    U: PairPotential,
    modes: int,
    *,
    dt: float,
    t_end: float,
    sample_interval: float,
    kinetic: str = "spectral",
    integrator: str = "split-step",
    initial_width: float = 1.0,
    min_samples_per_period: float = 8.0,
) -> list[dict[str, Any]]:
    """Measured and predicted frequency of the lowest ``modes`` nonzero modes.

    The pair ``(eta_hat(k), conj eta_hat(-k))`` of a linear run is projected
    on the eigenvectors of the 2x2 generator; the component on the branch
    with ``Re omega > 0`` (or ``Im omega > 0``) evolves as ``exp(-i omega t)``,
    so a straight-line fit of its unwrapped phase gives ``Re omega`` and a
    fit of its log-modulus gives ``Im omega``.
    """
    if grid.dim != 1:
        raise ValueError("mode fitting runs on one-dimensional grids")
    times, spectra = _sample_spectra(
        grid, U, _gaussian(grid, initial_width), dt, t_end, sample_interval, kinetic, integrator
    )
    omega0 = mf.kinetic_symbol(grid, kinetic)
    u = U.hat_table.real
    rows = []
    for m in range(1, modes + 1):
        X = np.stack([spectra[:, m], np.conj(spectra[:, -m])])
        w2 = float(omega_squared(omega0[m], u[m]))
        theory = complex(frequency(omega0[m], u[m]))
        kind = classify(w2)
        meas, amp = complex(np.nan, np.nan), 0.0
        if kind != "marginal":
            lam, V = np.linalg.eig(generator(omega0[m], u[m]))
            c = np.linalg.solve(V, X)[int(np.argmax(lam.real + lam.imag))]
            amp = float(np.min(np.abs(c)))
            if amp > 0:
                phase = np.unwrap(np.angle(c / c[0]))
                meas = complex(-np.polyfit(times, phase, 1)[0], np.polyfit(times, np.log(np.abs(c)), 1)[0])
        spp = 2 * np.pi / (abs(theory.real) * sample_interval) if theory.real != 0 else float("inf")
        rows.append(
            {
                "mode": m,
                "k": float(grid.axis_wavevectors[m]),
                "omega_measured_re": meas.real,
                "omega_measured_im": meas.imag,
                "omega_theory_re": theory.real,
                "omega_theory_im": theory.imag,
                "rel_error": abs(meas - theory) / abs(theory) if abs(theory) > 0 else abs(meas),
                "samples_per_period": float(spp),
                "classification": kind,
                "_amp": amp,
            }
        )
    top = max(r["_amp"] for r in rows)
    for r in rows:
        r["fit_ok"] = bool(
            r["classification"] != "marginal"
            and r["samples_per_period"] >= min_samples_per_period
            and r["_amp"] > 1e-9 * top
            and np.isfinite(r["rel_error"])
        )
        del r["_amp"]
    return rows


# ---------------------------------------------------------------- dispersion


DISPERSION_COLUMNS = {
    "mode": "integer wavenumber m; k = 2 pi m / L",
    "k": "wavevector",
    "omega_measured_re": "real part of the frequency fitted from the step-integrated linear equation",
    "omega_measured_im": "imaginary part (growth rate) of the fitted frequency",
    "omega_theory_re": "real part of sqrt(w0 (w0 + 2 U_hat(k)))",
    "omega_theory_im": "imaginary part of the predicted frequency",
    "rel_error": "|measured - theory| / |theory|",
    "samples_per_period": "2 pi / (Re omega_theory * sample_interval); inf for non-oscillating modes",
    "classification": "oscillatory, unstable or marginal",
    "fit_ok": "1 if the mode is resolved (enough samples per period, non-negligible amplitude, not marginal)",
}


def run_dispersion(cfg: Mapping[str, Any]) -> ExperimentResult:
    (grid,) = _grids(cfg)
    U = _potential(cfg, grid)
    dt = _dt(cfg, grid, U)
    modes = cfg.get("modes", grid.n // 2)
    rows = measure_modes(
        grid,
        U,
        modes,
        dt=dt,
        t_end=cfg["t_end"],
        sample_interval=cfg["sample_interval"],
        kinetic=cfg["kinetic"],
        integrator=cfg["integrator"],
        initial_width=cfg["initial_width"],
        min_samples_per_period=cfg["min_samples_per_period"],
    )
    table = ResultTable("dispersion", DISPERSION_COLUMNS)
    for r in rows:
        table.add(**r)
    good = [r for r in rows if r["fit_ok"]]
    lowest = good[:8]
    summary = {
        "dt": dt,
        "modes": len(rows),
        "resolved_modes": len(good),
        "unstable_modes": sum(r["classification"] == "unstable" for r in rows),
        "max_rel_error": max((r["rel_error"] for r in good), default=float("nan")),
        "max_rel_error_lowest8": max((r["rel_error"] for r in lowest), default=float("nan")),
    }
    return ExperimentResult("dispersion", [table], summary)


# ---------------------------------------------------------------- sound speed


SOUNDSPEED_COLUMNS = {
    "L": "box side",
    "n": "grid points",
    "v_fit": "sqrt of the k -> 0 intercept of a fit (omega/k)^2 = v^2 + c k^2 over the lowest modes",
    "v_theory": "sqrt(U_hat(0))",
    "abs_error": "|v_fit - v_theory|",
    "rel_error": "abs_error / v_theory (equal to abs_error when v_theory = 0)",
    "modes_used": "number of lowest nonzero modes in the fit",
}


def _soundspeed_point(cfg, grid: TorusGrid) -> dict[str, Any]:
    U = _potential(cfg, grid)
    u0 = U.hat_zero
    if u0 < 0:
        raise ConfigError(f"no real sound speed: U_hat(0) = {u0} < 0")
    rows = measure_modes(
        grid,
        U,
        cfg["fit_modes"],
        dt=_dt(cfg, grid, U),
        t_end=cfg["t_end"],
        sample_interval=cfg["sample_interval"],
        kinetic=cfg["kinetic"],
        initial_width=cfg["initial_width"],
    )
    k = np.array([r["k"] for r in rows])
    ratio_sq = (np.array([r["omega_measured_re"] for r in rows]) / k) ** 2
    intercept = np.polyfit(k**2, ratio_sq, 1)[1]
    v_fit = float(np.sqrt(max(intercept, 0.0)))
    v_th = float(np.sqrt(max(u0, 0.0)))
    err = abs(v_fit - v_th)
    return {
        "L": grid.L,
        "n": grid.n,
        "v_fit": v_fit,
        "v_theory": v_th,
        "abs_error": err,
        "rel_error": err / v_th if v_th > 0 else err,
        "modes_used": len(rows),
    }


def run_soundspeed(cfg: Mapping[str, Any]) -> ExperimentResult:
    table = ResultTable("soundspeed", SOUNDSPEED_COLUMNS)
    for row in _map(partial(_soundspeed_point, cfg), _grids(cfg), cfg["workers"]):
        table.add(**row)
    table.sort(["L"])
    errs = table.column("rel_error")
    summary = {
        "max_rel_error": max(errs),
        "rel_error_decreasing_in_L": all(b < a for a, b in zip(errs, errs[1:])),
    }
    return ExperimentResult("soundspeed", [table], summary)


# ---------------------------------------------------------------- linearisation


LINEARIZE_COLUMNS = {
    "L": "box side",
    "amplitude": "peak of the initial excitation",
    "eps0_l2": "||eps_0||_2",
    "eps_l2_sup": "max over steps of ||eps_t||_2 for the nonlinear excitation",
    "gap_l2": "||eta_t - eps_t||_2 at t_end, eta the linearised solution",
}


def _linearize_point(cfg, point) -> dict[str, Any]:
    n, L, amp = point
    grid = TorusGrid(1, n, L)
    U = _potential(cfg, grid)
    eps0 = _excitation(cfg, grid, amp)
    res = compare_linearization(grid, eps0, U, cfg["t_end"], _dt(cfg, grid, U))
    return {"L": L, "amplitude": float(amp), "eps0_l2": l2_norm(grid, eps0), "eps_l2_sup": res.eps_l2_sup, "gap_l2": res.l2_gap}


def run_linearize(cfg: Mapping[str, Any]) -> ExperimentResult:
    points = [(n, L, a) for n, L in grid_sizes(cfg["grid"]) for a in as_list(cfg["excitation"]["amplitude"])]
    table = ResultTable("linearize", LINEARIZE_COLUMNS)
    for row in _map(partial(_linearize_point, cfg), points, cfg["workers"]):
        table.add(**row)
    table.sort(["L", "amplitude"])
    slopes, monotone = {}, {}
    for L in sorted({r["L"] for r in table.rows}):
        rows = [r for r in table.rows if r["L"] == L]
        gaps = [r["gap_l2"] for r in rows]
        slopes[f"{L:g}"] = loglog_slope([r["eps0_l2"] for r in rows], gaps)
        monotone[f"{L:g}"] = all(b >= a for a, b in zip(gaps, gaps[1:]))
    summary = {"loglog_slope": slopes, "gap_monotone_in_amplitude": monotone}
    return ExperimentResult("linearize", [table], summary)


# ---------------------------------------------------------------- many-body


MANYBODY_COLUMNS = {
    "L": "box side (lattice spacing L/M)",
    "rho": "density; N = rho L",
    "N": "particle number",
    "t": "time",
    "m_expect": "<Psi, m_hat Psi> for the instantaneous mean-field orbital",
    "psi_gap_sq": "||Psi - Psi_tilde||^2, Psi_tilde keeping sectors with at most rho bad particles",
    "tilde_norm": "||Psi_tilde||",
    "d_micro": "spectral norm of L q_ref gamma q_ref - |eps><eps|",
    "d_tilde": "same with gamma built from Psi_tilde",
    "triangle_bound": "d_micro + L r sqrt(r^2 + 4 ||Psi_tilde||^2), r = ||Psi - Psi_tilde||",
    "truncation_ok": "1 if psi_gap_sq <= m_expect (up to 1e-12)",
    "triangle_ok": "1 if d_tilde <= triangle_bound (up to 1e-12)",
}


def _manybody_point(cfg, point) -> list[dict[str, Any]]:
    M, L, rho = point
    N = int(round(rho * L))
    grid = TorusGrid(1, M, L)
    U = _potential(cfg, grid)
    st0 = _initial(cfg, grid, U, normalize=True)
    basis = FockBasis(M, N)
    H = build_hamiltonian(grid, U, N, rho, basis)
    eig = diagonalize(H) if len(basis) <= 3000 else None
    psi0 = product_state(site_vector(grid, st0.varphi), N, basis)
    rows = []

    def sample(state, _eps):
        t = state.time
        psi = evolve(psi0, eig if eig is not None else H, t)
        d = density_comparisons(psi, basis, state, rho)
        r = np.sqrt(d["psi_gap_sq"])
        bound = d["d_micro"] + L * r * np.sqrt(r**2 + 4 * d["tilde_norm"] ** 2)
        trunc_ok = d["psi_gap_sq"] <= d["m_expect"] + 1e-12
        if not trunc_ok:
            raise NumericalError(
                f"truncation inequality violated at t={t:.6g}: {d['psi_gap_sq']} > {d['m_expect']} (L={L}, rho={rho})"
            )
        rows.append(
            {"L": L, "rho": float(rho), "N": N, "t": t, **d, "triangle_bound": float(bound),
             "truncation_ok": trunc_ok, "triangle_ok": bool(d["d_tilde"] <= bound + 1e-12)}
        )

    mf.integrate(st0, U, _dt(cfg, grid, U), cfg["t_end"], sample_interval=cfg["sample_interval"],
                 kinetic=cfg["kinetic"], on_sample=sample)
    return rows


def _strictly_decreasing(xs) -> bool:
    return all(b < a for a, b in zip(xs, xs[1:]))


def run_manybody_converge(cfg: Mapping[str, Any]) -> ExperimentResult:
    points = [(n, L, float(rho)) for n, L in grid_sizes(cfg["grid"]) for rho in as_list(cfg["rho"])]
    table = ResultTable("manybody", MANYBODY_COLUMNS)
    for rows in _map(partial(_manybody_point, cfg), points, cfg["workers"]):
        for r in rows:
            table.add(**r)
    table.sort(["L", "rho", "t"])
    trends = {}
    t_last = max(table.column("t"))
    for L in sorted({r["L"] for r in table.rows}):
        last = [r for r in table.rows if r["L"] == L and r["t"] == t_last]
        trends[f"{L:g}"] = {
            q: _strictly_decreasing([r[q] for r in last]) for q in ("m_expect", "psi_gap_sq", "d_micro", "d_tilde")
        }
    summary = {
        "t_final": t_last,
        "decreasing_in_rho_at_t_final": trends,
        "max_m_expect_at_t0": max(r["m_expect"] for r in table.rows if r["t"] == 0),
        "truncation_ok_all": all(table.column("truncation_ok")),
        "triangle_ok_all": all(table.column("triangle_ok")),
    }
    return ExperimentResult("manybody-converge", [table], summary)


# ---------------------------------------------------------------- instability


TRAJECTORY_COLUMNS = {
    "strength": "potential strength a",
    "t": "time",
    "eps_l2": "||eps_t||_2",
    "eps_inf": "||eps_t||_inf",
    "max_k_growth": "growth rate of the fastest linearly unstable mode over the preceding sample interval (0 at t=0 or without unstable modes)",
    "energy": "conserved Hartree energy",
    "mass": "||varphi_t||_2^2",
}

INSTABILITY_COLUMNS = {
    "strength": "potential strength a",
    "sign": "+1 repulsive, -1 attractive",
    "unstable_modes": "number of grid modes with omega^2 < 0",
    "k_star": "wavevector of the fastest unstable mode (0 if none)",
    "rate_theory": "sqrt(-w0 (w0 + 2 U_hat)) at k_star",
    "rate_fit": "log-linear fit of the projection on the growing eigenvector, up to the first doubling of ||eps||_2",
    "rate_rel_error": "|rate_fit - rate_theory| / rate_theory",
    "fit_samples": "samples inside the fit window",
    "fit_ok": "1 if an unstable mode exists and the window has at least 3 samples",
    "onset": "1 if ||eps||_inf reached collapse_threshold",
    "onset_time": "first sample time with ||eps||_inf >= collapse_threshold (nan if onset = 0)",
    "blowup": "1 if the run produced non-finite values or ||eps||_inf > blowup_threshold",
    "blowup_time": "time of blow-up detection (nan if blowup = 0)",
    "mass_drift_rate": "max relative mass change per unit time",
    "energy_drift_rate": "max relative energy change per unit time",
}


def _instability_point(cfg, strength) -> tuple[list[dict], dict]:
    ((n, L),) = grid_sizes(cfg["grid"])[:1]
    grid = TorusGrid(1, n, L)
    U = _potential(cfg, grid, strength)
    dt = _dt(cfg, grid, U)
    unstable = unstable_modes(U)
    if unstable:
        k_star, rate = max(unstable, key=lambda kr: (kr[1], -abs(kr[0][0])))
        m = int(round(k_star[0] / grid.dk)) % n
        omega0 = mf.kinetic_symbol(grid, cfg["kinetic"])[m]
        u = U.hat_table.real[m]
        lam, V = np.linalg.eig(generator(omega0, u))
        left = np.linalg.inv(V)[int(np.argmax(lam.imag))]
    else:
        k_star, rate, m, left = (0.0,), 0.0, None, None

    def growing(state) -> complex:
        # on the torus phi_ref is a pure phase; removing it gives the linearised variable
        eta_hat = np.fft.fft(state.epsilon * np.conj(state.phi_ref))
        return complex(left @ np.array([eta_hat[m], np.conj(eta_hat[-m])]))

    state = _initial(cfg, grid, U)
    every = int(round(cfg["sample_interval"] / dt))
    steps = int(round(cfg["t_end"] / dt))
    traj, proj = [], []
    blowup_time = float("nan")

    def record(state):
        eps = state.epsilon
        c = growing(state) if m is not None else 0j
        g = 0.0
        if proj and abs(c) > 0 and abs(proj[-1][1]) > 0:
            g = float(np.log(abs(c) / abs(proj[-1][1])) / (state.time - proj[-1][0]))
        proj.append((state.time, c))
        traj.append({"strength": float(strength), "t": state.time, "eps_l2": l2_norm(grid, eps),
                     "eps_inf": float(np.max(np.abs(eps))), "max_k_growth": g,
                     "energy": mf.energy(grid, state.varphi, U, cfg["kinetic"]),
                     "mass": l2_norm(grid, state.varphi) ** 2})

    record(state)
    for i in range(1, steps + 1):
        try:
            state = replace(mf.advance(state, U, dt, cfg["kinetic"]), time=i * dt)
        except NumericalError:
            blowup_time = i * dt
            break
        if i % every == 0:
            record(state)
            if traj[-1]["eps_inf"] > cfg["blowup_threshold"]:
                blowup_time = state.time
                break

    e0 = traj[0]["eps_l2"]
    window = [j for j, r in enumerate(traj) if all(q["eps_l2"] < 2 * e0 for q in traj[: j + 1])]
    fit_ok = m is not None and len(window) >= 3
    rate_fit = float("nan")
    if fit_ok:
        ts = np.array([proj[j][0] for j in window])
        rate_fit = float(np.polyfit(ts, np.log([abs(proj[j][1]) for j in window]), 1)[0])
    onset = [r["t"] for r in traj if r["eps_inf"] >= cfg["collapse_threshold"]]
    t_run = traj[-1]["t"] if traj[-1]["t"] > 0 else cfg["t_end"]
    summary = {
        "strength": float(strength),
        "sign": int(U.sign),
        "unstable_modes": len(unstable),
        "k_star": float(k_star[0]),
        "rate_theory": float(rate),
        "rate_fit": rate_fit,
        "rate_rel_error": abs(rate_fit - rate) / rate if fit_ok and rate > 0 else float("nan"),
        "fit_samples": len(window),
        "fit_ok": bool(fit_ok),
        "onset": bool(onset),
        "onset_time": onset[0] if onset else float("nan"),
        "blowup": bool(np.isfinite(blowup_time)),
        "blowup_time": blowup_time,
        "mass_drift_rate": _drift_rate([r["mass"] for r in traj], t_run),
        "energy_drift_rate": _drift_rate([r["energy"] for r in traj], t_run),
    }
    return traj, summary


def run_instability(cfg: Mapping[str, Any]) -> ExperimentResult:
    if len(grid_sizes(cfg["grid"])) != 1:
        raise ConfigError("'instability' takes a single box size")
    strengths = sorted(float(s) for s in as_list(cfg["potential"].get("strength", 1.0)))
    traj = ResultTable("trajectory", TRAJECTORY_COLUMNS)
    summ = ResultTable("instability", INSTABILITY_COLUMNS)
    for rows, s in _map(partial(_instability_point, cfg), strengths, cfg["workers"]):
        for r in rows:
            traj.add(**r)
        summ.add(**s)
    traj.sort(["strength", "t"])
    summ.sort(["strength"])
    onsets = [r["onset_time"] for r in summ.rows if r["onset"]]
    summary = {
        "blowup_any": any(summ.column("blowup")),
        "onset_count": len(onsets),
        "onset_earlier_for_stronger": len(onsets) == len(summ.rows) and _strictly_decreasing(onsets),
        "max_rate_rel_error": max((r["rate_rel_error"] for r in summ.rows if r["fit_ok"]), default=float("nan")),
        "max_mass_drift_rate": max(summ.column("mass_drift_rate")),
        "max_energy_drift_rate": max(summ.column("energy_drift_rate")),
    }
    return ExperimentResult("instability", [summ, traj], summary)


# ---------------------------------------------------------------- generic evolution


def _evolve_columns(cutoffs, direct: bool) -> dict[str, str]:
    cols = {
        "L": "box side",
        "t": "time",
        "eps_l2": "||eps_t||_2",
        "eps_inf": "||eps_t||_inf",
        "grad_eps_l2": "||grad eps_t||_2",
        "p_ref_eps": "|<phi_ref, eps>| / ||phi_ref||_2",
    }
    for r in cutoffs:
        cols[f"chi_eps_r{r:g}"] = f"||chi_r eps_t||_2 for r = {r:g}"
    cols.update(
        energy="conserved Hartree energy of varphi_t",
        mass="||varphi_t||_2^2",
        phi_hat_l1="||varphi_hat_t||_1",
    )
    if direct:
        cols["eps_route_gap"] = "||eps extracted - eps integrated directly||_2"
    return cols


def _evolve_point(cfg, point) -> list[dict[str, Any]]:
    n, L = point
    grid = TorusGrid(cfg["grid"]["dim"], n, L)
    U = _potential(cfg, grid)
    cutoffs = [mf.make_cutoff(grid, r) for r in cfg["cutoffs"]]
    rows = []

    def sample(state, eps_direct):
        row = {"L": L, **mf.diagnostics(state, U, cutoffs, cfg["kinetic"]).as_row()}
        if eps_direct is not None:
            row["eps_route_gap"] = l2_norm(grid, state.epsilon - eps_direct)
        rows.append(row)

    mf.integrate(_initial(cfg, grid, U), U, _dt(cfg, grid, U), cfg["t_end"],
                 sample_interval=cfg["sample_interval"], kinetic=cfg["kinetic"],
                 direct_epsilon=cfg["direct_epsilon"], on_sample=sample)
    return rows


def run_evolve(cfg: Mapping[str, Any]) -> ExperimentResult:
    table = ResultTable("evolve", _evolve_columns(cfg["cutoffs"], cfg["direct_epsilon"]))
    for rows in _map(partial(_evolve_point, cfg), grid_sizes(cfg["grid"]), cfg["workers"]):
        for r in rows:
            table.add(**r)
    table.sort(["L", "t"])
    dim = cfg["grid"]["dim"]
    per_L = {}
    for L in sorted({r["L"] for r in table.rows}):
        rows = [r for r in table.rows if r["L"] == L]
        lam = L**dim
        entry = {
            "mass_drift_rate": _drift_rate([r["mass"] for r in rows], cfg["t_end"]),
            "energy_drift_rate": _drift_rate([r["energy"] for r in rows], cfg["t_end"]),
            "p_ref_eps_scaled_max": max(r["p_ref_eps"] for r in rows) * lam**0.5,
        }
        for r in cfg["cutoffs"]:
            entry[f"chi_eps_r{r:g}_scaled_max"] = max(row[f"chi_eps_r{r:g}"] for row in rows) * lam ** (1 / 3)
        if cfg["direct_epsilon"]:
            entry["max_eps_route_gap"] = max(r["eps_route_gap"] for r in rows)
        per_L[f"{L:g}"] = entry
    spread = {}
    keys = [k for k in next(iter(per_L.values())) if k.endswith("_scaled_max")]
    for k in keys:
        vals = [v[k] for v in per_L.values()]
        spread[k] = max(vals) / min(vals) if min(vals) > 0 else float("inf")
    summary = {"per_L": per_L, "scaled_max_spread": spread}
    return ExperimentResult("evolve", [table], summary)


RUNNERS: dict[str, Callable[[Mapping[str, Any]], ExperimentResult]] = {
    "dispersion": run_dispersion,
    "soundspeed": run_soundspeed,
    "linearize": run_linearize,
    "manybody-converge": run_manybody_converge,
    "instability": run_instability,
    "evolve": run_evolve,
}


def run(cfg: Mapping[str, Any]) -> ExperimentResult:
    return RUNNERS[cfg["experiment"]](cfg)
