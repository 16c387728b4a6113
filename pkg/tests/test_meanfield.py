import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soundlab import meanfield as mf
from soundlab.grid import l2_norm, make_grid
from soundlab.potential import bump_potential, zero_potential


@pytest.fixture(scope="module")
def torus():
    g = make_grid(1, 128, 32.0)
    return g, bump_potential(g, 0.3, 1.0)


def state(g, U, amp=0.5, width=1.0, mode="torus"):
    return mf.initial_state(g, {"amplitude": amp, "width": width}, mode, U)


def run(st0, U, dt, t, **kw):
    return mf.integrate(st0, U, dt, t, **kw)


def fd_gradient_max(g, f):
    return np.max(np.abs(np.roll(f, -1) - np.roll(f, 1))) / (2 * g.h)


# ------------------------------------------------------------------ kinetic symbols


def test_lattice_symbol_matches_stencil():
    g = make_grid(1, 16, 5.0)
    rng = np.random.default_rng(0)
    f = rng.normal(size=16) + 1j * rng.normal(size=16)
    stencil = -(np.roll(f, 1) - 2 * f + np.roll(f, -1)) / (2 * g.h**2)
    spectral = np.fft.ifft(mf.kinetic_symbol(g, "lattice") * np.fft.fft(f))
    assert np.allclose(stencil, spectral, atol=1e-12)
    assert np.allclose(mf.kinetic_symbol(g, "spectral"), 0.5 * g.k_squared)
    with pytest.raises(ValueError):
        mf.kinetic_symbol(g, "wavelet")


# ------------------------------------------------------------------ initial data and cutoffs


def test_zero_amplitude_gives_reference(torus):
    g, U = torus
    s = state(g, U, amp=0.0)
    assert np.array_equal(s.varphi, s.phi_ref)
    assert np.max(np.abs(s.epsilon)) == 0


def test_torus_excitation_peak(torus):
    g, U = torus
    for shape in ("smooth-bump", "gaussian-bump"):
        s = mf.initial_state(g, {"amplitude": 0.37, "width": 1.0, "shape": shape}, "torus", U)
        assert np.array_equal(s.phi_ref, g.ones())
        assert np.isclose(np.max(np.abs(s.epsilon)), 0.37, rtol=1e-15)
        assert np.array_equal(s.epsilon, s.varphi - 1.0)


@pytest.mark.parametrize("width", [0.0, 4.0, 5.0])
def test_width_rejected(torus, width):
    g, U = torus
    with pytest.raises(ValueError):
        state(g, U, width=width)


def test_unknown_mode_and_shape(torus):
    g, U = torus
    with pytest.raises(ValueError):
        state(g, U, mode="sphere")
    with pytest.raises(ValueError):
        mf.initial_state(g, {"amplitude": 1, "width": 1, "shape": "square"}, "torus", U)


def test_normalised_orbital(torus):
    g, U = torus
    s = mf.initial_state(g, {"amplitude": 0.5, "width": 1.0}, "torus", U, normalize=True)
    assert np.isclose(l2_norm(g, s.varphi) ** 2, g.volume, rtol=1e-13)


def test_plateau_gradient_scales_inversely_with_box():
    scaled = []
    for L in (8, 16, 32):
        g = make_grid(1, 16 * L, float(L))
        ref = mf.plateau_profile(g)
        assert np.all((ref >= 0) & (ref <= 1))
        assert np.all(ref[g.radius < L * (1 - mf.PLATEAU_MARGIN) / 2] == 1)
        scaled.append(fd_gradient_max(g, ref) * L)
    assert max(scaled) / min(scaled) < 1.05


def test_plateau_satisfies_cutoff_constraint():
    g = make_grid(1, 512, 32.0)
    ref = mf.plateau_profile(g)
    assert np.all(np.abs(ref - 1) <= mf.make_cutoff(g, 0.5).samples + 1e-15)


def test_cutoff_shape_and_gradient():
    scaled = []
    for L in (8, 16, 32):
        g = make_grid(1, 16 * L, float(L))
        c = mf.make_cutoff(g, 0.25)
        assert np.all((c.samples >= 0) & (c.samples <= 1))
        assert np.all(c.samples[g.radius <= 0.25 * L / 2] == 0)
        assert c.samples[g.n // 2] == 1
        scaled.append(fd_gradient_max(g, c.samples) * L)
    assert max(scaled) / min(scaled) < 1.05
    with pytest.raises(ValueError):
        mf.make_cutoff(g, 1.0)


# ------------------------------------------------------------------ Hartree flow


def test_free_plane_wave_exact():
    g = make_grid(1, 64, 10.0)
    U = zero_potential(g)
    k0 = g.axis_wavevectors[3]
    phi = np.exp(1j * k0 * g.axis_positions)
    s = mf.MeanFieldState(g, 0.0, phi, g.ones(), 0.0)
    out, _ = run(s, U, 0.01, 1.0)
    assert np.allclose(out.varphi, phi * np.exp(-0.5j * k0**2), atol=1e-12)


def test_constant_orbital_rotates_with_u_hat_zero():
    g = make_grid(2, 16, 8.0)
    U = bump_potential(g, 0.8, 1.5, sign=-1)
    s = mf.MeanFieldState(g, 0.0, g.ones(), g.ones(), U.l1_norm)
    for _ in range(100):
        s = mf.hartree_step(s, U, 0.01)
    assert np.allclose(s.varphi, np.exp(-1j * U.hat_zero * 1.0), atol=1e-12)


def test_hartree_self_convergence_order_two(torus):
    g, U = torus
    s0 = state(g, U)
    sols = [run(s0, U, dt, 1.0)[0].varphi for dt in (0.04, 0.02, 0.01)]
    e1 = l2_norm(g, sols[0] - sols[1])
    e2 = l2_norm(g, sols[1] - sols[2])
    assert 3.6 < e1 / e2 < 4.4


# ------------------------------------------------------------------ reference flow


def test_torus_reference_is_fixed(torus):
    g, U = torus
    s = state(g, U)
    for _ in range(200):
        s = mf.reference_step(s, U, 0.01)
    assert np.max(np.abs(s.phi_ref - 1)) < 1e-12


def test_reference_without_interaction_is_free():
    g = make_grid(1, 64, 10.0)
    U = zero_potential(g)
    k0 = g.axis_wavevectors[2]
    ref = np.exp(1j * k0 * g.axis_positions)
    s = mf.reference_step(mf.MeanFieldState(g, 0.0, ref, ref, 0.0), U, 0.3)
    assert np.allclose(s.phi_ref, ref * np.exp(-0.15j * k0**2), atol=1e-13)


def test_plateau_reference_modulus_drift_decreases_with_box():
    drifts = []
    for L in (16, 32, 64):
        g = make_grid(1, 8 * L, float(L))
        U = bump_potential(g, 1.0, 1.0)
        s0 = state(g, U, amp=0.0, width=0.5, mode="plateau")
        s1, _ = run(s0, U, 1e-3, 1.0)
        drifts.append(l2_norm(g, np.abs(s1.phi_ref) - np.abs(s0.phi_ref)))
    assert drifts[0] > drifts[1] > drifts[2]


# ------------------------------------------------------------------ excitation routes


def test_zero_excitation_is_fixed(torus):
    g, U = torus
    eps = g.zeros()
    for _ in range(50):
        eps = mf.epsilon_direct_step(g, eps, g.ones(), U, 0.01)
    assert np.max(np.abs(eps)) == 0


def test_dual_route_order_two(torus):
    g, U = torus
    s0 = state(g, U)
    gaps = []
    for dt in (0.02, 0.01, 0.005):
        s, eps = run(s0, U, dt, 2.0, direct_epsilon=True)
        gaps.append(l2_norm(g, s.epsilon - eps))
    orders = np.log2(np.array(gaps[:-1]) / np.array(gaps[1:]))
    assert np.all((orders > 1.8) & (orders < 2.2))


def test_dual_route_small_at_default_step(torus):
    g, U = torus
    dt = 2.0 / np.ceil(2.0 / mf.default_dt(g, U))
    s, eps = run(state(g, U), U, dt, 2.0, direct_epsilon=True)
    assert l2_norm(g, s.epsilon - eps) < 1e-6


def test_small_amplitude_matches_linear_closed_form(torus):
    from soundlab.bogolyubov import linear_propagate

    g, U = torus
    s0 = state(g, U, amp=1e-3)
    s, _ = run(s0, U, 0.01, 2.0)
    eta = linear_propagate(g, s0.epsilon, U, 2.0)
    # quadratic in the amplitude: a relative gap of order 1e-3
    assert l2_norm(g, s.epsilon - eta) < 1e-2 * l2_norm(g, s0.epsilon)


def test_extraction_identities(torus):
    g, U = torus
    s0 = state(g, U)
    assert np.array_equal(mf.extract_excitation(s0), s0.varphi - s0.phi_ref)
    rng = np.random.default_rng(1)
    phi = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    ref = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    s = mf.MeanFieldState(g, 0.7, phi, ref, U.l1_norm)
    target = phi * np.exp(1j * U.l1_norm * 0.7)
    # (a - b) + b recovers a up to rounding of the subtraction
    ulp = np.spacing(np.max(np.abs(target)) + np.max(np.abs(ref)))
    assert np.max(np.abs(s.epsilon + ref - target)) <= 2 * ulp
    still = mf.MeanFieldState(g, 0.7, ref * np.exp(-1j * U.l1_norm * 0.7), ref, U.l1_norm)
    assert np.max(np.abs(still.epsilon)) < 1e-15


# ------------------------------------------------------------------ diagnostics and invariants


def test_diagnostics_of_zero_excitation(torus):
    g, U = torus
    d = mf.diagnostics(state(g, U, amp=0.0), U, [mf.make_cutoff(g, 0.25)])
    assert d.eps_l2 == d.eps_inf == d.grad_eps_l2 == d.p_ref_eps == 0
    assert d.chi_eps == (0.0,)
    assert np.isclose(d.mass, g.volume)
    row = d.as_row()
    assert list(row)[:5] == ["t", "eps_l2", "eps_inf", "grad_eps_l2", "p_ref_eps"]
    assert "chi_eps_r0.25" in row


def test_gradient_norm_of_plane_wave():
    g = make_grid(1, 64, 10.0)
    k0 = g.axis_wavevectors[4]
    s = mf.MeanFieldState(g, 0.0, g.ones() + np.exp(1j * k0 * g.axis_positions), g.ones(), 0.0)
    d = mf.diagnostics(s, zero_potential(g))
    assert np.isclose(d.grad_eps_l2, abs(k0) * np.sqrt(g.volume), rtol=1e-12)


def test_energy_of_constant():
    g = make_grid(1, 64, 10.0)
    U = bump_potential(g, 1.0, 1.0)
    # E[1] = (1/2) * Lambda * U_hat(0)
    assert np.isclose(mf.energy(g, g.ones(), U), 0.5 * g.volume * U.hat_zero, rtol=1e-13)


def test_mass_and_energy_conservation(torus):
    g, U = torus
    rows = []
    run(state(g, U), U, 0.01, 2.0, sample_interval=0.1,
        on_sample=lambda s, e: rows.append(mf.diagnostics(s, U)))
    m = np.array([r.mass for r in rows])
    e = np.array([r.energy for r in rows])
    assert np.max(np.abs(m - m[0])) / m[0] / 2.0 < 1e-8
    assert np.max(np.abs(e - e[0])) / abs(e[0]) / 2.0 < 1e-6


def test_p_ref_collapse_on_torus():
    scaled = []
    for L in (16, 32, 64):
        g = make_grid(1, 4 * L, float(L))
        U = bump_potential(g, 1.0, 1.0)
        rows = []
        run(state(g, U), U, 0.01, 2.0, sample_interval=0.1, on_sample=lambda s, e: rows.append(mf.diagnostics(s, U)))
        scaled.append(max(r.p_ref_eps for r in rows) * np.sqrt(g.volume))
    assert max(scaled) / min(scaled) < 1.5


def test_time_reversal(torus):
    g, U = torus
    s0 = state(g, U)
    s = s0
    for _ in range(20):
        s = mf.advance(s, U, 0.05)
    for _ in range(20):
        s = mf.advance(s, U, -0.05)
    assert l2_norm(g, s.varphi - s0.varphi) < 1e-10
    assert l2_norm(g, s.phi_ref - s0.phi_ref) < 1e-10


@settings(max_examples=20)
@given(st.floats(-np.pi, np.pi))
def test_gauge_covariance(theta):
    g = make_grid(1, 64, 16.0)
    U = bump_potential(g, 0.5, 1.0)
    s0 = state(g, U)
    rot = mf.MeanFieldState(g, 0.0, np.exp(1j * theta) * s0.varphi, s0.phi_ref, s0.u_l1)
    a, _ = run(s0, U, 0.05, 0.5)
    b, _ = run(rot, U, 0.05, 0.5)
    assert np.allclose(b.varphi, np.exp(1j * theta) * a.varphi, atol=1e-12)


def test_default_dt_value():
    g = make_grid(1, 128, 32.0)
    U = bump_potential(g, 1.0, 1.0)
    dt = mf.default_dt(g, U)
    k = g.axis_wavevectors[np.abs(g.axis_wavevectors) <= 2 * np.pi]
    w0 = 0.5 * k**2
    omega = np.sqrt(w0 * (w0 + 2 * U.hat_at(k).real))
    assert np.isclose(dt, 1e-3 * 2 * np.pi / omega.max(), rtol=1e-12)


def test_integrate_rejects_fractional_steps(torus):
    g, U = torus
    with pytest.raises(ValueError):
        run(state(g, U), U, 0.03, 1.0)
    with pytest.raises(ValueError):
        run(state(g, U), U, 0.01, 1.0, sample_interval=0.015)
    with pytest.raises(ValueError):
        run(state(g, U), U, 0.0, 1.0)


def test_nonfinite_state_is_reported(torus):
    g, U = torus
    bad = mf.MeanFieldState(g, 0.0, np.full(g.n, np.nan, dtype=complex), g.ones(), U.l1_norm)
    with pytest.raises(mf.NumericalError, match="t="):
        run(bad, U, 0.01, 0.1)
