import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from soundlab import bogolyubov as bg
from soundlab.grid import dft_forward, l2_norm, make_grid
from soundlab.meanfield import NumericalError
from soundlab.potential import PairPotential, bump_potential, zero_potential


def flat_potential(g, value):
    """Lattice delta with U_hat(k) = value at every grid mode."""
    samples = np.zeros(g.shape)
    samples.flat[0] = value / g.cell
    return PairPotential(g, samples, g.h, abs(value), 1 if value >= 0 else -1)


@pytest.fixture(scope="module")
def repulsive():
    g = make_grid(1, 256, 64.0)
    return g, bump_potential(g, 1.0, 1.0)


def gaussian(g, w=1.0):
    return np.exp(-0.5 * (g.radius / w) ** 2).astype(complex)


def test_free_dispersion():
    U = zero_potential(make_grid(1, 16, 4.0))
    for k in (0.3, 1.0, 2.5):
        assert bg.dispersion(U, k) == pytest.approx(k**2 / 2)


def test_dispersion_arithmetic():
    assert bg.frequency(0.5, 1.0) == pytest.approx(np.sqrt(1.25))
    assert bg.frequency(0.5, -1.0) == pytest.approx(1j * np.sqrt(0.75))
    assert bg.classify(0.5 * (0.5 - 2.0)) == "unstable"
    assert bg.classify(0.0) == "marginal"
    assert bg.classify(1.0) == "oscillatory"


def test_eigenvalues_are_plus_minus_omega(repulsive):
    g, U = repulsive
    for Ux in (U, bump_potential(g, 1.0, 1.0, sign=-1)):
        for k in g.axis_wavevectors[1:40]:
            mode = bg.bogolyubov_mode(Ux, k)
            assert np.trace(mode.generator) == 0
            ev = np.linalg.eigvals(mode.generator)
            w = mode.omega
            # each eigenvalue sits on one of +-omega, and they are distinct branches
            d = np.abs(ev[:, None] - np.array([w, -w])[None, :])
            assert np.all(d.min(axis=1) < 1e-10)
            assert abs(ev.sum()) < 1e-10


def test_sound_speed_of_scaled_bump():
    g = make_grid(1, 256, 32.0)
    unit = bump_potential(g, 1.0, 1.0)
    U = bump_potential(g, 4.0 / unit.hat_zero, 1.0)
    assert bg.sound_speed(U) == pytest.approx(2.0, rel=1e-13)


def test_sound_speed_limits():
    g = make_grid(1, 256, 32.0)
    assert bg.sound_speed(bump_potential(g, 1e-12, 1.0)) < 1e-5
    with pytest.raises(ValueError):
        bg.sound_speed(zero_potential(g))
    with pytest.raises(ValueError):
        bg.sound_speed(bump_potential(g, 1.0, 1.0, sign=-1))


def test_small_k_slope_gives_sound_speed(repulsive):
    g, U = repulsive
    v = bg.sound_speed(U)
    for k in g.axis_wavevectors[1:4]:
        assert abs(bg.dispersion(U, k).real / k / v - 1) < 0.02


def test_closed_form_matches_matrix_exponential(repulsive):
    g, U = repulsive
    rng = np.random.default_rng(2)
    eta0 = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    t = 1.7
    out = dft_forward(g, bg.linear_propagate(g, eta0, U, t))
    x0 = dft_forward(g, eta0)
    w0 = 0.5 * g.k_squared
    for m in list(range(0, 20)) + [g.n // 2, g.n - 3]:
        X0 = np.array([x0[m], np.conj(x0[-m])])
        Xt = expm(-1j * t * bg.generator(w0[m], U.hat_table[m].real)) @ X0
        assert np.allclose([out[m], np.conj(out[-m])], Xt, atol=1e-10)


def test_free_propagation_preserves_moduli():
    g = make_grid(1, 64, 16.0)
    eta0 = gaussian(g) * np.exp(0.4j * g.axis_positions)
    out = bg.linear_propagate(g, eta0, zero_potential(g), 3.0)
    assert np.allclose(np.abs(dft_forward(g, out)), np.abs(dft_forward(g, eta0)), atol=1e-13)


def test_norm_not_conserved(repulsive):
    g, U = repulsive
    eta0 = gaussian(g)
    assert abs(l2_norm(g, bg.linear_propagate(g, eta0, U, 1.0)) - l2_norm(g, eta0)) > 1e-3


@given(st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_semigroup(t1, t2):
    g = make_grid(1, 64, 16.0)
    U = bump_potential(g, 1.0, 1.0, sign=-1)
    eta0 = gaussian(g)
    a = bg.linear_propagate(g, eta0, U, t1 + t2)
    b = bg.linear_propagate(g, bg.linear_propagate(g, eta0, U, t1), U, t2)
    assert l2_norm(g, a - b) <= 1e-9 * max(1.0, l2_norm(g, a))


def test_step_integrator_second_order(repulsive):
    g, U = repulsive
    eta0 = gaussian(g)
    exact = bg.linear_propagate(g, eta0, U, 1.0)
    errs = []
    for n in (20, 40, 80):
        eta = eta0
        for _ in range(n):
            eta = bg.linear_split_step(g, eta, U, 1.0 / n)
        errs.append(l2_norm(g, eta - exact))
    assert 3.6 < errs[0] / errs[1] < 4.4
    assert 3.6 < errs[1] / errs[2] < 4.4


def test_marginal_mode_grows_linearly():
    g = make_grid(1, 64, 16.0)
    m = 3
    k = g.axis_wavevectors[m]
    U = flat_potential(g, -0.25 * k**2)
    assert bg.marginal_modes(U) == sorted([(k,), (-k,)])
    # a single plane wave is not the static eigenvector, so it feels the Jordan block
    eta0 = np.exp(1j * k * g.axis_positions)
    ts = (1.0, 2.0, 3.0, 4.0)
    hats = np.array([dft_forward(g, bg.linear_propagate(g, eta0, U, t)) for t in ts])
    # the pair (eta_hat(k), conj eta_hat(-k)) is affine in t
    assert np.allclose(np.diff(hats[:, [m, -m]], 2, axis=0), 0, atol=1e-12)
    partner = np.abs(hats[:, -m])
    assert np.allclose(partner / np.array(ts), partner[0], rtol=1e-12)
    assert partner[-1] > 3 * partner[0] > 0
    eta = eta0
    for _ in range(400):
        eta = bg.linear_split_step(g, eta, U, 0.01)
    assert l2_norm(g, eta - bg.linear_propagate(g, eta0, U, 4.0)) < 1e-3 * l2_norm(g, eta)


def test_unstable_growth_rate():
    g = make_grid(1, 256, 64.0)
    U = bump_potential(g, 1.0, 1.0, sign=-1)
    (k,), rate = max(bg.unstable_modes(U), key=lambda kr: kr[1])
    m = int(round(k / g.dk)) % g.n
    ts = np.linspace(6.0, 10.0, 9)
    logs = [np.log(abs(dft_forward(g, bg.linear_propagate(g, gaussian(g), U, t))[m])) for t in ts]
    slope = np.polyfit(ts, logs, 1)[0]
    assert abs(slope / bg.dispersion(U, k).imag - 1) < 0.05
    assert rate == pytest.approx(bg.dispersion(U, k).imag)


def test_unstable_modes_repulsive_empty(repulsive):
    g, U = repulsive
    assert bg.unstable_modes(U) == []


def test_unstable_set_for_flat_attraction():
    g = make_grid(1, 64, 16.0)
    U = flat_potential(g, -1.0)
    got = bg.unstable_modes(U)
    k = g.axis_wavevectors
    expect = sorted(((float(kk),), float(np.sqrt(-(kk**2 / 2) * (kk**2 / 2 - 2)))) for kk in k if 0 < kk**2 / 2 < 2)
    assert [kr[0] for kr in got] == [e[0] for e in expect]
    assert np.allclose([kr[1] for kr in got], [e[1] for e in expect], rtol=1e-12)
    assert len(got) == 10


def test_unstable_modes_rejects_other_grid(repulsive):
    g, U = repulsive
    with pytest.raises(ValueError):
        bg.unstable_modes(U, make_grid(1, 128, 64.0))


def test_overflow_names_the_mode():
    g = make_grid(1, 64, 16.0)
    U = bump_potential(g, 1.0, 1.0, sign=-1)
    with pytest.raises(NumericalError, match="k="):
        bg.linear_propagate(g, gaussian(g), U, 2000.0)


def test_conjugate_linkage(repulsive):
    # evolving each unordered pair once determines both eta_hat(k) and eta_hat(-k) consistently
    g, U = repulsive
    rng = np.random.default_rng(5)
    eta0 = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    out = dft_forward(g, bg.linear_propagate(g, eta0, U, 0.9))
    x0 = dft_forward(g, eta0)
    w0 = 0.5 * g.k_squared
    for m in (4, g.n - 4):
        H = bg.generator(w0[m], U.hat_table[m].real)
        Xt = expm(-0.9j * H) @ np.array([x0[m], np.conj(x0[-m])])
        assert np.allclose(out[m], Xt[0], atol=1e-10)
        assert np.allclose(out[-m], np.conj(Xt[1]), atol=1e-10)


def test_compare_linearization_zero_and_scaling():
    g = make_grid(1, 128, 32.0)
    U = bump_potential(g, 1.0, 1.0)
    shape = np.exp(1 - 1 / (1 - np.minimum(g.radius, 0.999999) ** 2)) * (g.radius < 1)
    assert bg.compare_linearization(g, 0 * shape, U, 2.0, 0.01).l2_gap == 0
    res = [bg.compare_linearization(g, a * shape, U, 2.0, 0.005) for a in (0.01, 0.02, 0.04)]
    x = [a * l2_norm(g, shape) for a in (0.01, 0.02, 0.04)]
    slope = np.polyfit(np.log(x), np.log([r.l2_gap for r in res]), 1)[0]
    assert 1.7 <= slope <= 2.3
    assert res[0].eps_norm_history.shape == (401,)
    assert res[0].eps_l2_sup == res[0].eps_norm_history.max()


def test_compare_linearization_needs_repulsion():
    g = make_grid(1, 64, 16.0)
    with pytest.raises(ValueError):
        bg.compare_linearization(g, gaussian(g), bump_potential(g, 1.0, 1.0, sign=-1), 1.0, 0.01)
