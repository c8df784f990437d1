import numpy as np
import pytest

from masec.channel import build_bob_channel, build_eve_statistics
from masec.gradients import (FdConfig, fd_gradient, fd_gradient_wirtinger,
                             grad_bob_wrt_position, grad_bob_wrt_precoder,
                             grad_eve_wrt_position,
                             grad_eve_wrt_precoder_envelope,
                             grad_eve_wrt_precoder_implicit,
                             steering_derivative, steering_second_derivative)
from masec.rmt import (det_equiv_eve_rate, fixed_point_input, rate_bob,
                       solve_fixed_point)

from conftest import (random_eves, random_layout, random_paths,
                      random_precoder, random_stats, unit_config)


def de_objective(stats, noise_power):
    def objective(f):
        inp = fixed_point_input(f, stats, noise_power)
        return det_equiv_eve_rate(solve_fixed_point(inp, tol=1e-13), inp)
    return objective


def solved(f, stats, noise_power):
    inp = fixed_point_input(f, stats, noise_power)
    return solve_fixed_point(inp, tol=1e-13)


# --- FD oracle ----------------------------------------------------------------

def test_fd_gradient_quadratic():
    g = fd_gradient(lambda x: float(np.sum(x**2)), np.array([1.0, 2.0]))
    assert np.allclose(g, [2.0, 4.0], atol=1e-8)


def test_fd_gradient_log():
    g = fd_gradient(lambda x: float(np.log1p(x[0] ** 2)), np.array([1.0]))
    assert g[0] == pytest.approx(1.0, abs=1e-8)


def test_fd_gradient_rejects_bad_config():
    with pytest.raises(ValueError):
        FdConfig(step=0.0)
    with pytest.raises(ValueError):
        FdConfig(scheme="forward")


def test_fd_wirtinger_known_gradient(rng):
    # f(F) = ||F||^2 has dF* gradient F
    f0 = random_precoder(3, 2, rng)
    g = fd_gradient_wirtinger(lambda f: float(np.sum(np.abs(f) ** 2)), f0)
    assert np.allclose(g, f0, atol=1e-7)


# --- steering derivatives -------------------------------------------------------

def test_steering_derivative_matches_fd(rng):
    cfg = unit_config()
    rhos = np.array([[0.3, -0.5], [0.8, 0.4]])
    t = np.array([0.3, -0.2])
    for axis in range(2):
        analytic = steering_derivative(t, rhos, cfg.wavelength, axis)
        for part, pick in ((np.real, np.real), (np.imag, np.imag)):
            def comp(x, _axis=axis, _pick=pick):
                a = np.exp(1j * 2 * np.pi / cfg.wavelength * (x @ rhos))
                return float(np.sum(_pick(a)))
            fdg = fd_gradient(comp, t)[axis]
            assert fdg == pytest.approx(float(np.sum(part(analytic))), abs=1e-6)


def test_steering_second_derivative_matches_fd():
    lam = 1.0
    rhos = np.array([[0.6], [0.7]])
    t = np.array([0.1, 0.2])

    def d_first(x, axis):
        return steering_derivative(x, rhos, lam, axis)

    for i in range(2):
        for j in range(2):
            analytic = steering_second_derivative(t, rhos, lam, i, j)
            h = 1e-6
            up, down = t.copy(), t.copy()
            up[j] += h
            down[j] -= h
            fd = (d_first(up, i) - d_first(down, i)) / (2 * h)
            assert np.allclose(analytic, fd, atol=1e-5)


# --- precoder gradients ----------------------------------------------------------

def test_grad_bob_precoder_zero():
    h = np.ones((3, 2), complex)
    assert np.allclose(grad_bob_wrt_precoder(h, np.zeros((3, 2)), 1.0), 0.0)


def test_grad_bob_precoder_scalar():
    f = np.array([[0.7 + 0.2j]])
    g = grad_bob_wrt_precoder(np.ones((1, 1)), f, 1.0)
    assert g[0, 0] == pytest.approx(f[0, 0] / (1 + abs(f[0, 0]) ** 2), abs=1e-12)


def test_grad_bob_precoder_fd(rng):
    for trial in range(10):
        r = np.random.default_rng(4000 + trial)
        h = r.standard_normal((4, 3)) + 1j * r.standard_normal((4, 3))
        f = random_precoder(4, 2, r)
        s2 = float(r.uniform(0.5, 2.0))
        g = grad_bob_wrt_precoder(h, f, s2)
        gfd = fd_gradient_wirtinger(lambda fm: rate_bob(h, fm, s2), f)
        assert np.max(np.abs(g - gfd)) <= 1e-7 * max(1.0, np.max(np.abs(gfd)))


def test_grad_eve_precoder_pure_los_closed_form(rng):
    n, m = 4, 2
    stats = random_stats(n, m, rng)
    stats.d_nlos = np.zeros(m)
    f = random_precoder(n, m, rng)
    s2 = 0.9
    sol = solved(f, stats, s2)
    g = grad_eve_wrt_precoder_implicit(f, stats, sol, s2)
    glam = stats.g_los * np.sqrt(stats.lambda_los)[None, :]
    b = glam.conj().T @ f
    closed = glam @ np.linalg.inv(s2 * np.eye(m) + b @ b.conj().T) @ b
    assert np.max(np.abs(g - closed)) <= 1e-9


def test_grad_eve_precoder_fd_suite():
    worst = 0.0
    for trial in range(25):
        r = np.random.default_rng(5000 + trial)
        n, m = int(r.integers(2, 7)), int(r.integers(1, 5))
        m = min(m, n)
        stats = random_stats(n, m, r)
        f = random_precoder(n, m, r)
        s2 = float(r.uniform(0.5, 2.0))
        sol = solved(f, stats, s2)
        g = grad_eve_wrt_precoder_implicit(f, stats, sol, s2)
        gfd = fd_gradient_wirtinger(de_objective(stats, s2), f)
        rel = np.max(np.abs(g - gfd)) / max(np.max(np.abs(gfd)), 1e-12)
        worst = max(worst, rel)
    assert worst <= 1e-5


def test_grad_eve_implicit_envelope_agree():
    for trial in range(25):
        r = np.random.default_rng(6000 + trial)
        n, m = int(r.integers(2, 7)), int(r.integers(1, 5))
        m = min(m, n)
        stats = random_stats(n, m, r)
        f = random_precoder(n, m, r)
        s2 = float(r.uniform(0.5, 2.0))
        sol = solved(f, stats, s2)
        gi = grad_eve_wrt_precoder_implicit(f, stats, sol, s2)
        ge = grad_eve_wrt_precoder_envelope(f, stats, sol, s2)
        assert np.max(np.abs(gi - ge)) <= 1e-8 * max(np.max(np.abs(gi)), 1e-12)


def test_grad_eve_zero_mean_matches_fd(rng):
    # B = 0: only the column-norm channel survives
    n, m = 4, 2
    stats = random_stats(n, m, rng)
    stats.lambda_los = np.zeros(m)
    f = random_precoder(n, m, rng)
    sol = solved(f, stats, 1.0)
    g = grad_eve_wrt_precoder_implicit(f, stats, sol, 1.0)
    gfd = fd_gradient_wirtinger(de_objective(stats, 1.0), f)
    assert np.max(np.abs(g - gfd)) <= 1e-6 * max(np.max(np.abs(gfd)), 1e-12)


def test_grad_eve_global_phase_rotation(rng):
    # rotating F by a global phase rotates the gradient identically
    n, m = 4, 2
    stats = random_stats(n, m, rng)
    f = random_precoder(n, m, rng)
    s2 = 1.1
    phase = np.exp(1j * 0.7)
    g1 = grad_eve_wrt_precoder_implicit(f, stats, solved(f, stats, s2), s2)
    g2 = grad_eve_wrt_precoder_implicit(phase * f, stats,
                                        solved(phase * f, stats, s2), s2)
    assert np.max(np.abs(g2 - phase * g1)) <= 1e-9 * max(np.max(np.abs(g1)), 1e-12)


def test_gradient_differential_consistency(rng):
    # df = 2 Re tr(g^H dF) reproduces first-order objective changes
    n, m = 4, 2
    stats = random_stats(n, m, rng)
    f = random_precoder(n, m, rng)
    s2 = 1.0
    obj = de_objective(stats, s2)
    g = grad_eve_wrt_precoder_implicit(f, stats, solved(f, stats, s2), s2)
    step = 1e-6 * random_precoder(n, m, rng)
    predicted = 2.0 * float(np.real(np.sum(g.conj() * step)))
    actual = obj(f + step) - obj(f)
    assert actual == pytest.approx(predicted, rel=1e-4, abs=1e-12)


# --- position gradients -----------------------------------------------------------

def position_setup(seed, n=4, m=2, ell=3):
    r = np.random.default_rng(seed)
    cfg = unit_config(n_tx=n, n_streams=m, n_bob=ell)
    lay = random_layout(cfg, r)
    paths = random_paths(cfg, r)
    eves = random_eves(cfg, r)
    f = random_precoder(n, m, r)
    return cfg, lay, paths, eves, f


def test_grad_bob_position_zero_precoder():
    cfg, lay, paths, _, _ = position_setup(1)
    g = grad_bob_wrt_position(0, lay, paths, np.zeros((4, 2)), 1.0, cfg.wavelength)
    assert np.allclose(g, 0.0)


def test_grad_bob_position_single_axis_path(rng):
    # single path with rho = (1, 0): no y-dependence
    cfg = unit_config(n_tx=3, n_streams=1, n_bob=1)
    lay = random_layout(cfg, rng)
    from masec.channel import BobPaths
    paths = BobPaths(gains=np.array([1.0 + 0.3j]),
                     tx_rhos=np.array([[1.0], [0.0]]), rx_angles=np.array([0.4]))
    f = random_precoder(3, 1, rng)
    g = grad_bob_wrt_position(1, lay, paths, f, 1.0, cfg.wavelength)
    assert g[1] == pytest.approx(0.0, abs=1e-12)


def test_grad_bob_position_fd_suite():
    for trial in range(15):
        cfg, lay, paths, _, f = position_setup(7000 + trial)
        s2 = 1.0
        n = trial % cfg.n_tx

        def obj(t):
            return rate_bob(build_bob_channel(lay.replaced(n, t), paths, cfg), f, s2)

        g = grad_bob_wrt_position(n, lay, paths, f, s2, cfg.wavelength)
        gfd = fd_gradient(obj, lay.positions[:, n])
        assert np.max(np.abs(g - gfd)) <= 1e-6 * max(np.max(np.abs(gfd)), 1e-9)


def test_grad_eve_position_pure_los_fd(rng):
    cfg, lay, paths, eves, f = position_setup(41)
    eves.k_factors = np.full(cfg.n_streams, 1e12)
    stats = build_eve_statistics(lay, eves, cfg)
    s2 = 1.0
    sol = solved(f, stats, s2)
    n = 2

    def obj(t):
        st = build_eve_statistics(lay.replaced(n, t), eves, cfg)
        inp = fixed_point_input(f, st, s2)
        return det_equiv_eve_rate(solve_fixed_point(inp, tol=1e-13), inp)

    g = grad_eve_wrt_position(n, lay, eves, stats, f, sol, s2, cfg.wavelength)
    gfd = fd_gradient(obj, lay.positions[:, n])
    assert np.max(np.abs(g - gfd)) <= 1e-6 * max(np.max(np.abs(gfd)), 1e-9)


def test_grad_eve_position_axis_independence(rng):
    # single Eve at rho = (0, 1): the Eve term cannot depend on x
    cfg = unit_config(n_tx=3, n_streams=1, n_bob=2)
    lay = random_layout(cfg, rng)
    from masec.channel import EveSpec
    eves = EveSpec(k_factors=np.array([3.0]), path_losses=np.array([0.8]),
                   rhos=np.array([[0.0], [1.0]]))
    stats = build_eve_statistics(lay, eves, cfg)
    f = random_precoder(3, 1, rng)
    sol = solved(f, stats, 1.0)
    g = grad_eve_wrt_position(0, lay, eves, stats, f, sol, 1.0, cfg.wavelength)
    assert g[0] == pytest.approx(0.0, abs=1e-12)


def test_grad_eve_position_fd_and_envelope_suite():
    for trial in range(15):
        cfg, lay, paths, eves, f = position_setup(8000 + trial)
        stats = build_eve_statistics(lay, eves, cfg)
        s2 = 1.0
        sol = solved(f, stats, s2)
        n = trial % cfg.n_tx

        def obj(t):
            st = build_eve_statistics(lay.replaced(n, t), eves, cfg)
            inp = fixed_point_input(f, st, s2)
            return det_equiv_eve_rate(solve_fixed_point(inp, tol=1e-13), inp)

        gi = grad_eve_wrt_position(n, lay, eves, stats, f, sol, s2,
                                   cfg.wavelength, "implicit")
        ge = grad_eve_wrt_position(n, lay, eves, stats, f, sol, s2,
                                   cfg.wavelength, "envelope")
        gfd = fd_gradient(obj, lay.positions[:, n])
        scale = max(np.max(np.abs(gfd)), 1e-9)
        assert np.max(np.abs(gi - ge)) <= 1e-8 * scale
        assert np.max(np.abs(gi - gfd)) <= 1e-5 * scale


def test_eve_position_gradient_infty_bound():
    # |entries| <= 8 pi sqrt(M) / lambda under unit path losses and tr(FF^H) <= P
    records = []
    for trial in range(20):
        r = np.random.default_rng(8800 + trial)
        cfg = unit_config(n_tx=4, n_streams=2, n_bob=3)
        lay = random_layout(cfg, r)
        eves = random_eves(cfg, r, beta_range=(1.0, 1.0))
        stats = build_eve_statistics(lay, eves, cfg)
        f = random_precoder(4, 2, r, power=cfg.power_budget)
        sol = solved(f, stats, 1.0)
        bound = 8 * np.pi * np.sqrt(cfg.n_streams) / cfg.wavelength
        for n in range(cfg.n_tx):
            g = grad_eve_wrt_position(n, lay, eves, stats, f, sol, 1.0,
                                      cfg.wavelength)
            records.append(np.max(np.abs(g)) <= bound)
    assert all(records)


def test_grad_eve_position_method_validation(rng):
    cfg, lay, paths, eves, f = position_setup(3)
    stats = build_eve_statistics(lay, eves, cfg)
    sol = solved(f, stats, 1.0)
    with pytest.raises(ValueError):
        grad_eve_wrt_position(0, lay, eves, stats, f, sol, 1.0,
                              cfg.wavelength, method="nope")
