"""Gradients of the deterministic-equivalent rates.

Precoder derivatives follow the Wirtinger convention g_{ij} = d/dF*_{ij}; for
a real objective the real-coordinate derivatives are then d/dRe F = 2 Re(g)
and d/dIm F = 2 Im(g), and ascent steps use +g. Position derivatives are
plain real gradients w.r.t. the antenna coordinates.

The auxiliary scalars of the fixed point respond to every parameter change;
their sensitivities solve a 2x2 linear system obtained exactly by probing the
affine sensitivity maps at (0,0), (1,0), (0,1). The envelope variants exploit
stationarity of the deterministic equivalent in (delta, delta_tilde) and only
differentiate the explicit parameter dependence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import AntennaLayout, BobPaths, EveSpec, EveStatistics
from .rmt import FixedPointError, FixedPointSolution


@dataclass(frozen=True)
class FdConfig:
    step: float = 1e-6  # relative central-difference step
    scheme: str = "central"

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ValueError("step must be positive")
        if self.scheme != "central":
            raise ValueError("only the central scheme is implemented")


def fd_gradient(objective, point, fd: FdConfig = FdConfig()) -> np.ndarray:
    """Central finite differences of a scalar objective on real coordinates."""
    x = np.array(point, dtype=float)
    grad = np.zeros_like(x)
    flat = x.ravel()
    for k in range(flat.size):
        h = fd.step * max(1.0, abs(flat[k]))
        orig = flat[k]
        flat[k] = orig + h
        up = float(objective(x))
        flat[k] = orig - h
        down = float(objective(x))
        flat[k] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise FloatingPointError("objective not finite near the probe point")
        grad.ravel()[k] = (up - down) / (2.0 * h)
    return grad


def fd_gradient_wirtinger(objective, f0: np.ndarray,
                          fd: FdConfig = FdConfig()) -> np.ndarray:
    """Conjugate-coordinate FD gradient of a real objective of a complex matrix.

    Differentiates real and imaginary parts separately and packs
    g = (d/dRe + j d/dIm) / 2, matching the d/dF* convention.
    """
    f0 = np.asarray(f0, dtype=complex)

    def as_real(fr: np.ndarray) -> float:
        half = fr.size // 2
        mat = (fr[:half] + 1j * fr[half:]).reshape(f0.shape)
        return float(objective(mat))

    packed = np.concatenate([f0.real.ravel(), f0.imag.ravel()])
    g = fd_gradient(as_real, packed, fd)
    half = g.size // 2
    return 0.5 * (g[:half] + 1j * g[half:]).reshape(f0.shape)


# --- steering-vector derivatives -------------------------------------------

def steering_derivative(t_n: np.ndarray, rhos: np.ndarray, wavelength: float,
                        axis: int) -> np.ndarray:
    """d/dt_{n,axis} of [e^{j 2pi/lambda t_n^T rho_l}]_l for a direction stack."""
    k = 2.0 * np.pi / wavelength
    a = np.exp(1j * k * (np.asarray(t_n, dtype=float) @ rhos))
    return 1j * k * rhos[axis, :] * a


def steering_second_derivative(t_n: np.ndarray, rhos: np.ndarray,
                               wavelength: float, axis_i: int,
                               axis_j: int) -> np.ndarray:
    """Second mixed derivative of the same response vector (unused by the
    optimizers; the method is first-order only)."""
    k = 2.0 * np.pi / wavelength
    a = np.exp(1j * k * (np.asarray(t_n, dtype=float) @ rhos))
    return -(k**2) * rhos[axis_i, :] * rhos[axis_j, :] * a


# --- Bob-rate gradients (no fixed point involved) ---------------------------

def grad_bob_wrt_precoder(h: np.ndarray, f: np.ndarray,
                          noise_power: float) -> np.ndarray:
    """s2^-1 H (I + s2^-1 H^H F F^H H)^-1 H^H F."""
    h = np.asarray(h, dtype=complex)
    f = np.asarray(f, dtype=complex)
    ell = h.shape[1]
    k = h.conj().T @ f  # (L, M)
    w = np.linalg.solve(np.eye(ell) + (k @ k.conj().T) / noise_power, k)
    return (h @ w) / noise_power


def grad_bob_wrt_position(n: int, layout: AntennaLayout, paths: BobPaths,
                          f: np.ndarray, noise_power: float,
                          wavelength: float) -> np.ndarray:
    """Exact gradient of Bob's log-det rate w.r.t. antenna n's coordinates."""
    from .channel import bob_ula_steering

    f = np.asarray(f, dtype=complex)
    a_r = bob_ula_steering(paths.rx_angles)
    a_t_phase = np.exp(1j * (2.0 * np.pi / wavelength)
                       * (layout.positions.T @ paths.tx_rhos))
    h = (a_t_phase * paths.gains[None, :]) @ a_r.conj().T
    ell = h.shape[1]
    khf = h.conj().T @ f                      # (L, M)
    w = np.linalg.inv(np.eye(ell) + (khf @ khf.conj().T) / noise_power)
    q_full = khf @ f.conj().T                 # H^H F F^H, (L, N)
    wq_col = w @ q_full[:, n]                 # (L,)
    grad = np.zeros(2)
    t_n = layout.positions[:, n]
    for axis in range(2):
        a_p = steering_derivative(t_n, paths.tx_rhos, wavelength, axis)
        row = (a_p * paths.gains) @ a_r.conj().T  # (L,), row of H'_{n,axis}
        grad[axis] = (2.0 / noise_power) * float(np.real(row @ wq_col))
    return grad


# --- Eve-rate gradients through the fixed point ------------------------------

def _solve_2x2(probe, *, dtype=complex) -> tuple:
    """Exact solve of v = probe(v) for an affine probe via 3-point evaluation."""
    c = np.array(probe(0.0, 0.0), dtype=dtype)
    col1 = np.array(probe(1.0, 0.0), dtype=dtype) - c
    col2 = np.array(probe(0.0, 1.0), dtype=dtype) - c
    a = np.column_stack([col1, col2])
    try:
        v = np.linalg.solve(np.eye(2) - a, c)
    except np.linalg.LinAlgError as exc:
        raise FixedPointError(f"singular sensitivity system: {exc}") from exc
    return v[0], v[1]


def _precoder_shared(f: np.ndarray, stats: EveStatistics,
                     sol: FixedPointSolution):
    f = np.asarray(f, dtype=complex)
    glam = stats.g_los * np.sqrt(stats.lambda_los)[None, :]  # G_LoS Lambda^{1/2}
    b = glam.conj().T @ f
    d = stats.d_nlos
    dt = np.sum(np.abs(f) ** 2, axis=0)
    return f, glam, b, d, dt


def grad_eve_wrt_precoder_implicit(f: np.ndarray, stats: EveStatistics,
                                   sol: FixedPointSolution,
                                   noise_power: float) -> np.ndarray:
    """Implicit gradient through the fixed point, entry (i, j) = dR_e/dF*_{ij}."""
    f, glam, b, d, dt = _precoder_shared(f, stats, sol)
    n, m = f.shape
    s2 = noise_power
    gamma, gamma_t = sol.gamma, sol.gamma_tilde
    phi, phi_t = sol.phi, sol.phi_tilde
    delta, delta_t = sol.delta, sol.delta_tilde
    bh = b.conj().T
    sum_phit_dt = float(np.sum(phi_t * dt))
    grad = np.empty((n, m), dtype=complex)
    for i in range(n):
        for j in range(m):
            fij = f[i, j]
            # entry-specific constant blocks of Xi' and Xi_tilde'
            x_xi0 = np.outer(b[:, j] * phi_t[j], glam[i, :])
            x_xit0 = np.outer(np.eye(m)[j], (glam[i, :] * phi) @ b)

            def xi_prime(dd):
                # Phi_tilde' = -Phi_t (delta*Dt' + dd*Dt) Phi_t, Dt' = fij E_jj
                phit_p = -(phi_t**2) * (dd * dt)
                phit_p = phit_p.astype(complex)
                phit_p[j] += -(phi_t[j] ** 2) * (delta * fij)
                return x_xi0 + (b * phit_p[None, :]) @ bh

            def probe(dd, ddt):
                xi_p = xi_prime(dd)
                x_mat = np.diag(s2 * ddt * d + 0j) + xi_p
                r1 = -np.trace((gamma @ x_mat @ gamma) * d[:, None]) / m
                phi_p = -(phi**2) * (ddt * d)
                xit_p = x_xit0 + (bh * phi_p[None, :].astype(complex)) @ b
                xt_mat = np.diag(s2 * dd * dt + 0j) + xit_p
                xt_mat[j, j] += s2 * delta * fij
                r2 = -np.trace((gamma_t @ xt_mat @ gamma_t) * dt[:, None]) / m \
                    + fij * gamma_t[j, j] / m
                return r1, r2

            dd, ddt = _solve_2x2(probe)
            x_final = np.diag(s2 * ddt * d + 0j) + xi_prime(dd)
            term1 = np.trace(x_final @ gamma)
            term2 = delta * fij * phi_t[j] + dd * sum_phit_dt
            term3 = -s2 * m * (dd * delta_t + delta * ddt)
            grad[i, j] = term1 + term2 + term3
    return grad


def grad_eve_wrt_precoder_envelope(f: np.ndarray, stats: EveStatistics,
                                   sol: FixedPointSolution,
                                   noise_power: float) -> np.ndarray:
    """Partial derivative at frozen (delta, delta_tilde); equal to the
    implicit gradient by stationarity, in closed form."""
    f, glam, b, d, dt = _precoder_shared(f, stats, sol)
    phi_t = sol.phi_tilde
    gamma = sol.gamma
    lead = glam @ gamma @ (b * phi_t[None, :])
    bgb = np.real(np.diagonal(b.conj().T @ gamma @ b))
    col = sol.delta * (phi_t - phi_t**2 * bgb)
    return lead + f * col[None, :]


def _eve_position_pieces(n: int, layout: AntennaLayout, eves: EveSpec,
                         stats: EveStatistics, f: np.ndarray,
                         wavelength: float):
    f = np.asarray(f, dtype=complex)
    k = 2.0 * np.pi / wavelength
    # g~(t_n): column n of G_LoS^H, rebuilt from the layout it came from
    g_tilde_n = np.exp(-1j * k * (layout.positions[:, n] @ eves.rhos))
    sqrt_lam = np.sqrt(stats.lambda_los)
    glam = stats.g_los * sqrt_lam[None, :]
    b = glam.conj().T @ f
    return f, g_tilde_n, k, sqrt_lam, b


def grad_eve_wrt_position(n: int, layout: AntennaLayout, eves: EveSpec,
                          stats: EveStatistics, f: np.ndarray,
                          sol: FixedPointSolution, noise_power: float,
                          wavelength: float,
                          method: str = "implicit") -> np.ndarray:
    """Gradient of the deterministic-equivalent Eve rate w.r.t. t_n.

    method="implicit" solves the sensitivity system; method="envelope" uses
    the frozen-scalars closed form. Both agree at the fixed point.
    """
    if method not in ("implicit", "envelope"):
        raise ValueError("method must be 'implicit' or 'envelope'")
    f, g_tilde_n, k, sqrt_lam, b = _eve_position_pieces(
        n, layout, eves, stats, f, wavelength)
    m = b.shape[0]
    s2 = noise_power
    gamma, gamma_t = sol.gamma, sol.gamma_tilde
    phi, phi_t = sol.phi, sol.phi_tilde
    d, dt = stats.d_nlos, np.sum(np.abs(f) ** 2, axis=0)
    bh = b.conj().T
    f_row = f[n, :]
    tr_phit_dt = float(np.sum(phi_t * dt))
    grad = np.zeros(2)
    for axis in range(2):
        g_p = -1j * k * eves.rhos[axis, :] * g_tilde_n  # g~'_{n,axis}
        u = sqrt_lam * g_p
        if method == "envelope":
            grad[axis] = 2.0 * float(np.real((f_row * phi_t) @ bh @ gamma @ u))
            continue
        x1 = np.outer(u, (f_row * phi_t) @ bh)
        xi_c = x1 + x1.conj().T
        y = bh @ (phi * sqrt_lam * g_p)
        x2 = np.outer(y, f_row)
        xit_c = x2 + x2.conj().T

        def probe(dd, ddt):
            phit_p = -(phi_t**2) * (dd * dt)
            xi_p = xi_c + (b * phit_p[None, :]) @ bh
            x_mat = np.diag(s2 * ddt * d + 0j) + xi_p
            r1 = -np.real(np.trace((gamma @ x_mat @ gamma) * d[:, None])) / m
            phi_p = -(phi**2) * (ddt * d)
            xit_p = xit_c + (bh * phi_p[None, :].astype(complex)) @ b
            xt_mat = np.diag(s2 * dd * dt + 0j) + xit_p
            r2 = -np.real(np.trace((gamma_t @ xt_mat @ gamma_t) * dt[:, None])) / m
            return r1, r2

        dd, ddt = _solve_2x2(probe, dtype=float)
        phit_p = -(phi_t**2) * (dd * dt)
        x_final = np.diag(s2 * ddt * d + 0j) + xi_c + (b * phit_p[None, :]) @ bh
        term1 = float(np.real(np.trace(x_final @ gamma)))
        term2 = dd * tr_phit_dt
        term3 = -s2 * m * (dd * sol.delta_tilde + sol.delta * ddt)
        grad[axis] = term1 + term2 + term3
    return grad
