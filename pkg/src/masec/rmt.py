"""Deterministic equivalent of the ergodic eavesdropper rate.

The expected log-det rate of the Rician Eve channel is approximated by a
closed form parameterized by two scalars (delta, delta_tilde), the unique
positive solution of a coupled fixed point:

    delta        = (1/M) tr(D Gamma)
    delta_tilde  = (1/M) tr(Dt Gamma_tilde)
    Gamma        = [s2 Phi^-1 + B Phi_t B^H]^-1,  Phi   = (I + delta_tilde D)^-1
    Gamma_tilde  = [s2 Phi_t^-1 + B^H Phi B]^-1,  Phi_t = (I + delta Dt)^-1

with B the LoS mean of Z = G^H F, D the NLoS row-variance diagonal and
Dt = diag(||f_n||^2). All rates are in nats; bits appear only in reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import EveStatistics


class FixedPointError(RuntimeError):
    """Fixed-point iteration failed to converge or hit a singular system."""

    def __init__(self, message: str, residual: float = math.nan):
        super().__init__(message)
        self.residual = residual


@dataclass
class FixedPointInput:
    b_mean: np.ndarray      # (M, M) complex, B = Lambda^{1/2} G_LoS^H F
    d_row: np.ndarray       # (M,) diagonal of D, >= 0
    d_col: np.ndarray       # (M,) diagonal of Dt = diag(||f_n||^2), >= 0
    noise_power: float

    def __post_init__(self) -> None:
        self.b_mean = np.asarray(self.b_mean, dtype=complex)
        self.d_row = np.asarray(self.d_row, dtype=float)
        self.d_col = np.asarray(self.d_col, dtype=float)
        m = self.b_mean.shape[0]
        if self.b_mean.shape != (m, m):
            raise ValueError("b_mean must be square")
        if self.d_row.shape != (m,) or self.d_col.shape != (m,):
            raise ValueError("diagonals must match b_mean size")
        if np.any(self.d_row < 0) or np.any(self.d_col < 0):
            raise ValueError("variance diagonals must be non-negative")
        if self.noise_power <= 0:
            raise ValueError("noise power must be strictly positive")

    @property
    def size(self) -> int:
        return self.b_mean.shape[0]


@dataclass
class FixedPointSolution:
    delta: float
    delta_tilde: float
    gamma: np.ndarray        # (M, M)
    gamma_tilde: np.ndarray  # (M, M)
    phi: np.ndarray          # (M,) diagonal of (I + delta_tilde D)^-1
    phi_tilde: np.ndarray    # (M,) diagonal of (I + delta Dt)^-1
    iterations: int
    residual: float


@dataclass
class RateReport:
    """Bob rate, deterministic-equivalent Eve rate and the clamped ESR."""

    rate_bob: float       # nats
    rate_eve_de: float    # nats
    esr: float            # nats, max(0, rate_bob - rate_eve_de)
    esr_bits: float

    @classmethod
    def from_rates(cls, rate_bob: float, rate_eve_de: float) -> "RateReport":
        esr = max(0.0, rate_bob - rate_eve_de)
        return cls(rate_bob=rate_bob, rate_eve_de=rate_eve_de, esr=esr,
                   esr_bits=esr / math.log(2.0))


def logdet_hermitian(a: np.ndarray) -> float:
    """log|A| for Hermitian positive definite A via Cholesky."""
    chol = np.linalg.cholesky(0.5 * (a + a.conj().T))
    return float(2.0 * np.sum(np.log(np.diagonal(chol).real)))


def _gammas(inp: FixedPointInput, delta: float, delta_tilde: float):
    """Gamma, Gamma_tilde rebuilt from the two scalars."""
    b = inp.b_mean
    s2 = inp.noise_power
    phi = 1.0 / (1.0 + delta_tilde * inp.d_row)
    phi_t = 1.0 / (1.0 + delta * inp.d_col)
    a = np.diag(s2 / phi + 0j) + (b * phi_t[None, :]) @ b.conj().T
    a_t = np.diag(s2 / phi_t + 0j) + (b.conj().T * phi[None, :]) @ b
    try:
        gamma = np.linalg.inv(a)
        gamma_t = np.linalg.inv(a_t)
    except np.linalg.LinAlgError as exc:
        raise FixedPointError(f"singular resolvent during inversion: {exc}") from exc
    return gamma, gamma_t, phi, phi_t


def _fp_map(inp: FixedPointInput, delta: float, delta_tilde: float):
    gamma, gamma_t, _, _ = _gammas(inp, delta, delta_tilde)
    m = inp.size
    new_delta = float(np.sum(inp.d_row * np.diagonal(gamma).real) / m)
    new_delta_t = float(np.sum(inp.d_col * np.diagonal(gamma_t).real) / m)
    return new_delta, new_delta_t


def solve_fixed_point(inp: FixedPointInput, tol: float = 1e-10,
                      max_iter: int = 500, damping: float = 0.5,
                      x0: tuple[float, float] | None = None) -> FixedPointSolution:
    """Damped iteration of the coupled scalar fixed point.

    The residual is the scale-normalized update distance
    max(|d_new - d| / max(1, |d|), |dt_new - dt| / max(1, |dt|)), which
    coincides with the absolute residual on O(1) inputs. `x0` warm-starts
    the iteration (e.g. from a nearby precoder's solution).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < damping <= 1:
        raise ValueError("damping must lie in (0, 1]")
    # structural zeros (pure-LoS rows / zero precoder columns) stay exactly 0
    delta = 0.0 if not np.any(inp.d_row) else (x0[0] if x0 else 1.0)
    delta_tilde = 0.0 if not np.any(inp.d_col) else (x0[1] if x0 else 1.0)
    if delta < 0 or delta_tilde < 0:
        delta, delta_tilde = 1.0, 1.0

    def res_at(d: float, dt: float, md: float, mdt: float) -> float:
        return max(abs(md - d) / max(1.0, abs(d)),
                   abs(mdt - dt) / max(1.0, abs(dt)))

    residual = math.inf
    best_residual = math.inf
    stall = 0
    for it in range(1, max_iter + 1):
        new_delta, new_delta_t = _fp_map(inp, delta, delta_tilde)
        residual = res_at(delta, delta_tilde, new_delta, new_delta_t)
        if residual <= tol:
            gamma, gamma_t, phi, phi_t = _gammas(inp, delta, delta_tilde)
            return FixedPointSolution(delta=delta, delta_tilde=delta_tilde,
                                      gamma=gamma, gamma_tilde=gamma_t,
                                      phi=phi, phi_tilde=phi_t,
                                      iterations=it, residual=residual)
        if residual < 0.95 * best_residual:
            best_residual = residual
            stall = 0
        else:
            stall += 1
            if stall >= 40:
                # oscillating or barely contracting map: damp harder
                damping = max(damping * 0.5, 0.05)
                stall = 0
        if residual < 1e-2:
            # Newton step on map(x) - x = 0 accelerates stiff (slowly
            # contracting) cases; rejected unless it halves the residual
            g0 = np.array([new_delta - delta, new_delta_t - delta_tilde])
            x = np.array([delta, delta_tilde])
            jac = np.empty((2, 2))
            ok = True
            for j in range(2):
                h = 1e-6 * max(1.0, abs(x[j]))
                xp = x.copy()
                xp[j] += h
                mp = _fp_map(inp, xp[0], xp[1])
                jac[:, j] = ((np.array(mp) - xp) - g0) / h
            try:
                step = np.linalg.solve(jac, -g0)
            except np.linalg.LinAlgError:
                ok = False
            if ok:
                cand = x + step
                if np.all(cand >= 0):
                    mc = _fp_map(inp, cand[0], cand[1])
                    if res_at(cand[0], cand[1], *mc) < 0.5 * residual:
                        delta, delta_tilde = float(cand[0]), float(cand[1])
                        continue
        delta += damping * (new_delta - delta)
        delta_tilde += damping * (new_delta_t - delta_tilde)
    raise FixedPointError(
        f"no convergence after {max_iter} iterations (residual {residual:.3e})",
        residual=residual)


def det_equiv_eve_rate(sol: FixedPointSolution, inp: FixedPointInput) -> float:
    """-log|s2 Gamma| + log|I + delta Dt| - s2 M delta delta_tilde, in nats."""
    m = inp.size
    s2 = inp.noise_power
    resolvent = np.diag(s2 / sol.phi + 0j) \
        + (inp.b_mean * sol.phi_tilde[None, :]) @ inp.b_mean.conj().T
    value = logdet_hermitian(resolvent) - m * math.log(s2) \
        + float(np.sum(np.log1p(sol.delta * inp.d_col))) \
        - s2 * m * sol.delta * sol.delta_tilde
    if not math.isfinite(value):
        raise FixedPointError("non-finite deterministic equivalent")
    return value


def woodbury_residual(sol: FixedPointSolution, inp: FixedPointInput) -> float:
    """Relative Frobenius gap of Gamma_tilde = s2^-1 (Pt - Pt B^H Gamma B Pt)."""
    s2 = inp.noise_power
    b = inp.b_mean
    pt = sol.phi_tilde
    rhs = (np.diag(pt + 0j) - (pt[:, None] * (b.conj().T @ sol.gamma @ b)) * pt[None, :]) / s2
    return float(np.linalg.norm(sol.gamma_tilde - rhs) /
                 max(np.linalg.norm(sol.gamma_tilde), 1e-300))


def stationarity_slopes(sol: FixedPointSolution, inp: FixedPointInput,
                        step: float = 1e-4) -> tuple[float, float]:
    """Central-difference slopes of the DE in delta and delta_tilde.

    Both vanish at the fixed point (the envelope property); used as a
    solver self-test.
    """
    def value(d: float, dt: float) -> float:
        m = inp.size
        s2 = inp.noise_power
        phi_inv = 1.0 + dt * inp.d_row
        phi_t = 1.0 / (1.0 + d * inp.d_col)
        resolvent = np.diag(s2 * phi_inv + 0j) \
            + (inp.b_mean * phi_t[None, :]) @ inp.b_mean.conj().T
        return logdet_hermitian(resolvent) - m * math.log(s2) \
            + float(np.sum(np.log1p(d * inp.d_col))) - s2 * m * d * dt

    h_d = step * max(1.0, abs(sol.delta))
    h_t = step * max(1.0, abs(sol.delta_tilde))
    slope_d = (value(sol.delta + h_d, sol.delta_tilde)
               - value(sol.delta - h_d, sol.delta_tilde)) / (2 * h_d)
    slope_t = (value(sol.delta, sol.delta_tilde + h_t)
               - value(sol.delta, sol.delta_tilde - h_t)) / (2 * h_t)
    return slope_d, slope_t


def rate_bob(h: np.ndarray, f: np.ndarray, noise_power: float) -> float:
    """log|I + s2^-1 H^H F F^H H| in nats, via the smaller Gram matrix."""
    h = np.asarray(h, dtype=complex)
    f = np.asarray(f, dtype=complex)
    k = f.conj().T @ h  # (M, L)
    m, ell = k.shape
    if m <= ell:
        gram = k @ k.conj().T
    else:
        gram = k.conj().T @ k
    dim = gram.shape[0]
    return logdet_hermitian(np.eye(dim) + gram / noise_power)


def fixed_point_input(f: np.ndarray, stats: EveStatistics,
                      noise_power: float) -> FixedPointInput:
    """Assemble (B, D, Dt) for a precoder and Eve statistics."""
    f = np.asarray(f, dtype=complex)
    b = (np.sqrt(stats.lambda_los)[:, None] * stats.g_los.conj().T) @ f
    d_col = np.sum(np.abs(f) ** 2, axis=0)
    return FixedPointInput(b_mean=b, d_row=stats.d_nlos.copy(),
                           d_col=d_col, noise_power=noise_power)


def esr(h: np.ndarray, f: np.ndarray, stats: EveStatistics,
        noise_power: float, tol: float = 1e-10, max_iter: int = 500,
        damping: float = 0.5) -> RateReport:
    """Full deterministic-equivalent secrecy evaluation with [.]^+ clamp."""
    inp = fixed_point_input(f, stats, noise_power)
    sol = solve_fixed_point(inp, tol=tol, max_iter=max_iter, damping=damping)
    return RateReport.from_rates(rate_bob(h, f, noise_power),
                                 det_equiv_eve_rate(sol, inp))
