"""Per-antenna position optimization with box and spacing constraints.

The inner loop is AMSGrad with the step-size schedule alpha/sqrt(t); each
proposal is projected by exactly solving a 2-variable quadratic program over
the movement box intersected with supporting hyperplanes that convexify the
pairwise-spacing constraint at the current iterate. Because any point
satisfying u^T (t - t_m) >= d with unit u also satisfies ||t - t_m|| >= d,
projected iterates are feasible for the true nonconvex constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import (AntennaLayout, BobPaths, EveSpec, build_bob_channel,
                      build_eve_statistics)
from .config import SystemConfig
from .gradients import grad_bob_wrt_position, grad_eve_wrt_position
from .rmt import det_equiv_eve_rate, fixed_point_input, rate_bob, solve_fixed_point


@dataclass
class PositionOptOptions:
    max_iter: int = 50          # inner AMSGrad steps per antenna
    beta1: float = 0.9
    lambda1: float = 0.99
    beta2: float = 0.9
    alpha: float = 0.5          # step scale; schedule is alpha / sqrt(t)
    use_running_max: bool = True  # disable for the literal moment recursion
    v_floor: float = 1e-12
    fp_tol: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("beta1", "lambda1", "beta2"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")


@dataclass
class AmsGradState:
    m_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v_raw: np.ndarray = field(default_factory=lambda: np.zeros(2))
    v_hat: np.ndarray = field(default_factory=lambda: np.zeros(2))
    t: int = 1
    beta1: float = 0.9
    lambda1: float = 0.99
    beta2: float = 0.9
    alpha: float = 0.5
    use_running_max: bool = True
    v_floor: float = 1e-12

    @classmethod
    def from_options(cls, opts: PositionOptOptions) -> "AmsGradState":
        return cls(beta1=opts.beta1, lambda1=opts.lambda1, beta2=opts.beta2,
                   alpha=opts.alpha, use_running_max=opts.use_running_max,
                   v_floor=opts.v_floor)


def amsgrad_step(state: AmsGradState, grad: np.ndarray):
    """One moment update; returns (proposal offset, updated state).

    The offset is the unconstrained move -alpha_t * m_hat / sqrt(v_hat)
    relative to the current point; the caller projects current + offset.
    """
    if state.t < 1:
        raise ValueError("state.t must be >= 1")
    grad = np.asarray(grad, dtype=float)
    beta1_t = state.beta1 * state.lambda1 ** (state.t - 1)
    m_hat = beta1_t * state.m_hat + (1.0 - beta1_t) * grad
    v_raw = state.beta2 * state.v_raw + (1.0 - state.beta2) * grad**2
    v_hat = np.maximum(state.v_hat, v_raw) if state.use_running_max else v_raw
    alpha_t = state.alpha / math.sqrt(state.t)
    offset = -alpha_t * m_hat / np.sqrt(np.maximum(v_hat, state.v_floor))
    new_state = replace(state, m_hat=m_hat, v_raw=v_raw, v_hat=v_hat,
                        t=state.t + 1)
    return offset, new_state


@dataclass
class QpProblem:
    """min t^T diag(v) t + 2 f^T t over the box and half-planes a^T t >= b."""

    v_diag: np.ndarray                 # (2,) nonnegative; floored by caller
    f_lin: np.ndarray                  # (2,)
    box_half: tuple[float, float]      # (D_x, D_y)
    halfplanes: list[tuple[np.ndarray, float]] = field(default_factory=list)


class InfeasibleProjection(RuntimeError):
    """The QP enumeration found no feasible candidate (linearization bug)."""


def _qp_constraints(problem: QpProblem):
    dx, dy = problem.box_half
    cons = [
        (np.array([1.0, 0.0]), -dx),
        (np.array([-1.0, 0.0]), -dx),
        (np.array([0.0, 1.0]), -dy),
        (np.array([0.0, -1.0]), -dy),
    ]
    cons.extend((np.asarray(a, dtype=float), float(b))
                for a, b in problem.halfplanes)
    return cons


def project_qp(problem: QpProblem) -> np.ndarray:
    """Exact minimizer by active-set enumeration in two variables."""
    v = np.maximum(np.asarray(problem.v_diag, dtype=float), 1e-300)
    f = np.asarray(problem.f_lin, dtype=float)
    cons = _qp_constraints(problem)
    scale = max(1.0, float(np.max(np.abs(problem.box_half))))
    tol = 1e-9 * scale

    def feasible(t):
        return all(a @ t >= b - tol for a, b in cons)

    def objective(t):
        return float(t @ (v * t) + 2.0 * f @ t)

    candidates = []
    interior = -f / v
    if feasible(interior):
        # global unconstrained optimum of a strictly convex quadratic
        return interior
    for idx, (a, b) in enumerate(cons):
        # minimizer on the line a^T t = b
        denom = float(a @ (a / v))
        if denom <= 0:
            continue
        mu = (b + float(a @ (f / v))) / denom
        t_line = (-f + mu * a) / v
        if feasible(t_line):
            candidates.append(t_line)
        for a2, b2 in cons[idx + 1:]:
            det = a[0] * a2[1] - a[1] * a2[0]
            if abs(det) < 1e-14:
                continue
            vertex = np.array([(b * a2[1] - b2 * a[1]) / det,
                               (a[0] * b2 - a2[0] * b) / det])
            if feasible(vertex):
                candidates.append(vertex)
    if not candidates:
        raise InfeasibleProjection("no feasible candidate in QP enumeration")
    return min(candidates, key=objective)


def linearize_spacing(n: int, layout: AntennaLayout,
                      min_spacing: float) -> list[tuple[np.ndarray, float]]:
    """Supporting hyperplanes u^T(t - t_m) >= d of the spacing constraint,
    taken at antenna n's current position."""
    t_n = layout.positions[:, n]
    halfplanes = []
    for m in range(layout.n_antennas):
        if m == n:
            continue
        diff = t_n - layout.positions[:, m]
        dist = float(np.linalg.norm(diff))
        if dist < 1e-12:
            raise ValueError("coincident antennas cannot be linearized")
        u = diff / dist
        halfplanes.append((u, min_spacing + float(u @ layout.positions[:, m])))
    return halfplanes


@dataclass
class PositionTrace:
    objective: list[float] = field(default_factory=list)  # maximization value
    step_norm: list[float] = field(default_factory=list)
    feasible: list[bool] = field(default_factory=list)


def amsgrad_minimize(objective, gradient, t0: np.ndarray,
                     box_half: tuple[float, float], halfplane_fn,
                     opts: PositionOptOptions):
    """AMSGrad + exact QP projection over the box and spacing half-planes.

    `objective` is minimized; `halfplane_fn(t)` supplies the spacing
    half-planes at the current iterate (empty list when unconstrained).
    Returns (best point, losses, step norms, iterates); losses start at the
    initial point so the best-seen value can never regress below it.
    """
    t = np.asarray(t0, dtype=float).copy()
    state = AmsGradState.from_options(opts)
    losses = [float(objective(t))]
    steps = [0.0]
    iterates = [t.copy()]
    best_t, best_loss = t.copy(), losses[0]
    for _ in range(opts.max_iter):
        g = np.asarray(gradient(t), dtype=float)
        offset, state = amsgrad_step(state, g)
        target = t + offset
        v = np.maximum(state.v_hat, opts.v_floor)
        problem = QpProblem(v_diag=v, f_lin=-v * target, box_half=box_half,
                            halfplanes=halfplane_fn(t))
        t_new = project_qp(problem)
        loss = float(objective(t_new))
        losses.append(loss)
        steps.append(float(np.linalg.norm(t_new - t)))
        iterates.append(t_new.copy())
        if loss < best_loss:
            best_loss, best_t = loss, t_new.copy()
        t = t_new
    return best_t, losses, steps, iterates


def optimize_position(n: int, layout: AntennaLayout, paths: BobPaths,
                      eves: EveSpec, f: np.ndarray, cfg: SystemConfig,
                      opts: PositionOptOptions | None = None,
                      precoder_fn=None):
    """Optimize antenna n's position with everything else fixed.

    Minimizes -R_b + R_e_de over t_n; returns (t_n, PositionTrace) where the
    trace stores the maximization objective R_b - R_e_de in nats.

    `precoder_fn(h, stats) -> F` re-derives the precoder at every candidate
    layout (used for baselines whose precoder is a function of the layout,
    e.g. zero forcing); gradients are taken at the refreshed precoder.
    """
    opts = opts or PositionOptOptions()
    s2 = cfg.noise_power
    warm: dict[str, tuple[float, float] | None] = {"x0": None}

    def pieces_at(t: np.ndarray):
        lay = layout.replaced(n, t)
        stats = build_eve_statistics(lay, eves, cfg)
        h = build_bob_channel(lay, paths, cfg)
        fm = precoder_fn(h, stats) if precoder_fn is not None else f
        inp = fixed_point_input(fm, stats, s2)
        sol = solve_fixed_point(inp, tol=opts.fp_tol, x0=warm["x0"])
        warm["x0"] = (sol.delta, sol.delta_tilde)
        return lay, stats, h, fm, inp, sol

    def loss(t: np.ndarray) -> float:
        _lay, _stats, h, fm, inp, sol = pieces_at(t)
        return det_equiv_eve_rate(sol, inp) - rate_bob(h, fm, s2)

    def grad(t: np.ndarray) -> np.ndarray:
        lay, stats, _h, fm, _inp, sol = pieces_at(t)
        g_e = grad_eve_wrt_position(n, lay, eves, stats, fm, sol, s2,
                                    cfg.wavelength, method="envelope")
        g_b = grad_bob_wrt_position(n, lay, paths, fm, s2, cfg.wavelength)
        return g_e - g_b

    def halfplanes(t: np.ndarray):
        return linearize_spacing(n, layout.replaced(n, t), cfg.min_spacing)

    t_best, losses, steps, iterates = amsgrad_minimize(
        loss, grad, layout.positions[:, n], cfg.box_half, halfplanes, opts)
    box = np.array([cfg.box_half_x, cfg.box_half_y])
    feasible = []
    for t in iterates:
        lay = layout.replaced(n, t)
        feasible.append(bool(np.all(np.abs(t) <= box + 1e-10)
                             and lay.min_pairwise_distance()
                             >= cfg.min_spacing - 1e-10))
    trace = PositionTrace(objective=[-v for v in losses], step_norm=steps,
                          feasible=feasible)
    return t_best, trace


# --- regret diagnostics -------------------------------------------------------

@dataclass
class RegretConstants:
    d_inf: float
    g_inf: float
    gamma: float

    def bound(self, horizon: int, opts: PositionOptOptions) -> float:
        """Worst-case cumulative regret after `horizon` steps."""
        t = float(horizon)
        b1, l1, b2, alpha = opts.beta1, opts.lambda1, opts.beta2, opts.alpha
        first = 2.0 * self.d_inf**2 * self.g_inf * math.sqrt(t) / (alpha * (1 - b1))
        second = b1 * self.d_inf**2 * self.g_inf / ((1 - b1) ** 2 * (1 - l1) ** 2)
        third = (2.0 * alpha * self.g_inf * math.sqrt(1 + math.log(t))
                 * math.sqrt(t)
                 / ((1 - b1) ** 2 * (1 - self.gamma) * math.sqrt(1 - b2)))
        return first + second + third


def regret_constants(cfg: SystemConfig,
                     opts: PositionOptOptions | None = None) -> RegretConstants:
    """Feasible-set diameter, gradient sup-bound and the moment ratio gamma."""
    opts = opts or PositionOptOptions()
    gamma = opts.beta1 / math.sqrt(opts.beta2)
    if gamma >= 1:
        raise ValueError("need beta1 / sqrt(beta2) < 1 for the regret bound")
    return RegretConstants(
        d_inf=2.0 * math.hypot(cfg.box_half_x, cfg.box_half_y),
        g_inf=8.0 * math.pi * math.sqrt(cfg.n_streams) / cfg.wavelength,
        gamma=gamma,
    )


@dataclass
class RegretReport:
    cumulative: np.ndarray  # R_T for T = 1..len
    average: np.ndarray     # R_T / T

    @property
    def final_average(self) -> float:
        return float(self.average[-1])


def empirical_regret(losses, reference_loss: float) -> RegretReport:
    """R_T = sum_t [L(t_(t)) - L(t_ref)] against a fixed reference point."""
    losses = np.asarray(losses, dtype=float)
    cumulative = np.cumsum(losses - reference_loss)
    average = cumulative / np.arange(1, losses.size + 1)
    return RegretReport(cumulative=cumulative, average=average)


def grid_reference(objective, box_half: tuple[float, float],
                   resolution: float, feasible_fn=None) -> tuple[np.ndarray, float]:
    """Best point of a uniform grid over the box (desk-scale reference)."""
    xs = np.arange(-box_half[0], box_half[0] + resolution / 2, resolution)
    ys = np.arange(-box_half[1], box_half[1] + resolution / 2, resolution)
    best_t, best_val = None, math.inf
    for x in xs:
        for y in ys:
            t = np.array([x, y])
            if feasible_fn is not None and not feasible_fn(t):
                continue
            val = float(objective(t))
            if val < best_val:
                best_val, best_t = val, t
    if best_t is None:
        raise ValueError("no feasible grid point")
    return best_t, best_val
