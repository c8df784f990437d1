"""Propagation geometry and channel synthesis.

Conventions:
    * Antenna positions are columns of a 2 x N matrix T (meters, x-y plane).
    * A propagation direction is the 2-vector rho = [sin(theta)cos(phi),
      cos(theta)] of direction cosines seen by the planar array.
    * The per-antenna field response is exp(j * 2*pi/lambda * t^T rho).
    * Bob's channel H = A_T diag(gains) A_R^H is perfectly known; the
      eavesdroppers' channel is Rician with known LoS and known NLoS
      statistics only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import K_FACTOR_LOS_THRESHOLD, SystemConfig


@dataclass(frozen=True)
class Direction:
    """Direction cosines [sin(theta)cos(phi), cos(theta)] of a path."""

    rho: np.ndarray

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=float)
        if rho.shape != (2,):
            raise ValueError("direction must be a 2-vector")
        if np.any(np.abs(rho) > 1.0 + 1e-12):
            raise ValueError("direction cosines must lie in [-1, 1]")
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_angles(cls, theta: float, phi: float) -> "Direction":
        return cls(np.array([math.sin(theta) * math.cos(phi), math.cos(theta)]))


def direction_cosines(theta, phi) -> np.ndarray:
    """Vectorized [sin(theta)cos(phi), cos(theta)] -> shape (2,) or (2, n)."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return np.stack([np.sin(theta) * np.cos(phi), np.cos(theta)])


@dataclass
class AntennaLayout:
    """Movable-antenna coordinates, one column per antenna."""

    positions: np.ndarray  # (2, N)

    def __post_init__(self) -> None:
        self.positions = np.asarray(self.positions, dtype=float)
        if self.positions.ndim != 2 or self.positions.shape[0] != 2:
            raise ValueError("positions must have shape (2, N)")

    @property
    def n_antennas(self) -> int:
        return self.positions.shape[1]

    def pairwise_distances(self) -> np.ndarray:
        diff = self.positions[:, :, None] - self.positions[:, None, :]
        return np.sqrt(np.sum(diff**2, axis=0))

    def min_pairwise_distance(self) -> float:
        d = self.pairwise_distances()
        n = d.shape[0]
        if n < 2:
            return math.inf
        return float(d[np.triu_indices(n, k=1)].min())

    def validate(self, cfg: SystemConfig, tol: float = 1e-9) -> None:
        if self.n_antennas != cfg.n_tx:
            raise ValueError("layout size does not match config n_tx")
        box = np.array([[cfg.box_half_x], [cfg.box_half_y]])
        if np.any(np.abs(self.positions) > box + tol):
            raise ValueError("antenna outside the movement box")
        if self.min_pairwise_distance() < cfg.min_spacing - tol:
            raise ValueError("pairwise antenna spacing below minimum")

    def replaced(self, n: int, t_n: np.ndarray) -> "AntennaLayout":
        pos = self.positions.copy()
        pos[:, n] = t_n
        return AntennaLayout(pos)


@dataclass
class EveSpec:
    """Per-eavesdropper Rician parameters (lists of length M)."""

    k_factors: np.ndarray   # (M,), >= 0
    path_losses: np.ndarray  # (M,), linear power gains > 0
    rhos: np.ndarray        # (2, M) direction cosines

    def __post_init__(self) -> None:
        self.k_factors = np.asarray(self.k_factors, dtype=float)
        self.path_losses = np.asarray(self.path_losses, dtype=float)
        self.rhos = np.asarray(self.rhos, dtype=float)
        m = self.k_factors.shape[0]
        if self.path_losses.shape != (m,) or self.rhos.shape != (2, m):
            raise ValueError("inconsistent eavesdropper list lengths")
        if np.any(self.k_factors < 0) or np.any(self.path_losses <= 0):
            raise ValueError("K-factors must be >= 0 and path losses > 0")

    @property
    def n_eves(self) -> int:
        return self.k_factors.shape[0]


@dataclass
class BobPaths:
    """Legitimate multipath description (lists of length L)."""

    gains: np.ndarray      # (L,) complex path gains
    tx_rhos: np.ndarray    # (2, L) departure direction cosines at Alice
    rx_angles: np.ndarray  # (L,) arrival angles at Bob's ULA, radians

    def __post_init__(self) -> None:
        self.gains = np.asarray(self.gains, dtype=complex)
        self.tx_rhos = np.asarray(self.tx_rhos, dtype=float)
        self.rx_angles = np.asarray(self.rx_angles, dtype=float)
        ell = self.gains.shape[0]
        if self.tx_rhos.shape != (2, ell) or self.rx_angles.shape != (ell,):
            raise ValueError("inconsistent path list lengths")

    @property
    def n_paths(self) -> int:
        return self.gains.shape[0]


@dataclass
class EveStatistics:
    """Known LoS component and NLoS variance profile of the Eve channel.

    lambda_los[m] = K_m b_m / (K_m + 1) weights the LoS rank-one mean;
    d_nlos[m] = M b_m / (K_m + 1) is the row-variance diagonal used by the
    deterministic equivalent (the M factor matches its 1/sqrt(M) scaling).
    """

    g_los: np.ndarray       # (N, M) unit-modulus field responses
    lambda_los: np.ndarray  # (M,)
    d_nlos: np.ndarray      # (M,)

    @property
    def n_eves(self) -> int:
        return self.g_los.shape[1]


@dataclass(frozen=True)
class PathLossModel:
    """dB path loss a + 10 b log10(d) + eps, eps ~ N(0, shadowing_std_db^2)."""

    intercept_db: float = 61.4
    exponent: float = 2.0
    shadowing_std_db: float = 5.8

    def __post_init__(self) -> None:
        if self.exponent <= 0:
            raise ValueError("path-loss exponent must be positive")


@dataclass
class ScenarioRanges:
    """Sampling ranges for random scenarios (angles in radians)."""

    bob_aod: tuple[float, float] = (math.radians(10.0), math.radians(30.0))
    bob_aoa: tuple[float, float] = (math.radians(40.0), math.radians(70.0))
    eve_aod: tuple[float, float] = (math.radians(10.0), math.radians(30.0))
    k_factor: float = 4.0
    bob_distance: float = 40.0
    eve_distance: float | None = None  # defaults to bob_distance
    path_loss: PathLossModel = field(default_factory=PathLossModel)

    def __post_init__(self) -> None:
        for name in ("bob_aod", "bob_aoa", "eve_aod"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ValueError(f"empty angle range {name}")


@dataclass
class Scenario:
    """One realized propagation environment (everything but the layout)."""

    paths: BobPaths
    eves: EveSpec
    bob_distance: float
    eve_distance: float
    seed: int | None = None


def field_response(positions, rho, wavelength: float):
    """exp(j 2 pi / lambda * t^T rho) for one position (2,) or a stack (2, n)."""
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    positions = np.asarray(positions, dtype=float)
    rho = np.asarray(rho, dtype=float)
    proj = np.tensordot(rho, positions, axes=(0, 0))
    return np.exp(1j * (2.0 * np.pi / wavelength) * proj)


def field_response_matrix(layout: AntennaLayout, rhos: np.ndarray,
                          wavelength: float) -> np.ndarray:
    """(N, n_dirs) matrix of field responses, one column per direction."""
    proj = layout.positions.T @ np.asarray(rhos, dtype=float)  # (N, n_dirs)
    return np.exp(1j * (2.0 * np.pi / wavelength) * proj)


def bob_ula_steering(rx_angles: np.ndarray) -> np.ndarray:
    """Half-wavelength ULA steering matrix at Bob, one column per path.

    Column l is [1, e^{j pi sin a_l}, ..., e^{j pi (L-1) sin a_l}]^T.
    """
    rx_angles = np.asarray(rx_angles, dtype=float)
    ell = rx_angles.shape[0]
    idx = np.arange(ell)
    return np.exp(1j * np.pi * np.outer(idx, np.sin(rx_angles)))


def build_bob_channel(layout: AntennaLayout, paths: BobPaths,
                      cfg: SystemConfig) -> np.ndarray:
    """N x L legitimate channel H = A_T diag(gains) A_R^H."""
    if layout.n_antennas != cfg.n_tx or paths.n_paths != cfg.n_bob:
        raise ValueError("layout/path dimensions do not match config")
    a_t = field_response_matrix(layout, paths.tx_rhos, cfg.wavelength)
    a_r = bob_ula_steering(paths.rx_angles)
    return (a_t * paths.gains[None, :]) @ a_r.conj().T


def build_eve_statistics(layout: AntennaLayout, eves: EveSpec,
                         cfg: SystemConfig) -> EveStatistics:
    """LoS matrix and Rician power split for the virtual Eve array."""
    if layout.n_antennas != cfg.n_tx or eves.n_eves != cfg.n_streams:
        raise ValueError("layout/eve dimensions do not match config")
    g_los = field_response_matrix(layout, eves.rhos, cfg.wavelength)
    k = eves.k_factors
    beta = eves.path_losses
    pure_los = k >= K_FACTOR_LOS_THRESHOLD
    lam = np.where(pure_los, beta, k * beta / (k + 1.0))
    d = np.where(pure_los, 0.0, eves.n_eves * beta / (k + 1.0))
    return EveStatistics(g_los=g_los, lambda_los=lam, d_nlos=d)


def sample_eve_channel(stats: EveStatistics, rng: np.random.Generator) -> np.ndarray:
    """One N x M Rician draw: sqrt(lambda_m) g_los_m + sqrt(beta_m/(K_m+1)) w."""
    n, m = stats.g_los.shape
    noise = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    noise *= np.sqrt(stats.d_nlos / (2.0 * m))[None, :]
    return stats.g_los * np.sqrt(stats.lambda_los)[None, :] + noise


def path_loss_db(distance: float, model: PathLossModel,
                 rng: np.random.Generator | None = None) -> float:
    """a + 10 b log10(d) [+ shadowing] in dB; rng=None forces eps = 0."""
    if distance <= 0:
        raise ValueError("propagation distance must be positive")
    loss = model.intercept_db + 10.0 * model.exponent * math.log10(distance)
    if rng is not None and model.shadowing_std_db > 0:
        loss += model.shadowing_std_db * rng.standard_normal()
    return loss


def _gain_variance(distance: float, model: PathLossModel,
                   rng: np.random.Generator | None) -> float:
    return 10.0 ** (-0.1 * path_loss_db(distance, model, rng))


def sample_scenario(cfg: SystemConfig, ranges: ScenarioRanges,
                    rng: np.random.Generator, seed: int | None = None) -> Scenario:
    """Draw a random propagation environment.

    Bob path gains are zero-mean complex Gaussian with per-path variance
    10^(-0.1 theta(d)); eavesdropper power gains are |z|^2 for such a z, so
    they stay positive. Angles are uniform on the configured ranges.
    """
    ell, m = cfg.n_bob, cfg.n_streams
    theta_b = rng.uniform(*ranges.bob_aod, size=ell)
    phi_b = rng.uniform(*ranges.bob_aod, size=ell)
    rx = rng.uniform(*ranges.bob_aoa, size=ell)
    gains = np.empty(ell, dtype=complex)
    for idx in range(ell):
        var = _gain_variance(ranges.bob_distance, ranges.path_loss, rng)
        gains[idx] = math.sqrt(var / 2.0) * complex(rng.standard_normal(),
                                                    rng.standard_normal())
    paths = BobPaths(gains=gains, tx_rhos=direction_cosines(theta_b, phi_b),
                     rx_angles=rx)

    eve_distance = ranges.eve_distance if ranges.eve_distance is not None \
        else ranges.bob_distance
    theta_e = rng.uniform(*ranges.eve_aod, size=m)
    phi_e = rng.uniform(*ranges.eve_aod, size=m)
    betas = np.empty(m)
    for idx in range(m):
        var = _gain_variance(eve_distance, ranges.path_loss, rng)
        z = math.sqrt(var / 2.0) * complex(rng.standard_normal(),
                                           rng.standard_normal())
        betas[idx] = abs(z) ** 2
    eves = EveSpec(k_factors=np.full(m, ranges.k_factor), path_losses=betas,
                   rhos=direction_cosines(theta_e, phi_e))
    return Scenario(paths=paths, eves=eves, bob_distance=ranges.bob_distance,
                    eve_distance=eve_distance, seed=seed)


def fpa_layout(cfg: SystemConfig) -> AntennaLayout:
    """Fixed-position baseline: half-wavelength ULA on the x-axis, centered."""
    n = cfg.n_tx
    x = (np.arange(n) - (n - 1) / 2.0) * (cfg.wavelength / 2.0)
    if x[-1] > cfg.box_half_x + 1e-12:
        raise ValueError("half-wavelength ULA does not fit in the box")
    return AntennaLayout(np.vstack([x, np.zeros(n)]))


# --- scenario (de)serialization -------------------------------------------

def _complex_list(a: np.ndarray) -> list[list[float]]:
    return [[float(z.real), float(z.imag)] for z in np.asarray(a).ravel()]


def scenario_to_json(scenario: Scenario) -> str:
    """Documented replayable schema: radians, [re, im] pairs, linear gains."""
    doc = {
        "bob": {
            "gains": _complex_list(scenario.paths.gains),
            "tx_directions": scenario.paths.tx_rhos.T.tolist(),
            "rx_angles": scenario.paths.rx_angles.tolist(),
        },
        "eves": {
            "k_factors": scenario.eves.k_factors.tolist(),
            "path_losses": scenario.eves.path_losses.tolist(),
            "directions": scenario.eves.rhos.T.tolist(),
        },
        "bob_distance": scenario.bob_distance,
        "eve_distance": scenario.eve_distance,
        "seed": scenario.seed,
    }
    return json.dumps(doc, sort_keys=True, indent=2)


def scenario_from_json(text: str) -> Scenario:
    doc = json.loads(text)
    gains = np.array([complex(re, im) for re, im in doc["bob"]["gains"]])
    paths = BobPaths(
        gains=gains,
        tx_rhos=np.asarray(doc["bob"]["tx_directions"], dtype=float).T,
        rx_angles=np.asarray(doc["bob"]["rx_angles"], dtype=float),
    )
    eves = EveSpec(
        k_factors=np.asarray(doc["eves"]["k_factors"], dtype=float),
        path_losses=np.asarray(doc["eves"]["path_losses"], dtype=float),
        rhos=np.asarray(doc["eves"]["directions"], dtype=float).T,
    )
    return Scenario(paths=paths, eves=eves,
                    bob_distance=float(doc["bob_distance"]),
                    eve_distance=float(doc["eve_distance"]),
                    seed=doc.get("seed"))
