import numpy as np
import pytest

from masec.channel import (AntennaLayout, BobPaths, EveSpec, EveStatistics,
                           direction_cosines)
from masec.config import SystemConfig


def unit_config(n_tx=4, n_streams=2, n_bob=3, wavelength=1.0,
                noise_power=1.0, power_budget=4.0, box=2.0,
                min_spacing=0.5) -> SystemConfig:
    """O(1)-scale config used by most numeric tests."""
    return SystemConfig(n_tx=n_tx, n_streams=n_streams, n_bob=n_bob,
                        wavelength=wavelength, noise_power=noise_power,
                        power_budget=power_budget, box_half_x=box,
                        box_half_y=box, min_spacing=min_spacing)


def random_layout(cfg: SystemConfig, rng: np.random.Generator) -> AntennaLayout:
    """Rejection-sample a spacing-feasible layout inside the box."""
    for _ in range(500):
        pos = rng.uniform(-cfg.box_half_x, cfg.box_half_x, (2, cfg.n_tx))
        pos[1] = rng.uniform(-cfg.box_half_y, cfg.box_half_y, cfg.n_tx)
        lay = AntennaLayout(pos)
        if lay.min_pairwise_distance() >= cfg.min_spacing:
            return lay
    raise RuntimeError("could not sample a feasible layout")


def random_paths(cfg: SystemConfig, rng: np.random.Generator,
                 gain_scale=1.0) -> BobPaths:
    ell = cfg.n_bob
    gains = gain_scale * (rng.standard_normal(ell)
                          + 1j * rng.standard_normal(ell)) / np.sqrt(2)
    return BobPaths(gains=gains,
                    tx_rhos=direction_cosines(rng.uniform(0.2, 1.3, ell),
                                              rng.uniform(0.2, 1.3, ell)),
                    rx_angles=rng.uniform(0.6, 1.3, ell))


def random_eves(cfg: SystemConfig, rng: np.random.Generator,
                k_range=(0.5, 6.0), beta_range=(0.2, 1.5)) -> EveSpec:
    m = cfg.n_streams
    return EveSpec(k_factors=rng.uniform(*k_range, m),
                   path_losses=rng.uniform(*beta_range, m),
                   rhos=direction_cosines(rng.uniform(0.2, 1.3, m),
                                          rng.uniform(0.2, 1.3, m)))


def random_stats(n, m, rng: np.random.Generator) -> EveStatistics:
    g_los = np.exp(1j * rng.uniform(0, 2 * np.pi, (n, m)))
    return EveStatistics(g_los=g_los,
                         lambda_los=rng.uniform(0.2, 1.5, m),
                         d_nlos=rng.uniform(0.2, 1.5, m))


def random_precoder(n, m, rng: np.random.Generator, power=None) -> np.ndarray:
    f = (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m)))
    f /= np.sqrt(2)
    if power is not None:
        f *= np.sqrt(power) / np.linalg.norm(f)
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
