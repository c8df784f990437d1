"""Monte Carlo estimation of the exact ergodic eavesdropper rate.

Used to validate the deterministic equivalent. Trials are drawn in fixed-size
batches whose seeds derive from one master seed, so the estimate does not
depend on how batches are scheduled.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import EveStatistics
from .rmt import det_equiv_eve_rate, fixed_point_input, solve_fixed_point

REL_ERR_FLOOR = 1e-9  # nats; avoids division by a near-zero MC mean

_BATCH = 1024


@dataclass
class McEstimate:
    mean: float        # nats
    std_error: float   # nats, sample std / sqrt(trials)
    trials: int
    seed: int


def _batch_rates(f: np.ndarray, stats: EveStatistics, noise_power: float,
                 count: int, rng: np.random.Generator) -> np.ndarray:
    n, m = stats.g_los.shape
    noise = rng.standard_normal((count, n, m)) + 1j * rng.standard_normal((count, n, m))
    noise *= np.sqrt(stats.d_nlos / (2.0 * m))[None, None, :]
    g = stats.g_los[None, :, :] * np.sqrt(stats.lambda_los)[None, None, :] + noise
    z = np.einsum("tnm,nk->tmk", g.conj(), f)  # G^H F per trial
    gram = np.einsum("tmk,tlk->tml", z, z.conj())
    eye = np.eye(m)
    _, logdet = np.linalg.slogdet(eye[None, :, :] + gram / noise_power)
    return logdet.real


def empirical_eve_rate(f: np.ndarray, stats: EveStatistics, noise_power: float,
                       trials: int = 1000, seed: int = 0) -> McEstimate:
    """Sample mean of log|I + s2^-1 G^H F F^H G| over i.i.d. Rician draws."""
    if trials < 2:
        raise ValueError("need at least 2 trials")
    f = np.asarray(f, dtype=complex)
    sizes = [_BATCH] * (trials // _BATCH)
    if trials % _BATCH:
        sizes.append(trials % _BATCH)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    rates = np.concatenate([
        _batch_rates(f, stats, noise_power, count, np.random.default_rng(child))
        for count, child in zip(sizes, children)
    ])
    mean = float(np.mean(rates))
    std_error = float(np.std(rates, ddof=1) / math.sqrt(trials))
    return McEstimate(mean=mean, std_error=std_error, trials=trials, seed=seed)


@dataclass
class DeMcComparison:
    de: float
    mc: McEstimate
    rel_err: float

    def to_json(self) -> str:
        return json.dumps({
            "de_nats": self.de,
            "mc_mean_nats": self.mc.mean,
            "mc_std_error_nats": self.mc.std_error,
            "trials": self.mc.trials,
            "seed": self.mc.seed,
            "rel_err": self.rel_err,
        }, sort_keys=True)


def compare_de_mc(f: np.ndarray, stats: EveStatistics, noise_power: float,
                  trials: int = 1000, seed: int = 0) -> DeMcComparison:
    """Deterministic equivalent vs Monte Carlo on identical inputs."""
    inp = fixed_point_input(f, stats, noise_power)
    de = det_equiv_eve_rate(solve_fixed_point(inp), inp)
    mc = empirical_eve_rate(f, stats, noise_power, trials=trials, seed=seed)
    rel_err = abs(de - mc.mean) / max(mc.mean, REL_ERR_FLOOR)
    return DeMcComparison(de=de, mc=mc, rel_err=rel_err)
