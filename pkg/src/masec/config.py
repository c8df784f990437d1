"""System-level parameters and unit conversions.

All internal computation uses linear units (watts, meters, nats); dB/dBm and
wavelength-relative geometry are converted at the configuration boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

SPEED_OF_LIGHT = 299_792_458.0

# Rician K-factors at or above this are treated as pure LoS to avoid 0*inf.
K_FACTOR_LOS_THRESHOLD = 1e12


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    if x <= 0:
        raise ValueError("dB conversion needs a positive linear value")
    return 10.0 * math.log10(x)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def wavelength_from_carrier(carrier_hz: float) -> float:
    if carrier_hz <= 0:
        raise ValueError("carrier frequency must be positive")
    return SPEED_OF_LIGHT / carrier_hz


@dataclass(frozen=True)
class SystemConfig:
    """Scalar system parameters.

    Attributes:
        n_tx: number of movable transmit antennas N.
        n_streams: number of data streams M; the eavesdroppers form a
            cooperating virtual array of the same size.
        n_bob: Bob ULA size L, which is also the legitimate multipath count.
        wavelength: carrier wavelength in meters.
        noise_power: receiver noise power in watts.
        power_budget: transmit power budget P in watts (trace constraint).
        box_half_x / box_half_y: movement region half-widths D_x, D_y in
            meters; antennas live in [-D_x, D_x] x [-D_y, D_y].
        min_spacing: minimum pairwise antenna distance in meters.
        log_base: "nats" or "bits", used only when formatting reports.
    """

    n_tx: int
    n_streams: int
    n_bob: int
    wavelength: float
    noise_power: float
    power_budget: float
    box_half_x: float
    box_half_y: float
    min_spacing: float
    log_base: str = "nats"

    def __post_init__(self) -> None:
        if self.n_streams > self.n_tx or self.n_streams > self.n_bob:
            raise ValueError("need M <= N and M <= L")
        for name in ("wavelength", "noise_power", "power_budget",
                     "box_half_x", "box_half_y", "min_spacing"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")
        if self.min_spacing >= 2.0 * min(self.box_half_x, self.box_half_y):
            raise ValueError("min_spacing must fit inside the movement box")
        if self.log_base not in ("nats", "bits"):
            raise ValueError("log_base must be 'nats' or 'bits'")

    @property
    def box_half(self) -> tuple[float, float]:
        return (self.box_half_x, self.box_half_y)


def default_config(
    n_tx: int = 8,
    n_streams: int = 4,
    n_bob: int = 16,
    carrier_hz: float = 28e9,
    noise_dbm: float = -90.0,
    power_dbm: float = 30.0,
    box_halfwidth_wl: float = 50.0,
    min_spacing_wl: float = 0.5,
    log_base: str = "nats",
) -> SystemConfig:
    """Config with the mmWave simulation defaults (28 GHz, -90 dBm noise)."""
    lam = wavelength_from_carrier(carrier_hz)
    return SystemConfig(
        n_tx=n_tx,
        n_streams=n_streams,
        n_bob=n_bob,
        wavelength=lam,
        noise_power=dbm_to_watt(noise_dbm),
        power_budget=dbm_to_watt(power_dbm),
        box_half_x=box_halfwidth_wl * lam,
        box_half_y=box_halfwidth_wl * lam,
        min_spacing=min_spacing_wl * lam,
        log_base=log_base,
    )
