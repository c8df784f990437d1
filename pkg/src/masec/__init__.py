"""Ergodic secrecy rate tools for movable-antenna MIMOME systems."""

from .channel import (
    AntennaLayout,
    BobPaths,
    Direction,
    EveSpec,
    EveStatistics,
    PathLossModel,
    Scenario,
    ScenarioRanges,
    build_bob_channel,
    build_eve_statistics,
    field_response,
    fpa_layout,
    path_loss_db,
    sample_eve_channel,
    sample_scenario,
    scenario_from_json,
    scenario_to_json,
)
from .ao import AoOptions, AoResult, alternating_optimize, benchmark_methods
from .config import SystemConfig, default_config
from .mc import McEstimate, compare_de_mc, empirical_eve_rate
from .positions import PositionOptOptions, optimize_position
from .precoder import (PrecoderOptOptions, matched_filter_precoder,
                       optimize_precoder, zf_precoder)
from .rmt import (
    FixedPointError,
    FixedPointInput,
    FixedPointSolution,
    RateReport,
    det_equiv_eve_rate,
    esr,
    fixed_point_input,
    rate_bob,
    solve_fixed_point,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
