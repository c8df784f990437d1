"""Batch experiment harness.

Subcommands:
    validate-de   DE vs Monte Carlo sweeps (accuracy study)
    convergence   per-iteration traces of both optimizers and the AO loop
    benchmark     four-method ESR comparison over a sweep
    gradcheck     gradient verification suite

Config files are flat `key = value` text (# comments allowed); CLI flags
override file values. Geometry keys are in wavelengths, powers in dBm; the
conversion to linear units happens only here. All CSV/JSON outputs are
byte-identical across reruns with the same config and seeds (floats are
written with 12 significant digits and rows are canonically sorted; wall
times are logged to stderr, never written to result files).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__
from .ao import AoOptions, alternating_optimize, benchmark_methods
from .channel import (PathLossModel, ScenarioRanges, build_bob_channel,
                      build_eve_statistics, fpa_layout, sample_scenario)
from .config import SystemConfig, default_config
from .gradients import (FdConfig, fd_gradient, fd_gradient_wirtinger,
                        grad_bob_wrt_position, grad_bob_wrt_precoder,
                        grad_eve_wrt_position, grad_eve_wrt_precoder_envelope,
                        grad_eve_wrt_precoder_implicit)
from .mc import compare_de_mc
from .positions import PositionOptOptions, optimize_position
from .precoder import (PrecoderOptOptions, matched_filter_precoder,
                       optimize_precoder)
from .rmt import (FixedPointError, det_equiv_eve_rate, fixed_point_input,
                  rate_bob, solve_fixed_point)

SWEEP_AXES = ("N", "M", "L", "K_e", "trials", "alpha")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    # system
    carrier_ghz: float = 28.0
    n_tx: int = 8
    n_streams: int = 4
    n_paths: int = 16
    box_halfwidth_wl: float = 50.0
    min_spacing_wl: float = 0.5
    noise_dbm: float = -90.0
    power_dbm: float = 30.0
    # propagation
    k_factor: float = 4.0
    bob_distance_m: float = 40.0
    eve_distance_m: float = 40.0
    pathloss_intercept_db: float = 61.4
    pathloss_exponent: float = 2.0
    shadowing_std_db: float = 5.8
    aod_min_deg: float = 10.0
    aod_max_deg: float = 30.0
    aoa_min_deg: float = 40.0
    aoa_max_deg: float = 70.0
    # experiment
    trials: int = 1000
    seeds: tuple[int, ...] = (0, 1, 2)
    sweep_axis: str = ""
    sweep_values: tuple[float, ...] = ()
    mc_crosscheck: bool = False
    out_dir: str = "out"
    # optimizers
    precoder_max_iter: int = 300
    precoder_grad_tol: float = 1e-4
    armijo_c: float = 1e-4
    armijo_shrink: float = 0.5
    armijo_max_backtracks: int = 30
    position_max_iter: int = 50
    amsgrad_alpha: float = 0.5
    amsgrad_beta1: float = 0.9
    amsgrad_lambda1: float = 0.99
    amsgrad_beta2: float = 0.9
    ao_max_outer: int = 20
    ao_outer_tol: float = 1e-4
    gradcheck_instances: int = 50

    def canonical_text(self) -> str:
        items = dataclasses.asdict(self)
        items.pop("out_dir")  # where results land does not change them
        lines = []
        for key in sorted(items):
            value = items[key]
            if isinstance(value, (tuple, list)):
                value = ",".join(fmt_value(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def fmt_value(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return format(x, ".12g")
    return str(x)


def _parse_scalar(raw: str, current):
    raw = raw.strip()
    if isinstance(current, bool):
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"expected boolean, got {raw!r}")
    if isinstance(current, int):
        return int(raw)
    if isinstance(current, float):
        return float(raw)
    return raw


def parse_seed_list(raw: str) -> tuple[int, ...]:
    try:
        seeds = tuple(int(tok) for tok in raw.replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"bad seed list {raw!r}") from exc
    if not seeds:
        raise ConfigError("seed list is empty")
    return seeds


def parse_sweep(raw: str) -> tuple[str, tuple[float, ...]]:
    if "=" not in raw:
        raise ConfigError("sweep must look like AXIS=v1,v2,...")
    axis, _, values = raw.partition("=")
    axis = axis.strip()
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; one of {SWEEP_AXES}")
    try:
        vals = tuple(float(tok) for tok in values.replace(" ", "").split(",") if tok)
    except ValueError as exc:
        raise ConfigError(f"bad sweep values {values!r}") from exc
    if not vals:
        raise ConfigError("sweep value list is empty")
    return axis, vals


def load_config_file(path: str) -> dict[str, str]:
    text = Path(path).read_text()
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        entries[key.strip()] = value.strip()
    return entries


def build_experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config:
        entries = load_config_file(args.config)
        fields = {f.name: getattr(cfg, f.name)
                  for f in dataclasses.fields(ExperimentConfig)}
        for key, raw in entries.items():
            if key == "seeds":
                cfg = replace(cfg, seeds=parse_seed_list(raw))
            elif key == "sweep":
                axis, values = parse_sweep(raw)
                cfg = replace(cfg, sweep_axis=axis, sweep_values=values)
            elif key in fields:
                cfg = replace(cfg, **{key: _parse_scalar(raw, fields[key])})
            else:
                raise ConfigError(f"unknown config key {key!r}")
    if args.seed:
        cfg = replace(cfg, seeds=parse_seed_list(args.seed))
    if args.out:
        cfg = replace(cfg, out_dir=args.out)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.sweep:
        axis, values = parse_sweep(args.sweep)
        cfg = replace(cfg, sweep_axis=axis, sweep_values=values)
    if getattr(args, "mc_crosscheck", False):
        cfg = replace(cfg, mc_crosscheck=True)
    return cfg


def system_config(cfg: ExperimentConfig, n_tx=None, n_streams=None,
                  n_paths=None) -> SystemConfig:
    return default_config(
        n_tx=int(n_tx if n_tx is not None else cfg.n_tx),
        n_streams=int(n_streams if n_streams is not None else cfg.n_streams),
        n_bob=int(n_paths if n_paths is not None else cfg.n_paths),
        carrier_hz=cfg.carrier_ghz * 1e9,
        noise_dbm=cfg.noise_dbm,
        power_dbm=cfg.power_dbm,
        box_halfwidth_wl=cfg.box_halfwidth_wl,
        min_spacing_wl=cfg.min_spacing_wl,
    )


def scenario_ranges(cfg: ExperimentConfig, k_factor=None) -> ScenarioRanges:
    return ScenarioRanges(
        bob_aod=(math.radians(cfg.aod_min_deg), math.radians(cfg.aod_max_deg)),
        bob_aoa=(math.radians(cfg.aoa_min_deg), math.radians(cfg.aoa_max_deg)),
        eve_aod=(math.radians(cfg.aod_min_deg), math.radians(cfg.aod_max_deg)),
        k_factor=float(k_factor if k_factor is not None else cfg.k_factor),
        bob_distance=cfg.bob_distance_m,
        eve_distance=cfg.eve_distance_m,
        path_loss=PathLossModel(intercept_db=cfg.pathloss_intercept_db,
                                exponent=cfg.pathloss_exponent,
                                shadowing_std_db=cfg.shadowing_std_db),
    )


def precoder_options(cfg: ExperimentConfig) -> PrecoderOptOptions:
    return PrecoderOptOptions(max_iter=cfg.precoder_max_iter,
                              grad_tol=cfg.precoder_grad_tol,
                              armijo_c=cfg.armijo_c,
                              armijo_shrink=cfg.armijo_shrink,
                              armijo_max_backtracks=cfg.armijo_max_backtracks)


def position_options(cfg: ExperimentConfig, alpha=None) -> PositionOptOptions:
    return PositionOptOptions(max_iter=cfg.position_max_iter,
                              beta1=cfg.amsgrad_beta1,
                              lambda1=cfg.amsgrad_lambda1,
                              beta2=cfg.amsgrad_beta2,
                              alpha=float(alpha if alpha is not None
                                          else cfg.amsgrad_alpha))


def ao_options(cfg: ExperimentConfig) -> AoOptions:
    return AoOptions(max_outer=cfg.ao_max_outer, outer_tol=cfg.ao_outer_tol,
                     precoder=precoder_options(cfg),
                     positions=position_options(cfg))


# --- deterministic output helpers -------------------------------------------

def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return str(value)


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(format_cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")


def write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_manifest(out: Path, cfg: ExperimentConfig, command: str,
                   outputs: list[str]) -> None:
    config = dataclasses.asdict(cfg)
    config.pop("out_dir")
    write_json(out / "manifest.json", {
        "artifact_version": __version__,
        "command": command,
        "config": config,
        "config_sha256": cfg.sha256(),
        "seeds": list(cfg.seeds),
        "outputs": sorted(outputs),
    })


def log(msg: str) -> None:
    print(msg, file=sys.stderr)


def random_feasible_precoder(n_tx: int, n_streams: int, power: float,
                             rng: np.random.Generator) -> np.ndarray:
    f = rng.standard_normal((n_tx, n_streams)) \
        + 1j * rng.standard_normal((n_tx, n_streams))
    return f * math.sqrt(power) / np.linalg.norm(f)


# --- subcommands --------------------------------------------------------------

def cmd_validate_de(cfg: ExperimentConfig) -> int:
    axis = cfg.sweep_axis or "M"
    values = cfg.sweep_values or (1, 2, 3, 4, 5, 6)
    if axis not in ("M", "L", "K_e", "trials"):
        raise ConfigError(f"validate-de supports M/L/K_e/trials sweeps, not {axis}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    t_start = time.perf_counter()
    for value in values:
        for seed in cfg.seeds:
            m = int(value) if axis == "M" else cfg.n_streams
            ell = int(value) if axis == "L" else max(cfg.n_paths, m)
            k_e = value if axis == "K_e" else None
            trials = int(value) if axis == "trials" else cfg.trials
            sys_cfg = system_config(cfg, n_streams=m, n_paths=ell)
            rng = np.random.default_rng(seed)
            scenario = sample_scenario(sys_cfg, scenario_ranges(cfg, k_e),
                                       rng, seed=seed)
            layout = fpa_layout(sys_cfg)
            stats = build_eve_statistics(layout, scenario.eves, sys_cfg)
            f = random_feasible_precoder(sys_cfg.n_tx, sys_cfg.n_streams,
                                         sys_cfg.power_budget, rng)
            rep = compare_de_mc(f, stats, sys_cfg.noise_power,
                                trials=trials, seed=seed)
            rows.append((axis, value, seed, rep.de, rep.mc.mean,
                         rep.mc.std_error, rep.rel_err, trials))
    rows.sort(key=lambda r: (r[1], r[2]))
    csv_path = out / "validate_de.csv"
    write_csv(csv_path, ["sweep_axis", "sweep_value", "seed", "de_nats",
                         "mc_mean_nats", "mc_std_error_nats", "rel_err",
                         "trials"], rows)
    # one comparison record per evaluation, replayable without the CSV
    records = [json.dumps({"sweep_axis": r[0], "sweep_value": r[1],
                           "seed": r[2], "de_nats": r[3],
                           "mc_mean_nats": r[4], "mc_std_error_nats": r[5],
                           "rel_err": r[6], "trials": r[7]}, sort_keys=True)
               for r in rows]
    (out / "validate_de_records.jsonl").write_text("\n".join(records) + "\n")
    by_value: dict[float, list[float]] = {}
    for row in rows:
        by_value.setdefault(row[1], []).append(row[6])
    summary = {
        "axis": axis,
        "max_rel_err": max(r[6] for r in rows),
        "mean_rel_err": sum(r[6] for r in rows) / len(rows),
        "per_value_mean_rel_err": {fmt_value(v): sum(e) / len(e)
                                   for v, e in sorted(by_value.items())},
    }
    if axis == "M":
        bulk = [r[6] for r in rows if r[1] >= 3]
        if bulk:
            summary["max_rel_err_m_ge_3"] = max(bulk)
    write_json(out / "validate_de_summary.json", summary)
    write_manifest(out, cfg, "validate-de",
                   ["validate_de.csv", "validate_de_records.jsonl",
                    "validate_de_summary.json"])
    log(f"validate-de: {len(rows)} cells in {time.perf_counter()-t_start:.1f}s, "
        f"max rel err {summary['max_rel_err']:.4f}")
    return 0


def cmd_convergence(cfg: ExperimentConfig) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seeds[0]
    t_start = time.perf_counter()

    # Algorithm 1 traces across N
    n_values = [int(v) for v in (cfg.sweep_values if cfg.sweep_axis == "N"
                                 else (4, 8))]
    alg1_rows = []
    for n_tx in n_values:
        sys_cfg = system_config(cfg, n_tx=n_tx, n_paths=4)
        rng = np.random.default_rng(seed)
        scenario = sample_scenario(sys_cfg, scenario_ranges(cfg), rng, seed=seed)
        layout = fpa_layout(sys_cfg)
        h = build_bob_channel(layout, scenario.paths, sys_cfg)
        stats = build_eve_statistics(layout, scenario.eves, sys_cfg)
        f0 = matched_filter_precoder(h, sys_cfg.n_streams, sys_cfg.power_budget)
        _, trace = optimize_precoder(h, stats, f0, sys_cfg.power_budget,
                                     sys_cfg.noise_power, precoder_options(cfg))
        alg1_rows.extend((n_tx, i, obj, st, gn)
                         for i, obj, st, gn in trace.rows())
    write_csv(out / "alg1_trace.csv",
              ["n_tx", "iter", "objective_nats", "step", "grad_norm"], alg1_rows)

    # Algorithm 2 traces across alpha (single-antenna inner run)
    alpha_values = list(cfg.sweep_values if cfg.sweep_axis == "alpha"
                        else (0.1, 0.5, 1.0))
    sys_cfg = system_config(cfg, n_paths=4)
    rng = np.random.default_rng(seed)
    scenario = sample_scenario(sys_cfg, scenario_ranges(cfg), rng, seed=seed)
    layout = fpa_layout(sys_cfg)
    h = build_bob_channel(layout, scenario.paths, sys_cfg)
    stats = build_eve_statistics(layout, scenario.eves, sys_cfg)
    f0 = matched_filter_precoder(h, sys_cfg.n_streams, sys_cfg.power_budget)
    f_opt, _ = optimize_precoder(h, stats, f0, sys_cfg.power_budget,
                                 sys_cfg.noise_power, precoder_options(cfg))
    alg2_rows = []
    for alpha in alpha_values:
        _, trace = optimize_position(0, layout, scenario.paths, scenario.eves,
                                     f_opt, sys_cfg,
                                     position_options(cfg, alpha=alpha))
        alg2_rows.extend((alpha, i, 0, obj, st, feas)
                         for i, (obj, st, feas) in enumerate(
                             zip(trace.objective, trace.step_norm,
                                 trace.feasible)))
    write_csv(out / "alg2_trace.csv",
              ["alpha", "iter", "antenna_index", "objective_nats",
               "step_norm", "feasible"], alg2_rows)

    # AO trace and the final configuration
    result = alternating_optimize(scenario, sys_cfg, fpa_layout(sys_cfg),
                                  ao_options(cfg))
    ao_rows = [(i, obj, bits) for i, (obj, bits) in
               enumerate(zip(result.objective_nats, result.objective_bits))]
    write_csv(out / "ao_trace.csv",
              ["outer_iter", "objective_nats", "objective_bits"], ao_rows)
    (out / "ao_result.json").write_text(result.to_json() + "\n")

    write_manifest(out, cfg, "convergence",
                   ["alg1_trace.csv", "alg2_trace.csv", "ao_trace.csv",
                    "ao_result.json"])
    log(f"convergence: traces written in {time.perf_counter()-t_start:.1f}s")
    return 0


def cmd_benchmark(cfg: ExperimentConfig) -> int:
    axis = cfg.sweep_axis or "N"
    values = cfg.sweep_values or (4, 6, 8)
    if axis not in ("N", "L"):
        raise ConfigError(f"benchmark supports N/L sweeps, not {axis}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    crosscheck_rows = []
    t_start = time.perf_counter()
    for seed in cfg.seeds:
        # one environment per seed; N enters only through the layout
        if axis == "N":
            base = system_config(cfg)
            scenario = sample_scenario(base, scenario_ranges(cfg),
                                       np.random.default_rng(seed), seed=seed)
        for value in values:
            if axis == "N":
                sys_cfg = system_config(cfg, n_tx=int(value))
            else:
                sys_cfg = system_config(cfg, n_paths=int(value))
                scenario = sample_scenario(sys_cfg, scenario_ranges(cfg),
                                           np.random.default_rng(seed),
                                           seed=seed)
            reports = benchmark_methods(scenario, sys_cfg, ao_options(cfg))
            for method, rep in reports.items():
                gap_bits = (rep.rate_bob - rep.rate_eve_de) / math.log(2)
                rows.append((axis, value, method, seed, rep.esr_bits,
                             rep.esr, rep.rate_bob, rep.rate_eve_de, gap_bits))
            if cfg.mc_crosscheck:
                # Monte Carlo cross-check of the deterministic equivalent
                # on the fixed-layout baseline configuration
                layout = fpa_layout(sys_cfg)
                stats = build_eve_statistics(layout, scenario.eves, sys_cfg)
                f = random_feasible_precoder(sys_cfg.n_tx, sys_cfg.n_streams,
                                             sys_cfg.power_budget,
                                             np.random.default_rng(seed))
                cc = compare_de_mc(f, stats, sys_cfg.noise_power,
                                   trials=cfg.trials, seed=seed)
                crosscheck_rows.append((axis, value, seed, cc.de, cc.mc.mean,
                                        cc.mc.std_error, cc.rel_err,
                                        cc.mc.trials))
        log(f"benchmark: seed {seed} done ({time.perf_counter()-t_start:.1f}s)")
    rows.sort(key=lambda r: (r[1], r[2], r[3]))
    write_csv(out / "benchmark.csv",
              ["sweep_axis", "sweep_value", "method", "seed", "esr_bits",
               "esr_nats", "rate_bob_nats", "rate_eve_nats",
               "secrecy_gap_bits"], rows)
    outputs = ["benchmark.csv", "benchmark_summary.json"]
    if cfg.mc_crosscheck:
        crosscheck_rows.sort(key=lambda r: (r[1], r[2]))
        write_csv(out / "benchmark_crosscheck.csv",
                  ["sweep_axis", "sweep_value", "seed", "de_nats",
                   "mc_mean_nats", "mc_std_error_nats", "rel_err", "trials"],
                  crosscheck_rows)
        outputs.append("benchmark_crosscheck.csv")
    means: dict[tuple[float, str], list[float]] = {}
    for row in rows:
        means.setdefault((row[1], row[2]), []).append(row[4])
    summary = {f"{fmt_value(v)}|{m}": sum(e) / len(e)
               for (v, m), e in sorted(means.items())}
    write_json(out / "benchmark_summary.json",
               {"axis": axis, "mean_esr_bits": summary})
    write_manifest(out, cfg, "benchmark", outputs)
    log(f"benchmark: {len(rows)} rows in {time.perf_counter()-t_start:.1f}s")
    return 0


# --- gradient verification -----------------------------------------------------

def gradcheck_suite(n_instances: int = 50, seed: int = 0,
                    rel_tol: float = 1e-5, agree_tol: float = 1e-8,
                    sign_flip: bool = False) -> dict:
    """Max relative FD errors over randomized CI-sized instances.

    sign_flip corrupts the eavesdropper precoder gradient and must make the
    suite fail (negative control for the harness itself).
    """
    from .channel import AntennaLayout, BobPaths, EveSpec, direction_cosines

    worst = {"bob_precoder_fd": 0.0, "eve_precoder_fd": 0.0,
             "precoder_implicit_vs_envelope": 0.0, "bob_position_fd": 0.0,
             "eve_position_fd": 0.0, "position_implicit_vs_envelope": 0.0}
    fd = FdConfig()
    for idx in range(n_instances):
        r = np.random.default_rng(seed + idx)
        n = int(r.integers(2, 7))
        m = int(r.integers(1, min(n, 4) + 1))
        ell = int(r.integers(max(m, 1), 5 + max(m, 1)))
        wavelength = 1.0
        s2 = float(r.uniform(0.5, 2.0))
        pos = r.uniform(-2.0, 2.0, (2, n))
        layout = AntennaLayout(pos)
        paths = BobPaths(
            gains=(r.standard_normal(ell) + 1j * r.standard_normal(ell)) / np.sqrt(2),
            tx_rhos=direction_cosines(r.uniform(0.2, 1.3, ell),
                                      r.uniform(0.2, 1.3, ell)),
            rx_angles=r.uniform(0.6, 1.3, ell))
        eves = EveSpec(k_factors=r.uniform(0.5, 6.0, m),
                       path_losses=r.uniform(0.2, 1.5, m),
                       rhos=direction_cosines(r.uniform(0.2, 1.3, m),
                                              r.uniform(0.2, 1.3, m)))
        g_los = np.exp(1j * 2 * np.pi / wavelength * (pos.T @ eves.rhos))
        from .channel import EveStatistics
        k, beta = eves.k_factors, eves.path_losses
        stats = EveStatistics(g_los=g_los, lambda_los=k * beta / (k + 1),
                              d_nlos=m * beta / (k + 1))
        f = (r.standard_normal((n, m)) + 1j * r.standard_normal((n, m))) / np.sqrt(2)
        h = (np.exp(1j * 2 * np.pi * (pos.T @ paths.tx_rhos))
             * paths.gains[None, :]) @ \
            np.exp(1j * np.pi * np.outer(np.arange(ell),
                                         np.sin(paths.rx_angles))).conj().T

        inp = fixed_point_input(f, stats, s2)
        sol = solve_fixed_point(inp, tol=1e-13)

        def de_obj(fm):
            i2 = fixed_point_input(fm, stats, s2)
            return det_equiv_eve_rate(solve_fixed_point(i2, tol=1e-13), i2)

        g_bob = grad_bob_wrt_precoder(h, f, s2)
        g_bob_fd = fd_gradient_wirtinger(lambda fm: rate_bob(h, fm, s2), f, fd)
        scale = max(np.max(np.abs(g_bob_fd)), 1e-9)
        worst["bob_precoder_fd"] = max(worst["bob_precoder_fd"],
                                       float(np.max(np.abs(g_bob - g_bob_fd))) / scale)

        g_eve = grad_eve_wrt_precoder_implicit(f, stats, sol, s2)
        if sign_flip:
            g_eve = -g_eve
        g_eve_fd = fd_gradient_wirtinger(de_obj, f, fd)
        scale = max(np.max(np.abs(g_eve_fd)), 1e-9)
        worst["eve_precoder_fd"] = max(worst["eve_precoder_fd"],
                                       float(np.max(np.abs(g_eve - g_eve_fd))) / scale)
        g_env = grad_eve_wrt_precoder_envelope(f, stats, sol, s2)
        base = grad_eve_wrt_precoder_implicit(f, stats, sol, s2)
        scale = max(np.max(np.abs(base)), 1e-9)
        worst["precoder_implicit_vs_envelope"] = max(
            worst["precoder_implicit_vs_envelope"],
            float(np.max(np.abs(base - g_env))) / scale)

        ant = int(r.integers(0, n))

        def bob_pos_obj(t):
            lay = layout.replaced(ant, t)
            a_t = np.exp(1j * 2 * np.pi * (lay.positions.T @ paths.tx_rhos))
            hh = (a_t * paths.gains[None, :]) @ \
                np.exp(1j * np.pi * np.outer(np.arange(ell),
                                             np.sin(paths.rx_angles))).conj().T
            return rate_bob(hh, f, s2)

        g_bp = grad_bob_wrt_position(ant, layout, paths, f, s2, wavelength)
        g_bp_fd = fd_gradient(bob_pos_obj, layout.positions[:, ant], fd)
        scale = max(np.max(np.abs(g_bp_fd)), 1e-9)
        worst["bob_position_fd"] = max(worst["bob_position_fd"],
                                       float(np.max(np.abs(g_bp - g_bp_fd))) / scale)

        def eve_pos_obj(t):
            lay = layout.replaced(ant, t)
            gl = np.exp(1j * 2 * np.pi * (lay.positions.T @ eves.rhos))
            st = EveStatistics(g_los=gl, lambda_los=stats.lambda_los,
                               d_nlos=stats.d_nlos)
            i2 = fixed_point_input(f, st, s2)
            return det_equiv_eve_rate(solve_fixed_point(i2, tol=1e-13), i2)

        g_ep = grad_eve_wrt_position(ant, layout, eves, stats, f, sol, s2,
                                     wavelength, "implicit")
        g_ep_env = grad_eve_wrt_position(ant, layout, eves, stats, f, sol, s2,
                                         wavelength, "envelope")
        g_ep_fd = fd_gradient(eve_pos_obj, layout.positions[:, ant], fd)
        scale = max(np.max(np.abs(g_ep_fd)), 1e-9)
        worst["eve_position_fd"] = max(worst["eve_position_fd"],
                                       float(np.max(np.abs(g_ep - g_ep_fd))) / scale)
        scale = max(np.max(np.abs(g_ep)), 1e-9)
        worst["position_implicit_vs_envelope"] = max(
            worst["position_implicit_vs_envelope"],
            float(np.max(np.abs(g_ep - g_ep_env))) / scale)

    checks = {
        "bob_precoder_fd": rel_tol, "eve_precoder_fd": rel_tol,
        "bob_position_fd": rel_tol, "eve_position_fd": rel_tol,
        "precoder_implicit_vs_envelope": agree_tol,
        "position_implicit_vs_envelope": agree_tol,
    }
    results = {name: {"max_rel_err": float(worst[name]), "tolerance": float(tol),
                      "pass": bool(worst[name] <= tol)}
               for name, tol in checks.items()}
    results["all_pass"] = all(v["pass"] for v in results.values()
                              if isinstance(v, dict))
    results["instances"] = n_instances
    return results


def cmd_gradcheck(cfg: ExperimentConfig, sign_flip: bool = False) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    report = gradcheck_suite(cfg.gradcheck_instances, cfg.seeds[0],
                             rel_tol=1e-5, agree_tol=1e-8, sign_flip=sign_flip)
    write_json(out / "gradcheck.json", report)
    write_manifest(out, cfg, "gradcheck", ["gradcheck.json"])
    for name, entry in sorted(report.items()):
        if isinstance(entry, dict):
            status = "PASS" if entry["pass"] else "FAIL"
            print(f"{status} {name}: max rel err {entry['max_rel_err']:.3e} "
                  f"(tol {entry['tolerance']:.0e})")
    log(f"gradcheck: {report['instances']} instances in "
        f"{time.perf_counter()-t_start:.1f}s")
    return 0 if report["all_pass"] else 3


# --- entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="masec", description="movable-antenna secrecy experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate-de", "convergence", "benchmark", "gradcheck"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", help="comma-separated seed list")
        p.add_argument("--out", help="output directory")
        p.add_argument("--trials", type=int, help="Monte Carlo trials")
        p.add_argument("--sweep", help="AXIS=v1,v2,... sweep specification")
        p.add_argument("--mc-crosscheck", action="store_true",
                       dest="mc_crosscheck")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        cfg = build_experiment_config(args)
        if args.command == "validate-de":
            return cmd_validate_de(cfg)
        if args.command == "convergence":
            return cmd_convergence(cfg)
        if args.command == "benchmark":
            return cmd_benchmark(cfg)
        return cmd_gradcheck(cfg)
    except ConfigError as exc:
        log(f"config error: {exc}")
        return 2
    except (FixedPointError, FloatingPointError, np.linalg.LinAlgError) as exc:
        log(f"numerical failure in {args.command}: {exc}")
        return 3


if __name__ == "__main__":
    sys.exit(main())
