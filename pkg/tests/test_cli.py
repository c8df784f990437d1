import json
from pathlib import Path

import pytest

from masec.cli import (ConfigError, ExperimentConfig, build_experiment_config,
                       build_parser, gradcheck_suite, load_config_file, main,
                       parse_seed_list, parse_sweep)


def run_cli(args):
    return main(args)


def read(path: Path) -> bytes:
    return path.read_bytes()


BASE_CONFIG = """
# desk-scale configuration for tests
n_tx = 4
n_streams = 2
n_paths = 4
trials = 200
seeds = 0,1
precoder_max_iter = 150
position_max_iter = 10
ao_max_outer = 2
gradcheck_instances = 4
"""


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(BASE_CONFIG)
    return str(path)


def test_config_parsing_roundtrip(cfg_file):
    entries = load_config_file(cfg_file)
    assert entries["n_tx"] == "4"
    args = build_parser().parse_args(["validate-de", "--config", cfg_file])
    cfg = build_experiment_config(args)
    assert cfg.n_tx == 4 and cfg.seeds == (0, 1) and cfg.trials == 200


def test_cli_flag_overrides(cfg_file):
    args = build_parser().parse_args([
        "validate-de", "--config", cfg_file, "--seed", "5", "--trials", "50",
        "--sweep", "M=1,2"])
    cfg = build_experiment_config(args)
    assert cfg.seeds == (5,) and cfg.trials == 50
    assert cfg.sweep_axis == "M" and cfg.sweep_values == (1.0, 2.0)


def test_parse_errors():
    with pytest.raises(ConfigError):
        parse_seed_list("a,b")
    with pytest.raises(ConfigError):
        parse_sweep("Q=1,2")
    with pytest.raises(ConfigError):
        parse_sweep("M:1")


def test_unknown_config_key(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("definitely_not_a_key = 3\n")
    code = run_cli(["validate-de", "--config", str(path)])
    assert code == 2


def test_validate_de_outputs_and_determinism(cfg_file, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    code = run_cli(["validate-de", "--config", cfg_file, "--out", str(out1),
                    "--sweep", "M=1,2", "--trials", "100"])
    assert code == 0
    assert (out1 / "validate_de.csv").exists()
    assert (out1 / "validate_de_summary.json").exists()
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["command"] == "validate-de"
    assert manifest["seeds"] == [0, 1]
    code = run_cli(["validate-de", "--config", cfg_file, "--out", str(out2),
                    "--sweep", "M=1,2", "--trials", "100"])
    assert code == 0
    for name in ("validate_de.csv", "validate_de_records.jsonl",
                 "validate_de_summary.json", "manifest.json"):
        assert read(out1 / name) == read(out2 / name), name


def test_validate_de_axis_guard(cfg_file, tmp_path):
    code = run_cli(["validate-de", "--config", cfg_file,
                    "--out", str(tmp_path / "x"), "--sweep", "N=4,8"])
    assert code == 2


def test_validate_de_csv_schema(cfg_file, tmp_path):
    out = tmp_path / "v"
    run_cli(["validate-de", "--config", cfg_file, "--out", str(out),
             "--sweep", "M=2", "--trials", "64", "--seed", "0"])
    lines = (out / "validate_de.csv").read_text().strip().splitlines()
    assert lines[0] == ("sweep_axis,sweep_value,seed,de_nats,mc_mean_nats,"
                        "mc_std_error_nats,rel_err,trials")
    assert len(lines) == 2
    cells = lines[1].split(",")
    assert cells[0] == "M" and cells[7] == "64"
    assert float(cells[6]) >= 0.0


def test_convergence_outputs_monotone_columns(cfg_file, tmp_path):
    out = tmp_path / "conv"
    code = run_cli(["convergence", "--config", cfg_file, "--out", str(out),
                    "--seed", "3"])
    assert code == 0
    alg1 = (out / "alg1_trace.csv").read_text().strip().splitlines()
    header = alg1[0].split(",")
    i_obj = header.index("objective_nats")
    i_n = header.index("n_tx")
    by_n = {}
    for line in alg1[1:]:
        cells = line.split(",")
        by_n.setdefault(cells[i_n], []).append(float(cells[i_obj]))
    for n_tx, objs in by_n.items():
        assert all(b >= a - 1e-10 for a, b in zip(objs, objs[1:])), n_tx
    # larger N attains a higher final objective
    finals = {n: objs[-1] for n, objs in by_n.items()}
    assert finals["8"] > finals["4"]
    ao = (out / "ao_trace.csv").read_text().strip().splitlines()
    objs = [float(line.split(",")[1]) for line in ao[1:]]
    assert all(b >= a - 1e-8 for a, b in zip(objs, objs[1:]))


def test_convergence_alpha_traces(cfg_file, tmp_path):
    out = tmp_path / "conv2"
    code = run_cli(["convergence", "--config", cfg_file, "--out", str(out),
                    "--sweep", "alpha=0.1,0.5", "--seed", "1"])
    assert code == 0
    lines = (out / "alg2_trace.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    i_alpha = header.index("alpha")
    i_step = header.index("step_norm")
    i_feas = header.index("feasible")
    steps = {}
    for line in lines[1:]:
        cells = line.split(",")
        steps.setdefault(cells[i_alpha], []).append(float(cells[i_step]))
        assert cells[i_feas] == "true"
    # the step-size budget scales with alpha: a smaller alpha cannot cover
    # ground as quickly (the mechanism behind its slower convergence)
    assert sum(steps["0.5"][:8]) > sum(steps["0.1"][:8])


def test_benchmark_outputs(cfg_file, tmp_path):
    out = tmp_path / "bench"
    code = run_cli(["benchmark", "--config", cfg_file, "--out", str(out),
                    "--sweep", "N=4,6", "--seed", "0,1"])
    assert code == 0
    lines = (out / "benchmark.csv").read_text().strip().splitlines()
    header = lines[0].split(",")
    assert header == ["sweep_axis", "sweep_value", "method", "seed",
                      "esr_bits", "esr_nats", "rate_bob_nats",
                      "rate_eve_nats", "secrecy_gap_bits"]
    methods = {line.split(",")[2] for line in lines[1:]}
    assert methods == {"MA+GP", "MA+ZF", "FPA+GP", "FPA+ZF"}
    for line in lines[1:]:
        assert float(line.split(",")[4]) >= 0.0  # clamped ESR
    summary = json.loads((out / "benchmark_summary.json").read_text())
    assert summary["axis"] == "N"


def test_benchmark_mc_crosscheck(cfg_file, tmp_path):
    out = tmp_path / "benchcc"
    code = run_cli(["benchmark", "--config", cfg_file, "--out", str(out),
                    "--sweep", "N=4", "--seed", "0", "--trials", "64",
                    "--mc-crosscheck"])
    assert code == 0
    lines = (out / "benchmark_crosscheck.csv").read_text().strip().splitlines()
    assert lines[0].startswith("sweep_axis,sweep_value,seed,de_nats")
    assert len(lines) == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert "benchmark_crosscheck.csv" in manifest["outputs"]


def test_benchmark_determinism(cfg_file, tmp_path):
    out1, out2 = tmp_path / "b1", tmp_path / "b2"
    for out in (out1, out2):
        code = run_cli(["benchmark", "--config", cfg_file, "--out", str(out),
                        "--sweep", "N=4", "--seed", "2"])
        assert code == 0
    assert read(out1 / "benchmark.csv") == read(out2 / "benchmark.csv")


def test_gradcheck_pass_and_report(cfg_file, tmp_path, capsys):
    out = tmp_path / "g"
    code = run_cli(["gradcheck", "--config", cfg_file, "--out", str(out)])
    assert code == 0
    report = json.loads((out / "gradcheck.json").read_text())
    assert report["all_pass"] is True
    for name in ("bob_precoder_fd", "eve_precoder_fd", "bob_position_fd",
                 "eve_position_fd"):
        assert report[name]["max_rel_err"] <= report[name]["tolerance"]
    shown = capsys.readouterr().out
    assert "PASS" in shown and "max rel err" in shown


def test_gradcheck_negative_control():
    report = gradcheck_suite(n_instances=2, seed=0, sign_flip=True)
    assert report["all_pass"] is False
    assert report["eve_precoder_fd"]["pass"] is False


def test_cli_exit_code_on_bad_args():
    assert run_cli(["validate-de", "--sweep", "bogus"]) == 2


def test_config_hash_stability():
    a = ExperimentConfig()
    b = ExperimentConfig()
    assert a.sha256() == b.sha256()
    c = ExperimentConfig(n_tx=9)
    assert a.sha256() != c.sha256()
