"""
End-to-end tests of the command line interface.
"""
import io
import json
import math

import numpy as np
import pytest
from rich.console import Console

from gridtune.cli import EXIT_COMPUTATION, EXIT_CONFIG, EXIT_OK, main, run_command
from gridtune.config import parse_config
from gridtune.utils import read_table

TWO_BUS = """
[network]
n_buses = 2
lines = [[0, 1, 1.0]]

[params]
m = 1.0
d = 1.0
k_p = {k_p}
k_omega = 1.0

[controller]
type = "idroop"
r_r_inv = 1.0
nu = {nu}
delta = {delta}

[sweep]
axis = "delta"
values = [0.001, 0.1, 10.0, 1000.0]

[sim]
dt = 0.01
horizon = 5.0
burn_in = 1.0
n_trajectories = 4
seed = 7

[delay]
method = "{method}"
"""


def two_bus(k_p=1.0, nu=2.0, delta=1.0, method="auto"):
    return parse_config(TWO_BUS.format(k_p=k_p, nu=nu, delta=delta, method=method))


def run(command, config, out, **kwargs):
    console = Console(file=io.StringIO())
    return run_command(command, config, out, console=console, **kwargs)


def read_record(out):
    with open(out / "run.json", encoding="utf-8") as source:
        return json.load(source)


def test_analyze(tmp_path):
    assert run("analyze", two_bus(), tmp_path) == EXIT_OK
    row = read_table(tmp_path / "analyze.csv").iloc[0]
    assert np.isclose(row["closed_form"], 43.0 / 28.0, rtol=1e-12)
    assert row["rel_diff"] <= 1e-8
    record = read_record(tmp_path)
    assert record["status"] == "ok"
    assert record["files"] == ["analyze.csv"]


def test_optimize(tmp_path):
    assert run("optimize", two_bus(k_p=10.0), tmp_path) == EXIT_OK
    row = read_table(tmp_path / "optimize.csv").iloc[0]
    assert np.isclose(row["nu_star"], -1.0 + math.sqrt(101.0), rtol=1e-9)
    assert row["regime"] == "lead"
    assert row["improvement"] > 0.0


def test_delay_independent(tmp_path):
    assert run("delay", two_bus(nu=1.0, delta=0.0), tmp_path) == EXIT_OK
    row = read_table(tmp_path / "delay.csv").iloc[0]
    assert math.isinf(row["tau_rob"])
    assert row["method"] == "closed_form_delta0"
    assert read_record(tmp_path)["summary"]["tau_rob"] == "inf"


def test_delay_closed_form(tmp_path):
    assert run("delay", two_bus(delta=0.0), tmp_path) == EXIT_OK
    row = read_table(tmp_path / "delay.csv").iloc[0]
    assert np.isclose(row["tau_rob"], 0.82970, atol=1e-5)


def test_delay_without_closed_form(tmp_path):
    code = run("delay", two_bus(method="closed_form"), tmp_path)
    assert code == EXIT_COMPUTATION
    record = read_record(tmp_path)
    assert record["status"] == "error"
    assert record["error"]["type"] == "DomainError"


def test_sweep(tmp_path):
    assert run("sweep", two_bus(), tmp_path, plot=True) == EXIT_OK
    frame = read_table(tmp_path / "sweep.csv")
    assert list(frame["delta"]) == [0.001, 0.1, 10.0, 1000.0]
    assert (tmp_path / "sweep.svg").exists()
    assert read_record(tmp_path)["summary"]["n_points"] == 4


def test_simulate_deterministic(tmp_path):
    """
    Identical seeds give byte-identical reports.
    """
    config = two_bus()
    assert run("simulate", config, tmp_path / "a") == EXIT_OK
    assert run("simulate", config, tmp_path / "b") == EXIT_OK
    first = (tmp_path / "a" / "simulate.csv").read_bytes()
    assert first == (tmp_path / "b" / "simulate.csv").read_bytes()

    assert run("simulate", config, tmp_path / "c", seed=8) == EXIT_OK
    row = read_table(tmp_path / "c" / "simulate.csv").iloc[0]
    assert row["seed"] == 8
    assert (tmp_path / "c" / "simulate.csv").read_bytes() != first


def test_main(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TWO_BUS.format(k_p=1.0, nu=2.0, delta=1.0, method="auto"))
    out = tmp_path / "out"
    assert main(["analyze", "--config", str(path), "--out", str(out)]) == EXIT_OK
    assert (out / "analyze.csv").exists()


def test_main_invalid_config(tmp_path):
    path = tmp_path / "run.toml"
    text = TWO_BUS.format(k_p=1.0, nu=2.0, delta=1.0, method="auto")
    path.write_text(text.replace("m = 1.0", "m = -1.0"))
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    record = read_record(tmp_path)
    assert record["exit_code"] == EXIT_CONFIG
    assert ["params.m", "must be positive, got -1.0"] in record["error"]["violations"]


def test_main_missing_file(tmp_path):
    missing = str(tmp_path / "missing.toml")
    assert main(["analyze", "--config", missing, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_invalid_command(tmp_path):
    with pytest.raises(ValueError):
        run("plot", two_bus(), tmp_path)


def test_delay_checks(tmp_path):
    """
    Delayed simulations around the delay margin agree with the Nyquist test.
    """
    text = TWO_BUS.format(k_p=1.0, nu=2.0, delta=0.0, method="auto")
    config = parse_config(text + "check_factors = [0.8, 1.2]\nhorizon = 60.0\n")
    assert run("delay", config, tmp_path, plot=True) == EXIT_OK
    checks = read_table(tmp_path / "delay_checks.csv")
    assert list(checks["nyquist_stable"]) == [True, False]
    assert checks["agree"].all()
    assert (tmp_path / "delay.svg").exists()
    assert read_record(tmp_path)["files"] == ["delay.csv", "delay_checks.csv", "delay.svg"]


def test_main_invalid_utf8(tmp_path):
    path = tmp_path / "run.toml"
    path.write_bytes(b"[network]\nn_buses = 1\n# \xff\xfe\n")
    assert main(["analyze", "--config", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG
    record = read_record(tmp_path)
    assert record["exit_code"] == EXIT_CONFIG
    assert record["error"]["type"] == "ParseError"
    assert record["error"]["line"] == 3
    assert record["error"]["column"] == 3


@pytest.mark.parametrize("command", ["analyze", "optimize", "delay", "sweep"])
def test_reports_deterministic(tmp_path, command):
    """
    Repeated runs write byte-identical reports, also for threaded sweeps.
    """
    text = TWO_BUS.format(k_p=10.0, nu=2.0, delta=1.0, method="auto")
    text = text.replace(
        "values = [0.001, 0.1, 10.0, 1000.0]",
        "values = [0.001, 0.1, 10.0, 1000.0]\nn_workers = 4",
    )
    config = parse_config(text)
    assert config.sweep.n_workers == 4
    assert run(command, config, tmp_path / "a") == EXIT_OK
    assert run(command, config, tmp_path / "b") == EXIT_OK
    name = f"{command}.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_analyze_heterogeneous(tmp_path):
    """
    For heterogeneous buses the full model is compared with a Kronecker
    solve instead of the closed form.
    """
    text = TWO_BUS.format(k_p=1.0, nu=2.0, delta=1.0, method="auto")
    config = parse_config(text.replace("m = 1.0", "m = [1.0, 2.0]"))
    assert run("analyze", config, tmp_path) == EXIT_OK
    row = read_table(tmp_path / "analyze.csv").iloc[0]
    assert math.isnan(row["closed_form"])
    assert math.isnan(row["lyapunov_modal"])
    assert math.isfinite(row["rel_diff"])
    assert row["rel_diff"] <= 1e-8
