"""
============
gridtune.cli
============

Command line interface of gridtune.

Usage::

    gridtune <command> --config <path> [--out <dir>] [--plot] [--seed <u64>]

with ``<command>`` one of ``analyze``, ``optimize``, ``delay``,
``simulate`` and ``sweep``. Each command writes ``<command>.csv`` and
``run.json`` to the output directory and prints a summary table. The exit
code is 0 on success, 2 for invalid configurations and 3 for errors during
the computation.
"""
import argparse
from dataclasses import replace
import logging
import math
from pathlib import Path

import numpy as np
from rich.console import Console

from gridtune.common import (
    ConfigError,
    DomainError,
    GridtuneException,
    HomogeneityError,
    InputError,
    ParseError,
    StabilityError,
    MarginalStabilityError,
    ValidationError,
)
from gridtune.config import load_config
from gridtune.delay import (
    is_stable_with_delay,
    tau_rob_bisection,
    tau_rob_closed,
)
from gridtune.logging import print_summary
from gridtune.lyap import (
    CLOSED_FORM,
    LYAPUNOV_FULL,
    LYAPUNOV_MODAL,
    h2_network,
    solve_lyapunov,
    solve_lyapunov_kronecker,
)
from gridtune.netmodel import (
    Droop,
    IDroop,
    assemble_state_space,
    build_laplacian,
)
from gridtune.plotting import plot_peak_envelopes, plot_sweep
from gridtune.sim import DELTA_SMALL, simulate_delayed, simulate_sde
from gridtune.spectral import eigendecompose
from gridtune.tuning import sweep, tune
from gridtune.utils import write_json, write_table

_LOGGER = logging.getLogger(__name__)

COMMANDS = ("analyze", "optimize", "delay", "simulate", "sweep")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTATION = 3

SOLVERS = {"schur": solve_lyapunov, "kronecker": solve_lyapunov_kronecker}


def _lambdas(config):
    decomposition = eigendecompose(
        build_laplacian(config.topology), config.analysis.zero_tol
    )
    return np.where(decomposition.zero_modes(), 0.0, decomposition.lambdas)


def _relative_difference(reference, value):
    if math.isnan(reference) or math.isnan(value):
        return math.nan
    if reference == value:
        return 0.0
    if math.isinf(reference) or math.isinf(value):
        return math.inf
    return abs(value - reference) / abs(reference)


def closed_form_h2(config, controller=None):
    """
    Closed-form squared :math:`H_2` norm for the configured controller.

    Args:
        config: The ``RunConfig``.
        controller: Overrides the configured controller if given.

    Raises:
        HomogeneityError: If the bus parameters are heterogeneous.
    """
    if controller is None:
        controller = config.controller
    return h2_network(
        config.topology, config.params, controller, CLOSED_FORM,
        zero_tol=config.analysis.zero_tol,
    ).squared_norm


def full_reference_h2(config, controller):
    """
    Squared norm of the full model from the Kronecker solver, ``nan`` if the
    model is too large for it.
    """
    try:
        return h2_network(
            config.topology, config.params, controller, LYAPUNOV_FULL,
            solve_lyapunov_kronecker,
        ).squared_norm
    except InputError:
        _LOGGER.info("Model too large for the Kronecker reference solve.")
        return math.nan



###############################################################################
# Commands
###############################################################################


def _analyze(config, out, plot, progress):
    solver = SOLVERS[config.analysis.solver]
    controller = config.controller

    try:
        closed = closed_form_h2(config)
        homogeneous = True
    except HomogeneityError:
        _LOGGER.info("Heterogeneous parameters, no closed-form value.")
        closed = math.nan
        homogeneous = False

    if isinstance(controller, IDroop) and controller.delta == 0.0:
        _LOGGER.warning("No state-space realization for delta = 0.")
        lyapunov = modal = math.nan
    else:
        lyapunov = h2_network(
            config.topology, config.params, controller, LYAPUNOV_FULL, solver
        ).squared_norm
        modal = math.nan
        if homogeneous:
            modal = h2_network(
                config.topology, config.params, controller, LYAPUNOV_MODAL, solver
            ).squared_norm

    if homogeneous:
        reference = closed
    elif math.isnan(lyapunov):
        reference = math.nan
    else:
        reference = full_reference_h2(config, controller)
    rel_diff = _relative_difference(reference, lyapunov)
    if rel_diff > config.analysis.rel_tol:
        _LOGGER.warning(
            "Relative difference %.3g exceeds tolerance %.3g.",
            rel_diff, config.analysis.rel_tol,
        )
    return [{
        "controller": controller.name,
        "n_buses": config.topology.n_buses,
        "closed_form": closed,
        "lyapunov": lyapunov,
        "lyapunov_modal": modal,
        "rel_diff": rel_diff,
    }], {}


def _optimize(config, out, plot, progress):
    lambdas = _lambdas(config)
    m, d, k_p, k_omega = config.params.scalars()
    report = tune(
        lambdas, m, d, config.controller.r_r_inv, k_p, k_omega,
        delta_rec=config.analysis.delta_rec, nu_max=config.analysis.nu_max,
    )
    return [{
        "nu_star": report.nu_star,
        "regime": report.regime,
        "interval_lower": report.interval.lower,
        "interval_upper": report.interval.upper,
        "interval_empty": report.interval.is_empty,
        "h2_at_optimum": report.h2_at_optimum,
        "h2_droop": report.h2_droop,
        "improvement": report.h2_droop - report.h2_at_optimum,
        "delta_rec": report.delta_rec,
        "h2_at_delta_rec": report.h2_at_delta_rec,
        "threshold_gap": report.threshold_gap,
        "nu_capped": report.nu_capped,
    }], {}


def _delay(config, out, plot, progress):
    lambdas = _lambdas(config)
    m, d, _, _ = config.params.scalars()
    controller = config.controller
    options = config.delay
    lambda_n = float(lambdas.max())

    report = None
    if options.method in ("auto", "closed_form"):
        try:
            report = tau_rob_closed(lambda_n, m, d, controller)
        except DomainError:
            if options.method == "closed_form":
                raise
            _LOGGER.info("No closed form for %r, using bisection.", controller)
    if report is None:
        report = tau_rob_bisection(
            lambdas, m, d, controller, tau_max=options.tau_max, tol=options.tol
        )

    row = {
        "controller": controller.name,
        "lambda_n": lambda_n,
        "tau_rob": report.tau_rob,
        "method": report.method,
        "crossover_frequency": (
            math.nan if report.crossover_frequency is None else report.crossover_frequency
        ),
        "lower_bound": math.nan if report.lower_bound is None else report.lower_bound,
    }

    extra = {}
    checks = []
    trajectories = {}
    if options.check_factors and math.isinf(report.tau_rob):
        _LOGGER.warning("Delay margin is infinite; skipping delayed simulations.")
    elif options.check_factors:
        for factor in options.check_factors:
            tau = factor * report.tau_rob
            try:
                stable = is_stable_with_delay(lambdas, m, d, controller, tau)
            except MarginalStabilityError:
                stable = False
            result = simulate_delayed(
                lambdas, m, d, controller, tau, dt=options.dt,
                horizon=options.horizon, progress=progress,
            )
            checks.append({
                "factor": factor,
                "tau": tau,
                "nyquist_stable": stable,
                "sim_diverged": result.diverged,
                "agree": stable != result.diverged,
                "peak": result.peak,
            })
            trajectories[f"{factor:g} tau_rob"] = result.trajectory
        extra["delay_checks.csv"] = checks
        if plot:
            extra["delay.svg"] = trajectories
    return [row], extra


def _simulate(config, out, plot, progress):
    controller = config.controller
    if isinstance(controller, IDroop) and controller.delta == 0.0:
        _LOGGER.info("Simulating iDroop with delta = %.1g.", DELTA_SMALL)
        controller = IDroop(controller.nu, DELTA_SMALL, controller.r_r_inv)
    model = assemble_state_space(config.topology, config.params, controller)
    result = simulate_sde(model, config.sim, progress=progress)

    try:
        reference = closed_form_h2(config, controller)
    except HomogeneityError:
        reference = h2_network(
            config.topology, config.params, controller, LYAPUNOV_FULL
        ).squared_norm

    estimate = math.nan if result.diverged else result.to_report().squared_norm
    std_error = math.nan if result.diverged else result.std_error
    return [{
        "controller": controller.name,
        "empirical_h2_squared": estimate,
        "std_error": std_error,
        "diverged": result.diverged,
        "reference": reference,
        "rel_error": _relative_difference(reference, estimate),
        "within_3_se": bool(abs(estimate - reference) <= 3.0 * std_error),
        "n_trajectories": config.sim.n_trajectories,
        "dt": config.sim.dt,
        "horizon": config.sim.horizon,
        "burn_in": config.sim.burn_in,
        "seed": config.sim.seed,
    }], {}


def _sweep(config, out, plot, progress):
    if config.sweep is None:
        raise ValidationError([("sweep", "the sweep command requires a [sweep] section")])
    controller = config.controller
    if isinstance(controller, IDroop):
        nu, delta = controller.nu, controller.delta
    elif isinstance(controller, Droop):
        nu, delta = controller.r_r_inv, math.inf
    else:
        raise ValidationError([("controller.type", "sweeps require droop or idroop")])
    m, d, k_p, k_omega = config.params.scalars()
    dataset = sweep(
        config.sweep.axis, config.sweep.values, _lambdas(config), m, d,
        controller.r_r_inv, k_p, k_omega, nu, delta,
        n_workers=config.sweep.n_workers,
    )
    extra = {}
    if plot:
        extra["sweep.svg"] = dataset
    return dataset, extra


_HANDLERS = {
    "analyze": _analyze,
    "optimize": _optimize,
    "delay": _delay,
    "simulate": _simulate,
    "sweep": _sweep,
}


###############################################################################
# Reports
###############################################################################


def error_record(command, error):
    """
    Machine-readable description of an error.
    """
    record = {"type": type(error).__name__, "message": str(error)}
    if isinstance(error, ValidationError):
        record["violations"] = [list(v) for v in error.violations]
    if isinstance(error, ParseError):
        record["line"] = error.line
        record["column"] = error.column
    if isinstance(error, StabilityError) and error.eigenvalue is not None:
        record["eigenvalue"] = [error.eigenvalue.real, error.eigenvalue.imag]
    if isinstance(error, MarginalStabilityError):
        record["frequency"] = error.frequency
    exit_code = EXIT_CONFIG if isinstance(error, ConfigError) else EXIT_COMPUTATION
    return {
        "command": command,
        "status": "error",
        "exit_code": exit_code,
        "error": record,
    }


def _write_extra(out, name, content):
    path = out / name
    if name == "sweep.svg":
        plot_sweep(content, path)
    elif name.endswith(".svg"):
        plot_peak_envelopes(content, path)
    else:
        write_table(content, path)
    return name


def run_command(command, config, out=".", plot=False, seed=None, progress=False,
                console=None):
    """
    Run a command and write its reports.

    Args:
        command: One of ``COMMANDS``.
        config: The ``RunConfig``.
        out: The output directory.
        plot: Whether to write SVG plots.
        seed: Optional seed overriding the configured simulation seed.
        progress: Whether to show progress bars.
        console: ``rich.console.Console`` for the summary table.

    Returns:
        The exit code.
    """
    if command not in COMMANDS:
        raise ValueError(f"Unknown command '{command}'.")
    out = Path(out)
    if seed is not None:
        config = replace(config, sim=replace(config.sim, seed=seed))
    if console is None:
        console = Console()

    try:
        table, extra = _HANDLERS[command](config, out, plot, progress)
    except GridtuneException as error:
        record = error_record(command, error)
        _LOGGER.error("%s failed: %s", command, error)
        write_json(record, out / "run.json")
        return record["exit_code"]

    frame = write_table(table, out / f"{command}.csv")
    files = [f"{command}.csv"]
    for name, content in extra.items():
        files.append(_write_extra(out, name, content))

    if command == "sweep":
        summary = {"axis": config.sweep.axis, "n_points": len(frame)}
    else:
        summary = frame.iloc[0].to_dict()
    write_json(
        {"command": command, "status": "ok", "exit_code": EXIT_OK,
         "summary": summary, "files": files},
        out / "run.json",
    )
    print_summary(f"gridtune {command}", summary, console=console)
    return EXIT_OK


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def make_parser():
    parser = argparse.ArgumentParser(
        prog="gridtune",
        description="H2 performance, tuning and delay robustness of inverter "
                    "controllers in power networks.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="TOML run configuration.")
    parser.add_argument("--out", default=".", help="Output directory.")
    parser.add_argument("--plot", action="store_true", help="Write SVG plots.")
    parser.add_argument("--seed", type=_seed, default=None,
                        help="Seed for stochastic simulations.")
    return parser


def main(argv=None):
    """
    Entry point of the ``gridtune`` command.
    """
    args = make_parser().parse_args(argv)
    out = Path(args.out)
    try:
        config = load_config(args.config)
    except ConfigError as error:
        Console(stderr=True).print(str(error), style="red", markup=False)
        write_json(error_record(args.command, error), out / "run.json")
        return EXIT_CONFIG
    except OSError as error:
        Console(stderr=True).print(
            f"Cannot read configuration: {error}", style="red", markup=False
        )
        return EXIT_CONFIG
    return run_command(
        args.command, config, out, plot=args.plot, seed=args.seed, progress=True
    )
