"""
===============
gridtune.config
===============

Parsing and validation of run configurations.

Configurations are TOML documents with the sections ``[network]``,
``[params]``, ``[controller]``, ``[analysis]``, ``[sweep]``, ``[sim]`` and
``[delay]``. All violations of the schema are collected and reported
together. The schema is documented in ``docs/config.md``.
"""
from dataclasses import dataclass, field
import logging
import math
import re
import sys

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from gridtune.common import GridtuneException, ParseError, ValidationError
from gridtune.netmodel import (
    Droop,
    IDroop,
    NetworkTopology,
    SystemParams,
    VirtualInertia,
    complete_network,
    path_network,
    ring_network,
    star_network,
)
from gridtune.sim import SimConfig
from gridtune.tuning import AXES

_LOGGER = logging.getLogger(__name__)

GENERATORS = {
    "path": path_network,
    "ring": ring_network,
    "complete": complete_network,
    "star": star_network,
}

SCHEMA = {
    "network": ("n_buses", "lines", "kind", "susceptance"),
    "params": ("m", "d", "k_p", "k_omega"),
    "controller": ("type", "r_r_inv", "nu", "delta"),
    "analysis": ("rel_tol", "delta_rec", "nu_max", "solver", "zero_tol"),
    "sweep": ("axis", "values", "start", "stop", "num", "scale", "n_workers"),
    "sim": ("dt", "horizon", "burn_in", "n_trajectories", "seed"),
    "delay": ("method", "tau_max", "tol", "check_factors", "dt", "horizon"),
}
REQUIRED_SECTIONS = ("network", "params", "controller")
SOLVERS = ("schur", "kronecker")
DELAY_METHODS = ("auto", "closed_form", "bisection")


@dataclass
class AnalysisOptions:
    """Tolerances and options of the analysis commands."""
    rel_tol: float = 1e-8
    delta_rec: float = 1e-3
    nu_max: float = 100.0
    solver: str = "schur"
    zero_tol: float = 1e-9


@dataclass
class SweepSpec:
    """A one-dimensional parameter sweep."""
    axis: str
    values: np.ndarray
    n_workers: int = 1


@dataclass
class DelayOptions:
    """Options of the delay-robustness command."""
    method: str = "auto"
    tau_max: float = 1e3
    tol: float = 1e-6
    check_factors: tuple = ()
    dt: float = 1e-3
    horizon: float = 200.0


@dataclass
class RunConfig:
    """
    A validated run configuration.

    Attributes:
        topology: The ``NetworkTopology``.
        params: The ``SystemParams``.
        controller: The controller object.
        analysis: ``AnalysisOptions``
        sweep: ``SweepSpec`` or ``None``.
        sim: ``SimConfig``
        delay: ``DelayOptions``
    """
    topology: NetworkTopology
    params: SystemParams
    controller: object
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    sweep: SweepSpec = None
    sim: SimConfig = field(default_factory=SimConfig)
    delay: DelayOptions = field(default_factory=DelayOptions)


###############################################################################
# Validation helpers
###############################################################################


class _Collector:
    """
    Collects schema violations while reading the sections of a document.
    """
    def __init__(self):
        self.violations = []

    def error(self, name, message):
        self.violations.append((name, message))

    def number(
            self,
            section,
            values,
            key,
            default=None,
            required=False,
            positive=False,
            non_negative=False,
            allow_inf=False,
            integer=False,
    ):
        name = f"{section}.{key}"
        if key not in values:
            if required:
                self.error(name, "missing required field")
            return default
        value = values[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.error(name, f"expected a number, got {value!r}")
            return default
        if integer and not isinstance(value, int):
            self.error(name, f"expected an integer, got {value!r}")
            return default
        if math.isnan(value) or (math.isinf(value) and not allow_inf):
            self.error(name, "must be finite")
            return default
        if positive and not value > 0:
            self.error(name, f"must be positive, got {value!r}")
            return default
        if non_negative and not value >= 0:
            self.error(name, f"must be non-negative, got {value!r}")
            return default
        return value

    def vector(self, section, values, key, default=None, required=False, positive=False):
        """A number or a list of numbers, one per bus."""
        name = f"{section}.{key}"
        if isinstance(values.get(key), list):
            items = values[key]
            if len(items) == 0:
                self.error(name, "must not be empty")
                return default
            result = []
            for index, item in enumerate(items):
                value = self.number(
                    section, {f"{key}[{index}]": item}, f"{key}[{index}]",
                    required=True, positive=positive, non_negative=not positive,
                )
                if value is None:
                    return default
                result.append(float(value))
            return np.array(result)
        return self.number(
            section, values, key, default, required,
            positive=positive, non_negative=not positive,
        )

    def choice(self, section, values, key, options, default=None, required=False):
        name = f"{section}.{key}"
        if key not in values:
            if required:
                self.error(name, "missing required field")
            return default
        value = values[key]
        if value not in options:
            self.error(name, f"expected one of {', '.join(options)}, got {value!r}")
            return default
        return value


def _parse_toml(text):
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as error:
        line = getattr(error, "lineno", None)
        column = getattr(error, "colno", None)
        message = getattr(error, "msg", None) or str(error)
        match = re.search(r"line (\d+), column (\d+)", str(error))
        if line is None and match:
            line, column = int(match.group(1)), int(match.group(2))
        message = re.sub(r"\s*\(at line \d+, column \d+\)", "", message)
        raise ParseError(message, line=line, column=column) from None


def _check_keys(document, collector):
    for section, values in document.items():
        if section not in SCHEMA:
            collector.error(section, "unknown section")
            continue
        if not isinstance(values, dict):
            collector.error(section, "expected a section")
            continue
        for key in values:
            if key not in SCHEMA[section]:
                collector.error(f"{section}.{key}", "unknown key")
    for section in REQUIRED_SECTIONS:
        if section not in document:
            collector.error(section, "missing required section")


###############################################################################
# Sections
###############################################################################


def _network(values, collector):
    n_buses = collector.number(
        "network", values, "n_buses", required=True, positive=True, integer=True
    )
    kind = collector.choice("network", values, "kind", tuple(GENERATORS))
    susceptance = collector.number(
        "network", values, "susceptance", default=1.0, positive=True
    )
    if kind is not None and "lines" in values:
        collector.error("network.lines", "cannot be combined with network.kind")
        return None

    lines = []
    raw = values.get("lines", [])
    if not isinstance(raw, list):
        collector.error("network.lines", "expected a list of [i, j, b] triples")
        return None
    for index, line in enumerate(raw):
        valid = (
            isinstance(line, list)
            and len(line) == 3
            and all(isinstance(v, int) and not isinstance(v, bool) for v in line[:2])
            and isinstance(line[2], (int, float))
            and not isinstance(line[2], bool)
        )
        if not valid:
            collector.error(f"network.lines[{index}]", "expected [i, j, b]")
            return None
        lines.append((line[0], line[1], float(line[2])))

    if n_buses is None or susceptance is None:
        return None
    try:
        if kind is not None:
            return GENERATORS[kind](n_buses, susceptance)
        return NetworkTopology(n_buses, lines)
    except GridtuneException as error:
        collector.error("network", str(error))
    return None


def _params(values, collector):
    m = collector.vector("params", values, "m", required=True, positive=True)
    d = collector.vector("params", values, "d", required=True, positive=True)
    k_p = collector.vector("params", values, "k_p", default=1.0)
    k_omega = collector.vector("params", values, "k_omega", default=1.0)
    if any(v is None for v in (m, d, k_p, k_omega)):
        return None
    try:
        return SystemParams(m, d, k_p, k_omega)
    except GridtuneException as error:
        collector.error("params", str(error))
    return None


def _controller(values, collector):
    kind = collector.choice(
        "controller", values, "type", ("droop", "virtual_inertia", "idroop"),
        required=True,
    )
    r_r_inv = collector.number(
        "controller", values, "r_r_inv", required=True, positive=True
    )
    needs_nu = kind in ("virtual_inertia", "idroop")
    nu = collector.number(
        "controller", values, "nu", required=needs_nu, non_negative=True
    )
    delta = collector.number(
        "controller", values, "delta", required=kind == "idroop",
        non_negative=True, allow_inf=True,
    )
    if kind == "droop":
        for key in ("nu", "delta"):
            if key in values:
                collector.error(f"controller.{key}", "not a parameter of droop control")
    if kind == "virtual_inertia" and "delta" in values:
        collector.error("controller.delta", "not a parameter of virtual inertia")

    if kind is None or r_r_inv is None:
        return None
    if kind == "droop":
        return Droop(r_r_inv)
    if nu is None:
        return None
    if kind == "virtual_inertia":
        return VirtualInertia(nu, r_r_inv)
    if delta is None:
        return None
    return IDroop(nu, delta, r_r_inv)


def _analysis(values, collector):
    defaults = AnalysisOptions()
    return AnalysisOptions(
        rel_tol=collector.number(
            "analysis", values, "rel_tol", defaults.rel_tol, positive=True
        ),
        delta_rec=collector.number(
            "analysis", values, "delta_rec", defaults.delta_rec, positive=True
        ),
        nu_max=collector.number(
            "analysis", values, "nu_max", defaults.nu_max, positive=True
        ),
        solver=collector.choice("analysis", values, "solver", SOLVERS, defaults.solver),
        zero_tol=collector.number(
            "analysis", values, "zero_tol", defaults.zero_tol, positive=True
        ),
    )


def _sweep(values, collector):
    axis = collector.choice("sweep", values, "axis", AXES, required=True)
    n_workers = collector.number(
        "sweep", values, "n_workers", 1, positive=True, integer=True
    )
    if "values" in values:
        for key in ("start", "stop", "num", "scale"):
            if key in values:
                collector.error(f"sweep.{key}", "cannot be combined with sweep.values")
        raw = values["values"]
        if not isinstance(raw, list):
            collector.error("sweep.values", "expected a list of numbers")
            return None
        grid = [
            collector.number("sweep", {f"values[{i}]": v}, f"values[{i}]", required=True)
            for i, v in enumerate(raw)
        ]
        if any(v is None for v in grid):
            return None
        grid = np.array(grid, dtype=np.float64)
    else:
        start = collector.number("sweep", values, "start", required=True)
        stop = collector.number("sweep", values, "stop", required=True)
        num = collector.number("sweep", values, "num", required=True, integer=True,
                               non_negative=True)
        scale = collector.choice("sweep", values, "scale", ("linear", "log"), "linear")
        if None in (start, stop, num, scale):
            return None
        if scale == "log":
            if not (start > 0 and stop > 0):
                collector.error("sweep.start", "log sweeps require positive bounds")
                return None
            grid = np.geomspace(start, stop, num)
        else:
            grid = np.linspace(start, stop, num)

    if grid.size == 0:
        collector.error("sweep.values", "the sweep grid is empty")
        return None
    steps = np.diff(grid)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        collector.error("sweep.values", "the sweep grid must be strictly monotone")
        return None
    if axis is None or n_workers is None:
        return None
    return SweepSpec(axis, grid, n_workers)


def _sim(values, collector):
    defaults = SimConfig()
    kwargs = dict(
        dt=collector.number("sim", values, "dt", defaults.dt, positive=True),
        horizon=collector.number(
            "sim", values, "horizon", defaults.horizon, positive=True
        ),
        burn_in=collector.number(
            "sim", values, "burn_in", defaults.burn_in, non_negative=True
        ),
        n_trajectories=collector.number(
            "sim", values, "n_trajectories", defaults.n_trajectories,
            positive=True, integer=True,
        ),
        seed=collector.number(
            "sim", values, "seed", defaults.seed, non_negative=True, integer=True
        ),
    )
    if any(v is None for v in kwargs.values()):
        return None
    try:
        return SimConfig(**kwargs)
    except GridtuneException as error:
        collector.error("sim", str(error))
    return None


def _delay(values, collector):
    defaults = DelayOptions()
    factors = values.get("check_factors", [])
    if not isinstance(factors, list):
        collector.error("delay.check_factors", "expected a list of numbers")
        factors = []
    checked = []
    for index, factor in enumerate(factors):
        value = collector.number(
            "delay", {f"check_factors[{index}]": factor}, f"check_factors[{index}]",
            required=True, non_negative=True,
        )
        if value is not None:
            checked.append(float(value))
    return DelayOptions(
        method=collector.choice("delay", values, "method", DELAY_METHODS, defaults.method),
        tau_max=collector.number(
            "delay", values, "tau_max", defaults.tau_max, positive=True
        ),
        tol=collector.number("delay", values, "tol", defaults.tol, positive=True),
        check_factors=tuple(checked),
        dt=collector.number("delay", values, "dt", defaults.dt, positive=True),
        horizon=collector.number(
            "delay", values, "horizon", defaults.horizon, positive=True
        ),
    )


def parse_config(text):
    """
    Parse and validate a run configuration.

    Args:
        text: The TOML document.

    Returns:
        ``RunConfig``

    Raises:
        ParseError: If the document is not valid TOML.
        ValidationError: Listing all schema violations.
    """
    document = _parse_toml(text)
    collector = _Collector()
    _check_keys(document, collector)

    def section(name):
        values = document.get(name, {})
        return values if isinstance(values, dict) else {}

    topology = _network(section("network"), collector) if "network" in document else None
    params = _params(section("params"), collector) if "params" in document else None
    controller = (
        _controller(section("controller"), collector) if "controller" in document else None
    )
    analysis = _analysis(section("analysis"), collector)
    sweep = _sweep(section("sweep"), collector) if "sweep" in document else None
    sim = _sim(section("sim"), collector)
    delay = _delay(section("delay"), collector)

    if topology is not None and params is not None:
        if params.n_buses not in (None, topology.n_buses):
            collector.error(
                "params",
                f"vector parameters have {params.n_buses} entries for "
                f"{topology.n_buses} buses",
            )

    if collector.violations:
        raise ValidationError(collector.violations)
    _LOGGER.info("Parsed configuration with %s buses.", topology.n_buses)
    return RunConfig(topology, params, controller, analysis, sweep, sim, delay)


def load_config(path):
    """
    Read and parse a configuration file.

    Raises:
        ParseError: If the file is not valid UTF-8 or not valid TOML.
        ValidationError: If the document violates the schema.
    """
    with open(path, "rb") as source:
        raw = source.read()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as error:
        line = raw.count(b"\n", 0, error.start) + 1
        column = error.start - raw.rfind(b"\n", 0, error.start)
        raise ParseError(
            f"Configuration is not valid UTF-8: {error.reason}.",
            line=line,
            column=column,
        ) from None
    return parse_config(text)
