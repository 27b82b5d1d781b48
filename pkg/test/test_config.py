import math

import numpy as np
import pytest

from gridtune.common import ParseError, ValidationError
from gridtune.config import load_config, parse_config
from gridtune.netmodel import Droop, IDroop

MINIMAL = """
[network]
n_buses = 1

[params]
m = 1.0
d = 1.0

[controller]
type = "droop"
r_r_inv = 1.0
"""

TWO_BUS = """
[network]
n_buses = 2
lines = [[0, 1, 1.0]]

[params]
m = 1.0
d = 1.0
k_p = 1.0
k_omega = 1.0

[controller]
type = "idroop"
r_r_inv = 1.0
nu = 2.0
delta = 1.0

[sweep]
axis = "delta"
start = 0.001
stop = 1000.0
num = 7
scale = "log"

[sim]
seed = 12
"""


def test_minimal():
    config = parse_config(MINIMAL)
    assert config.topology.n_buses == 1
    assert config.controller == Droop(1.0)
    assert config.params.k_p == 1.0
    assert config.sweep is None
    assert config.analysis.solver == "schur"
    assert config.delay.method == "auto"


def test_two_bus():
    config = parse_config(TWO_BUS)
    assert config.controller == IDroop(2.0, 1.0, 1.0)
    assert config.sweep.axis == "delta"
    assert np.allclose(config.sweep.values, np.geomspace(1e-3, 1e3, 7))
    assert config.sim.seed == 12


def test_load_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TWO_BUS)
    assert load_config(path).topology.n_buses == 2


def test_invalid_utf8(tmp_path):
    path = tmp_path / "run.toml"
    path.write_bytes(b"[network]\nn_buses = 1\n# \xff\xfe\n")
    with pytest.raises(ParseError) as error:
        load_config(path)
    assert error.value.line == 3
    assert error.value.column == 3


def test_generated_network():
    text = MINIMAL.replace("n_buses = 1", 'n_buses = 5\nkind = "ring"')
    assert parse_config(text).topology.n_buses == 5


def test_infinite_delta():
    text = TWO_BUS.replace("delta = 1.0", "delta = inf")
    assert math.isinf(parse_config(text).controller.delta)


@pytest.mark.parametrize("replacement, field", [
    (("m = 1.0", "m = -1.0"), "params.m"),
    (("delta = 1.0\n", ""), "controller.delta"),
    (('type = "idroop"', 'type = "pid"'), "controller.type"),
    (("[sim]\nseed = 12", "[sim]\nseed = -3"), "sim.seed"),
    (("num = 7", "num = 2.5"), "sweep.num"),
    (("[sim]", "[sim]\nsteps = 10"), "sim.steps"),
    (("[sim]", "[extra]\nx = 1\n[sim]"), "extra"),
])
def test_invalid_fields(replacement, field):
    with pytest.raises(ValidationError) as error:
        parse_config(TWO_BUS.replace(*replacement))
    assert field in error.value.fields


def test_all_violations_reported():
    text = TWO_BUS.replace("m = 1.0", "m = 0.0").replace("nu = 2.0", "nu = -2.0")
    with pytest.raises(ValidationError) as error:
        parse_config(text)
    assert {"params.m", "controller.nu"} <= set(error.value.fields)
    assert "params.m" in str(error.value)


def test_missing_section():
    text = MINIMAL.replace('[controller]\ntype = "droop"\nr_r_inv = 1.0\n', "")
    with pytest.raises(ValidationError) as error:
        parse_config(text)
    assert "controller" in error.value.fields


def test_vector_length_mismatch():
    text = MINIMAL.replace("m = 1.0", "m = [1.0, 2.0]")
    with pytest.raises(ValidationError) as error:
        parse_config(text)
    assert "params" in error.value.fields


def test_droop_rejects_nu():
    with pytest.raises(ValidationError) as error:
        parse_config(MINIMAL + "nu = 1.0\n")
    assert "controller.nu" in error.value.fields


def test_non_monotone_sweep():
    text = TWO_BUS.replace(
        'start = 0.001\nstop = 1000.0\nnum = 7\nscale = "log"', "values = [1.0, 3.0, 2.0]"
    )
    with pytest.raises(ValidationError) as error:
        parse_config(text)
    assert "sweep.values" in error.value.fields


def test_parse_error():
    with pytest.raises(ParseError) as error:
        parse_config("[network]\nn_buses = = 2\n")
    assert error.value.line == 2
    assert error.value.column is not None
