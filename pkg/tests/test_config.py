import pytest
from hypothesis import given, strategies as st

from floquet_rd.config import (
    grid_from_config, model_from_config, parse_config, perturbation_from_config,
    sim_from_config,
)
from floquet_rd.errors import ConfigError

FULL = """
[model]
type = "example"
epsilon = 0.5
theta = 0.3
D = [[1.0, 0.0], [0.0, 0.5]]

[orbit]
guess_point = [0.45, 0.0]
samples = 128

[floquet]
tol_re = 1e-6

[grid]
n = 1
L = 50.0
M = 512

[sim]
dt = 0.01
t_end = 20.0
snapshot_times = [10.0]

[perturbation]
shape = "gaussian-bump"
amplitude = 0.01
width = 2.0
direction = [0.0, 1.0]
"""


def test_full_config_builds_objects():
    cfg = parse_config(FULL)
    model, D = model_from_config(cfg)
    assert model.example.theta == 0.3
    g = grid_from_config(cfg)
    assert (g.n, g.L, g.M) == (1, 50.0, 512)
    s = sim_from_config(cfg)
    assert s.snapshot_times == (10.0,)
    p = perturbation_from_config(cfg, g, 2)
    assert p.direction == (0.0, 1.0) and p.center == (0.0,)


def test_unknown_key_has_line_number():
    with pytest.raises(ConfigError) as exc:
        parse_config(FULL.replace("samples = 128", "samples = 128\nsmaples = 3"))
    assert exc.value.line == 11
    assert "smaples" in str(exc.value) and str(exc.value).startswith("line 11:")


def test_unknown_block():
    with pytest.raises(ConfigError) as exc:
        parse_config("[modle]\ntype = 'example'\n")
    assert exc.value.line == 1 and "modle" in str(exc.value)


def test_syntax_error_line():
    with pytest.raises(ConfigError) as exc:
        parse_config("[model]\ntype = 'example'\nepsilon = = 2\n")
    assert exc.value.line == 3


def test_type_errors():
    with pytest.raises(ConfigError):
        parse_config("[grid]\nM = 100\n")
    with pytest.raises(ConfigError):
        parse_config("[sim]\ndt = -1.0\n")
    with pytest.raises(ConfigError):
        parse_config("[model]\nepsilon = 0.5\n")


def test_missing_block_named():
    cfg = parse_config("[model]\ntype = 'example'\n")
    with pytest.raises(ConfigError, match=r"\[grid\]"):
        cfg.require("simulate")


def test_sweep_axis_validation():
    ok = "[model]\ntype='example'\n[[sweep.axis]]\nparam='theta'\nstart=0.0\nstop=1.0\nnum=3\n"
    assert parse_config(ok).block("sweep")["axis"][0]["num"] == 3
    with pytest.raises(ConfigError, match="cannot sweep"):
        parse_config(ok.replace("'theta'", "'gamma'"))


def test_round_trip_full():
    cfg = parse_config(FULL)
    assert parse_config(cfg.to_toml()) == cfg


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.fixed_dictionaries({}, optional={
    "epsilon": st.floats(0.01, 10), "theta": finite,
    "D": st.lists(st.lists(finite, min_size=2, max_size=2), min_size=2, max_size=2)}),
    st.fixed_dictionaries({}, optional={"dt": st.floats(1e-6, 1.0), "t_end": st.floats(1.0, 1e4),
                                        "scheme": st.sampled_from(["strang", "lie"]),
                                        "dealias": st.booleans(),
                                        "snapshot_times": st.lists(st.floats(0, 1e3), max_size=4)}))
def test_round_trip_property(model, sim):
    import tomli_w
    data = {"model": {"type": "example", **model}}
    if sim:
        data["sim"] = sim
    cfg = parse_config(tomli_w.dumps(data))
    again = parse_config(cfg.to_toml())
    assert again == cfg and again.data == data
