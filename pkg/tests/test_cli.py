import csv
import os

import pytest

from floquet_rd import cli, simulate
from floquet_rd.verify import CHECKS, run_suite, select_checks

HERE = os.path.dirname(__file__)
CONFIGS = os.path.join(HERE, "..", "configs")


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


EXAMPLE = """[model]
type = "example"
epsilon = 0.5
theta = {theta}
D = {D}
"""


@pytest.mark.parametrize("theta,D,code", [
    (0.0, "[[1.0, 0.0], [0.0, 1.0]]", 0),
    (0.9, "[[2.0, 3.0], [0.5, 1.0]]", 10),
])
def test_analyze_exit_codes(tmp_path, theta, D, code):
    cfgp = _write(tmp_path, EXAMPLE.format(theta=theta, D=D))
    out = tmp_path / "out"
    assert cli.main(["analyze", "--config", cfgp, "--out", str(out)]) == code
    assert (out / "spectrum.csv").exists()
    assert (out / "report.txt").read_text().startswith("verdict = ")


def test_turing_exit_code(tmp_path):
    out = tmp_path / "o"
    assert cli.main(["analyze", "--config", os.path.join(CONFIGS, "turing.toml"),
                     "--out", str(out)]) == 11


def test_missing_model_block(tmp_path, capsys):
    cfgp = _write(tmp_path, "[orbit]\nsamples = 64\n")
    assert cli.main(["analyze", "--config", cfgp, "--out", str(tmp_path)]) == 1
    assert "[model]" in capsys.readouterr().err


def test_unknown_key_reports_line(tmp_path, capsys):
    cfgp = _write(tmp_path, "[model]\ntype = 'example'\n\nbogus = 1\n")
    assert cli.main(["analyze", "--config", cfgp, "--out", str(tmp_path)]) == 1
    assert "line 4" in capsys.readouterr().err


SWEEP = EXAMPLE.format(theta=0.0, D="[[2.0, 3.0], [0.5, 1.0]]") + """
[[sweep.axis]]
param = "theta"
start = 0.8
stop = 0.95
num = {num}
"""


def test_theta_sweep_flips(tmp_path):
    cfgp = _write(tmp_path, SWEEP.format(num=4))
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path), "--threads", "2"]) == 0
    rows = list(csv.DictReader(open(tmp_path / "atlas.csv")))
    assert [r["verdict"] for r in rows] == ["Stable", "Stable", "SidebandUnstable",
                                            "SidebandUnstable"]
    assert float(rows[0]["theta"]) == 0.8


def test_two_axis_sweep_is_row_major(tmp_path):
    text = SWEEP.format(num=2) + """
[[sweep.axis]]
param = "D12"
start = 2.0
stop = 3.0
num = 3
"""
    cfgp = _write(tmp_path, text)
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "atlas.csv")))
    assert rows[0] == ["theta", "D12", "verdict", "d0", "max_re", "k_star"]
    coords = [(float(r[0]), float(r[1])) for r in rows[1:]]
    assert coords == [(0.8, 2.0), (0.8, 2.5), (0.8, 3.0), (0.95, 2.0), (0.95, 2.5), (0.95, 3.0)]


def test_empty_axis_gives_header_only(tmp_path):
    cfgp = _write(tmp_path, SWEEP.format(num=0))
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path)]) == 0
    assert (tmp_path / "atlas.csv").read_text().splitlines() == [
        "theta,verdict,d0,max_re,k_star"]


def test_bad_axis_parameter(tmp_path):
    cfgp = _write(tmp_path, SWEEP.format(num=2).replace('"theta"', '"kappa"'))
    assert cli.main(["sweep", "--config", cfgp, "--out", str(tmp_path)]) == 1


SIM = EXAMPLE.format(theta=0.0, D="[[1.0, 0.0], [0.0, 1.0]]") + """
[grid]
n = 1
L = 50.0
M = 512

[sim]
dt = 0.02
t_end = 30.0
snapshot_times = [12.5, 25.0]
fit_window = [10.0, 30.0]

[perturbation]
amplitude = {amp}
width = 2.0
"""


def test_simulate_outputs(tmp_path):
    cfgp = _write(tmp_path, SIM.format(amp=1e-2))
    assert cli.main(["simulate", "--config", cfgp, "--out", str(tmp_path)]) == 0
    for name in ("norms.csv", "asymptotics.csv", "snapshot_t25.rdsnap", "profile_t25.csv"):
        assert (tmp_path / name).exists()
    head = (tmp_path / "norms.csv").read_text().splitlines()[0]
    assert head == "t,l1,l2,linf,phase_mass"


def test_simulate_zero_amplitude_floor(tmp_path):
    cfgp = _write(tmp_path, SIM.format(amp=0.0))
    assert cli.main(["simulate", "--config", cfgp, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "norms.csv")))
    assert max(float(r["linf"]) for r in rows) < 1e-8


def test_simulate_blowup_exit(tmp_path, monkeypatch):
    monkeypatch.setattr(simulate, "BLOWUP_LEVEL", 0.45)
    cfgp = _write(tmp_path, SIM.format(amp=0.3))
    assert cli.main(["simulate", "--config", cfgp, "--out", str(tmp_path)]) == 20
    assert (tmp_path / "norms.csv").exists()


def test_verify_filter_selects_floquet_checks():
    names = [c.name for c in select_checks("floquet")]
    assert names == ["d0_agreement", "floquet_oracle", "commuting_diffusion",
                     "classification", "diffusive_limit"]
    assert [c.number for c in select_checks()] == [c.number for c in CHECKS if not c.slow]


def test_verify_cli(tmp_path, capsys):
    assert cli.main(["verify", "--filter", "commuting_diffusion,floquet_oracle",
                     "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] 2.floquet_oracle" in out and "[PASS] 3.commuting_diffusion" in out
    assert "2/2 checks passed" in out


def test_corrupted_tolerance_isolated(tmp_path):
    cfgp = _write(tmp_path, "[verify]\ntolerances = { commuting = 1e-30 }\n")
    assert cli.main(["verify", "--config", cfgp, "--filter", "2,3", "--out", str(tmp_path)]) == 1
    results = run_suite("2,3", tolerances={"commuting": 1e-30}, echo=None)
    assert [r.passed for r in results] == [True, False]


def test_needs_config(tmp_path):
    assert cli.main(["analyze", "--out", str(tmp_path)]) == 1
