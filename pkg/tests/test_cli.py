import json
import subprocess
import sys

import pytest

from repfwd import cli
from repfwd.config import REFERENCE, from_dict, load_config
from repfwd.game import ConfigError, NumericalError

SMALL = """
name = "small"
seed = 3

[params]
b = 4.0
c = 2.0
p_e = 0.01
mu = {mu}
N = 100

[links]
k11 = 0.05
k12 = 0.25
k13 = 0.3
k22 = 0.25
k23 = {k23}
k33 = 0.95

[simulation]
uss_rounds = 20
ss_steps = 5000
replicates = 2

[phase]
resolution = 10
"""


def _write(tmp_path, extra="", mu=0.1, k23=0.95):
    path = tmp_path / "cfg.toml"
    path.write_text(SMALL.format(mu=mu, k23=k23) + extra)
    return str(path)


def _run(tmp_path, *argv, **kw):
    out = tmp_path / "out"
    return cli.main([*argv, "--config", _write(tmp_path, **kw), "--out", str(out)]), out


def _body(path):
    return [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]


@pytest.mark.parametrize(
    "kw",
    [dict(mu=0.6), dict(k23=0.0), dict(extra="\n[extra]\nfoo = 1\n"), dict(extra="\n[sweep]\nbogus = [1]\n")],
)
def test_invalid_config_exit_code(tmp_path, kw, capsys):
    code, _ = _run(tmp_path, "thresholds", **kw)
    assert code == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["thresholds", "--config", str(tmp_path / "nope.toml")]) == cli.EXIT_CONFIG


def test_numerical_error_exit_code(tmp_path, monkeypatch):
    def boom(cfg, args):
        raise NumericalError("nan")

    monkeypatch.setitem(cli.COMMANDS, "thresholds", (boom, ""))
    code, _ = _run(tmp_path, "thresholds")
    assert code == cli.EXIT_NUMERICAL


def test_thresholds_json(tmp_path):
    code, out = _run(tmp_path, "thresholds")
    assert code == 0
    data = json.loads((out / "thresholds.json").read_text())
    assert data["schema_version"] == cli.SCHEMA_VERSION
    assert data["seed"] == 3
    text = json.dumps(data)
    assert "NaN" not in text


def test_phase_outputs(tmp_path):
    code, out = _run(tmp_path, "phase", "--mode", "ss")
    assert code == 0
    lines = (out / "phase_ss.csv").read_text().splitlines()
    assert lines[0].startswith("# repfwd phase schema v1")
    assert any(ln.startswith("# config: ") for ln in lines)
    body = _body(out / "phase_ss.csv")
    assert body[0] == ",".join(cli.PHASE_COLUMNS)
    assert len(body) - 1 == 11 * 12 // 2
    assert (out / "trajectories_ss.csv").exists()
    assert json.loads((out / "basins_ss.json").read_text())["resolution"] == 10


def test_simulate_is_byte_identical(tmp_path):
    code, out = _run(tmp_path, "simulate")
    assert code == 0
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    code, _ = _run(tmp_path, "simulate")
    second = {p.name: p.read_bytes() for p in out.iterdir()}
    assert first == second
    assert set(first) == {"sim_uss_pe0p01_mu0p1.csv", "sim_ss_pe0p01_mu0p1.csv", "sim_summary.csv"}
    assert _body(out / "sim_summary.csv")[0] == ",".join(cli.SUMMARY_COLUMNS)
    assert _body(out / "sim_ss_pe0p01_mu0p1.csv")[0] == ",".join(cli.SIM_COLUMNS)


def test_seed_override_changes_output(tmp_path):
    _run(tmp_path, "simulate", "--mode", "uss")
    a = (tmp_path / "out" / "sim_uss_pe0p01_mu0p1.csv").read_text()
    code = cli.main(["simulate", "--mode", "uss", "--seed", "4", "--config", _write(tmp_path),
                     "--out", str(tmp_path / "out")])
    assert code == 0
    b = (tmp_path / "out" / "sim_uss_pe0p01_mu0p1.csv").read_text()
    assert a != b and "# seed: 4" in b


def test_sweep_rows(tmp_path):
    extra = "\n[sweep]\np_e = [0.01, 0.05]\nmu = [0.05]\n"
    code, out = _run(tmp_path, "sweep", extra=extra)
    assert code == 0
    body = _body(out / "sweep.csv")
    assert body[0] == ",".join(cli.SWEEP_COLUMNS)
    assert len(body) - 1 == 2 * 3


def test_validate_quick(tmp_path, capsys):
    code, out = _run(tmp_path, "validate", "--quick")
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4 and all(ln.split()[0] in ("PASS", "FAIL") for ln in lines)
    data = json.loads((out / "validate.json").read_text())
    assert code == (0 if data["all_passed"] else cli.EXIT_CHECKS_FAILED)


def test_config_round_trip(tmp_path):
    cfg = load_config(_write(tmp_path))
    assert from_dict(cfg.resolved()) == cfg
    assert cfg.sweep_points() == [(0.01, 0.1)]


def test_config_rejects_bad_x0():
    data = {**REFERENCE, "simulation": {"x0": [0.5, 0.6, 0.1]}}
    with pytest.raises(ConfigError):
        from_dict(data)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "repfwd", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "repfwd" in res.stdout
