import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qsd.cli as cli
from qsd.cli import emit, main, parse_config
from qsd.errors import NonFiniteError, ParseError, ValidationError


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- parsing ----------------------------------------------------------------

def test_fig1_defaults():
    c = parse_config("fig1", env={})
    assert c.model == "photon_number" and c.n_max == 9 and c.initial_state == "fig1"
    assert c.dt * 81 <= 0.01
    assert c.n_trajectories == 5 and c.seed == 0


def test_negative_dt_named():
    with pytest.raises(ValidationError) as exc:
        parse_config("trajectory", "dt=-0.1", env={})
    assert any(p.startswith("dt") for p in exc.value.problems)


def test_all_problems_reported():
    with pytest.raises(ValidationError) as exc:
        parse_config("trajectory", "dt=-0.1\nt_max=-1\nn_trajectories=0\nvar_tol=0", env={})
    keys = {p.split(":")[0] for p in exc.value.problems}
    assert {"dt", "t_max", "n_trajectories", "var_tol"} <= keys


def test_dt_norm_bound():
    with pytest.raises(ValidationError) as exc:
        parse_config("fig1", "dt=0.002", env={})
    assert "dt" in exc.value.problems[0]


def test_custom_amplitudes_normalized():
    c = parse_config("trajectory", "model=dephasing\ninitial_state=custom\namplitudes=1,1", env={})
    assert c.amplitudes == pytest.approx((1 / math.sqrt(2), 1 / math.sqrt(2)))
    with pytest.raises(ValidationError):
        parse_config("trajectory", "model=dephasing\ninitial_state=custom\namplitudes=0,0", env={})


def test_parse_error_has_line_context():
    with pytest.raises(ParseError) as exc:
        parse_config("fig1", "seed=1\nthis is not a pair\n", env={}, source="run.cfg")
    assert exc.value.context == "run.cfg line 2"
    with pytest.raises(ParseError):
        parse_config("fig1", "bogus_key=1", env={})


def test_seed_precedence():
    env = {"QSD_SEED": "0x10"}
    assert parse_config("fig1", env={}).seed == 0
    assert parse_config("fig1", env=env).seed == 16
    assert parse_config("fig1", "seed=5", env=env).seed == 5
    assert parse_config("fig1", "seed=5", seed="7", env=env).seed == 7


def test_override_beats_file():
    c = parse_config("fig1", "t_max=3", overrides=["t_max=4"], env={})
    assert c.t_max == 4.0


def test_scaling_needs_localization():
    with pytest.raises(ValidationError):
        parse_config("scaling", "model=dephasing", env={})


@settings(max_examples=40, deadline=None)
@given(
    command=st.sampled_from(cli.COMMANDS),
    seed=st.integers(0, 2**64 - 1),
    t_max=st.floats(0.5, 50.0),
    var_tol=st.floats(1e-9, 1e-3),
    n=st.integers(100, 5000),
    amps=st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                  min_size=2, max_size=2).filter(lambda a: sum(abs(x) ** 2 for x in a) > 1e-6),
)
def test_emit_round_trip(command, seed, t_max, var_tol, n, amps):
    text = f"seed={seed}\nt_max={t_max!r}\nvar_tol={var_tol!r}\nn_trajectories={n}\n"
    if command != "scaling":
        text += "model=dephasing\n"
    text += "initial_state=custom\namplitudes=" + ",".join(repr(a).strip("()") for a in amps)
    c = parse_config(command, text, env={})
    assert parse_config(command, emit(c), env={}) == c


# -- execution --------------------------------------------------------------

def test_oracle_command_matches_closed_form(tmp_path):
    assert main(["oracle", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "rho_timeseries.csv")
    header = rows[0]
    assert header[0] == "time"
    col = header.index("rho_0_1.re")
    for row in rows[1:]:
        assert abs(float(row[col]) - 0.5 * math.exp(-float(row[0]))) < 1e-8
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "oracle" and manifest["exit_status"] == 0
    assert manifest["qsd_version"] and "rho_timeseries.csv" in manifest["outputs"]


def test_fig1_command(tmp_path):
    assert main(["fig1", "--seed", "3", "--out", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "trajectories.csv")
    assert rows[0] == ["time", "trajectory", "n.re", "n.im", "n.var"]
    assert {r[1] for r in rows[1:]} == {str(i) for i in range(5)}
    svg = (tmp_path / "fig1.svg").read_text()
    assert svg.startswith("<svg") and svg.count("<polyline") == 5
    report = json.loads((tmp_path / "trajectory_report.json").read_text())
    assert all(t["collapsed_value"] in (1, 3, 5, 7, 9) for t in report["trajectories"])
    # floats are written at 17 significant digits, so every cell re-formats to itself
    for row in rows[1:50]:
        for cell in row[2:]:
            assert f"{float(cell):.17g}" == cell


def test_manifest_reproduces_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["trajectory", "model=dephasing", "n_trajectories=4", "--seed", "9", "--out", str(a)]) == 0
    manifest = json.loads((a / "manifest.json").read_text())
    cfg = a / "replay.cfg"
    cfg.write_text(manifest["config_text"])
    assert main(["trajectory", "--config", str(cfg), "--out", str(b)]) == 0
    for name in manifest["outputs"]:
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_workers_do_not_change_outputs(tmp_path):
    args = ["ensemble", "n_trajectories=40", "--seed", "2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--workers", "2", "--chunk-size", "7"]) == 0
    for name in ("observables.csv", "ensemble_rho.csv", "ensemble.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_invalid_config_exit_2(tmp_path, capsys):
    assert main(["fig1", "dt=-1", "t_max=-2", "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "dt" in err and "t_max" in err
    assert main(["fig1", "--workers", "0", "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "manifest.json").exists()


def test_statistical_failure_exit_4_keeps_report(tmp_path):
    status = main(["born", "n_trajectories=100", "t_max=0.2", "--out", str(tmp_path)])
    assert status == 4
    report = json.loads((tmp_path / "born_report.json").read_text())
    assert not report["passed"] and report["undecided"] > 1


def test_numerical_failure_exit_3_leaves_nothing(tmp_path, monkeypatch):
    def boom(*a, **k):
        raise NonFiniteError("state became non-finite", step=12, trajectory=0)
    monkeypatch.setattr(cli, "run_records", boom)
    out = tmp_path / "o"
    assert main(["trajectory", "--out", str(out)]) == 3
    assert list(out.iterdir()) == []


def test_ensemble_outputs(tmp_path):
    assert main(["ensemble", "n_trajectories=200", "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "ensemble.json").read_text())
    assert payload["oracle_comparison"]["passed"]
    obs = read_csv(tmp_path / "observables.csv")
    assert obs[0] == ["time", "z.re", "z.im", "z.stderr"]
    assert np.isclose(float(obs[-1][0]), 3.0)


def test_scaling_command(tmp_path):
    status = main(["scaling", "n_trajectories=100", "scaling_n=1,4", "--out", str(tmp_path)])
    assert status == 0
    rows = read_csv(tmp_path / "scaling_table.csv")
    assert rows[0][0] == "n_particles" and len(rows) == 3


def test_scaling_undecided_exit_4(tmp_path):
    status = main(["scaling", "n_trajectories=100", "scaling_n=1,2", "t_max=0.5", "--out", str(tmp_path)])
    assert status == 4
    assert not json.loads((tmp_path / "scaling.json").read_text())["passed"]
