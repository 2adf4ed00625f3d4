import copy
import csv
import json
import shutil
import subprocess

import pytest

from larvactl.cli import dispatch, write_csv
from larvactl.errors import ScenarioError
from larvactl.fixtures import fixture_scenarios
from larvactl.svg import emit_svg


def scenario(tmp_path, name, T=None, **sections):
    data = copy.deepcopy(fixture_scenarios()[name])
    data["age_grid"]["n_a"] = 32
    if T is not None:
        data["horizon"]["T"] = T
    for key, value in sections.items():
        data[key] = {**data.get(key, {}), **value}
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    lines = open(path).read().splitlines()
    header = [x for x in lines if x.startswith("#")]
    rows = list(csv.reader(x for x in lines if not x.startswith("#")))
    return header, rows[0], rows[1:]


# ---------------------------------------------------------------------------
# subcommands


def test_equilibrium_writes_profiles(tmp_path):
    sc = scenario(tmp_path, "reference-rates")
    out = tmp_path / "eq.csv"
    assert dispatch(["equilibrium", sc, "--out", str(out)]) == 0
    header, names, rows = read_csv(out)
    assert names == ["a", "I_star", "F_star", "M_star", "g_F", "g_I", "g", "pi0_I"]
    assert len(rows) == 33
    assert "# subcommand: equilibrium" in header and "# deterministic: true" in header
    assert any(h.startswith("# zeta_I = ") for h in header)


def test_simulate_default_output_name(tmp_path, monkeypatch):
    sc = scenario(tmp_path, "fig2", T=4.0)
    monkeypatch.chdir(tmp_path)
    assert dispatch(["simulate", sc]) == 0
    header, names, rows = read_csv(tmp_path / "fig2-simulate.csv")
    assert names[:3] == ["t", "eta", "y"] and "V_I" not in names
    assert len(rows) == 4 * 8 + 1


def test_simulate_with_controller_override_and_diagnostics(tmp_path):
    sc = scenario(tmp_path, "fig1", T=4.0)
    out = tmp_path / "run.csv"
    assert dispatch(["simulate", sc, "--controller", "stabilizing", "--diag", "--out", str(out)]) == 0
    header, names, _ = read_csv(out)
    assert "# controller: stabilizing" in header
    for col in ("V_I", "G_I", "lambda_min", "h_of_G", "V_total", "region_A_member"):
        assert col in names


def test_track_header_and_svg(tmp_path):
    sc = scenario(tmp_path, "fig6-wide", T=4.0)
    out, svg = tmp_path / "track.csv", tmp_path / "track.svg"
    assert dispatch(["track", sc, "--out", str(out), "--svg", str(svg)]) == 0
    header, names, _ = read_csv(out)
    for key in ("delta", "mu1", "mu2", "L", "certified", "saturated_fraction"):
        assert any(h.startswith(f"# {key} = ") for h in header)
    assert {"y_d", "P_FF", "P_FB_sat", "V_I", "G_I"} <= set(names) and "W" not in names
    assert svg.read_text().startswith("<?xml")
    assert dispatch(["track", sc, "--diag", "--out", str(out)]) == 0
    assert "W" in read_csv(out)[1]


def test_check_prints_report(tmp_path, capsys):
    sc = scenario(tmp_path, "fig3", T=4.0)
    out = tmp_path / "check.csv"
    assert dispatch(["check", sc, "--h6-search", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "H1: K(t) >= eps" in text and "H6: kappa_I" in text and "gamma1" in text
    _, names, rows = read_csv(out)
    assert names == ["t", "pd_K2", "pd_sum", "relation", "lambda_min"]
    assert len(rows) == 4 * 8 + 1


def test_check_reports_reference_admissibility(tmp_path, capsys):
    sc = scenario(tmp_path, "fig7-narrow", T=2.0)
    assert dispatch(["check", sc, "--out", str(tmp_path / "c.csv")]) == 0
    assert "y_d above admissible bound" in capsys.readouterr().out


def test_oracle_compare(tmp_path):
    sc = scenario(tmp_path, "oracle-perturbed", T=4.0)
    out = tmp_path / "o.csv"
    assert dispatch(["oracle-compare", sc, "--out", str(out)]) == 0
    header, names, rows = read_csv(out)
    assert names == ["t", "errI", "errF", "errM", "err_y"]
    assert any(h.startswith("# max_err_I = ") for h in header)
    assert float(rows[0][1]) < 1e-14


def test_fixtures_round_trip(tmp_path):
    assert dispatch(["fixtures", "--dir", str(tmp_path)]) == 0
    names = {p.stem for p in tmp_path.glob("*.json")}
    assert names == set(fixture_scenarios())
    assert json.loads((tmp_path / "fig3.json").read_text()) == fixture_scenarios()["fig3"]


def test_csv_to_stdout(tmp_path, capsys):
    sc = scenario(tmp_path, "reference-rates")
    assert dispatch(["equilibrium", sc, "--out", "-"]) == 0
    assert capsys.readouterr().out.startswith("# larvactl ")


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("larvactl")
    if exe is None:
        pytest.skip("console script not installed")
    sc = scenario(tmp_path, "reference-rates")
    proc = subprocess.run([exe, "equilibrium", sc, "--out", str(tmp_path / "e.csv")], capture_output=True)
    assert proc.returncode == 0, proc.stderr


# ---------------------------------------------------------------------------
# determinism


def test_reruns_are_byte_identical(tmp_path):
    sc = scenario(tmp_path, "fig5", T=4.0)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    dispatch(["simulate", sc, "--diag", "--out", str(a), "--svg", str(tmp_path / "a.svg")])
    dispatch(["simulate", sc, "--diag", "--out", str(b), "--svg", str(tmp_path / "b.svg")])
    body = lambda p: [x for x in p.read_text().splitlines() if not x.startswith("# outputs")]
    assert body(a) == body(b)
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()


def test_svg_rejects_empty_channel_list(tmp_path):
    with pytest.raises(ScenarioError):
        emit_svg({"t": [0.0, 1.0], "y": [1.0, 2.0]}, [], tmp_path / "x.svg")
    with pytest.raises(ScenarioError):
        emit_svg({"t": [0.0, 1.0], "y": [1.0, 2.0]}, ["nope"], tmp_path / "x.svg")


def test_write_csv_formats_exactly(tmp_path):
    text = write_csv(tmp_path / "x.csv", {"t": [0.1, 0.2], "flag": [True, False]}, ["hello"])
    assert text == "# hello\nt,flag\n0.1,1\n0.2,0\n"


# ---------------------------------------------------------------------------
# fault injection


def test_missing_file_exits_1(tmp_path, capsys):
    assert dispatch(["simulate", str(tmp_path / "nope.json")]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_malformed_json_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"age_grid": {"A": 4,,}}')
    assert dispatch(["equilibrium", str(bad)]) == 1
    assert "parse failure at line 1" in capsys.readouterr().err


def test_unknown_flag_exits_1(tmp_path):
    assert dispatch(["simulate", scenario(tmp_path, "fig2"), "--bogus"]) == 1
    assert dispatch(["simulate", scenario(tmp_path, "fig2"), "--controller", "bang-bang"]) == 1
    assert dispatch([]) == 1


def test_invalid_sex_ratio_exits_1(tmp_path, capsys):
    sc = scenario(tmp_path, "fig2", rates={"r": 1.2})
    assert dispatch(["simulate", sc]) == 1
    assert "sex ratio out of range" in capsys.readouterr().err


def test_control_level_without_equilibrium_exits_2(tmp_path, capsys):
    sc = scenario(tmp_path, "fig2", control={"P_star": 50.0})
    assert dispatch(["equilibrium", sc]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_infeasible_feedforward_exits_2(tmp_path, capsys):
    sc = scenario(tmp_path, "fig7-narrow", control={"P_min": 5.75, "P_max": 5.8})
    assert dispatch(["track", sc, "--out", str(tmp_path / "t.csv")]) == 2
    assert "feedforward" in capsys.readouterr().err


def test_divergence_exits_2(tmp_path, capsys):
    sc = scenario(tmp_path, "fig2", initial={"eta0": 701.0})
    assert dispatch(["simulate", sc, "--controller", "static", "--out", str(tmp_path / "d.csv")]) == 2
    assert "static controller" in capsys.readouterr().err
