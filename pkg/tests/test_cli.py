import csv
import io
import json

import pytest

from ditent import cli
from ditent.scenario import PRESETS, load_scenario, preset_scenario


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(tmp_path, capsys, name):
    path = tmp_path / f"{name}.json"
    code, _, _ = run(capsys, "preset", name, "--out", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc == PRESETS[name]
    assert load_scenario(doc) == preset_scenario(name)


def test_preset_flag_form(capsys):
    code, out, _ = run(capsys, "preset", "--preset", "biexciton")
    assert code == 0 and json.loads(out) == PRESETS["biexciton"]


def test_biexciton_limits(tmp_path, capsys):
    path = tmp_path / "bx.json"
    run(capsys, "preset", "biexciton", "--out", str(path))
    code, out, _ = run(capsys, "limits", "--config", str(path))
    rep = json.loads(out)
    assert code == 0
    assert rep["gamma_X"] == pytest.approx(0.93, abs=0.005)
    assert rep["N_ent"] == pytest.approx(8.6, abs=0.1)
    assert rep["g_XX2_over_kappa"] == 8.0
    assert rep["pass"] is True
    assert all(c["margin_achieved"] >= 1 for c in rep["checks"] if c["pass"])


def test_resonant_sweep_csv(tmp_path, capsys):
    out = tmp_path / "f2.csv"
    code, _, _ = run(capsys, "sweep", "--preset", "dit-resonant", "--out", str(out))
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert len(rows) == 51
    assert float(rows[0]["fidelity"]) >= 0.999
    assert abs(float(rows[-1]["fidelity"]) - 0.5) <= 0.01
    assert float(rows[0]["reflected_photons"]) == pytest.approx(1e-3, rel=1e-12)


def test_sweep_is_byte_identical(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    run(capsys, "preset", "dit-resonant", "--out", str(cfg))
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "sweep", "--config", str(cfg), "--out", str(a))
    run(capsys, "sweep", "--config", str(cfg), "--out", str(b), "--jobs", "2")
    assert a.read_bytes() == b.read_bytes()


def test_oracle_check(capsys):
    code, out, _ = run(capsys, "oracle-check", "--trials", "100")
    rep = json.loads(out)
    assert code == 0 and rep["pass"]
    assert rep["max_deviation"] < 1e-8


def test_oracle_check_deviation_exit(monkeypatch, capsys):
    monkeypatch.setattr(cli, "ORACLE_TOL", 0.0)
    code, out, _ = run(capsys, "oracle-check", "--trials", "3")
    assert code == 3 and not json.loads(out)["pass"]


def test_coeffs(capsys):
    code, out, _ = run(capsys, "coeffs", "--preset", "dit-resonant", "--omega", "0")
    rep = json.loads(out)
    r = complex(*rep["r1g"])
    assert code == 0 and 0.96 <= abs(r) ** 2 <= 0.975
    assert rep["cooperativity"] == [32.0, 32.0]


def test_fidelity(capsys):
    code, out, _ = run(capsys, "fidelity", "--preset", "dit-resonant")
    rep = json.loads(out)
    assert code == 0 and rep["fidelity"] > 0.999 and set(rep["mu"]) == {"gg", "gm", "mg", "mm"}


def test_optimize_summary(tmp_path, capsys):
    doc = {k: v for k, v in PRESETS["cavity-detuning"].items() if k != "sweep"}
    doc["optimizer"] = {"grid": [41, 11, 11]}
    cfg = tmp_path / "o.json"
    cfg.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "optimize", "--config", str(cfg), "--summary")
    rep = json.loads(out)
    assert code == 0 and rep["fidelity"] >= 1 - 1e-6
    assert "trace" not in rep and "search_box" in rep


@pytest.mark.parametrize(
    "argv, key",
    [
        (["fidelity"], "--config"),
        (["limits", "--preset", "biexciton", "--margin", "1"], "--margin"),
        (["oracle-check", "--trials", "0"], "--trials"),
        (["preset"], "preset"),
    ],
)
def test_invalid_input_exit_one(capsys, argv, key):
    code, _, err = run(capsys, *argv)
    assert code == 1 and key in err


def test_bad_config_key(tmp_path, capsys):
    doc = json.loads(json.dumps(PRESETS["dit-resonant"]))
    doc["arm1"]["cavity"]["kappa_r"] = -5
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(doc))
    code, _, err = run(capsys, "fidelity", "--config", str(cfg))
    assert code == 1 and "arm1.cavity" in err


def test_unreadable_config(tmp_path, capsys):
    code, _, err = run(capsys, "coeffs", "--config", str(tmp_path / "missing.json"))
    assert code == 1 and "--config" in err
    (tmp_path / "x.json").write_text("{")
    code, _, err = run(capsys, "coeffs", "--config", str(tmp_path / "x.json"))
    assert code == 1 and "JSON" in err


def test_usage_error_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["nosuch"])
    assert exc.value.code == 1


def test_computation_error_exit_two(tmp_path, capsys):
    doc = json.loads(json.dumps(PRESETS["dit-resonant"]))
    doc.pop("sweep")
    doc["laser"] = {"alpha": 0.0, "beta": 0.0}
    cfg = tmp_path / "zero.json"
    cfg.write_text(json.dumps(doc))
    code, _, err = run(capsys, "fidelity", "--config", str(cfg))
    assert code == 2 and "computation error" in err
