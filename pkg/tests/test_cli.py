import csv
import json
import math

import pytest

from macrowitness import __version__
from macrowitness.cli import (
    WITNESS_COLUMNS,
    ConfigError,
    config_from_dict,
    execute,
    export_qasm,
    load_config,
    main,
    parse_angle,
    render,
)
from macrowitness.protocols import analytic_cat_witness


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# --- configuration ------------------------------------------------------------------


def test_parse_angle_forms():
    assert parse_angle("pi/2") == pytest.approx(math.pi / 2)
    assert parse_angle("-3*pi/8") == pytest.approx(-3 * math.pi / 8)
    assert parse_angle("pi") == pytest.approx(math.pi)
    assert parse_angle(0.25) == 0.25
    assert parse_angle("0.5") == 0.5
    with pytest.raises(ConfigError):
        parse_angle("tau")


def test_unknown_key_named():
    with pytest.raises(ConfigError, match="'thetas'"):
        config_from_dict({"thetas": [0.1]})
    with pytest.raises(ConfigError, match="'t3'"):
        config_from_dict({"noise": {"t1": 1, "t2": 1, "t3": 2}})
    with pytest.raises(ConfigError, match="'swap_time'"):
        config_from_dict({"durations": {"swap_time": 1}})


@pytest.mark.parametrize(
    "bad",
    [
        {"protocol": "teleport"},
        {"shots": 0},
        {"shots": "many"},
        {"scenario": "indirect"},
        {"noise": {"t1": 10, "t2": 30}},
        {"durations": {"cnot_time": -1}},
        {"n": [2, 3]},
        {"protocol": "invasiveness", "n": 2, "states": ["012"]},
        {"eta": 0},
        {"format": "xml"},
    ],
)
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        config_from_dict(bad)


def test_noise_shortcuts():
    assert config_from_dict({"noise": "fitted"}).noise.t1 == 46.0
    assert config_from_dict({"noise": None}).noise is None
    cfg = config_from_dict({"noise": {"t1": 20, "t2": 10, "per_qubit": {"1": {"t1": 5, "t2": 5}}}})
    assert cfg.noise.for_qubit(1).t1 == 5


def test_flags_override_file(tmp_path):
    path = write_config(tmp_path, {"seed": 1, "shots": 100, "scenario": "direct"})
    cfg = load_config(path, {"seed": 5, "scenario": "pm", "shots": None})
    assert cfg.seed == 5 and cfg.scenario == "prepare-measure" and cfg.shots == 100


def test_format_inferred_from_output():
    assert config_from_dict({"output": "x.csv"}).output_format == "csv"
    assert config_from_dict({"output": "x.csv", "format": "json"}).output_format == "json"
    assert config_from_dict({}).output_format == "json"


# --- runs ------------------------------------------------------------------------------


def test_cat_sweep_noiseless_matches_closed_form(tmp_path):
    out = tmp_path / "w.csv"
    assert main(["run", "--output", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == WITNESS_COLUMNS
    assert len(rows) == 5
    for r in rows:
        assert float(r["W"]) == pytest.approx(analytic_cat_witness(float(r["theta"])), abs=1e-10)
        assert r["shots"] == "exact"


def test_product_witness_rows(tmp_path):
    path = write_config(tmp_path, {"protocol": "product-witness", "n": [2, 3, 4, 5, 6]})
    out = tmp_path / "p.csv"
    assert main(["run", "--config", path, "--output", str(out)]) == 0
    ws = [float(r["W"]) for r in read_csv(out)]
    assert ws == pytest.approx([0.75, 0.875, 0.9375, 0.96875, 0.984375], abs=1e-10)


def test_invasiveness_table(tmp_path):
    path = write_config(tmp_path, {"protocol": "invasiveness", "n": 4, "noise": "fitted"})
    out = tmp_path / "i.csv"
    assert main(["run", "--config", path, "--output", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 16
    assert [r["state"] for r in rows][:2] == ["0000", "0001"]
    assert set(rows[0]) == {"state", "n", "epsilon_ii", "invasiveness", "sigma", "shots", "seed"}


def test_disconnectivity_record():
    rec = execute(config_from_dict({"protocol": "disconnectivity", "n": 5, "theta": "pi/2"}))
    assert rec["results"][0]["gamma"] == 5
    rec = execute(config_from_dict({"protocol": "disconnectivity", "n": 3, "state": "product"}))
    assert rec["results"][0]["gamma"] == 1


def test_json_record_contents():
    rec = execute(config_from_dict({"n": 2, "theta": ["pi/2"], "noise": "fitted", "shots": 512, "seed": 3}))
    prov = rec["provenance"]
    assert prov["version"] == __version__ and prov["tool"] == "macrowitness"
    assert prov["config"]["noise"] == "fitted" and prov["config"]["seed"] == 3
    row = rec["results"][0]
    for key in ("W", "sigma", "bound", "verdict", "p_blind", "p_with_measurement", "joint"):
        assert key in row
    assert row["sigma"] > 0
    text = render(rec, "json")
    assert json.loads(text) == json.loads(render(rec, "json"))
    assert "timestamp" not in text and "date" not in text


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_byte_identical_outputs(tmp_path, fmt):
    path = write_config(tmp_path, {"protocol": "sweep", "n": [2, 3], "noise": "fitted", "workers": 2})
    a, b = tmp_path / f"a.{fmt}", tmp_path / f"b.{fmt}"
    for out in (a, b):
        assert main(["run", "--config", path, "--shots", "2048", "--seed", "11",
                     "--format", fmt, "--output", str(out)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_worker_count_does_not_change_output(tmp_path):
    texts = []
    for workers in (1, 3):
        cfg = config_from_dict({"protocol": "sweep", "n": [2], "noise": "fitted",
                                "shots": 1000, "seed": 4, "workers": workers})
        texts.append(render(execute(cfg), "csv"))
    assert texts[0] == texts[1]


def test_stdout_output(capsys):
    assert main(["run", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(WITNESS_COLUMNS)


def test_noisy_rows_carry_bound_and_verdict():
    rows = execute(config_from_dict({"n": 2, "noise": "fitted"}))["results"]
    assert rows[0]["verdict"] == "compatible with clumsy-macrorealism"
    assert rows[-1]["verdict"] == "non-macrorealistic"
    assert rows[0]["bound"] == pytest.approx(rows[-1]["bound"])


# --- exit codes ---------------------------------------------------------------------


def test_validate_ok(tmp_path, capsys):
    path = write_config(tmp_path, {"protocol": "sweep", "n": [2, 4]})
    assert main(["validate", "--config", path]) == 0
    assert json.loads(capsys.readouterr().out)["valid"] is True


def test_validate_reports_structured_error(tmp_path, capsys):
    path = write_config(tmp_path, {"protocol": "cat-witness", "colour": "red"})
    assert main(["validate", "--config", path]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "invalid" and "'colour'" in err["message"]


def test_missing_and_malformed_config(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "absent.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", "--config", str(bad)]) == 2


def test_capacity_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("MACROWITNESS_MAX_QUBITS", "6")
    path = write_config(tmp_path, {"n": 4, "theta": 0.5})
    assert main(["run", "--config", path]) == 3
    assert json.loads(capsys.readouterr().err)["error"] == "capacity"


def test_bad_shots_flag():
    with pytest.raises(SystemExit):
        main(["run", "--shots", "lots"])


# --- QASM export ------------------------------------------------------------------------


def test_export_direct(tmp_path):
    cfg = config_from_dict({"n": 2, "theta": "pi/2"})
    paths = export_qasm(cfg, tmp_path)
    names = sorted(p.name for p in paths)
    assert names == ["cat_n2_thetapi_2_blind.qasm", "cat_n2_thetapi_2_direct.qasm", "invasiveness_n2_00.qasm"]
    blind = (tmp_path / "cat_n2_thetapi_2_blind.qasm").read_text()
    assert "u3(pi/2,0,0) q[0];\ncx q[0],q[1];\nbarrier q;\ncx q[0],q[1];\nu3(-pi/2,0,0) q[0];" in blind
    direct = (tmp_path / "cat_n2_thetapi_2_direct.qasm").read_text()
    assert "qreg q[4];" in direct and "creg mid[2];" in direct


def test_export_prepare_measure_one_file_per_basis_state(tmp_path):
    assert main(["export-qasm", "--scenario", "pm", "--output", str(tmp_path)]) == 0
    stage2 = sorted(p.name for p in tmp_path.glob("cat_n2_thetapi_4_pm2_*.qasm"))
    assert stage2 == [f"cat_n2_thetapi_4_pm2_{b}.qasm" for b in ("00", "01", "10", "11")]
    assert "u3(pi,0,0) q[1];" in (tmp_path / "cat_n2_thetapi_4_pm2_01.qasm").read_text()


def test_export_deterministic(tmp_path):
    cfg = config_from_dict({"protocol": "product-witness", "n": [3]})
    a = {p.name: p.read_bytes() for p in export_qasm(cfg, tmp_path / "a")}
    b = {p.name: p.read_bytes() for p in export_qasm(cfg, tmp_path / "b")}
    assert a == b
    assert a["product_n3_blind.qasm"].count(b"h q[") == 6


def test_export_needs_output(capsys):
    assert main(["export-qasm"]) == 2


def test_export_invasiveness(tmp_path):
    cfg = config_from_dict({"protocol": "invasiveness", "n": 2})
    assert len(export_qasm(cfg, tmp_path)) == 4
    text = (tmp_path / "invasiveness_n2_10.qasm").read_text()
    assert "u3(pi,0,0) q[0];" in text and "cx q[0],q[2];" in text
