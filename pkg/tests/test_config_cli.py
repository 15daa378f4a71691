import json
import subprocess
import sys

import pytest

from edsim.cli import main
from edsim.config import ConfigFileError, config_from_dict, parse_config
from edsim.flow import Area
from edsim.runner import CSV_SCHEMAS, read_csv_table, simulate, write_outputs
from edsim.tables import Tag

SMALL = {"scenario": "baseline", "replications": {"reps": 2, "days": 2, "seed": 5}}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_defaults_fill_in():
    cfg = config_from_dict({})
    sc = cfg.scenario_config()
    assert sc.name == "baseline" and sc.replications.reps == 50 and sc.replications.days == 28
    model = cfg.model_config_for(sc)
    assert model.warmup_minutes == 1440.0
    assert model.flow.red_preemption


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ConfigFileError, match="flow.colour"):
        parse_config(write(tmp_path, {"flow": {"colour": 1}}))


def test_bad_rate_names_slot(tmp_path):
    rates = [1.0] * 24
    rates[17] = -3.0
    with pytest.raises(ConfigFileError, match=r"\[17\]"):
        parse_config(write(tmp_path, {"rate_profile": rates}))


def test_mix_not_summing_to_one_rejected(tmp_path):
    doc = {"transforms": [{"kind": "TagMixOverride", "day": 2, "mix": [0.2, 0.3, 0.3, 0.1]}]}
    with pytest.raises(ConfigFileError, match="sum"):
        parse_config(write(tmp_path, doc))


@pytest.mark.parametrize("doc,needle", [
    ({"scenario": "nope"}, "scenario"),
    ({"replications": {"reps": 0}}, "replications.reps"),
    ({"flow": {"bypass_prob": 1.5}}, "flow.bypass_prob"),
    ({"flow": {"capacity": {"GreenArea": 0}}}, "GreenArea"),
    ({"flow": {"transition_matrix": [[0.5, 0, 0.5, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]}},
     "skips"),
    ({"staff": {"physician_shifts": [[8, 14, 2, 1]]}}, "24 hours"),
    ({"schema_version": 2}, "schema_version"),
    ({"transforms": [{"kind": "Explode"}]}, "transforms"),
])
def test_invalid_configs(doc, needle):
    with pytest.raises(ConfigFileError, match=needle):
        config_from_dict(doc)


def test_malformed_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(ConfigFileError, match="malformed"):
        parse_config(p)
    with pytest.raises(ConfigFileError, match="cannot read"):
        parse_config(tmp_path / "missing.json")


def test_flow_overrides_reach_the_model():
    cfg = config_from_dict({
        "flow": {"exam_prob": {"Green": 0.1}, "visit_time": {"Red": {"family": "Constant", "params": [30]}},
                 "capacity": {"ShockRoom": 3}, "red_preemption": False},
        "calendar": {"sunday_is_holiday": False},
    })
    model = cfg.model_config_for(cfg.scenario_config())
    assert model.flow.exam_prob[Tag.GREEN] == 0.1
    assert model.flow.exam_prob[Tag.YELLOW] == 0.8
    assert model.flow.visit_time[Tag.RED].params == (30.0,)
    assert model.flow.capacity[Area.SHOCK] == 3
    assert not model.flow.red_preemption and not model.sunday_is_holiday


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    cfg = config_from_dict(SMALL)
    sc = cfg.scenario_config()
    report, results = simulate(sc, cfg.model_config_for(sc))
    out = tmp_path_factory.mktemp("out")
    write_outputs(report, out, results, patients_csv=True)
    return report, results, out


def test_csv_round_trip(small_run):
    report, results, out = small_run
    for name in CSV_SCHEMAS:
        rows = read_csv_table(out / name)
        assert rows
        assert set(rows[0]) == set(CSV_SCHEMAS[name])
    kpis = read_csv_table(out / "kpis.csv")
    green_wt = next(r for r in kpis if r["grouping"] == "triage" and r["tag"] == "Green" and r["metric"] == "WT")
    src = next(r for r in report["kpis"] if r["tag"] == "Green" and r["metric"] == "WT")
    assert green_wt["mean"] == src["mean"]
    patients = read_csv_table(out / "patients.csv")
    assert len(patients) == sum(len(r.patients) for r in results)
    outcomes = read_csv_table(out / "outcomes.csv")
    assert len(outcomes) == 4 * 9


def test_report_json_is_valid(small_run):
    report, _, out = small_run
    doc = json.loads((out / "report.json").read_text())
    assert doc["schema_version"] == 1
    assert doc["metadata"]["replications"] == 2
    assert doc == json.loads(json.dumps(report))


def test_csv_schema_mismatch_detected(tmp_path):
    p = tmp_path / "kpis.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="columns"):
        read_csv_table(p)


def test_cli_runs_and_is_byte_reproducible(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["--config", str(cfg), "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    for name in ("report.json", "kpis.csv", "outcomes.csv", "utilization.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_cli_flags_override_file(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "o"
    assert main(["--config", str(cfg), "--reps", "1", "--seed", "9", "--out", str(out)]) == 0
    meta = json.loads((out / "report.json").read_text())["metadata"]
    assert meta["replications"] == 1 and meta["seed"] == 9


def test_cli_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {"flow": {"nonsense": True}})
    assert main(["--config", str(cfg)]) == 2
    assert "flow.nonsense" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "edsim", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "--scenario" in proc.stdout
