import json
import math
from pathlib import Path

import pytest
from click.testing import CliRunner

from amoebakit.cli import cli

INPUTS = Path(__file__).resolve().parent.parent / "inputs"


@pytest.fixture
def invoke(tmp_path):
    runner = CliRunner()

    def run(*args):
        return runner.invoke(cli, ["--out-dir", str(tmp_path), *args])

    return run


def _load(path):
    return json.loads(Path(path).read_text())


def test_help(invoke):
    result = invoke("--help")
    assert result.exit_code == 0
    for command in ("amoeba", "ronkin", "measure", "apmean", "capscan", "verify"):
        assert command in result.output


def test_missing_input_file(invoke, tmp_path):
    result = invoke("--input", str(tmp_path / "absent.json"), "ronkin")
    assert result.exit_code == 1
    assert "input file not found" in result.output


def test_no_inputs(invoke):
    result = invoke("ronkin")
    assert result.exit_code == 1
    assert "no inputs" in result.output


def test_bad_format_choice(invoke):
    assert invoke("--format", "png", "ronkin").exit_code == 1


def test_wrongly_typed_config_value_is_a_usage_error(invoke, tmp_path):
    cfg = tmp_path / "bad.json.in"
    cfg.write_text(json.dumps({"inputs": [str(INPUTS / "monomial.json")], "grid_h": "x"}))
    result = invoke("--config", str(cfg), "ronkin")
    assert result.exit_code == 1
    assert "malformed config value" in result.output


def test_degenerate_input_exit_code(invoke, tmp_path):
    zero = tmp_path / "zero.json"
    zero.write_text(json.dumps({"n": 1, "terms": [{"e": [1], "c": 0}]}))
    result = invoke("--input", str(zero), "ronkin")
    assert result.exit_code == 3


def test_amoeba_of_a_simple_zero(invoke, tmp_path):
    result = invoke("--input", str(INPUTS / "z_minus_2.json"), "--window", "-2:2", "--grid-h", "0.01", "amoeba")
    assert result.exit_code == 0, result.output
    cloud = (tmp_path / "amoeba_cloud.csv").read_text().splitlines()
    assert cloud[0] == "y1"
    assert float(cloud[1]) == pytest.approx(math.log(2))
    components = _load(tmp_path / "amoeba_components.json")["components"]
    assert len(components) == 2
    assert not (tmp_path / "amoeba_region.pgm").exists()
    membership = (tmp_path / "membership_field.csv").read_text().splitlines()
    assert membership[0] == "y1,value"
    assert len(membership) == 401
    summary = _load(tmp_path / "amoeba_components.json")
    assert summary["membership"]["consistent"] is True
    assert summary["membership"]["occupied_above_tau"] == 0
    assert summary["cloud"]["outside_window"] == 0


def test_ronkin_outputs_and_sidecars(invoke, tmp_path):
    result = invoke(
        "--input", str(INPUTS / "monomial.json"), "--window", "-1:1,-1:1", "--grid-h", "0.25", "--format", "json", "ronkin"
    )
    assert result.exit_code == 0, result.output
    for name in ("ronkin_field.json", "ronkin_heatmap.pgm", "ronkin_summary.json"):
        assert (tmp_path / name).is_file()
    assert not (tmp_path / "ronkin_field.csv").exists()
    meta = _load(tmp_path / "ronkin_summary.json.meta.json")
    assert set(meta) == {"config_hash", "seed", "version", "command"}
    assert meta["command"] == "ronkin"
    assert _load(tmp_path / "ronkin_summary.json")["flagged_cells"] == 0


def test_measure_of_a_simple_zero(invoke, tmp_path):
    result = invoke("--input", str(INPUTS / "z_minus_2.json"), "--window", "-2:2", "--grid-h", "0.01", "measure")
    assert result.exit_code == 0, result.output
    report = _load(tmp_path / "measure_report.json")
    assert report["total_mass"] == pytest.approx(1.0, abs=1e-3)
    assert report["support"]["uncovered_amoeba_cells"] == 0


def test_zeros_from_a_config_file(invoke, tmp_path):
    cfg = tmp_path / "zeros.json.in"
    cfg.write_text(json.dumps({"inputs": [str(INPUTS / "one_plus_exp.json")], "box": [0, 10, -1, 1], "grid_h": 0.1}))
    result = invoke("--config", str(cfg), "zeros")
    assert result.exit_code == 0, result.output
    report = _load(tmp_path / "zeros.json")
    assert report["count"] == 2
    assert [z["z"][0] for z in report["zeros"]] == pytest.approx([math.pi, 3 * math.pi], abs=1e-8)


def test_zeros_need_a_box(invoke):
    result = invoke("--input", str(INPUTS / "one_plus_exp.json"), "zeros")
    assert result.exit_code == 1


def test_report_collects_sidecars(invoke, tmp_path):
    invoke("--input", str(INPUTS / "monomial.json"), "--window", "-1:1,-1:1", "--grid-h", "0.25", "ronkin")
    result = invoke("report")
    assert result.exit_code == 0, result.output
    files = [entry["file"] for entry in _load(tmp_path / "summary.json")["outputs"]]
    assert files == ["ronkin_field.csv", "ronkin_heatmap.pgm", "ronkin_summary.json"]


def test_capscan_on_a_point(invoke, tmp_path):
    result = invoke("--input", str(INPUTS / "point.json"), "--window", "-1:1,-1:1", "capscan")
    assert result.exit_code == 0, result.output
    out = _load(tmp_path / "capscan.json")
    assert out["found"] > 0
    assert out["conversions"][0]["witness"] == [True, True]
    assert out["hartogs_scan"]["q"] == 1


@pytest.mark.slow
def test_verify_passes_and_fault_is_caught(invoke, tmp_path):
    result = invoke("--config", str(INPUTS / "reference.json"), "verify")
    assert result.exit_code == 0, result.output
    first = (tmp_path / "verify.json").read_text()
    assert invoke("--config", str(INPUTS / "reference.json"), "--threads", "4", "verify").exit_code == 0
    assert (tmp_path / "verify.json").read_text() == first
    assert invoke("--config", str(INPUTS / "reference.json"), "--quad-nodes", "4", "verify").exit_code == 2


def test_amoeba_outputs_do_not_depend_on_threads(invoke, tmp_path):
    names = ("amoeba_cloud.csv", "membership_field.csv", "amoeba_components.json")
    outputs = []
    for threads in ("1", "4"):
        args = ("--input", str(INPUTS / "line.json"), "--window", "-1:1,-1:1", "--grid-h", "0.2", "--seed", "3")
        result = invoke(*args, "--threads", threads, "amoeba")
        assert result.exit_code == 0, result.output
        outputs.append([(tmp_path / name).read_text() for name in names])
    assert outputs[0] == outputs[1]
