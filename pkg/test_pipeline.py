"""
Command-line pipeline test-suite

This test suite validates the pipeline package:
1. Flat dotted-key configuration loading and serialisation
2. synth -> ingest -> tag -> analyze -> report through the click CLI
3. Byte-identical reruns and stable exit codes for each failure class
4. JSON log lines on stderr
"""

import json
import shutil
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from pipeline.config import ConfigError, dump_flat_yaml, flatten, load_config, load_synth_spec, unflatten
from pipeline.main import EXIT_ANALYSIS, EXIT_INPUT, EXIT_OK, EXIT_USAGE, cli
from pipeline.models import RunConfig
from pipeline.reports import effect_size_rows, format_log_p, format_number, format_p
from pipeline.tasks import ALL_ANALYSES, resolve_analyses
from uemr_core.catalogue import Population

ROOT = Path(__file__).parent

SYNTH_SPEC = {
    "seed": 4,
    "n_satellites.DTC": 30,
    "n_satellites.KuOnly": 80,
    "detections_mean": 12,
    "eclipse_multiplier.DTC": 2.0,
    "eclipse_multiplier.KuOnly": 0.8,
    "injector.channel_mhz": 230.46875,
    "injector.fine_index": 22,
    "injector.amplitude": 1.0,
    "injector.duty_fraction": 0.55,
}


def _write_yaml(path: Path, data: dict) -> Path:
    path.write_text(yaml.safe_dump(data, sort_keys=True))
    return path


def _invoke(args, config: Path = None):
    prefix = ["--config", str(config)] if config else []
    return CliRunner().invoke(cli, prefix + [str(a) for a in args], obj={})


# ------ (1) Configuration ------

def test_unflatten_and_flatten():
    nested = unflatten({"stats.q": 0.1, "stats.n_jobs": 2, "site": {"lat_deg": 1.0}, "columns.utc": "t"})
    assert nested == {"stats": {"q": 0.1, "n_jobs": 2}, "site": {"lat_deg": 1.0}, "columns": {"utc": "t"}}
    assert flatten(nested) == {"stats.q": 0.1, "stats.n_jobs": 2, "site.lat_deg": 1.0, "columns.utc": "t"}


@pytest.mark.parametrize("flat", [
    {"stats": 1, "stats.q": 0.1},
    {"stats.q": 0.1, "stats.q.low": 1},
    {"stats.q.low": 1, "stats.q": 0.1},
])
def test_unflatten_conflicts(flat):
    with pytest.raises(ConfigError):
        unflatten(flat)


def test_default_config_without_file():
    config = load_config()
    assert config == RunConfig()
    assert config.stats.n_resamples == 2000
    assert config.fine.target_index == 22


def test_example_config_matches_defaults():
    config = load_config(ROOT / "config" / "example.yaml")
    defaults = RunConfig()
    assert config.model_dump(exclude={"paths"}) == defaults.model_dump(exclude={"paths"})
    assert config.paths.out_dir == "out"


def test_example_synth_spec_loads():
    spec = load_synth_spec(ROOT / "config" / "synth_example.yaml")
    assert spec.n_satellites == {Population.DTC: 60, Population.KU_ONLY: 200}
    assert spec.injector is not None and spec.injector.fine_index == 22


def test_dump_flat_yaml_round_trip(tmp_path):
    config = RunConfig.model_validate(unflatten({"stats.n_resamples": 300, "spectrum.norad_id": 70001,
                                                 "columns.utc": "epoch", "polarisation.baseline_mode":
                                                 "LeaveOneOut"}))
    text = dump_flat_yaml(config)
    assert "stats.n_resamples: 300" in text
    path = tmp_path / "run.yaml"
    path.write_text(text)
    assert load_config(path) == config


@pytest.mark.parametrize("body", ["stats.bogus: 1\n", "stats.q: 2.0\n", "stats.n_resamples: 50\n",
                                  "eclipse.strata_resamples: 20\n", "columns.colour: c\n", "- a\n- b\n",
                                  "stats: [1\n"])
def test_invalid_config_documents(tmp_path, body):
    path = tmp_path / "bad.yaml"
    path.write_text(body)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.yaml")


def test_resolve_analyses():
    assert resolve_analyses("all") == ALL_ANALYSES
    assert "spectrum" not in ALL_ANALYSES
    assert resolve_analyses("t1") == ["t1"]
    with pytest.raises(KeyError):
        resolve_analyses("nonsense")


# ------ (2) Report formatting ------

def test_number_formatting():
    assert format_number(None) == "n/a"
    assert format_number(float("nan")) == "n/a"
    assert format_number(True) == "yes"
    assert format_number(7) == "7"
    assert format_number(1.23456, 2) == "1.23"
    assert format_p(None) == "n/a"
    assert format_p(0.0) == "0"
    assert format_p(0.0123) == "0.012"
    assert format_p(2e-5) == "2.0e-05"
    assert format_log_p(-1.0) == "0.100"
    assert format_log_p(-274.4) == "4.0e-275"


def test_effect_size_rows_carry_truth():
    results = {"thermal": {"flux_jy": 1e-5}}
    assert effect_size_rows(results, None) == []
    excess = {"ratio": {"estimate": 2.0, "ci_low": 1.5, "ci_high": 2.5}, "mwu": {"cliffs_delta": 0.4}}
    rows = effect_size_rows({"excess": excess}, {"excess_ratio": 1.8})
    assert rows[0]["truth"] == 1.8
    assert (rows[0]["low"], rows[0]["high"]) == (1.5, 2.5)
    assert rows[1]["estimate"] == 0.4


# ------ (3) End-to-end pipeline ------

@pytest.fixture(scope="module")
def pipeline_run(tmp_path_factory):
    """A complete synth -> report run, shared read-only by the tests below."""
    root = tmp_path_factory.mktemp("pipeline")
    out = root / "out"
    spec_path = _write_yaml(root / "synth.yaml", SYNTH_SPEC)
    config_path = _write_yaml(root / "run.yaml", {
        "stats.n_resamples": 200,
        "stats.master_seed": 3,
        "paths.out_dir": str(out),
        "paths.detections": str(out / "detections.csv"),
        "paths.bus_table": str(out / "bus_table.csv"),
    })
    results = {}
    for step in (["synth", "--spec", spec_path], ["ingest"], ["tag"], ["analyze", "--which", "all"], ["report"]):
        results[step[0]] = _invoke(step, config_path)
    return out, config_path, results


def test_pipeline_steps_succeed(pipeline_run):
    _, _, results = pipeline_run
    for name, result in results.items():
        assert result.exit_code == EXIT_OK, f"{name}: {result.output}"
    assert "Synthetic catalogue: 110 satellites" in results["synth"].stdout
    assert "Ingested" in results["ingest"].stdout
    assert "illuminated fraction" in results["tag"].stdout


def test_pipeline_writes_every_artifact(pipeline_run):
    out, _, _ = pipeline_run
    for name in ["detections.csv", "bus_table.csv", "ground_truth.json", "report.md",
                 "catalogue/catalogue_events.csv", "catalogue/catalogue_satellites.csv",
                 "catalogue/catalogue_provenance.json", "analyses/catalogue.json",
                 "analyses/excess_reductions.csv", "analyses/fine_bins.csv", "analyses/eclipse_strata.csv"]:
        assert (out / name).is_file(), name
    for name in ALL_ANALYSES:
        assert (out / "analyses" / f"{name}.json").is_file(), name


def test_envelopes_record_config_and_seed(pipeline_run):
    out, _, _ = pipeline_run
    envelope = json.loads((out / "analyses" / "excess.json").read_text())
    assert envelope["analysis"] == "excess"
    assert envelope["master_seed"] == 3
    assert envelope["config"]["stats"]["n_resamples"] == 200
    assert set(envelope["source_digests"]) == {"detections", "bus_table"}

    summary = json.loads((out / "analyses" / "catalogue.json").read_text())["result"]
    assert summary["provenance"]["tagged"] is True
    assert {row["population"] for row in summary["populations"]} >= {"DTC", "KuOnly"}


def test_report_lists_tables_and_truth(pipeline_run):
    out, _, results = pipeline_run
    text = (out / "report.md").read_text()
    for heading in ["## Populations", "## DTC excess", "## Polarisation by channel",
                    "## Illumination state", "## Eclipse controls", "## Effect sizes",
                    "## Fine-channel isolation", "## Mechanism tests", "## Reproduction"]:
        assert heading in text
    assert "Truth |" in text
    assert "stats.n_resamples: 200" in text
    assert "Warning" not in results["report"].stderr


def test_analyze_is_byte_identical_on_rerun(pipeline_run, tmp_path):
    out, config_path, _ = pipeline_run
    shutil.copytree(out / "catalogue", tmp_path / "catalogue")
    first = {}
    for attempt in range(2):
        result = _invoke(["--out", tmp_path, "analyze", "--which", "all"], config_path)
        assert result.exit_code == EXIT_OK, result.output
        snapshot = {p.name: p.read_bytes() for p in sorted((tmp_path / "analyses").iterdir())}
        if attempt == 0:
            first = snapshot
    assert snapshot == first
    assert (tmp_path / "analyses" / "eclipse.json").read_bytes().endswith(b"\n")


def test_synth_seed_override(tmp_path):
    spec_path = _write_yaml(tmp_path / "synth.yaml", {**SYNTH_SPEC, "n_satellites.DTC": 3,
                                                       "n_satellites.KuOnly": 3, "detections_mean": 5})
    result = _invoke(["--out", tmp_path / "a", "--seed", 9, "synth", "--spec", spec_path])
    assert result.exit_code == EXIT_OK, result.output
    assert "(seed 9)" in result.stdout
    truth = json.loads((tmp_path / "a" / "ground_truth.json").read_text())
    assert truth["seed"] == 9


def test_t1_runs_without_a_catalogue(tmp_path):
    result = _invoke(["--out", tmp_path, "analyze", "--which", "t1"])
    assert result.exit_code == EXIT_OK, result.output
    envelope = json.loads((tmp_path / "analyses" / "t1.json").read_text())
    assert envelope["result"]["t1"]["observed_matches"] == 5
    assert envelope["source_digests"] == {}
    assert (tmp_path / "analyses" / "t1_t1_matches.csv").is_file()


def test_thermal_runs_without_a_catalogue(tmp_path):
    result = _invoke(["--out", tmp_path, "analyze", "--which", "thermal"])
    assert result.exit_code == EXIT_OK, result.output
    flux = json.loads((tmp_path / "analyses" / "thermal.json").read_text())["result"]["flux_jy"]
    assert flux == pytest.approx(1.47e-5, rel=0.01)


def test_spectrum_for_one_satellite(pipeline_run, tmp_path):
    out, config_path, _ = pipeline_run
    shutil.copytree(out / "catalogue", tmp_path / "catalogue")
    truth = json.loads((out / "ground_truth.json").read_text())
    config = yaml.safe_load(config_path.read_text())
    config.update({"spectrum.norad_id": truth["injector_norad_ids"][0], "paths.out_dir": str(tmp_path)})
    result = _invoke(["analyze", "--which", "spectrum"], _write_yaml(tmp_path / "run.yaml", config))
    assert result.exit_code == EXIT_OK, result.output
    spectrum = json.loads((tmp_path / "analyses" / "spectrum.json").read_text())["result"]
    assert len(spectrum["frequency_marginal"]) == 31
    assert (tmp_path / "analyses" / "spectrum_matrix.csv").is_file()


# ------ (4) Exit codes ------

def test_unknown_analysis_is_a_usage_error(tmp_path):
    result = _invoke(["--out", tmp_path, "analyze", "--which", "astrology"])
    assert result.exit_code == EXIT_USAGE


def test_unknown_command_is_a_usage_error():
    assert _invoke(["calibrate"]).exit_code == EXIT_USAGE


def test_invalid_config_key_exits_with_usage(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("stats.bogus: 1\n")
    result = _invoke(["--out", tmp_path, "analyze", "--which", "thermal"], path)
    assert result.exit_code == EXIT_USAGE
    assert "bogus" in result.stderr
    assert not (tmp_path / "analyses").exists()


def test_too_few_resamples_exits_with_usage(pipeline_run, tmp_path):
    out, _, _ = pipeline_run
    shutil.copytree(out / "catalogue", tmp_path / "catalogue")
    path = tmp_path / "few.yaml"
    path.write_text("stats.n_resamples: 50\n")
    result = _invoke(["--out", tmp_path, "analyze", "--which", "excess"], path)
    assert result.exit_code == EXIT_USAGE
    assert "n_resamples" in result.stderr
    assert not (tmp_path / "analyses").exists()


def test_ingest_without_inputs_is_a_usage_error(tmp_path):
    assert _invoke(["--out", tmp_path, "ingest"]).exit_code == EXIT_USAGE


def test_missing_bus_table_is_an_input_error(pipeline_run, tmp_path):
    out, _, _ = pipeline_run
    result = _invoke(["--out", tmp_path, "ingest", "--detections", out / "detections.csv",
                      "--bus-table", tmp_path / "absent.tsv"])
    assert result.exit_code == EXIT_INPUT
    assert "Input error" in result.stderr
    assert not (tmp_path / "catalogue").exists()


def test_analyze_without_catalogue_is_an_input_error(tmp_path):
    result = _invoke(["--out", tmp_path, "analyze", "--which", "excess"])
    assert result.exit_code == EXIT_INPUT


def test_spectrum_without_satellite_is_an_analysis_error(pipeline_run, tmp_path):
    out, _, _ = pipeline_run
    shutil.copytree(out / "catalogue", tmp_path / "catalogue")
    result = _invoke(["--out", tmp_path, "analyze", "--which", "spectrum"])
    assert result.exit_code == EXIT_ANALYSIS
    assert "spectrum.norad_id" in result.stderr
    assert not (tmp_path / "analyses" / "spectrum.json").exists()


def test_report_with_nothing_stored_warns(tmp_path):
    result = _invoke(["--out", tmp_path, "report"])
    assert result.exit_code == EXIT_OK
    assert "Warning: Missing input" in result.stderr
    assert (tmp_path / "report.md").is_file()


def test_report_with_missing_ground_truth_warns(tmp_path):
    result = _invoke(["--out", tmp_path, "report", "--ground-truth", tmp_path / "absent.json"])
    assert result.exit_code == EXIT_OK
    assert "Missing ground truth" in result.stderr


# ------ (5) Logging ------

def test_logs_are_json_lines_on_stderr(tmp_path):
    result = _invoke(["--out", tmp_path, "analyze", "--which", "thermal"])
    assert result.exit_code == EXIT_OK
    records = [json.loads(line) for line in result.stderr.splitlines() if line.startswith("{")]
    assert any(r["message"] == "Running analysis thermal" and r["levelname"] == "INFO" for r in records)
    assert all({"asctime", "name", "levelname", "message"} <= set(r) for r in records)
    assert "Running analysis" not in result.stdout


def test_plain_logs_and_level(tmp_path):
    result = _invoke(["--out", tmp_path, "--plain-logs", "analyze", "--which", "thermal"])
    assert " - pipeline.tasks - INFO - Running analysis thermal" in result.stderr

    quiet = _invoke(["--out", tmp_path, "--log-level", "warning", "analyze", "--which", "thermal"])
    assert quiet.exit_code == EXIT_OK
    assert "Running analysis" not in quiet.stderr
