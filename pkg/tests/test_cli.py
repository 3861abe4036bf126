import json

import numpy as np
import pytest

from conftest import run_cli
from obfusense import cli
from obfusense import io as oio


def invoke(*args):
    return cli.main([str(a) for a in args])


def read_bytes_map(directory):
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_simulate_noiseless_static_observation_is_zero(tmp_path, minimal_config):
    quiet = tmp_path / "quiet.cfg"
    quiet.write_text(minimal_config.read_text() + "\n[radio]\nsnr_db = inf\n")
    out = tmp_path / "out"
    assert invoke("simulate", "--config", quiet, "--motion", "none", "--defense", "off",
                  "--duration", 2, "--out", out) == 0
    obs = oio.load_observation(out / "observation.csv")
    assert np.array_equal(obs.values, np.zeros(len(obs)))


def test_simulate_deterministic_outputs(tmp_path, minimal_config):
    out = tmp_path / "run"
    args = ("simulate", "--config", minimal_config, "--motion", "walk",
            "--defense", "on", "--duration", 2, "--seed", 7, "--out", out)
    assert invoke(*args) == 0
    first = read_bytes_map(out)
    assert invoke(*args) == 0
    assert read_bytes_map(out) == first


def test_simulate_short_duration_precondition(tmp_path, minimal_config):
    rc = invoke("simulate", "--config", minimal_config, "--motion", "none",
                "--defense", "off", "--duration", 0.5, "--out", tmp_path / "x")
    assert rc == 3


def test_usage_error_exit_code(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--duration", "2"])  # missing --config
    assert exc.value.code == 2


def test_bad_config_exit_code(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("[anchor]\nposition = 0 0\n[eavesdropper]\nposition = 0 0\n")
    rc = invoke("simulate", "--config", cfg, "--motion", "none", "--defense", "off",
                "--duration", 2, "--out", tmp_path / "x")
    assert rc == 3


def test_attack_reference_equals_motion(tmp_path, minimal_config):
    out = tmp_path / "sim"
    invoke("simulate", "--config", minimal_config, "--motion", "none", "--defense", "off",
           "--duration", 4, "--out", out)
    atk = tmp_path / "atk"
    assert invoke("attack", "--reference", out / "observation.csv",
                  "--motion", out / "observation.csv", "--C", 11, "--out", atk) == 0
    doc = json.loads((atk / "report.json").read_text())
    assert doc["auc"] == pytest.approx(0.5, abs=0.02)


def test_attack_threshold_monotone_in_c(tmp_path, minimal_config):
    sim = tmp_path / "sim"
    invoke("simulate", "--config", minimal_config, "--motion", "none", "--defense", "off",
           "--duration", 4, "--out", sim)
    sim2 = tmp_path / "sim2"
    invoke("simulate", "--config", minimal_config, "--motion", "walk", "--defense", "off",
           "--duration", 4, "--stream", 1, "--out", sim2)
    thresholds = {}
    for c in (1, 11):
        out = tmp_path / f"atk{c}"
        invoke("attack", "--reference", sim / "observation.csv",
               "--motion", sim2 / "observation.csv", "--C", c, "--out", out)
        thresholds[c] = json.loads((out / "report.json").read_text())["threshold"]
    assert thresholds[11] >= thresholds[1]


def test_attack_max_ref_zero_fpr(tmp_path, minimal_config):
    sim = tmp_path / "sim"
    invoke("simulate", "--config", minimal_config, "--motion", "none", "--defense", "off",
           "--duration", 4, "--out", sim)
    out = tmp_path / "atk"
    assert invoke("attack", "--reference", sim / "observation.csv",
                  "--motion", sim / "observation.csv", "--max-ref", "--out", out) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["fpr"] == 0.0
    assert doc["provenance"]["threshold_rule"] == "max_reference"


def test_coverage_grid_row_count(tmp_path, minimal_config):
    out = tmp_path / "cov"
    assert invoke("coverage", "--config", minimal_config, "--grid", "3x2", "--defense", "off",
                  "--reference-s", 4, "--session-s", 3, "--out", out) == 0
    lines = (out / "coverage.csv").read_text().splitlines()
    assert lines[1] == "x,y,detection_rate,detection_rate_maxref"
    assert len(lines) == 2 + 6


def test_sweep_size_cells(tmp_path, minimal_config):
    out = tmp_path / "sweep"
    assert invoke("sweep", "--config", minimal_config, "--var", "size",
                  "--values", "32:256:32", "--duration", 2, "--out", out) == 0
    lines = (out / "sweep.csv").read_text().splitlines()
    values = {ln.split(",")[1] for ln in lines[2:]}
    assert len(values) == 8  # 32..256 step 32
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["cells"] == 8


def test_paramstudy_cartesian_product(tmp_path, minimal_config):
    out = tmp_path / "ps"
    assert invoke("paramstudy", "--config", minimal_config, "--R", "0.025,0.05",
                  "--P", "0,0.4,0.6", "--duration", 2, "--out", out) == 0
    lines = (out / "paramstudy.csv").read_text().splitlines()
    assert len(lines) == 2 + 6


def test_ingest_matches_simulated_observation(tmp_path, minimal_config):
    sim = tmp_path / "sim"
    invoke("simulate", "--config", minimal_config, "--motion", "none", "--defense", "on",
           "--duration", 3, "--out", sim)
    ing = tmp_path / "ing"
    assert invoke("ingest", "--trace", sim / "trace.csv", "--out", ing) == 0
    assert (sim / "observation.csv").read_bytes() == (ing / "observation.csv").read_bytes()


def test_manifest_contents(tmp_path, minimal_config):
    out = tmp_path / "sim"
    invoke("simulate", "--config", minimal_config, "--motion", "none", "--defense", "off",
           "--duration", 2, "--out", out)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "simulate"
    assert manifest["seed"] == 42
    assert len(manifest["config_sha256"]) == 64
    assert manifest["version"]


def test_cli_subprocess_smoke(tmp_path, minimal_config):
    rc, stdout, stderr = run_cli(["simulate", "--config", minimal_config, "--motion", "none",
                                  "--defense", "off", "--duration", "2",
                                  "--out", tmp_path / "sp"])
    assert rc == 0, stderr
    assert (tmp_path / "sp" / "observation.csv").exists()
    rc, _, _ = run_cli(["nonsense"])
    assert rc == 2
