"""CLI plumbing: configs, suite outputs, determinism, replay."""

import json
from pathlib import Path

import pytest

from pivotal import cli
from pivotal.cli import main, params_from_json, params_to_json
from pivotal.config import ExperimentConfig, config_hash, load_config, save_config


@pytest.fixture()
def artifact(reference, tmp_path):
    """Schottky artifact file so CLI runs skip the search."""
    params, _ = reference
    path = tmp_path / "schottky.json"
    path.write_text(json.dumps(params_to_json(params)))
    return path


def _pivot_config(tmp_path, artifact, **run):
    cfg = {
        "seed": 5,
        "schottky": {"target_size": 310, "artifact": str(artifact)},
        "run": {"trials": 3, "blocks": 30, **run},
        "outputs": str(tmp_path / "out"),
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


# -- config --------------------------------------------------------------------


def test_config_roundtrip(tmp_path):
    cfg = ExperimentConfig(seed=9, run={"trials": 7})
    save_config(cfg, tmp_path / "c.json")
    back = load_config(str(tmp_path / "c.json"))
    assert back == cfg
    assert config_hash(back) == config_hash(cfg)


def test_config_validation(tmp_path):
    with pytest.raises(ValueError, match="unknown config keys"):
        ExperimentConfig.from_dict({"seed": 1, "bogus": 2})
    with pytest.raises(ValueError, match="seed"):
        ExperimentConfig.from_dict({"run": {}})
    with pytest.raises(ValueError):
        ExperimentConfig(seed=None)


def test_config_hash_sensitivity():
    a = ExperimentConfig(seed=1)
    b = ExperimentConfig(seed=2)
    assert config_hash(a) != config_hash(b)
    assert len(config_hash(a)) == 16


# -- argument handling ---------------------------------------------------------


def test_usage_errors(tmp_path, capsys):
    assert main(["run", "dyadic"]) == 2  # no seed, no config
    assert main(["run", "no-such-suite", "--seed", "1"]) == 2
    assert main(["replay", str(tmp_path / "missing.json")]) == 2


def test_seed_without_config_ok(tmp_path):
    rc = main(
        ["run", "dyadic", "--seed", "3", "--out", str(tmp_path)]
    )
    assert rc == 0
    assert (tmp_path / "dyadic.csv").exists()
    assert (tmp_path / "dyadic.json").exists()


# -- suite runs ----------------------------------------------------------------


def test_dyadic_run_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["run", "dyadic", "--seed", "11", "--out", str(out)]) == 0
    assert (a / "dyadic.csv").read_bytes() == (b / "dyadic.csv").read_bytes()
    assert (a / "dyadic.json").read_bytes() == (b / "dyadic.json").read_bytes()
    meta = json.loads((a / "dyadic.json").read_text())
    assert meta["passed"] is True
    assert meta["checks"]["identity_max_error"] == 0.0
    first = (a / "dyadic.csv").read_text().splitlines()
    assert first[0].startswith("schema_version,")


def test_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("PIVOTAL_OUT_DIR", str(tmp_path / "envout"))
    assert main(["run", "dyadic", "--seed", "3"]) == 0
    assert (tmp_path / "envout" / "dyadic.json").exists()


def test_pivot_stats_suite(tmp_path, artifact):
    cfg = _pivot_config(tmp_path, artifact)
    rc = main(["pivot-stats", "--config", str(cfg)])
    assert rc == 0
    meta = json.loads((tmp_path / "out" / "pivot_stats.json").read_text())
    assert meta["checks"]["gain_ok"] is True
    assert meta["suite"] == "pivot-stats"
    assert meta["config_hash"] == config_hash(ExperimentConfig.from_dict(meta["config"]))


def test_failure_exit_code(tmp_path, monkeypatch):
    def failing(config, out):
        return False, ["x"], [[1]], {"reason": "forced"}

    monkeypatch.setitem(cli.SUITE_FUNCS, "dyadic", failing)
    assert main(["run", "dyadic", "--seed", "3", "--out", str(tmp_path)]) == 1
    meta = json.loads((tmp_path / "dyadic.json").read_text())
    assert meta["passed"] is False


# -- schottky artifact ---------------------------------------------------------


def test_artifact_roundtrip(reference):
    params, _ = reference
    back = params_from_json(params_to_json(params))
    assert back == params


def test_artifact_records_verification(reference, tmp_path):
    from pivotal.models import tree_model
    from pivotal.schottky import default_probes, verify_schottky

    params, _ = reference
    space = tree_model(2)
    report = verify_schottky(params, space, default_probes(params, space, seed=6))
    d = params_to_json(params, report)
    assert d["report"]["passed"] is True
    assert d["size"] == len(params.set)


# -- replay --------------------------------------------------------------------


def test_replay_plain_suite(tmp_path, capsys):
    assert main(["run", "dyadic", "--seed", "13", "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    rc = main(["replay", str(tmp_path / "dyadic.json"), "--trial", "0"])
    assert rc == 0
    dump = json.loads(capsys.readouterr().out)
    assert dump["suite"] == "dyadic"
    assert dump["displacement"] >= 0
    assert dump["translation_length"] <= dump["displacement"]


def test_replay_pivot_suite(tmp_path, artifact, capsys):
    cfg = _pivot_config(tmp_path, artifact)
    assert main(["pivot-stats", "--config", str(cfg)]) == 0
    capsys.readouterr()
    rc = main(["replay", str(tmp_path / "out" / "pivot_stats.json"), "--trial", "1"])
    assert rc == 0
    dump = json.loads(capsys.readouterr().out)
    assert dump["trial"] == 1
    assert len(dump["P_sizes"]) == dump["n_schottky"]
    assert dump["final_P"] == sorted(dump["final_P"])


def test_replay_hash_mismatch(tmp_path):
    assert main(["run", "dyadic", "--seed", "13", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "dyadic.json").read_text())
    meta["config"]["seed"] = 14  # hash no longer matches
    (tmp_path / "dyadic.json").write_text(json.dumps(meta))
    assert main(["replay", str(tmp_path / "dyadic.json")]) == 2


def test_replay_unsupported_suite(tmp_path):
    assert main(["run", "dyadic", "--seed", "13", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "dyadic.json").read_text())
    meta["suite"] = "converse"
    (tmp_path / "dyadic.json").write_text(json.dumps(meta))
    assert main(["replay", str(tmp_path / "dyadic.json")]) == 2
