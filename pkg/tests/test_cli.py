import csv
import json

import numpy as np
import pytest

from pursuit_hrl import cli, evaluation
from pursuit_hrl.config import ExperimentConfig
from pursuit_hrl.nets import load_checkpoint, save_checkpoint
from pursuit_hrl.training import Orchestrator

TINY = {
    "version": 1,
    "arena": {"n_pursuers": 3, "n_evaders": 3, "n_obstacles": 2,
              "episode_len": 40},
    "train": {"episodes_upper": 2, "episodes_lower": 1, "episodes_cross": 1,
              "instance_pool": 3, "lower_batch": 64, "upper_batch": 16},
    "eval": {"instances": 3, "seed": 500},
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_train")
    cfg = out / "config.json"
    cfg.write_text(json.dumps(TINY))
    code = cli.main(["train", "--config", str(cfg), "--out", str(out)])
    assert code == 0
    return cfg, out


def test_generate_command(tmp_path):
    out = tmp_path / "gen"
    code = cli.main(["generate", "--out", str(out), "--count", "4",
                     "--scenario", "V3"])
    assert code == 0
    lines = (out / "instances.jsonl").read_text().splitlines()
    assert len(lines) == 4
    rec = json.loads(lines[0])
    assert len(rec["pursuers"]) == 3


def test_train_outputs(trained):
    _, out = trained
    assert (out / "train_log.csv").exists()
    assert (out / "h_trace.csv").exists()
    assert (out / "checkpoints" / "final.npz").exists()


def test_evaluate_command(trained, tmp_path):
    cfg, out = trained
    ckpt = out / "checkpoints" / "final.npz"
    eval_out = tmp_path / "eval"
    code = cli.main(["evaluate", "--config", str(cfg), "--out", str(eval_out),
                     "--checkpoint", str(ckpt), "--instances", "2"])
    assert code == 0
    with open(eval_out / "eval_report.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["instance", "episode_return", "win"]
    assert len(rows) == 3
    report = json.loads((eval_out / "eval_report.json").read_text())
    assert {"re_mean", "ti_mean_ms", "wr_percent"} <= set(report["aggregates"])
    assert 0.0 <= report["aggregates"]["wr_percent"] <= 100.0


def test_eval_csv_deterministic(trained, tmp_path):
    cfg, out = trained
    exp = ExperimentConfig.load(cfg)
    ckpt = out / "checkpoints" / "final.npz"
    a = evaluation.evaluate(exp, ckpt, 2, 500)
    b = evaluation.evaluate(exp, ckpt, 2, 500)
    a.write(tmp_path / "a")
    b.write(tmp_path / "b")
    assert (tmp_path / "a" / "eval_report.csv").read_bytes() == \
        (tmp_path / "b" / "eval_report.csv").read_bytes()


def test_baseline_alloc_modes(trained):
    cfg, out = trained
    exp = ExperimentConfig.load(cfg)
    ckpt = out / "checkpoints" / "final.npz"
    for mode in ("random", "greedy"):
        report = evaluation.evaluate(exp, ckpt, 2, 500, alloc_mode=mode)
        assert len(report.rows) == 2


def test_generalize_to_larger_swarm(trained, tmp_path):
    cfg, out = trained
    ckpt = out / "checkpoints" / "final.npz"
    big = dict(TINY)
    big["arena"] = dict(TINY["arena"], n_pursuers=6, n_evaders=6)
    big_cfg = tmp_path / "big.json"
    big_cfg.write_text(json.dumps(big))
    code = cli.main(["generalize", "--config", str(big_cfg),
                     "--out", str(tmp_path / "gen"),
                     "--checkpoint", str(ckpt), "--instances", "2"])
    assert code == 0
    assert (tmp_path / "gen" / "generalize_report.csv").exists()


def test_export_trajectory(trained, tmp_path):
    cfg, out = trained
    ckpt = out / "checkpoints" / "final.npz"
    code = cli.main(["export-trajectory", "--config", str(cfg),
                     "--out", str(tmp_path), "--checkpoint", str(ckpt),
                     "--instance-seed", "1"])
    assert code == 0
    lines = (tmp_path / "trajectory_1.jsonl").read_text().splitlines()
    assert len(lines) >= 2
    assert json.loads(lines[0])["t"] == 0


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"version": 1, "arena": {"d1": -5}}))
    assert cli.main(["train", "--config", str(bad),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    notjson = tmp_path / "broken.json"
    notjson.write_text("{")
    assert cli.main(["train", "--config", str(notjson),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"version": 1, "bogus_key": 3}))
    assert cli.main(["train", "--config", str(unknown),
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG


def test_incompatible_checkpoint_exit_code(trained, tmp_path):
    cfg, out = trained
    tensors, meta = load_checkpoint(out / "checkpoints" / "final.npz")
    tensors["upper.q.w0"] = np.zeros((5, 128))  # wrong encoding width
    doctored = tmp_path / "doctored.npz"
    save_checkpoint(doctored, tensors, meta)
    code = cli.main(["evaluate", "--config", str(cfg),
                     "--out", str(tmp_path / "o"),
                     "--checkpoint", str(doctored), "--instances", "1"])
    assert code == cli.EXIT_INCOMPATIBLE


def test_resume_flag_loads_checkpoint(trained, tmp_path):
    cfg, out = trained
    ckpt = out / "checkpoints" / "final.npz"
    code = cli.main(["cross-train", "--config", str(cfg),
                     "--out", str(tmp_path / "resume"), "--resume", str(ckpt)])
    assert code == 0
    assert (tmp_path / "resume" / "train_log.csv").exists()


def test_ablate_command(tmp_path):
    cfg = tmp_path / "config.json"
    tiny = dict(TINY)
    tiny["train"] = dict(TINY["train"], episodes_upper=1, episodes_lower=1,
                         episodes_cross=1)
    cfg.write_text(json.dumps(tiny))
    code = cli.main(["ablate", "--config", str(cfg), "--out", str(tmp_path / "ab")])
    assert code == 0
    assert (tmp_path / "ab" / "ablation_curves.csv").exists()
