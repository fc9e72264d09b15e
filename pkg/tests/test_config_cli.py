"""Configuration merging, CLI plumbing, determinism of the evaluate
command, and plotting smoke tests."""

import json
from pathlib import Path

import numpy as np
import pytest
import torch

from softsnake import cli, config as cfgmod, game, plots, policy


# ---------------------------------------------------------------------
# config
# ---------------------------------------------------------------------

def test_defaults_roundtrip(tmp_path):
    cfg = cfgmod.resolve(None)
    assert cfg == cfgmod.DEFAULTS
    path = cfgmod.write_resolved(cfg, tmp_path)
    assert cfgmod.load_config(str(path)) == cfg


def test_override_merge(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("learner:\n  gamma: 0.9\ntiming:\n  max_steps: 50\n")
    cfg = cfgmod.load_config(str(p))
    assert cfg["learner"]["gamma"] == 0.9
    assert cfg["timing"]["max_steps"] == 50
    # untouched sections keep their defaults
    assert cfg["robot"] == cfgmod.DEFAULTS["robot"]


def test_unknown_key_rejected(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("learner:\n  gammma: 0.9\n")
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.load_config(str(p))
    with pytest.raises(cfgmod.ConfigError):
        cfgmod.resolve(None, {"nosuchsection": {}})


def test_digest_stable_and_sensitive():
    a = cfgmod.resolve(None)
    b = cfgmod.resolve(None)
    assert cfgmod.digest(a) == cfgmod.digest(b)
    b["learner"]["gamma"] = 0.5
    assert cfgmod.digest(a) != cfgmod.digest(b)


def test_factories_build():
    cfg = cfgmod.resolve(None)
    cfgmod.make_oscillator(cfg)
    cfgmod.make_robot(cfg)
    cfgmod.make_field(cfg)
    cfgmod.make_learner(cfg)
    gc = cfgmod.make_game_config(cfg)
    assert gc.min_macro_iterations == 2


# ---------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------

def _fast_cfg(tmp_path):
    p = tmp_path / "fast.yaml"
    p.write_text("timing:\n  max_steps: 30\n"
                 "game:\n  eval_episodes: 1\n  episodes_per_round: 1\n"
                 "  inner_rounds_max: 1\n  n_max: 2\n")
    return str(p)


def _checkpoint(tmp_path, seed=0):
    torch.manual_seed(seed)
    joint = game.JointPolicy.fresh(seed)
    path = tmp_path / "joint.ckpt"
    policy.save_checkpoint(str(path), {"pi1": joint.pi1, "pi2": joint.pi2})
    return str(path)


def test_usage_error_exit_code():
    assert cli.run_cli([]) != 0
    assert cli.run_cli(["plot", "--kind", "nope", "--input", "x"]) != 0


def test_evaluate_determinism(tmp_path, capsys):
    ckpt = _checkpoint(tmp_path)
    cfg = _fast_cfg(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = cli.run_cli(["evaluate", "--config", cfg, "--checkpoint", ckpt,
                          "--episodes", "2", "--seed", "5",
                          "--out", str(out)])
        assert rc == 0
        outs.append((out / "metrics.csv").read_bytes()
                    + (out / "episodes.csv").read_bytes())
    assert outs[0] == outs[1]


def test_evaluate_solo_drops_r2(tmp_path):
    """With R2 disabled the trajectory ignores the R2 weights entirely."""
    cfg = _fast_cfg(tmp_path)
    torch.manual_seed(3)
    j1 = game.JointPolicy.fresh(3)
    torch.manual_seed(3)
    j2 = game.JointPolicy.fresh(3)
    with torch.no_grad():  # different R2s, same C1
        for p in j2.pi2.parameters():
            p.add_(1.0)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    policy.save_checkpoint(str(p1), {"pi1": j1.pi1, "pi2": j1.pi2})
    policy.save_checkpoint(str(p2), {"pi1": j2.pi1, "pi2": j2.pi2})
    rows = []
    for i, ck in enumerate((p1, p2)):
        out = tmp_path / f"solo{i}"
        assert cli.run_cli(["evaluate", "--config", cfg, "--checkpoint",
                            str(ck), "--episodes", "2", "--seed", "1",
                            "--solo", "--out", str(out)]) == 0
        rows.append((out / "episodes.csv").read_bytes())
    assert rows[0] == rows[1]


def test_rollout_no_obstacles_never_triggers(tmp_path):
    ckpt = _checkpoint(tmp_path)
    cfg = _fast_cfg(tmp_path)
    out = tmp_path / "roll"
    rc = cli.run_cli(["rollout", "--config", cfg, "--checkpoint", ckpt,
                      "--no-obstacles", "--seed", "2", "--out", str(out)])
    assert rc == 0
    record = json.loads((out / "episode.json").read_text())
    assert record["event_trigger_fraction"] == 0.0
    lines = (out / "trajectory.jsonl").read_text().splitlines()
    assert len(lines) == record["task_time"] / 0.1
    assert all(not json.loads(l)["triggered"] for l in lines)


def test_compare_with_untrained_row(tmp_path):
    ckpt = _checkpoint(tmp_path)
    cfg = _fast_cfg(tmp_path)
    out = tmp_path / "cmp"
    rc = cli.run_cli(["compare", "--config", cfg, "--checkpoints", ckpt,
                      "--labels", "base", "--episodes", "1", "--seed", "3",
                      "--untrained", "--solo", "base", "untrained",
                      "--out", str(out)])
    assert rc == 0
    header, rows = plots.read_table(out / "compare.csv")
    assert header == cli.METRIC_HEADER
    assert [r[0] for r in rows] == ["base", "untrained"]
    rc = cli.run_cli(["compare", "--config", cfg, "--checkpoints", ckpt,
                      "--labels", "base", "--solo", "nolabel",
                      "--out", str(tmp_path / "cmp2")])
    assert rc == 2


def test_plot_smoke(tmp_path):
    ckpt = _checkpoint(tmp_path)
    cfg = _fast_cfg(tmp_path)
    roll = tmp_path / "roll"
    assert cli.run_cli(["rollout", "--config", cfg, "--checkpoint", ckpt,
                        "--seed", "4", "--out", str(roll)]) == 0
    for kind, inp in (("path", roll / "trajectory.jsonl"),
                      ("events", roll / "trajectory.jsonl")):
        out = tmp_path / f"plot_{kind}"
        assert cli.run_cli(["plot", "--kind", kind, "--input", str(inp),
                            "--out", str(out)]) == 0
        assert list(out.glob("*.svg")) and list(out.glob("*.csv"))


def test_plot_curve_from_training_log(tmp_path):
    recs = [game.LogRecord(phase="eval", macro_iteration=0, flag="both",
                           episode_reward=1.0, episode_length=3,
                           trigger_fraction=0.0),
            game.LogRecord(phase="learn", macro_iteration=1, flag="r2",
                           episode_reward=2.0, episode_length=3,
                           trigger_fraction=0.5)]
    log = tmp_path / "log.csv"
    cli._write_log(recs, log)
    out = tmp_path / "curve"
    assert cli.run_cli(["plot", "--kind", "curve", "--input", str(log),
                        "--out", str(out)]) == 0
    assert (out / "learning_curve.svg").exists()
    # log round-trips exactly (rewards stored with repr)
    _, rows = plots.read_table(log)
    assert float(rows[0][4]) == 1.0 and rows[1][3] == "r2"


def test_table_roundtrip(tmp_path):
    p = tmp_path / "t.csv"
    rows = [[1, "a", repr(0.1)], [2, "b", repr(0.2)]]
    plots.write_table(p, ["i", "s", "x"], rows)
    header, back = plots.read_table(p)
    assert header == ["i", "s", "x"]
    assert [[int(r[0]), r[1], float(r[2])] for r in back] == \
        [[1, "a", 0.1], [2, "b", 0.2]]
