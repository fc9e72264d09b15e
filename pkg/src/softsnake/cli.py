"""Command-line workbench: pretraining, fictitious-play training,
evaluation, single rollouts, checkpoint comparison, and plotting.

Every subcommand is deterministic given ``--seed`` and writes its
resolved configuration next to its outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from . import config as cfgmod
from . import cpg, env, game, plots, policy, scenarios

__all__ = ["main", "run_cli"]

METRIC_HEADER = ["label", "episodes", "jam_ratio", "avg_linear_velocity",
                 "success_rate", "avg_time_per_goal"]
EPISODE_HEADER = ["episode", "seed", "status", "success", "time_to_goal",
                  "jam_time", "task_time", "distance", "mean_speed",
                  "event_trigger_fraction", "episode_reward"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="YAML config file")
    p.add_argument("--out", default="runs/out", help="output directory")
    p.add_argument("--seed", type=int, default=0)


def _rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _empty_scenario(rng: np.random.Generator, seed: int,
                    accept_radius: float) -> scenarios.Scenario:
    """Goal-tracking pretraining world: no obstacles, training-range goal."""
    deviation = np.deg2rad(rng.uniform(0.0, 60.0))
    side = 1.0 if rng.random() < 0.5 else -1.0
    angle = side * deviation
    goal = (scenarios.TRAIN_GOAL_DISTANCE * np.cos(angle),
            scenarios.TRAIN_GOAL_DISTANCE * np.sin(angle))
    return scenarios.Scenario(obstacles=[], goal=goal,
                              accept_radius=accept_radius,
                              start_position=(0.0, 0.0), start_heading=0.0,
                              seed=seed)


def _scenario_factory(cfg: dict, kind: str, seed: int
                      ) -> Callable[[], game.CpgSnakeGame]:
    """Factory cycling deterministically through per-episode scenarios."""
    accept = cfg["scenario"]["accept_radius"]
    robot = cfgmod.make_robot(cfg)
    counter = {"i": 0}

    def factory() -> game.CpgSnakeGame:
        i = counter["i"]
        counter["i"] += 1
        rng = _rng_for(seed, i)
        if kind == "train":
            sc = scenarios.generate_training_scenario(rng, seed=i,
                                                      accept_radius=accept,
                                                      robot=robot)
        elif kind == "test":
            sc = scenarios.generate_test_scenario(rng, seed=i,
                                                  accept_radius=accept,
                                                  robot=robot)
        elif kind == "free":
            sc = _empty_scenario(rng, i, accept)
        else:
            raise ValueError(f"unknown scenario kind {kind}")
        return cfgmod.make_snake_game(cfg, sc)

    return factory


def _save(out_dir: Path, name: str, joint: game.JointPolicy,
          cfg: dict) -> Path:
    path = out_dir / name
    policy.save_checkpoint(str(path), {"pi1": joint.pi1, "pi2": joint.pi2},
                           meta={"config_digest": cfgmod.digest(cfg)})
    return path


def _load_joint(path: str) -> game.JointPolicy:
    nets, _ = policy.load_checkpoint(path)
    return game.JointPolicy(pi1=nets["pi1"], pi2=nets["pi2"])


def _write_log(log: list[game.LogRecord], path: Path) -> None:
    rows = [[i, r.macro_iteration, r.phase, r.flag, repr(r.episode_reward),
             r.episode_length, repr(r.trigger_fraction)]
            for i, r in enumerate(log)]
    plots.write_table(path, ["episode", "macro_iteration", "phase", "flag",
                             "reward", "length", "trigger_fraction"], rows)


# ---------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------

def cmd_pretrain_free(args) -> int:
    cfg = cfgmod.resolve(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved(cfg, out)
    torch.manual_seed(args.seed)
    joint = game.JointPolicy.fresh(args.seed)
    gcfg = cfgmod.make_game_config(cfg)
    if args.rounds is not None:
        gcfg.inner_rounds_max = args.rounds
    rng = _rng_for(args.seed, 10_000)
    log: list[game.LogRecord] = []
    factory = _scenario_factory(cfg, "free", args.seed)
    v, _ = game.ppo_learning(factory, joint, game.Player.C1, gcfg, rng,
                             log=log, macro_iteration=0)
    _write_log(log, out / "pretrain_log.csv")
    path = _save(out, "pi1_free.ckpt", joint, cfg)
    print(f"pretrained C1 saved to {path} (final mean episode reward "
          f"{v:.4f})")
    return 0


def cmd_train(args) -> int:
    cfg = cfgmod.resolve(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved(cfg, out)
    torch.manual_seed(args.seed)
    if args.init:
        joint = _load_joint(args.init)
    else:
        joint = game.JointPolicy.fresh(args.seed)
    gcfg = cfgmod.make_game_config(cfg)
    rng = _rng_for(args.seed, 20_000)
    factory = _scenario_factory(cfg, "train", args.seed)

    def hook(i: int, j: game.JointPolicy) -> None:
        _save(out, f"joint_iter{i:02d}.ckpt", j, cfg)

    result = game.fictitious_play(joint, factory, gcfg, rng,
                                  checkpoint_hook=hook)
    _write_log(result.log, out / "training_log.csv")
    path = _save(out, "joint_final.ckpt", result.joint, cfg)
    flag = "converged" if result.converged else "max-iterations"
    values = ", ".join(f"{v:.4f}" for v in result.values)
    print(f"fictitious play {flag} after {result.iterations} iterations; "
          f"V = [{values}]; checkpoint {path}")
    return 0


def _evaluate_joint(cfg: dict, joint: game.JointPolicy, episodes: int,
                    seed: int, use_r2: bool = True
                    ) -> tuple[scenarios.AggregateMetrics,
                               list[list], list]:
    factory = _scenario_factory(cfg, "test", seed)
    records, rows = [], []
    for i in range(episodes):
        snake = factory()
        rng = _rng_for(seed, 30_000 + i)
        traj = game.rollout(snake, joint, rng, use_r2=use_r2)
        m = game.episode_metrics(snake, traj)
        records.append(m)
        rows.append([i, seed, traj.status.value, int(m.success),
                     "n/a" if m.time_to_goal is None else repr(m.time_to_goal),
                     repr(m.jam_time), repr(m.task_time), repr(m.distance),
                     repr(m.mean_speed), repr(m.event_trigger_fraction),
                     repr(traj.episode_reward)])
    return scenarios.compute_metrics(records), rows, records


def cmd_evaluate(args) -> int:
    cfg = cfgmod.resolve(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved(cfg, out)
    joint = _load_joint(args.checkpoint)
    agg, rows, _ = _evaluate_joint(cfg, joint, args.episodes, args.seed,
                                   use_r2=not args.solo)
    plots.write_table(out / "episodes.csv", EPISODE_HEADER, rows)
    r = agg.as_row()
    plots.write_table(out / "metrics.csv", METRIC_HEADER,
                      [[args.label, r["episodes"], r["jam_ratio"],
                        r["avg_linear_velocity"], r["success_rate"],
                        r["avg_time_per_goal"]]])
    print((out / "metrics.csv").read_text().strip())
    return 0


def cmd_compare(args) -> int:
    cfg = cfgmod.resolve(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved(cfg, out)
    labels = args.labels or [Path(p).stem for p in args.checkpoints]
    if len(labels) != len(args.checkpoints):
        print("error: --labels must match --checkpoints", file=sys.stderr)
        return 2
    solo = set(args.solo or [])
    unknown = solo - set(labels) - {"untrained"}
    if unknown:
        print(f"error: --solo labels {sorted(unknown)} not in --labels",
              file=sys.stderr)
        return 2
    entries = list(zip(labels, args.checkpoints))
    if args.untrained:
        entries.append(("untrained", None))
    rows = []
    for label, ckpt in entries:
        if ckpt is None:
            torch.manual_seed(args.seed)
            joint = game.JointPolicy.fresh(args.seed)
        else:
            joint = _load_joint(ckpt)
        agg, _, _ = _evaluate_joint(cfg, joint, args.episodes, args.seed,
                                    use_r2=label not in solo)
        r = agg.as_row()
        rows.append([label, r["episodes"], r["jam_ratio"],
                     r["avg_linear_velocity"], r["success_rate"],
                     r["avg_time_per_goal"]])
    plots.write_table(out / "compare.csv", METRIC_HEADER, rows)
    print((out / "compare.csv").read_text().strip())
    return 0


def cmd_rollout(args) -> int:
    cfg = cfgmod.resolve(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.write_resolved(cfg, out)
    joint = _load_joint(args.checkpoint)
    accept = cfg["scenario"]["accept_radius"]
    rng_sc = _rng_for(args.seed, 40_000)
    if args.no_obstacles:
        sc = _empty_scenario(rng_sc, args.seed, accept)
    elif args.scenario == "train":
        sc = scenarios.generate_training_scenario(
            rng_sc, seed=args.seed, accept_radius=accept,
            robot=cfgmod.make_robot(cfg))
    else:
        sc = scenarios.generate_test_scenario(
            rng_sc, seed=args.seed, accept_radius=accept,
            robot=cfgmod.make_robot(cfg))
    snake = cfgmod.make_snake_game(cfg, sc)
    traj = game.rollout(snake, joint, _rng_for(args.seed, 41_000))
    m = game.episode_metrics(snake, traj)
    with open(out / "trajectory.jsonl", "w") as fh:
        for i, (s, state) in enumerate(zip(traj.steps, snake.history[1:])):
            fh.write(json.dumps({
                "step": i,
                "head": list(map(float, state.poses[0])),
                "kappa": list(map(float, state.kappa)),
                "action1": s.sample1.action.tolist(),
                "action2": (s.sample2.action.tolist()
                            if s.sample2 is not None else None),
                "k_f": snake.options[s.sample1.option_index],
                "beta": s.sample1.beta,
                "triggered": bool(s.triggered),
                "reward": s.reward,
            }) + "\n")
    record = {
        "status": traj.status.value,
        "success": m.success,
        "time_to_goal": m.time_to_goal,
        "jam_time": m.jam_time,
        "task_time": m.task_time,
        "distance": m.distance,
        "mean_speed": m.mean_speed,
        "event_trigger_fraction": m.event_trigger_fraction,
        "episode_reward": traj.episode_reward,
        "scenario_seed": sc.seed,
    }
    (out / "episode.json").write_text(json.dumps(record, indent=2))
    print(json.dumps(record, indent=2))
    return 0


def cmd_plot(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "curve":
        header, rows = plots.read_table(args.input)
        recs = [game.LogRecord(phase=r[2], macro_iteration=int(r[1]),
                               flag=r[3], episode_reward=float(r[4]),
                               episode_length=int(r[5]),
                               trigger_fraction=float(r[6]))
                for r in rows]
        svg, table = plots.plot_learning_curve(recs, out / "learning_curve")
    elif args.kind == "path":
        steps = [json.loads(line)
                 for line in Path(args.input).read_text().splitlines()]
        positions = np.array([[s["head"][0], s["head"][1]] for s in steps])
        rewards = np.array([s["reward"] for s in steps[1:]])
        obstacles, goal = [], (0.0, 0.0)
        if args.scenario_seed is not None:
            sc = scenarios.generate_test_scenario(
                _rng_for(args.scenario_seed, 40_000), seed=args.scenario_seed)
            obstacles, goal = sc.obstacles, sc.goal
        svg, table = plots.plot_path(positions, rewards, obstacles, goal,
                                     out / "path")
    elif args.kind == "events":
        steps = [json.loads(line)
                 for line in Path(args.input).read_text().splitlines()]
        t = np.arange(len(steps)) * 0.1
        sig = lambda x: 1.0 / (1.0 + np.exp(-np.asarray(x)))
        traces = {
            "u_1": np.array([float(sig(s["action1"])[0]) for s in steps]),
            "K_f^-1/2": np.array([s["k_f"] ** -0.5 for s in steps]),
            "kappa_1": np.array([s["kappa"][0] for s in steps]),
            "f_1": np.array([s["reward"] for s in steps]),
        }
        trigger = np.array([s["triggered"] for s in steps])
        svg, table = plots.plot_event_traces(t, traces, trigger,
                                             out / "events")
    else:
        print(f"unknown plot kind {args.kind}", file=sys.stderr)
        return 2
    print(f"wrote {svg} and {table}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softsnake",
        description="Obstacle-aware soft-snake locomotion workbench")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain-free",
                       help="train the gait controller without obstacles")
    _add_common(p)
    p.add_argument("--rounds", type=int, default=None,
                   help="override inner update-round cap")
    p.set_defaults(func=cmd_pretrain_free)

    p = sub.add_parser("train", help="fictitious-play training in the maze")
    _add_common(p)
    p.add_argument("--init", default=None,
                   help="checkpoint with the pretrained controller")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the test-maze benchmark")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--episodes", type=int, default=30)
    p.add_argument("--label", default="policy")
    p.add_argument("--solo", action="store_true",
                   help="benchmark the gait controller alone (R2 disabled)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="benchmark several checkpoints")
    _add_common(p)
    p.add_argument("--checkpoints", nargs="+", required=True)
    p.add_argument("--labels", nargs="+", default=None)
    p.add_argument("--episodes", type=int, default=30)
    p.add_argument("--untrained", action="store_true",
                   help="append a fresh random-policy row")
    p.add_argument("--solo", nargs="*", default=None,
                   help="labels benchmarked with R2 disabled")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("rollout", help="single episode with full export")
    _add_common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--scenario", choices=["train", "test"], default="test")
    p.add_argument("--no-obstacles", action="store_true")
    p.set_defaults(func=cmd_rollout)

    p = sub.add_parser("plot", help="render figures from exported tables")
    _add_common(p)
    p.add_argument("--kind", choices=["curve", "path", "events"],
                   required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--scenario-seed", type=int, default=None)
    p.set_defaults(func=cmd_plot)
    return parser


def run_cli(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
