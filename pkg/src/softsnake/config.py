"""Workbench configuration: one YAML file with a section per module.

Every run resolves its configuration (defaults overlaid with the file
and CLI overrides), writes the resolved copy next to its outputs, and
embeds a digest of it in checkpoints so artifacts can be traced back.
"""

from __future__ import annotations

import copy
import hashlib
import json
from pathlib import Path
from typing import Any, Optional

import yaml

from . import cpg, env, game, policy, potential

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "load_config",
    "resolve",
    "write_resolved",
    "digest",
    "make_oscillator",
    "make_robot",
    "make_field",
    "make_learner",
    "make_game_config",
    "make_snake_game",
]


class ConfigError(ValueError):
    """Raised on unknown keys or malformed configuration files."""


DEFAULTS: dict[str, Any] = {
    "oscillator": {
        "tau_r": 0.1,
        "tau_a": 0.5,
        "a": 1.9,
        "b": 2.0,
        "n": 4,
        "coupling_weight": 0.5,
    },
    "robot": {
        "n_links": 4,
        "link_length": 0.1,
        "body_mass": 0.08,
        "body_radius": 0.02,
        "c_t": 0.4,
        "c_n": 8.0,
        "c_r": 0.002,
        "kappa_gain": 20.0,
        "tau_act": 0.15,
        "contact_stiffness": 600.0,
    },
    "reward": {
        "k_att": 1.0,
        "k_rep": 0.01,
        "rho_0": 0.2,
        "levels": [0.2, 0.1, 0.05],
        "omega": [1.0, 1.0, 1.0],
    },
    "learner": {
        "gamma": 0.99,
        "gae_lambda": 0.96,
        "clip_ratio": 0.2,
        "learning_rate": 5e-4,
        "minibatch_size": 256,
        "epochs": 8,
        "entropy_coef": 0.01,
        "value_coef": 0.5,
        "max_grad_norm": 0.5,
        "options": [0.5, 1.0, 2.0, 4.0],
    },
    "game": {
        "epsilon": 0.05,
        "n_max": 6,
        "lambda_br": 100.0,
        "w1": 0.5,
        "w2": 0.5,
        "eval_episodes": 5,
        "inner_epsilon": 0.05,
        "inner_rounds_max": 10,
        "episodes_per_round": 8,
        "min_macro_iterations": 2,
        "detection_range": 0.15,
    },
    "timing": {
        "control_dt": 0.1,
        "physics_dt": 0.01,
        "cpg_dt": 0.005,
        "cpg_warmup": 10.0,
        "max_steps": 600,
    },
    "scenario": {
        "accept_radius": 0.1,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {where}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"{where} must be a mapping")
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str] = None) -> dict:
    """Defaults overlaid with the YAML file at `path` (if given)."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be a mapping")
    return _merge(DEFAULTS, raw)


def resolve(path: Optional[str] = None,
            overrides: Optional[dict] = None) -> dict:
    """File config plus nested CLI overrides ({section: {key: value}})."""
    cfg = load_config(path)
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def write_resolved(cfg: dict, out_dir: str,
                   name: str = "resolved_config.yaml") -> Path:
    out = Path(out_dir) / name
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(yaml.safe_dump(cfg, sort_keys=True))
    return out


def digest(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def make_oscillator(cfg: dict) -> cpg.OscillatorParams:
    c = cfg["oscillator"]
    return cpg.OscillatorParams(
        tau_r=c["tau_r"], tau_a=c["tau_a"], a=c["a"], b=c["b"], n=c["n"],
        w=cpg.chain_coupling(c["n"], c["coupling_weight"]))


def make_robot(cfg: dict) -> env.RobotConfig:
    return env.RobotConfig(**cfg["robot"])


def make_field(cfg: dict) -> potential.FieldParams:
    c = cfg["reward"]
    return potential.FieldParams(
        k_att=c["k_att"], k_rep=c["k_rep"], rho_0=c["rho_0"],
        levels=tuple(c["levels"]), omega=tuple(c["omega"]))


def make_learner(cfg: dict) -> policy.LearnerConfig:
    c = dict(cfg["learner"])
    c["options"] = tuple(c["options"])
    return policy.LearnerConfig(**c)


def make_game_config(cfg: dict) -> game.GameConfig:
    c = dict(cfg["game"])
    c.pop("detection_range")
    return game.GameConfig(learner=make_learner(cfg), **c)


def make_snake_game(cfg: dict, scenario) -> game.CpgSnakeGame:
    t = cfg["timing"]
    return game.CpgSnakeGame(
        obstacles=scenario.obstacles,
        goal=scenario.goal,
        accept_radius=scenario.accept_radius,
        start_pose=(scenario.start_position, scenario.start_heading),
        robot=make_robot(cfg),
        oscillator=make_oscillator(cfg),
        reward_params=make_field(cfg),
        options=tuple(cfg["learner"]["options"]),
        w1=cfg["game"]["w1"], w2=cfg["game"]["w2"],
        detection_range=cfg["game"]["detection_range"],
        control_dt=t["control_dt"], physics_dt=t["physics_dt"],
        cpg_dt=t["cpg_dt"], cpg_warmup=t["cpg_warmup"],
        max_steps=t["max_steps"])
