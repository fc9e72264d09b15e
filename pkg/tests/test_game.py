"""Trainer tests: rollout protocol, evaluation oracle, best-response
freezing, alternation, and convergence guards."""

import math

import numpy as np
import pytest
import torch

from softsnake import env, game, policy
from softsnake.game import (CpgSnakeGame, GameConfig, GameError, JointPolicy,
                            Player, PointMassGame, ToyMatrixGame,
                            episode_metrics, fictitious_play, policy_eval,
                            ppo_learning, rollout)
from softsnake.policy import LearnerConfig


def _small_cfg(**kw):
    base = dict(eval_episodes=2, inner_rounds_max=2, episodes_per_round=2,
                n_max=2, learner=LearnerConfig(minibatch_size=16, epochs=1))
    base.update(kw)
    return GameConfig(**base)


class ConstantRewardGame:
    """Fixed-length episode paying a constant reward every step; used as an
    exact geometric-series oracle for policy evaluation."""

    control_dt = 1.0

    def __init__(self, reward=1.0, length=5, trigger=False):
        self.reward = reward
        self.length = length
        self.trigger = trigger

    def reset(self, rng):
        self.n = 0
        return (np.zeros(policy.C1_INPUT_WIDTH),
                np.zeros(policy.R2_INPUT_WIDTH), self.trigger)

    def step(self, a1, option_index, beta, a2):
        self.n += 1
        done = self.n >= self.length
        return (np.zeros(policy.C1_INPUT_WIDTH),
                np.zeros(policy.R2_INPUT_WIDTH), self.trigger, self.reward,
                done, {"status": env.EpisodeStatus.GOAL_REACHED if done
                       else env.EpisodeStatus.RUNNING})


def test_policy_eval_geometric_series_oracle():
    cfg = _small_cfg()
    gamma = cfg.learner.gamma
    joint = JointPolicy.fresh(seed=0)
    v, trajs = policy_eval(joint, lambda: ConstantRewardGame(2.0, 6),
                           episodes=3, config=cfg,
                           rng=np.random.default_rng(0), fit_values=False)
    expect = 2.0 * (1 - gamma ** 6) / (1 - gamma)
    assert v == pytest.approx(expect, rel=1e-12)
    assert all(len(t.steps) == 6 for t in trajs)
    assert all(t.episode_reward == pytest.approx(12.0) for t in trajs)


def test_policy_eval_value_fit_preserves_actor():
    cfg = _small_cfg()
    joint = JointPolicy.fresh(seed=1)
    zeta = np.random.default_rng(7).standard_normal(policy.C1_INPUT_WIDTH)
    mean_before = joint.pi1.forward_np(zeta)["mean"]
    policy_eval(joint, lambda: ConstantRewardGame(1.0, 4, trigger=True),
                episodes=2, config=cfg, rng=np.random.default_rng(0),
                fit_values=True)
    assert np.array_equal(joint.pi1.forward_np(zeta)["mean"], mean_before)


def test_rollout_r2_only_acts_when_triggered():
    joint = JointPolicy.fresh(seed=2)
    traj = rollout(ConstantRewardGame(1.0, 4, trigger=False), joint,
                   np.random.default_rng(0))
    assert all(s.sample2 is None for s in traj.steps)
    assert traj.trigger_fraction == 0.0
    traj = rollout(ConstantRewardGame(1.0, 4, trigger=True), joint,
                   np.random.default_rng(0))
    assert all(s.sample2 is not None for s in traj.steps)
    assert traj.trigger_fraction == 1.0


def test_untriggered_game_ignores_r2_weights():
    """With no obstacles R2 never acts, so its weights cannot change the
    trajectory."""
    g1 = CpgSnakeGame(obstacles=[], goal=(1.0, 0.0), max_steps=20)
    g2 = CpgSnakeGame(obstacles=[], goal=(1.0, 0.0), max_steps=20)
    torch.manual_seed(0)
    a = JointPolicy.fresh(seed=5)
    b = JointPolicy(pi1=a.pi1, pi2=policy.PolicyNet("r2"))  # different R2
    t1 = rollout(g1, a, np.random.default_rng(3))
    t2 = rollout(g2, b, np.random.default_rng(3))
    assert t1.episode_reward == t2.episode_reward
    assert np.array_equal(g1.state.poses, g2.state.poses)
    assert t1.trigger_fraction == 0.0


def test_ppo_learning_freezes_other_player():
    cfg = _small_cfg()
    joint = JointPolicy.fresh(seed=3)
    frozen_before = [p.detach().clone() for p in joint.pi2.parameters()]
    learner_before = [p.detach().clone() for p in joint.pi1.parameters()]
    ppo_learning(lambda: ToyMatrixGame(), joint, Player.C1, cfg,
                 np.random.default_rng(0))
    for b, p in zip(frozen_before, joint.pi2.parameters()):
        assert torch.equal(b, p.detach())
    assert any(not torch.equal(b, p.detach())
               for b, p in zip(learner_before, joint.pi1.parameters()))


def test_fictitious_play_alternates_and_logs():
    cfg = _small_cfg(epsilon=1e-12, n_max=3)  # never converges early
    joint = JointPolicy.fresh(seed=4)
    res = fictitious_play(joint, lambda: ToyMatrixGame(), cfg,
                          np.random.default_rng(0))
    assert res.iterations == 3 and not res.converged
    assert len(res.values) == 4
    learn_flags = [r.flag for r in res.log if r.phase == "learn"]
    # flag starts at R2 and alternates every macro-iteration
    order = []
    for f in learn_flags:
        if not order or order[-1] != f:
            order.append(f)
    assert order == ["r2", "c1", "r2"]
    evals = [r for r in res.log if r.phase == "eval"]
    assert {r.macro_iteration for r in evals} == {0, 1, 2, 3}


def test_fictitious_play_min_iteration_guard():
    """Even with a huge epsilon the play must run both players once."""
    cfg = _small_cfg(epsilon=1e9, n_max=4)
    joint = JointPolicy.fresh(seed=6)
    res = fictitious_play(joint, lambda: ToyMatrixGame(), cfg,
                          np.random.default_rng(1))
    assert res.converged and res.iterations == 2


def test_game_config_validation():
    with pytest.raises(GameError):
        GameConfig(w1=0.7, w2=0.7)
    with pytest.raises(GameError):
        GameConfig(epsilon=0.0)
    with pytest.raises(GameError):
        GameConfig(min_macro_iterations=1)
    with pytest.raises(GameError):
        GameConfig(lambda_br=0.0)
    cfg = GameConfig(lambda_br=10.0,
                     learner=LearnerConfig(entropy_coef=0.001))
    assert cfg.learner.entropy_coef == pytest.approx(0.1)  # floored at 1/lambda


def test_joint_policy_role_check():
    with pytest.raises(GameError):
        JointPolicy(pi1=policy.PolicyNet("r2"), pi2=policy.PolicyNet("r2"))


def test_snake_game_timing_validation():
    with pytest.raises(GameError):
        CpgSnakeGame(obstacles=[], goal=(1, 0), control_dt=0.1,
                     physics_dt=0.03)
    with pytest.raises(GameError):
        CpgSnakeGame(obstacles=[], goal=(1, 0), cpg_dt=0.05)


def test_snake_game_neutral_reaches_ahead_goal():
    """Neutral tonic input propels the warm-started gait straight to a
    dead-ahead goal."""
    g = CpgSnakeGame(obstacles=[], goal=(1.0, 0.0), max_steps=300)
    g.reset(np.random.default_rng(0))
    done = False
    info = {}
    while not done:
        _, _, _, _, done, info = g.step(np.zeros(4), 1, 0.0, None)
    assert info["status"] is env.EpisodeStatus.GOAL_REACHED


def test_snake_game_wrappers_match_inlined_kernels():
    """One control step through the inlined kernel loop equals chaining
    the public cpg/env stepping APIs."""
    from softsnake import cpg
    g = CpgSnakeGame(obstacles=[env.Obstacle((0.4, 0.0), 0.05)],
                     goal=(1.0, 0.0), max_steps=10)
    g.reset(np.random.default_rng(0))
    a1 = np.array([0.3, -0.2, 0.1, 0.0])
    # reference: public APIs
    u = cpg.decode_action(a1)
    cmd = cpg.CpgCommand(tonic=u, k_f=g.options[1])
    cpg_state = g.cpg_state.copy()
    state = g.state
    for _ in range(10):
        for _ in range(2):
            cpg_state = cpg.step_network(cpg_state, g.oscillator, cmd,
                                         g.cpg_dt)
        psi = cpg.network_output(cpg_state)[::-1]
        state, _ = env.step(state, psi, g.obstacles, g.robot, g.physics_dt)
    g.step(a1, 1, 0.0, None)
    assert np.array_equal(g.state.poses, state.poses)
    assert np.allclose(g.cpg_state.pack(), cpg_state.pack(), atol=0)


def test_episode_metrics_fields():
    g = CpgSnakeGame(obstacles=[], goal=(1.0, 0.0), max_steps=50)
    joint = JointPolicy.fresh(seed=7)
    traj = rollout(g, joint, np.random.default_rng(2))
    m = episode_metrics(g, traj)
    assert m.task_time == pytest.approx(len(traj.steps) * g.control_dt)
    assert 0.0 <= m.event_trigger_fraction <= 1.0
    assert m.distance >= 0.0
    assert m.jam_time <= m.task_time + 1e-12
    assert m.success == (traj.status is env.EpisodeStatus.GOAL_REACHED)


def test_point_mass_game_trigger_logic():
    g = PointMassGame(obstacles=[env.Obstacle((0.05, 0.0), 0.02)])
    _, _, trig = g.reset(np.random.default_rng(0))
    assert trig  # obstacle 0.03 m away < 0.15 detection range
    g2 = PointMassGame()
    _, _, trig2 = g2.reset(np.random.default_rng(0))
    assert not trig2


def test_toy_game_requires_r2():
    g = ToyMatrixGame()
    g.reset(np.random.default_rng(0))
    with pytest.raises(GameError):
        g.step(np.ones(4), 0, 0.0, None)
