"""Fictitious cooperative game: alternating best-response training of the
gait controller (C1) and the event-triggered contact regulator (R2).

Both players share one reward stream (a potential game), so each
macro-iteration freezes one player and lets the other run clipped-
surrogate updates until its mean episode reward stops moving; the outer
loop stops when the evaluated value changes by less than ``epsilon``.
"""

from __future__ import annotations

import copy
import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Protocol

import numpy as np
import torch

from . import _kernels, cpg, env, policy, potential
from .policy import (ACTION_WIDTH, Batch, K_F_OPTIONS, LearnerConfig,
                     PolicyNet, StepSample, gae_advantages, ppo_update,
                     sample_step, value_update)

__all__ = [
    "GameError",
    "Player",
    "GameConfig",
    "JointPolicy",
    "StepRecord",
    "Trajectory",
    "TwoPlayerEnv",
    "CpgSnakeGame",
    "ToyMatrixGame",
    "PointMassGame",
    "rollout",
    "policy_eval",
    "ppo_learning",
    "fictitious_play",
    "LogRecord",
    "FictitiousPlayResult",
]


class GameError(Exception):
    """Raised on invalid game configuration or protocol misuse."""


class Player(enum.Enum):
    C1 = "c1"
    R2 = "r2"


@dataclass
class GameConfig:
    """Outer/inner loop parameters of the fictitious play."""

    epsilon: float = 0.05           # outer value-convergence threshold
    n_max: int = 6                  # macro-iteration cap
    lambda_br: float = 100.0        # best-response smoothing temperature
    w1: float = 0.5                 # composition weight of C1
    w2: float = 0.5                 # composition weight of R2
    eval_episodes: int = 5
    inner_epsilon: float = 0.05     # inner mean-reward convergence tolerance
    inner_rounds_max: int = 10      # update-round cap per macro-iteration
    episodes_per_round: int = 8
    min_macro_iterations: int = 2   # macro-iterations before dV is trusted
    learner: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self) -> None:
        if self.epsilon <= 0 or self.inner_epsilon <= 0:
            raise GameError("convergence thresholds must be positive")
        if self.n_max < 1 or self.inner_rounds_max < 1:
            raise GameError("iteration caps must be at least 1")
        if self.min_macro_iterations < 2:
            raise GameError(
                "min_macro_iterations must be at least 2 so both players "
                "respond before the convergence test can fire")
        if self.w1 < 0 or self.w2 < 0 or abs(self.w1 + self.w2 - 1.0) > 1e-9:
            raise GameError("w1, w2 must be nonnegative and sum to 1")
        if self.lambda_br <= 0:
            raise GameError("lambda_br must be positive")
        # Perturbed best response: keep the policies stochastic with an
        # entropy bonus floored at 1/lambda.
        floor = 1.0 / self.lambda_br
        if self.learner.entropy_coef < floor:
            self.learner.entropy_coef = floor


@dataclass
class JointPolicy:
    """The two players plus the alternation flag."""

    pi1: PolicyNet
    pi2: PolicyNet
    flag: Player = Player.R2

    def __post_init__(self) -> None:
        if self.pi1.role != "c1" or self.pi2.role != "r2":
            raise GameError("pi1 must be a C1 net and pi2 an R2 net")

    @classmethod
    def fresh(cls, seed: int = 0) -> "JointPolicy":
        torch.manual_seed(seed)
        return cls(pi1=PolicyNet("c1"), pi2=PolicyNet("r2"))

    def net(self, player: Player) -> PolicyNet:
        return self.pi1 if player is Player.C1 else self.pi2


@dataclass
class StepRecord:
    """One control step of a two-player trajectory."""

    obs1: np.ndarray
    obs2: np.ndarray
    sample1: StepSample
    sample2: Optional[StepSample]
    triggered: bool
    reward: float
    terminal: bool


@dataclass
class Trajectory:
    steps: list[StepRecord]
    bootstrap1: float
    bootstrap2: float
    status: env.EpisodeStatus
    info: dict

    @property
    def episode_reward(self) -> float:
        return float(sum(s.reward for s in self.steps))

    @property
    def trigger_fraction(self) -> float:
        if not self.steps:
            return 0.0
        return sum(s.triggered for s in self.steps) / len(self.steps)


class TwoPlayerEnv(Protocol):
    """Control-rate environment over which C1 and R2 cooperate.

    ``reset`` returns the pair of observations plus whether the event
    trigger is active (R2 acts only then). ``step`` consumes C1's action
    and option index plus R2's action (or None when not triggered).
    """

    control_dt: float

    def reset(self, rng: np.random.Generator
              ) -> tuple[np.ndarray, np.ndarray, bool]: ...

    def step(self, a1: np.ndarray, option_index: int, beta: float,
             a2: Optional[np.ndarray]
             ) -> tuple[np.ndarray, np.ndarray, bool, float, bool, dict]: ...


_WARM_CACHE: dict[tuple, cpg.NetworkState] = {}


def _warm_cpg_state(p: cpg.OscillatorParams, warmup: float,
                    dt: float) -> cpg.NetworkState:
    """Limit-cycle state after `warmup` seconds at neutral tonic input,
    cached so per-episode environment factories stay cheap."""
    key = (p.tau_r, p.tau_a, p.a, p.b, p.n, p.w.tobytes(), warmup, dt)
    if key not in _WARM_CACHE:
        neutral = cpg.CpgCommand(tonic=cpg.TonicInput(
            u_e=np.full(p.n, 0.5), u_f=np.full(p.n, 0.5)))
        _, state = cpg.simulate(p, neutral, warmup, dt=dt)
        _WARM_CACHE[key] = state
    return _WARM_CACHE[key].copy()


class CpgSnakeGame:
    """The snake-locomotion game: CPG-driven proxy robot in an obstacle
    field with the shared potential-field reward.

    Oscillator i drives link n-1-i: the head-to-tail coupling wave then
    travels tailward along the body, which is the propelling direction.
    """

    def __init__(self,
                 obstacles: list[env.Obstacle],
                 goal,
                 accept_radius: float = 0.1,
                 start_pose=((0.0, 0.0), 0.0),
                 robot: Optional[env.RobotConfig] = None,
                 oscillator: Optional[cpg.OscillatorParams] = None,
                 reward_params: Optional[potential.FieldParams] = None,
                 options: tuple[float, ...] = K_F_OPTIONS,
                 w1: float = 0.5, w2: float = 0.5,
                 detection_range: float = 0.15,
                 control_dt: float = 0.1,
                 physics_dt: float = 0.01,
                 cpg_dt: float = 0.005,
                 cpg_warmup: float = 10.0,
                 max_steps: int = 600):
        self.obstacles = list(obstacles)
        self.goal = np.asarray(goal, dtype=float)
        self.accept_radius = accept_radius
        self.start_position, self.start_heading = start_pose
        self.robot = robot or env.RobotConfig()
        self.oscillator = oscillator or cpg.OscillatorParams(
            n=self.robot.n_links)
        self.reward_params = reward_params or potential.FieldParams()
        self.options = options
        self.w1, self.w2 = w1, w2
        self.detection_range = detection_range
        self.control_dt = control_dt
        self.physics_dt = physics_dt
        self.cpg_dt = cpg_dt
        self.max_steps = max_steps
        if (control_dt / physics_dt) % 1 or (physics_dt / cpg_dt) % 1:
            raise GameError("time steps must nest evenly")
        bound = min(self.options) * self.oscillator.tau_r / 5.0
        if cpg_dt > bound + 1e-15:
            raise GameError(
                f"cpg_dt={cpg_dt} exceeds the stability bound {bound} of "
                f"the slowest option")
        # Deterministic warm start: integrate the network at neutral tonic
        # input until it sits on the limit cycle, so episodes begin with a
        # moving gait instead of a cold (jam-flagged) transient.
        self._warm_state = _warm_cpg_state(self.oscillator, cpg_warmup,
                                           cpg_dt)
        if self.obstacles:
            self._centers = np.array([ob.center for ob in self.obstacles],
                                     dtype=float)
            self._radii = np.array([ob.radius for ob in self.obstacles],
                                   dtype=float)
        else:
            self._centers = np.zeros((0, 2))
            self._radii = np.zeros(0)

    def _make_state(self) -> env.RobotState:
        poses = env._world_poses(self._head, self._kappa, self.robot)
        velocities = np.zeros((self.robot.n_bodies, 3))
        velocities[0] = self._qdot
        return env.RobotState(poses=poses, kappa=self._kappa.copy(),
                              velocities=velocities)

    # -- episode state ------------------------------------------------
    def reset(self, rng: np.random.Generator
              ) -> tuple[np.ndarray, np.ndarray, bool]:
        del rng  # scenario deterministic; stochasticity lives in the policies
        self._head = np.array([*self.start_position, self.start_heading],
                              dtype=float)
        self._kappa = np.zeros(self.robot.n_links)
        self._qdot = np.zeros(3)
        self.state = self._make_state()
        self.cpg_state = self._warm_state.copy()
        self._cpg_vec = self.cpg_state.pack()
        self.history = [self.state]
        self.n_steps = 0
        self.prev_action = np.zeros(ACTION_WIDTH)
        self.prev_option = 1.0 / max(self.options)
        self.prev_beta = 0.0
        self.prev_goal_polar: Optional[tuple[float, float]] = None
        f = np.zeros(2 * self.robot.n_bodies)
        nearest = env.nearest_obstacle(self.state, self.obstacles)
        zeta = self._observe(f, nearest)
        triggered = env.event_trigger(f, nearest[0], self.detection_range)
        return zeta[:policy.C1_INPUT_WIDTH], zeta, triggered

    def _observe(self, f: np.ndarray, nearest) -> np.ndarray:
        return env.observe(self.state, self.goal, self.prev_action,
                           self.prev_option, self.prev_beta, f, nearest,
                           self.prev_goal_polar, self.control_dt)

    def step(self, a1: np.ndarray, option_index: int, beta: float,
             a2: Optional[np.ndarray]
             ) -> tuple[np.ndarray, np.ndarray, bool, float, bool, dict]:
        u1 = cpg.decode_action(a1)
        if a2 is not None:
            u = cpg.compose_tonic(u1, cpg.decode_action(a2),
                                  self.w1, self.w2)
        else:
            u = u1
        k_f = self.options[option_index]

        self.prev_goal_polar = env.goal_polar(self.state, self.goal)
        raw_acc = np.zeros((self.robot.n_bodies, 4))
        n_phys = int(round(self.control_dt / self.physics_dt))
        n_cpg = int(round(self.physics_dt / self.cpg_dt))
        p, rc = self.oscillator, self.robot
        # Inner integration runs on the compiled kernels directly (state
        # boxing per sub-step is the rollout bottleneck); the results are
        # identical to chaining cpg.step_network and env.step.
        for _ in range(n_phys):
            self._cpg_vec = _kernels.cpg_rk4(
                self._cpg_vec, p.w, p.tau_r, p.tau_a, p.a, p.b,
                u.u_e, u.u_f, k_f, self.cpg_dt, n_cpg)
            psi = _kernels.cpg_output(self._cpg_vec, p.n)[::-1].copy()
            self._head, self._kappa, self._qdot, raw = _kernels.physics_step(
                self._head, self._kappa, self._qdot, psi,
                self._centers, self._radii, rc.sensor_angles,
                rc.link_length, rc.body_mass, rc.body_radius,
                rc.c_t, rc.c_n, rc.c_r, rc.kappa_gain, rc.tau_act,
                rc.contact_stiffness, self.physics_dt)
            raw_acc += raw
        self.cpg_state = cpg.NetworkState.unpack(self._cpg_vec, p.n)
        self.state = self._make_state()
        f = env.sense_contacts(raw_acc / n_phys)
        nearest = env.nearest_obstacle(self.state, self.obstacles)
        triggered = env.event_trigger(f, nearest[0], self.detection_range)

        rho_g, theta_g = env.goal_polar(self.state, self.goal)
        reward = potential.step_reward(
            self.state.head_velocity, self.state.head_position, self.goal,
            theta_g, self.obstacles, self.reward_params)

        self.history.append(self.state)
        self.n_steps += 1
        self.prev_action = np.asarray(a1, dtype=float)
        self.prev_option = k_f / max(self.options)
        self.prev_beta = beta
        status = env.episode_status(self.history, self.goal,
                                    self.accept_radius, self.control_dt)
        done = (status is not env.EpisodeStatus.RUNNING
                or self.n_steps >= self.max_steps)
        zeta = self._observe(f, nearest)
        info = {"status": status, "rho_g": rho_g,
                "speed": float(np.hypot(*self.state.head_velocity))}
        return zeta[:policy.C1_INPUT_WIDTH], zeta, triggered, reward, done, info


class ToyMatrixGame:
    """One-step 2x2 cooperative matrix game for trainer validation.

    Each player's binary move is the sign of its first action component;
    both receive the shared payoff, which is 1 only at the joint move
    (1, 1) and 0 elsewhere by default. The trigger is always active so
    R2 participates every step.
    """

    control_dt = 1.0

    def __init__(self, payoff: Optional[np.ndarray] = None):
        self.payoff = (np.array([[0.0, 0.0], [0.0, 1.0]])
                       if payoff is None else np.asarray(payoff, dtype=float))
        if self.payoff.shape != (2, 2):
            raise GameError("payoff table must be 2x2")

    def reset(self, rng: np.random.Generator):
        del rng
        return (np.zeros(policy.C1_INPUT_WIDTH),
                np.zeros(policy.R2_INPUT_WIDTH), True)

    def step(self, a1, option_index, beta, a2):
        del option_index, beta
        if a2 is None:
            raise GameError("matrix game always triggers R2")
        i = int(a1[0] > 0)
        j = int(a2[0] > 0)
        r = float(self.payoff[i, j])
        return (np.zeros(policy.C1_INPUT_WIDTH),
                np.zeros(policy.R2_INPUT_WIDTH), True, r, True, {})


class PointMassGame:
    """2D point-mass goal reaching under the shared potential reward.

    C1's first two action components command the velocity (saturated by
    tanh); R2 is never triggered in the obstacle-free default. Used as a
    fast sanity environment for the on-policy learner.
    """

    control_dt = 0.1

    def __init__(self, goal=(1.0, 0.0), speed: float = 0.2,
                 obstacles: Optional[list[env.Obstacle]] = None,
                 max_steps: int = 80, accept_radius: float = 0.1,
                 detection_range: float = 0.15,
                 reward_params: Optional[potential.FieldParams] = None):
        self.goal = np.asarray(goal, dtype=float)
        self.speed = speed
        self.obstacles = obstacles or []
        self.max_steps = max_steps
        self.accept_radius = accept_radius
        self.detection_range = detection_range
        self.reward_params = reward_params or potential.FieldParams()

    def _zeta(self, v: np.ndarray) -> np.ndarray:
        delta = self.goal - self.pos
        rho = float(np.hypot(*delta))
        theta = math.atan2(delta[1], delta[0])
        zeta = np.zeros(policy.R2_INPUT_WIDTH)
        zeta[0], zeta[2] = rho, theta
        zeta[8:10] = v
        if self.obstacles:
            dists = [np.hypot(*(self.pos - np.asarray(ob.center)))
                     - ob.radius for ob in self.obstacles]
            i = int(np.argmin(dists))
            ob = self.obstacles[i]
            zeta[24] = dists[i]
            zeta[25] = math.atan2(ob.center[1] - self.pos[1],
                                  ob.center[0] - self.pos[0])
        else:
            zeta[24] = env.NO_OBSTACLE_DISTANCE
        return zeta

    def _triggered(self) -> bool:
        if not self.obstacles:
            return False
        d = min(np.hypot(*(self.pos - np.asarray(ob.center))) - ob.radius
                for ob in self.obstacles)
        return d < self.detection_range

    def reset(self, rng: np.random.Generator):
        del rng
        self.pos = np.zeros(2)
        self.n_steps = 0
        zeta = self._zeta(np.zeros(2))
        return zeta[:policy.C1_INPUT_WIDTH], zeta, self._triggered()

    def step(self, a1, option_index, beta, a2):
        del option_index, beta
        v = self.speed * np.tanh(np.asarray(a1[:2], dtype=float))
        if a2 is not None:
            v = 0.5 * v + 0.5 * self.speed * np.tanh(
                np.asarray(a2[:2], dtype=float))
        self.pos = self.pos + self.control_dt * v
        self.n_steps += 1
        delta = self.goal - self.pos
        rho = float(np.hypot(*delta))
        theta = math.atan2(delta[1], delta[0])
        reward = potential.step_reward(v, self.pos, self.goal, theta,
                                       self.obstacles, self.reward_params)
        done = rho <= self.accept_radius or self.n_steps >= self.max_steps
        status = (env.EpisodeStatus.GOAL_REACHED if rho <= self.accept_radius
                  else env.EpisodeStatus.RUNNING)
        zeta = self._zeta(v)
        return (zeta[:policy.C1_INPUT_WIDTH], zeta, self._triggered(),
                reward, done, {"status": status})


# ---------------------------------------------------------------------
# rollout / evaluation / learning
# ---------------------------------------------------------------------

def rollout(game: TwoPlayerEnv, joint: JointPolicy,
            rng: np.random.Generator, use_r2: bool = True) -> Trajectory:
    """Play one episode; both players log the same shared reward.

    With ``use_r2=False`` the contact regulator never acts even when the
    event trigger fires (used to benchmark the gait controller alone).
    """
    obs1, obs2, triggered = game.reset(rng)
    steps: list[StepRecord] = []
    prev_option: Optional[int] = None
    done = False
    info: dict = {}
    while not done:
        s1 = sample_step(joint.pi1, obs1, rng, prev_option)
        prev_option = s1.option_index
        s2 = (sample_step(joint.pi2, obs2, rng)
              if triggered and use_r2 else None)
        a2 = s2.action if s2 is not None else None
        nobs1, nobs2, ntrig, reward, done, info = game.step(
            s1.action, s1.option_index, s1.beta, a2)
        steps.append(StepRecord(obs1=obs1, obs2=obs2, sample1=s1, sample2=s2,
                                triggered=triggered, reward=reward,
                                terminal=done))
        obs1, obs2, triggered = nobs1, nobs2, ntrig
    status = info.get("status", env.EpisodeStatus.RUNNING)
    terminal = status is not env.EpisodeStatus.RUNNING
    boot1 = 0.0 if terminal else float(joint.pi1.forward_np(obs1)["value"])
    boot2 = 0.0 if terminal else float(joint.pi2.forward_np(obs2)["value"])
    return Trajectory(steps=steps, bootstrap1=boot1, bootstrap2=boot2,
                      status=status, info=info)


def _discounted_return(traj: Trajectory, gamma: float) -> float:
    g = 0.0
    for s in reversed(traj.steps):
        g = s.reward + gamma * g
    return g


def policy_eval(joint: JointPolicy, game_factory: Callable[[], TwoPlayerEnv],
                episodes: int, config: GameConfig,
                rng: np.random.Generator,
                fit_values: bool = True) -> tuple[float, list[Trajectory]]:
    """Mean discounted return over frozen-policy episodes.

    Optionally regresses both value heads onto the observed returns (the
    actors are untouched, so the acting distributions are unchanged).
    """
    if episodes < 1:
        raise GameError("need at least one evaluation episode")
    gamma = config.learner.gamma
    trajs = [rollout(game_factory(), joint, rng) for _ in range(episodes)]
    v_hat = float(np.mean([_discounted_return(t, gamma) for t in trajs]))
    if fit_values:
        for player in (Player.C1, Player.R2):
            obs, rets = _returns_dataset(trajs, player, gamma)
            if len(obs):
                value_update(joint.net(player), np.asarray(obs),
                             np.asarray(rets), config.learner)
    return v_hat, trajs


def _returns_dataset(trajs: list[Trajectory], player: Player, gamma: float
                     ) -> tuple[list[np.ndarray], list[float]]:
    obs, rets = [], []
    for t in trajs:
        g = 0.0
        per_step: list[float] = []
        for s in reversed(t.steps):
            g = s.reward + gamma * g
            per_step.append(g)
        per_step.reverse()
        for s, g_t in zip(t.steps, per_step):
            if player is Player.C1:
                obs.append(s.obs1)
                rets.append(g_t)
            elif s.sample2 is not None:
                obs.append(s.obs2)
                rets.append(g_t)
    return obs, rets


def _build_batch(trajs: list[Trajectory], player: Player,
                 learner_net: PolicyNet, cfg: LearnerConfig
                 ) -> Optional[Batch]:
    obs, acts, logps, advs, rets = [], [], [], [], []
    opt_idx, opt_logp = [], []
    for traj in trajs:
        if player is Player.C1:
            rows = list(range(len(traj.steps)))
        else:
            rows = [i for i, s in enumerate(traj.steps)
                    if s.sample2 is not None]
        if not rows:
            continue
        rewards = np.array([s.reward for s in traj.steps])
        values = np.array([
            (traj.steps[i].sample1.value if player is Player.C1
             else traj.steps[i].sample2.value)
            if i in set(rows) else
            float(learner_net.forward_np(
                traj.steps[i].obs1 if player is Player.C1
                else traj.steps[i].obs2)["value"])
            for i in range(len(traj.steps))])
        terminal = traj.status is not env.EpisodeStatus.RUNNING
        boot = traj.bootstrap1 if player is Player.C1 else traj.bootstrap2
        adv, ret = gae_advantages(rewards, values, boot, terminal,
                                  cfg.gamma, cfg.gae_lambda)
        for i in rows:
            s = traj.steps[i]
            sample = s.sample1 if player is Player.C1 else s.sample2
            obs.append(s.obs1 if player is Player.C1 else s.obs2)
            acts.append(sample.action)
            logps.append(sample.log_prob)
            advs.append(adv[i])
            rets.append(ret[i])
            if player is Player.C1:
                opt_idx.append(sample.option_index)
                opt_logp.append(sample.option_log_prob)
    if not obs:
        return None
    kwargs = {}
    if player is Player.C1:
        kwargs = {"option_indices": np.asarray(opt_idx),
                  "option_log_probs": np.asarray(opt_logp)}
    return Batch(obs=np.asarray(obs), actions=np.asarray(acts),
                 log_probs=np.asarray(logps), advantages=np.asarray(advs),
                 returns=np.asarray(rets), **kwargs)


def ppo_learning(game_factory: Callable[[], TwoPlayerEnv],
                 joint: JointPolicy, learner: Player, config: GameConfig,
                 rng: np.random.Generator,
                 log: Optional[list["LogRecord"]] = None,
                 macro_iteration: int = 0
                 ) -> tuple[float, PolicyNet]:
    """Best-response learning of one player against the frozen other.

    Runs rollout/update rounds until the mean episode reward changes by
    less than ``inner_epsilon`` between rounds or the round cap fires.
    Returns the final-round mean episode reward and the updated net.
    """
    net = joint.net(learner)
    frozen = joint.net(Player.R2 if learner is Player.C1 else Player.C1)
    frozen_bytes = _param_bytes(frozen)
    optimizer = torch.optim.Adam(net.parameters(),
                                 lr=config.learner.learning_rate)
    prev_v: Optional[float] = None
    v = 0.0
    for rnd in range(config.inner_rounds_max):
        trajs = [rollout(game_factory(), joint, rng)
                 for _ in range(config.episodes_per_round)]
        v = float(np.mean([t.episode_reward for t in trajs]))
        if log is not None:
            for t in trajs:
                log.append(LogRecord(
                    phase="learn", macro_iteration=macro_iteration,
                    flag=learner.value, episode_reward=t.episode_reward,
                    episode_length=len(t.steps),
                    trigger_fraction=t.trigger_fraction))
        batch = _build_batch(trajs, learner, net, config.learner)
        if batch is not None:
            ppo_update(net, batch, config.learner, optimizer)
        if prev_v is not None and abs(v - prev_v) <= config.inner_epsilon:
            break
        prev_v = v
    if _param_bytes(frozen) != frozen_bytes:
        raise GameError("frozen player's parameters changed during learning")
    return v, net


def _param_bytes(net: PolicyNet) -> bytes:
    return b"".join(p.detach().numpy().tobytes() for p in net.parameters())


def episode_metrics(snake: CpgSnakeGame, traj: Trajectory):
    """Per-episode benchmark record from a finished snake rollout.

    Jam time counts control steps whose trailing 300 ms of head speed all
    sit below the jam threshold v0 = 0.02 m/s.
    """
    from . import scenarios

    dt = snake.control_dt
    positions = np.array([s.head_position for s in snake.history])
    speeds = np.array([float(np.hypot(*s.head_velocity))
                       for s in snake.history[1:]])
    distance = float(np.sum(np.hypot(*np.diff(positions, axis=0).T)))
    window = int(round(0.3 / dt)) + 1
    jam_steps = sum(
        bool(np.all(speeds[i - window + 1:i + 1] < 0.02))
        for i in range(window - 1, len(speeds)))
    success = traj.status is env.EpisodeStatus.GOAL_REACHED
    task_time = len(traj.steps) * dt
    return scenarios.EpisodeMetrics(
        success=success,
        time_to_goal=task_time if success else None,
        jam_time=jam_steps * dt,
        task_time=task_time,
        distance=distance,
        event_trigger_fraction=traj.trigger_fraction)


@dataclass
class LogRecord:
    """One structured training-log line."""

    phase: str                 # "eval" or "learn"
    macro_iteration: int
    flag: str                  # player that acted/updated
    episode_reward: float
    episode_length: int
    trigger_fraction: float


@dataclass
class FictitiousPlayResult:
    joint: JointPolicy
    values: list[float]            # V^0 .. V^N at macro boundaries
    converged: bool
    iterations: int
    log: list[LogRecord]


def fictitious_play(joint: JointPolicy,
                    game_factory: Callable[[], TwoPlayerEnv],
                    config: GameConfig, rng: np.random.Generator,
                    checkpoint_hook: Optional[Callable[[int, JointPolicy],
                                                       None]] = None
                    ) -> FictitiousPlayResult:
    """Alternating best-response loop (flag starts at R2).

    V^0 comes from simulation-based policy evaluation; each macro-
    iteration trains the flagged player with the other frozen, then
    re-evaluates. Stops when |V^i - V^(i-1)| <= epsilon or after n_max
    iterations (returned with ``converged=False``).
    """
    log: list[LogRecord] = []
    v0, trajs = policy_eval(joint, game_factory, config.eval_episodes,
                            config, rng)
    for t in trajs:
        log.append(LogRecord(phase="eval", macro_iteration=0, flag="both",
                             episode_reward=t.episode_reward,
                             episode_length=len(t.steps),
                             trigger_fraction=t.trigger_fraction))
    values = [v0]
    joint.flag = Player.R2
    converged = False
    iterations = 0
    for i in range(1, config.n_max + 1):
        iterations = i
        ppo_learning(game_factory, joint, joint.flag, config, rng,
                     log=log, macro_iteration=i)
        v_i, trajs = policy_eval(joint, game_factory, config.eval_episodes,
                                 config, rng, fit_values=False)
        for t in trajs:
            log.append(LogRecord(phase="eval", macro_iteration=i,
                                 flag=joint.flag.value,
                                 episode_reward=t.episode_reward,
                                 episode_length=len(t.steps),
                                 trigger_fraction=t.trigger_fraction))
        values.append(v_i)
        if checkpoint_hook is not None:
            checkpoint_hook(i, joint)
        joint.flag = Player.C1 if joint.flag is Player.R2 else Player.R2
        # Both players must have responded (min_macro_iterations >= 2)
        # before the value difference is trusted; otherwise a lucky
        # V^1 ~ V^0 match would stop the play before C1 ever updates.
        if (i >= config.min_macro_iterations
                and abs(values[-1] - values[-2]) <= config.epsilon):
            converged = True
            break
    return FictitiousPlayResult(joint=joint, values=values,
                                converged=converged, iterations=iterations,
                                log=log)
