"""Planar proxy simulator for the 4-link, 5-body snake.

The soft links are replaced by constant-curvature arcs between rigid
bodies; commanded curvature tracks the CPG output through a first-order
lag.  The chain is rigid at every instant (poses follow in closed form
from head pose + curvatures), and the three pose degrees of freedom
evolve under anisotropic viscous ground friction, shape-rate forcing,
and penalty contact forces, integrated with a semi-implicit Euler step
(implicit in the drag term).

Contact sensing: each body carries four unsigned sensor patches
(A rear-left, B front-right, C rear-right, D front-left); a contact is
routed to the geometrically nearest patch and the signed force vector is
f[2i] = B - C, f[2i+1] = D - A per body.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels

__all__ = [
    "EnvError",
    "RobotConfig",
    "RobotState",
    "Obstacle",
    "EpisodeStatus",
    "SENSOR_ANGLES",
    "body_shape",
    "step",
    "sense_contacts",
    "nearest_obstacle",
    "observe",
    "event_trigger",
    "episode_status",
    "jam_detector",
    "kinetic_energy",
    "NO_OBSTACLE_DISTANCE",
]


class EnvError(ValueError):
    """Invalid simulator input or state."""


# Sensor patch bearings in the body frame (+x forward, +y left),
# ordered A, B, C, D.
SENSOR_ANGLES = np.array([3 * np.pi / 4, -np.pi / 4, -3 * np.pi / 4, np.pi / 4])

# Sentinel distance reported when no obstacle exists (kept finite so the
# observation stays bounded).
NO_OBSTACLE_DISTANCE = 10.0


@dataclass
class RobotConfig:
    """Physical constants of the proxy robot."""

    n_links: int = 4
    link_length: float = 0.1            # m
    body_mass: float = 0.08             # kg per rigid body
    body_radius: float = 0.02           # m, contact disc of each rigid body
    c_t: float = 0.4                    # N s/m, drag along the body axis
    c_n: float = 8.0                    # N s/m, drag across the body axis
    c_r: float = 0.002                  # N m s, per-body rotational drag
    kappa_gain: float = 20.0            # curvature (1/m) per unit CPG output
    tau_act: float = 0.15               # s, actuation lag
    contact_stiffness: float = 600.0    # N/m
    sensor_angles: np.ndarray = None    # type: ignore[assignment]

    def __post_init__(self) -> None:
        if self.n_links < 4:
            raise EnvError("the contact-force layout requires n_links >= 4")
        if not (self.c_n > self.c_t > 0):
            raise EnvError("anisotropy requires c_n > c_t > 0")
        for name in ("link_length", "body_mass", "body_radius", "c_r",
                     "kappa_gain", "tau_act", "contact_stiffness"):
            if getattr(self, name) <= 0:
                raise EnvError(f"{name} must be positive")
        if self.sensor_angles is None:
            self.sensor_angles = SENSOR_ANGLES.copy()
        self.sensor_angles = np.asarray(self.sensor_angles, dtype=float)

    @property
    def n_bodies(self) -> int:
        return self.n_links + 1


@dataclass
class Obstacle:
    """Circular obstacle."""

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        if self.radius <= 0:
            raise EnvError("obstacle radius must be positive")


@dataclass
class RobotState:
    """Chain pose, curvatures, and body velocities.

    poses[i] = (x, y, heading) of rigid body i (head first); velocities[i]
    = (vx, vy, omega).  The head row of `velocities` carries the reduced
    rigid-motion rates used by the integrator.
    """

    poses: np.ndarray       # (n_bodies, 3)
    kappa: np.ndarray       # (n_links,)
    velocities: np.ndarray  # (n_bodies, 3)

    def __post_init__(self) -> None:
        self.poses = np.asarray(self.poses, dtype=float)
        self.kappa = np.asarray(self.kappa, dtype=float)
        self.velocities = np.asarray(self.velocities, dtype=float)

    @classmethod
    def at_pose(cls, config: RobotConfig, position=(0.0, 0.0),
                heading: float = 0.0,
                kappa: np.ndarray | None = None) -> "RobotState":
        k = np.zeros(config.n_links) if kappa is None else np.asarray(kappa, float)
        poses = _world_poses(np.array([*position, heading]), k, config)
        return cls(poses=poses, kappa=k,
                   velocities=np.zeros((config.n_bodies, 3)))

    @property
    def head_position(self) -> np.ndarray:
        return self.poses[0, :2]

    @property
    def head_heading(self) -> float:
        return float(self.poses[0, 2])

    @property
    def head_velocity(self) -> np.ndarray:
        return self.velocities[0, :2]


class EpisodeStatus(enum.Enum):
    RUNNING = "running"
    GOAL_REACHED = "goal_reached"
    STARVED = "starved"
    MISSED_GOAL = "missed_goal"


def body_shape(kappa: np.ndarray, config: RobotConfig
               ) -> tuple[np.ndarray, np.ndarray]:
    """Body positions r (n_bodies, 2) and headings alpha (n_bodies,) in the
    head frame, walking tailward along constant-curvature arcs."""
    length = config.link_length
    phi = kappa * length
    alpha = np.concatenate([[0.0], -np.cumsum(phi)])
    a = alpha[:-1]
    small = np.abs(phi) < 1e-12
    k_safe = np.where(small, 1.0, kappa)
    dx = np.where(small, length * np.cos(a),
                  (np.sin(a) - np.sin(a - phi)) / k_safe)
    dy = np.where(small, length * np.sin(a),
                  (np.cos(a - phi) - np.cos(a)) / k_safe)
    r = np.zeros((config.n_bodies, 2))
    r[1:, 0] = -np.cumsum(dx)
    r[1:, 1] = -np.cumsum(dy)
    return r, alpha


def _world_poses(head_pose: np.ndarray, kappa: np.ndarray,
                 config: RobotConfig) -> np.ndarray:
    r, alpha = body_shape(kappa, config)
    c, s = np.cos(head_pose[2]), np.sin(head_pose[2])
    rot = np.array([[c, -s], [s, c]])
    poses = np.empty((config.n_bodies, 3))
    poses[:, :2] = head_pose[:2] + r @ rot.T
    poses[:, 2] = head_pose[2] + alpha
    return poses


def step(state: RobotState, psi: np.ndarray, obstacles,
         config: RobotConfig, dt: float) -> tuple[RobotState, np.ndarray]:
    """Advance the proxy dynamics one step of size dt.

    Returns the new state and the raw (unsigned) sensor readings
    (n_bodies, 4) observed during the step.
    """
    if dt <= 0:
        raise EnvError("dt must be positive")
    psi = np.asarray(psi, dtype=float)
    if not (np.all(np.isfinite(state.poses)) and np.all(np.isfinite(psi))):
        raise EnvError("non-finite state or actuation")

    if obstacles:
        centers = np.array([ob.center for ob in obstacles], dtype=float)
        radii = np.array([ob.radius for ob in obstacles], dtype=float)
    else:
        centers = np.zeros((0, 2))
        radii = np.zeros(0)

    head_pose = state.poses[0].copy()
    qdot = state.velocities[0].copy()
    head_new, kappa_new, qdot_new, raw = _kernels.physics_step(
        head_pose, state.kappa, qdot, psi, centers, radii,
        config.sensor_angles, config.link_length, config.body_mass,
        config.body_radius, config.c_t, config.c_n, config.c_r,
        config.kappa_gain, config.tau_act, config.contact_stiffness, dt)

    poses_new = _world_poses(head_new, kappa_new, config)
    velocities = _body_velocities(head_pose, state.kappa, kappa_new,
                                  qdot_new, config, dt)
    return RobotState(poses=poses_new, kappa=kappa_new,
                      velocities=velocities), raw


def _body_velocities(head_pose_old: np.ndarray, kappa_old: np.ndarray,
                     kappa_new: np.ndarray, qdot: np.ndarray,
                     config: RobotConfig, dt: float) -> np.ndarray:
    """Per-body world velocities implied by reduced rates + shape rate.

    Row 0 carries the reduced rates (head reference-point velocity and
    chain rotation rate) used by the integrator.
    """
    theta0 = head_pose_old[2]
    c0, s0 = np.cos(theta0), np.sin(theta0)
    rot = np.array([[c0, -s0], [s0, c0]])
    r_old, alpha_old = body_shape(kappa_old, config)
    r_new, alpha_new = body_shape(kappa_new, config)
    world_r = r_old @ rot.T
    shape_vel = (r_new - r_old) @ rot.T / dt
    shape_rate = (alpha_new - alpha_old) / dt
    n = config.n_bodies
    velocities = np.empty((n, 3))
    velocities[:, 0] = qdot[0] - qdot[2] * world_r[:, 1] + shape_vel[:, 0]
    velocities[:, 1] = qdot[1] + qdot[2] * world_r[:, 0] + shape_vel[:, 1]
    velocities[:, 2] = qdot[2] + shape_rate
    velocities[0] = qdot
    return velocities


def kinetic_energy(state: RobotState, config: RobotConfig) -> float:
    """Kinetic energy of the rigid chain motion (reduced coordinates)."""
    r, _ = body_shape(state.kappa, config)
    theta0 = state.head_heading
    c0, s0 = np.cos(theta0), np.sin(theta0)
    rot = np.array([[c0, -s0], [s0, c0]])
    world_r = r @ rot.T
    qdot = state.velocities[0]
    m = config.body_mass
    inertia = 0.5 * m * config.body_radius ** 2
    e = 0.0
    for i in range(config.n_bodies):
        v = qdot[:2] + qdot[2] * np.array([-world_r[i, 1], world_r[i, 0]])
        e += 0.5 * m * float(v @ v) + 0.5 * inertia * qdot[2] ** 2
    return e


def sense_contacts(raw: np.ndarray) -> np.ndarray:
    """Signed diagonal-difference force vector from unsigned sensor readings.

    raw is (n_bodies, 4) ordered A, B, C, D; output component 2i is
    B - C and 2i+1 is D - A for body i.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2 or raw.shape[1] != 4:
        raise EnvError("raw readings must have shape (n_bodies, 4)")
    if np.any(raw < 0):
        raise EnvError("sensor readings are unsigned magnitudes")
    f = np.empty(2 * raw.shape[0])
    f[0::2] = raw[:, 1] - raw[:, 2]
    f[1::2] = raw[:, 3] - raw[:, 0]
    return f


def nearest_obstacle(state: RobotState, obstacles) -> tuple[float, float]:
    """Surface distance and head-frame bearing of the nearest obstacle.

    Empty obstacle list reports (NO_OBSTACLE_DISTANCE, 0.0).
    """
    if not obstacles:
        return NO_OBSTACLE_DISTANCE, 0.0
    head = state.head_position
    best_d, best_phi = None, 0.0
    for ob in obstacles:
        delta = np.asarray(ob.center, dtype=float) - head
        d = max(0.0, float(np.hypot(*delta)) - ob.radius)
        if best_d is None or d < best_d:
            best_d = d
            best_phi = _wrap_angle(np.arctan2(delta[1], delta[0])
                                   - state.head_heading)
    return best_d, best_phi


def _wrap_angle(a: float) -> float:
    return float((a + np.pi) % (2 * np.pi) - np.pi)


def goal_polar(state: RobotState, goal) -> tuple[float, float]:
    """Distance and heading-relative bearing of the goal from the head."""
    delta = np.asarray(goal, dtype=float) - state.head_position
    rho = float(np.hypot(*delta))
    theta = _wrap_angle(np.arctan2(delta[1], delta[0]) - state.head_heading)
    return rho, theta


def observe(state: RobotState, goal, prev_action: np.ndarray,
            prev_option: float, prev_beta: float, f: np.ndarray,
            nearest: tuple[float, float],
            prev_goal_polar: tuple[float, float] | None = None,
            dt: float | None = None) -> np.ndarray:
    """Assemble the 26-component observation.

    Layout: [0:4] goal distance/rate/bearing/rate, [4:8] curvatures,
    [8:14] previous action + option + termination probability,
    [14:24] contact force vector, [24:26] nearest obstacle distance/bearing.
    Rates are backward differences; zero on the first step.
    """
    rho_g, theta_g = goal_polar(state, goal)
    if prev_goal_polar is None or dt is None:
        rho_dot, theta_dot = 0.0, 0.0
    else:
        rho_dot = (rho_g - prev_goal_polar[0]) / dt
        theta_dot = _wrap_angle(theta_g - prev_goal_polar[1]) / dt
    zeta = np.empty(26)
    zeta[0:4] = [rho_g, rho_dot, theta_g, theta_dot]
    zeta[4:8] = state.kappa
    zeta[8:12] = np.asarray(prev_action, dtype=float)
    zeta[12] = prev_option
    zeta[13] = prev_beta
    zeta[14:24] = np.asarray(f, dtype=float)
    zeta[24:26] = nearest
    return zeta


def event_trigger(f: np.ndarray, d_o: float, detection_range: float,
                  force_tol: float = 1e-9) -> bool:
    """True when any contact force is present or an obstacle is within the
    detection range."""
    if detection_range <= 0:
        raise EnvError("detection range must be positive")
    return bool(np.linalg.norm(f) > force_tol or d_o < detection_range)


def jam_detector(speed_history: np.ndarray, v0: float = 0.02,
                 t_jam: float = 0.3, dt: float = 0.1) -> bool:
    """True when head speed has stayed below v0 for at least t_jam seconds
    at the end of the history."""
    if v0 <= 0 or t_jam <= 0:
        raise EnvError("jam thresholds must be positive")
    speeds = np.asarray(speed_history, dtype=float)
    need = int(round(t_jam / dt)) + 1
    if speeds.size < need:
        return False
    return bool(np.all(speeds[-need:] < v0))


STARVATION_TIME = 0.9      # s of continuous jam before an episode starves
MISSED_GOAL_STEPS = 60     # consecutive retreating steps before a miss


def episode_status(history, goal, accept_radius: float, dt: float,
                   v0: float = 0.02) -> EpisodeStatus:
    """Terminal status of an episode from its state history.

    GoalReached once the head is inside the accepting radius; Starved after
    STARVATION_TIME of continuous sub-v0 head speed; MissedGoal after more
    than MISSED_GOAL_STEPS consecutive steps with negative goal-direction
    head velocity.
    """
    if not history:
        raise EnvError("empty history")
    last = history[-1]
    goal = np.asarray(goal, dtype=float)
    if np.hypot(*(goal - last.head_position)) <= accept_radius:
        return EpisodeStatus.GOAL_REACHED

    speeds = np.array([float(np.hypot(*s.head_velocity)) for s in history])
    if jam_detector(speeds, v0=v0, t_jam=STARVATION_TIME, dt=dt):
        return EpisodeStatus.STARVED

    if len(history) > MISSED_GOAL_STEPS:
        retreating = 0
        for s in reversed(history):
            direction = goal - s.head_position
            norm = np.hypot(*direction)
            if norm < 1e-12:
                break
            if float(s.head_velocity @ direction) / norm < 0:
                retreating += 1
            else:
                break
        if retreating > MISSED_GOAL_STEPS:
            return EpisodeStatus.MISSED_GOAL
    return EpisodeStatus.RUNNING
