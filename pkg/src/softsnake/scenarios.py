"""Obstacle-maze scenario generation and exact episode metrics.

Training mazes are 3x3 obstacle grids on the spawn-goal segment with a
1.5 m goal; test mazes are 5x6 grids with a 2 m goal. All geometry is a
pure function of the supplied seeded generator. Metric aggregation uses
exact rational arithmetic so repeated runs produce identical tables.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from . import env

__all__ = [
    "ScenarioError",
    "Scenario",
    "generate_training_scenario",
    "generate_test_scenario",
    "EpisodeMetrics",
    "AggregateMetrics",
    "compute_metrics",
]

GRID_SPACING = 0.08        # base distance between adjacent obstacles (m)
NOISE_CLIP = 0.01          # obstacle coordinate noise clipped to (-c, c)
OBSTACLE_RADIUS = 0.02
TRAIN_GOAL_DISTANCE = 1.5
TEST_GOAL_DISTANCE = 2.0
_SPAWN_TRIES = 100


class ScenarioError(ValueError):
    """Raised when a collision-free scenario cannot be generated."""


@dataclass
class Scenario:
    """One episode's world: obstacles, goal, start pose, and its seed."""

    obstacles: list[env.Obstacle]
    goal: tuple[float, float]
    accept_radius: float
    start_position: tuple[float, float]
    start_heading: float
    seed: int

    def __post_init__(self) -> None:
        goal = np.asarray(self.goal, dtype=float)
        for ob in self.obstacles:
            if np.hypot(*(goal - np.asarray(ob.center))) <= ob.radius:
                raise ScenarioError("goal lies inside an obstacle")


def _spawn_collides(obstacles: list[env.Obstacle],
                    start_position, start_heading: float,
                    robot: env.RobotConfig) -> bool:
    state = env.RobotState.at_pose(robot, start_position, start_heading)
    for center in state.poses[:, :2]:
        for ob in obstacles:
            if (np.hypot(*(center - np.asarray(ob.center)))
                    <= ob.radius + robot.body_radius):
                return True
    return False


def _grid_maze(rng: np.random.Generator, rows: int, cols: int,
               goal_distance: float, deviation_max_deg: float,
               accept_radius: float, seed: int,
               robot: Optional[env.RobotConfig] = None) -> Scenario:
    """Obstacle grid centered on the spawn-goal midpoint, rows
    perpendicular to the segment; deviation angle is the angle between
    the initial heading (+x) and the spawn-goal direction, with a random
    side."""
    robot = robot or env.RobotConfig()
    start = (0.0, 0.0)
    heading = 0.0
    for _ in range(_SPAWN_TRIES):
        deviation = np.deg2rad(rng.uniform(0.0, deviation_max_deg))
        side = 1.0 if rng.random() < 0.5 else -1.0
        angle = side * deviation
        goal = (goal_distance * np.cos(angle), goal_distance * np.sin(angle))
        along = np.array([np.cos(angle), np.sin(angle)])
        across = np.array([-np.sin(angle), np.cos(angle)])
        mid = 0.5 * np.asarray(goal)
        obstacles = []
        for i in range(rows):
            for j in range(cols):
                u = (j - (cols - 1) / 2.0) * GRID_SPACING
                v = (i - (rows - 1) / 2.0) * GRID_SPACING
                noise = np.clip(rng.standard_normal(2),
                                -NOISE_CLIP, NOISE_CLIP)
                center = mid + u * along + v * across + noise
                obstacles.append(env.Obstacle(center=tuple(center),
                                              radius=OBSTACLE_RADIUS))
        if not _spawn_collides(obstacles, start, heading, robot):
            return Scenario(obstacles=obstacles, goal=tuple(goal),
                            accept_radius=accept_radius,
                            start_position=start, start_heading=heading,
                            seed=seed)
    raise ScenarioError(
        f"no collision-free spawn found in {_SPAWN_TRIES} tries")


def generate_training_scenario(rng: np.random.Generator, seed: int = 0,
                               accept_radius: float = 0.1,
                               robot: Optional[env.RobotConfig] = None
                               ) -> Scenario:
    """3x3 obstacle maze, goal fixed at 1.5 m, deviation in [0, 60] deg."""
    return _grid_maze(rng, 3, 3, TRAIN_GOAL_DISTANCE, 60.0,
                      accept_radius, seed, robot)


def generate_test_scenario(rng: np.random.Generator, seed: int = 0,
                           accept_radius: float = 0.1,
                           robot: Optional[env.RobotConfig] = None
                           ) -> Scenario:
    """5x6 maze of radius-0.02 obstacles, goal 2 m, deviation [0, 90] deg."""
    return _grid_maze(rng, 5, 6, TEST_GOAL_DISTANCE, 90.0,
                      accept_radius, seed, robot)


def _exact(x: float) -> Fraction:
    return Fraction(*float(x).as_integer_ratio())


@dataclass
class EpisodeMetrics:
    """Per-episode record feeding the aggregate table."""

    success: bool
    time_to_goal: Optional[float]   # s; None unless success
    jam_time: float                 # s spent jammed
    task_time: float                # s total
    distance: float                 # m of head path
    event_trigger_fraction: float

    def __post_init__(self) -> None:
        if self.task_time <= 0:
            raise ScenarioError("task_time must be positive")
        if self.jam_time > self.task_time + 1e-12:
            raise ScenarioError("jam_time cannot exceed task_time")
        if not 0.0 <= self.event_trigger_fraction <= 1.0:
            raise ScenarioError("event_trigger_fraction out of [0, 1]")
        if self.success and self.time_to_goal is None:
            raise ScenarioError("successful episode needs time_to_goal")

    @property
    def mean_speed(self) -> float:
        return self.distance / self.task_time


@dataclass
class AggregateMetrics:
    """Benchmark summary over a batch of episodes (exact rationals)."""

    jam_ratio: Fraction
    avg_linear_velocity: Fraction
    success_rate: Fraction
    avg_time_per_goal: Optional[Fraction]
    episodes: int

    def as_row(self) -> dict[str, str]:
        """Fixed-format strings for the metrics table."""
        def fmt(x: Optional[Fraction]) -> str:
            return "n/a" if x is None else f"{float(x):.6f}"
        return {
            "episodes": str(self.episodes),
            "jam_ratio": fmt(self.jam_ratio),
            "avg_linear_velocity": fmt(self.avg_linear_velocity),
            "success_rate": fmt(self.success_rate),
            "avg_time_per_goal": fmt(self.avg_time_per_goal),
        }


def compute_metrics(episodes: list[EpisodeMetrics]) -> AggregateMetrics:
    """jam_ratio = total jam time / total task time; avg velocity is the
    distance-weighted head speed; time per goal averages successes only."""
    if not episodes:
        raise ScenarioError("no episodes to aggregate")
    total_jam = sum((_exact(e.jam_time) for e in episodes), Fraction(0))
    total_time = sum((_exact(e.task_time) for e in episodes), Fraction(0))
    total_dist = sum((_exact(e.distance) for e in episodes), Fraction(0))
    successes = [e for e in episodes if e.success]
    avg_tpg = None
    if successes:
        avg_tpg = (sum((_exact(e.time_to_goal) for e in successes),
                       Fraction(0)) / len(successes))
    return AggregateMetrics(
        jam_ratio=total_jam / total_time,
        avg_linear_velocity=total_dist / total_time,
        success_rate=Fraction(len(successes), len(episodes)),
        avg_time_per_goal=avg_tpg,
        episodes=len(episodes),
    )
