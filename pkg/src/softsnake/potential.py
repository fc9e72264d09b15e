"""Artificial potential field (quadratic attractor + bounded-support FIRAS
repulsion) and the shared three-term step reward.

All functions are stateless.  Obstacle distances are measured to the
obstacle surface (center distance minus radius), so a point obstacle
(radius 0) recovers the classic point formulas.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FieldError",
    "SingularRepulsionError",
    "FieldParams",
    "attract_potential",
    "attract_force",
    "repulse_potential",
    "repulse_force",
    "goal_reward",
    "step_reward",
]


class FieldError(ValueError):
    """Invalid potential-field parameter or query."""


class SingularRepulsionError(FieldError):
    """Query point coincides with (or is inside) an obstacle surface."""


@dataclass
class FieldParams:
    """Gains and geometry of the shared reward field.

    levels are accepting-shell radii around the goal, sorted descending;
    omega are the weights of the (goal, attract, repulse) reward terms.
    """

    k_att: float = 1.0
    k_rep: float = 0.01
    rho_0: float = 0.2
    levels: tuple[float, ...] = (0.2, 0.1, 0.05)
    omega: tuple[float, float, float] = (1.0, 1.0, 1.0)
    # Distance floor used by the *reward* only: the penalty contact model
    # lets the head overlap an obstacle, where the raw FIRAS field is
    # singular, so the reward clamps the surface distance.  The floor is
    # set well above the penetration scale so the clamped term stays on
    # the same order as the other reward components; a near-zero floor
    # produces reward spikes that dominate normalized advantages.
    rho_floor: float = 0.05

    def __post_init__(self) -> None:
        if self.k_att <= 0 or self.k_rep <= 0 or self.rho_0 <= 0:
            raise FieldError("field gains and cutoff must be positive")
        if not 0.0 < self.rho_floor < self.rho_0:
            raise FieldError("rho_floor must lie in (0, rho_0)")
        lv = tuple(float(l) for l in self.levels)
        if any(l <= 0 for l in lv) or list(lv) != sorted(lv, reverse=True):
            raise FieldError("levels must be positive and sorted descending")
        self.levels = lv
        if any(w < 0 for w in self.omega):
            raise FieldError("reward weights must be nonnegative")


def attract_potential(p: np.ndarray, p_g: np.ndarray, k_att: float) -> float:
    """Quadratic goal well 0.5 * k_att * ||p - p_g||^2."""
    d = np.asarray(p, dtype=float) - np.asarray(p_g, dtype=float)
    return 0.5 * k_att * float(d @ d)


def attract_force(p: np.ndarray, p_g: np.ndarray, k_att: float) -> np.ndarray:
    """-grad of the goal well: -k_att * (p - p_g)."""
    d = np.asarray(p, dtype=float) - np.asarray(p_g, dtype=float)
    return -k_att * d


def _surface_distances(p: np.ndarray, obstacles) -> tuple[np.ndarray, np.ndarray]:
    """Per-obstacle (surface distance rho_i, unit outward direction)."""
    p = np.asarray(p, dtype=float)
    rhos = np.empty(len(obstacles))
    dirs = np.empty((len(obstacles), 2))
    for i, ob in enumerate(obstacles):
        delta = p - np.asarray(ob.center, dtype=float)
        center_dist = float(np.hypot(*delta))
        rho = center_dist - ob.radius
        if rho <= 0 or center_dist == 0:
            raise SingularRepulsionError(
                "singular repulsion: query point on or inside an obstacle")
        rhos[i] = rho
        dirs[i] = delta / center_dist
    return rhos, dirs


def repulse_potential(p: np.ndarray, obstacles, k_rep: float,
                      rho_0: float) -> float:
    """Summed FIRAS potential 0.5*k_rep*(1/rho - 1/rho_0)^2 inside the cutoff."""
    if not obstacles:
        return 0.0
    rhos, _ = _surface_distances(p, obstacles)
    u = 0.0
    for rho in rhos:
        if rho <= rho_0:
            u += 0.5 * k_rep * (1.0 / rho - 1.0 / rho_0) ** 2
    return u


def repulse_force(p: np.ndarray, obstacles, k_rep: float,
                  rho_0: float) -> np.ndarray:
    """Summed repulsive force; each obstacle inside the cutoff contributes
    k_rep * (1/rho - 1/rho_0) / rho^2 along the outward direction, which is
    exactly -grad of its FIRAS potential."""
    f = np.zeros(2)
    if not obstacles:
        return f
    rhos, dirs = _surface_distances(p, obstacles)
    for rho, d in zip(rhos, dirs):
        if rho <= rho_0:
            f += k_rep * (1.0 / rho - 1.0 / rho_0) / rho ** 2 * d
    return f


def _repulse_force_clamped(p: np.ndarray, obstacles, k_rep: float,
                           rho_0: float, floor: float) -> np.ndarray:
    """Repulsive force with the surface distance clamped below by `floor`.

    Identical to :func:`repulse_force` whenever every surface distance
    exceeds the floor; inside it the magnitude saturates instead of
    diverging, so the reward stays finite while the head overlaps an
    obstacle under the penalty contact model.
    """
    p = np.asarray(p, dtype=float)
    f = np.zeros(2)
    for ob in obstacles:
        delta = p - np.asarray(ob.center, dtype=float)
        center_dist = float(np.hypot(*delta))
        d = delta / center_dist if center_dist > 0 else np.array([1.0, 0.0])
        rho = max(center_dist - ob.radius, floor)
        if rho <= rho_0:
            f += k_rep * (1.0 / rho - 1.0 / rho_0) / rho ** 2 * d
    return f


def goal_reward(theta_g: float, rho_g: float,
                levels: tuple[float, ...]) -> float:
    """Shell reward cos(theta_g) * sum_k (1/l_k) for every accepting shell
    the head is inside."""
    if rho_g < 0:
        raise FieldError("goal distance must be nonnegative")
    total = sum(1.0 / l for l in levels if rho_g < l)
    return float(np.cos(theta_g)) * total


def step_reward(v: np.ndarray, p: np.ndarray, p_g: np.ndarray,
                theta_g: float, obstacles, params: FieldParams) -> float:
    """Shared per-step reward omega1*R_goal + omega2*(v.F_att) + omega3*(v.F_rep)."""
    v = np.asarray(v, dtype=float)
    p = np.asarray(p, dtype=float)
    rho_g = float(np.hypot(*(p - np.asarray(p_g, dtype=float))))
    w1, w2, w3 = params.omega
    r_goal = goal_reward(theta_g, rho_g, params.levels)
    r_att = float(v @ attract_force(p, p_g, params.k_att))
    r_rep = float(v @ _repulse_force_clamped(p, obstacles, params.k_rep,
                                             params.rho_0, params.rho_floor))
    return w1 * r_goal + w2 * r_att + w3 * r_rep
