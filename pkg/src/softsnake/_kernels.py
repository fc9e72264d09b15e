"""Jit-compiled hot loops shared by the reference API and the episode runner.

The public functions in cpg.py and env.py validate inputs and wrap the
kernels here; the episode runner calls them directly with plain arrays to
avoid per-substep object churn.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def cpg_derivative(vec, w, tau_r, tau_a, a, b, u_e, u_f, k_f):
    n = u_e.shape[0]
    out = np.empty(4 * n)
    x_e, y_e = vec[:n], vec[n:2 * n]
    x_f, y_f = vec[2 * n:3 * n], vec[3 * n:]
    for i in range(n):
        z_e_i = max(0.0, x_e[i])
        z_f_i = max(0.0, x_f[i])
        ce = 0.0
        cf = 0.0
        for j in range(n):
            ce += w[j, i] * y_e[j]
            cf += w[j, i] * y_f[j]
        out[i] = (-x_e[i] - a * z_f_i - b * y_e[i] - ce + u_e[i]) / (k_f * tau_r)
        out[n + i] = (z_e_i - y_e[i]) / tau_a
        out[2 * n + i] = (-x_f[i] - a * z_e_i - b * y_f[i] - cf + u_f[i]) / (k_f * tau_r)
        out[3 * n + i] = (z_f_i - y_f[i]) / tau_a
    return out


@njit(cache=True)
def cpg_rk4(vec, w, tau_r, tau_a, a, b, u_e, u_f, k_f, dt, steps):
    y = vec.copy()
    for _ in range(steps):
        k1 = cpg_derivative(y, w, tau_r, tau_a, a, b, u_e, u_f, k_f)
        k2 = cpg_derivative(y + 0.5 * dt * k1, w, tau_r, tau_a, a, b, u_e, u_f, k_f)
        k3 = cpg_derivative(y + 0.5 * dt * k2, w, tau_r, tau_a, a, b, u_e, u_f, k_f)
        k4 = cpg_derivative(y + dt * k3, w, tau_r, tau_a, a, b, u_e, u_f, k_f)
        y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


@njit(cache=True)
def cpg_output(vec, n):
    psi = np.empty(n)
    for i in range(n):
        psi[i] = max(0.0, vec[i]) - max(0.0, vec[2 * n + i])
    return psi


@njit(cache=True)
def shape_arrays(kappa, link_length, n_bodies):
    """Body offsets and headings in the head frame (tailward arc walk)."""
    r = np.zeros((n_bodies, 2))
    alpha = np.zeros(n_bodies)
    for i in range(n_bodies - 1):
        k = kappa[i]
        a = alpha[i]
        phi = k * link_length
        if abs(phi) < 1e-12:
            dx = link_length * np.cos(a)
            dy = link_length * np.sin(a)
        else:
            dx = (np.sin(a) - np.sin(a - phi)) / k
            dy = (np.cos(a - phi) - np.cos(a)) / k
        r[i + 1, 0] = r[i, 0] - dx
        r[i + 1, 1] = r[i, 1] - dy
        alpha[i + 1] = a - phi
    return r, alpha


@njit(cache=True)
def physics_step(head_pose, kappa, qdot, psi, centers, radii, sensor_angles,
                 link_length, body_mass, body_radius, c_t, c_n, c_r,
                 kappa_gain, tau_act, contact_stiffness, dt):
    """One semi-implicit proxy-dynamics step on the reduced coordinates.

    Returns (head_pose', kappa', qdot', raw sensor readings (n,4)).
    """
    n = kappa.shape[0] + 1
    inertia = 0.5 * body_mass * body_radius ** 2

    decay = np.exp(-dt / tau_act)
    kappa_new = np.empty_like(kappa)
    for i in range(kappa.shape[0]):
        target = kappa_gain * psi[i]
        kappa_new[i] = target + (kappa[i] - target) * decay

    theta0 = head_pose[2]
    c0 = np.cos(theta0)
    s0 = np.sin(theta0)

    r_old, alpha_old = shape_arrays(kappa, link_length, n)
    r_new, alpha_new = shape_arrays(kappa_new, link_length, n)

    world_r = np.empty((n, 2))
    shape_vel = np.empty((n, 2))
    shape_rate = np.empty(n)
    positions = np.empty((n, 2))
    headings = np.empty(n)
    for i in range(n):
        world_r[i, 0] = c0 * r_old[i, 0] - s0 * r_old[i, 1]
        world_r[i, 1] = s0 * r_old[i, 0] + c0 * r_old[i, 1]
        dxs = (r_new[i, 0] - r_old[i, 0]) / dt
        dys = (r_new[i, 1] - r_old[i, 1]) / dt
        shape_vel[i, 0] = c0 * dxs - s0 * dys
        shape_vel[i, 1] = s0 * dxs + c0 * dys
        shape_rate[i] = (alpha_new[i] - alpha_old[i]) / dt
        positions[i, 0] = head_pose[0] + world_r[i, 0]
        positions[i, 1] = head_pose[1] + world_r[i, 1]
        headings[i] = theta0 + alpha_old[i]

    contact = np.zeros((n, 2))
    raw = np.zeros((n, 4))
    for i in range(n):
        for j in range(centers.shape[0]):
            dx = positions[i, 0] - centers[j, 0]
            dy = positions[i, 1] - centers[j, 1]
            dist = np.sqrt(dx * dx + dy * dy)
            pen = body_radius + radii[j] - dist
            if pen <= 0.0 or dist < 1e-12:
                continue
            nx = dx / dist
            ny = dy / dist
            magnitude = contact_stiffness * pen
            contact[i, 0] += magnitude * nx
            contact[i, 1] += magnitude * ny
            bearing = np.arctan2(-ny, -nx) - headings[i]
            best = 0
            best_cos = -2.0
            for s in range(4):
                cv = np.cos(bearing - sensor_angles[s])
                if cv > best_cos:
                    best_cos = cv
                    best = s
            raw[i, best] += magnitude

    drag = np.zeros((3, 3))
    force = np.zeros(3)
    mass = np.zeros((3, 3))
    for i in range(n):
        tx = np.cos(headings[i])
        ty = np.sin(headings[i])
        nx = -ty
        ny = tx
        # C = c_t t t^T + c_n n n^T
        c00 = c_t * tx * tx + c_n * nx * nx
        c01 = c_t * tx * ty + c_n * nx * ny
        c11 = c_t * ty * ty + c_n * ny * ny
        # A_i rows: [1, 0, -ry], [0, 1, rx]
        rx = world_r[i, 0]
        ry = world_r[i, 1]
        # drag += A^T C A
        drag[0, 0] += c00
        drag[0, 1] += c01
        drag[1, 1] += c11
        drag[0, 2] += -ry * c00 + rx * c01
        drag[1, 2] += -ry * c01 + rx * c11
        drag[2, 2] += (ry * ry * c00 - 2.0 * rx * ry * c01
                       + rx * rx * c11 + c_r)
        # force += A^T (contact - C shape_vel)
        fx = contact[i, 0] - (c00 * shape_vel[i, 0] + c01 * shape_vel[i, 1])
        fy = contact[i, 1] - (c01 * shape_vel[i, 0] + c11 * shape_vel[i, 1])
        force[0] += fx
        force[1] += fy
        force[2] += -ry * fx + rx * fy - c_r * shape_rate[i]
        # mass += m A^T A
        mass[0, 0] += body_mass
        mass[1, 1] += body_mass
        mass[0, 2] += -body_mass * ry
        mass[1, 2] += body_mass * rx
        mass[2, 2] += body_mass * (rx * rx + ry * ry) + inertia
    drag[1, 0] = drag[0, 1]
    drag[2, 0] = drag[0, 2]
    drag[2, 1] = drag[1, 2]
    mass[2, 0] = mass[0, 2]
    mass[2, 1] = mass[1, 2]

    lhs = mass + dt * drag
    rhs = mass @ qdot + dt * force
    qdot_new = np.linalg.solve(lhs, rhs)

    head_new = np.empty(3)
    head_new[0] = head_pose[0] + dt * qdot_new[0]
    head_new[1] = head_pose[1] + dt * qdot_new[1]
    head_new[2] = theta0 + dt * qdot_new[2]
    return head_new, kappa_new, qdot_new, raw
