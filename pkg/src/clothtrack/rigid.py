"""Planar rigid-body process model.

State layout is ``[X, Y, theta, vx, vy, omega]``; theta is never wrapped so the
filter linearisation stays smooth through full turns.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ValidationError

RIGID_FIELDS = ("X", "Y", "theta", "vx", "vy", "omega")
DEFAULT_DT = 1.0 / 30.0


@dataclass(frozen=True)
class RigidParams:
    mass: float = 1.0
    inertia: float = 1.0
    linear_damping: float = 0.0
    angular_damping: float = 0.0

    def __post_init__(self):
        if not (self.mass > 0 and self.inertia > 0):
            raise ValidationError("mass and inertia must be positive")
        if self.linear_damping < 0 or self.angular_damping < 0:
            raise ValidationError("damping must be non-negative")


def step_rigid(state, params: RigidParams, wrench, dt: float = DEFAULT_DT):
    """One semi-implicit Euler step; ``wrench`` is ``[Fx, Fy, tau]``.

    Broadcasts over leading axes and accepts complex input.
    """
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    s = np.asarray(state)
    w = np.asarray(wrench)
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(w))):
        raise DivergenceError("non-finite rigid state or wrench")
    pose = s[..., 0:3]
    vel = s[..., 3:6]
    inv_mass = np.array([1.0 / params.mass, 1.0 / params.mass, 1.0 / params.inertia])
    damping = np.array([params.linear_damping, params.linear_damping, params.angular_damping])
    acc = w * inv_mass - damping * vel
    vel = vel + dt * acc
    pose = pose + dt * vel
    return np.concatenate([pose, vel], axis=-1)


def rotation_2d(theta):
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def wrench_from_forces(forces, offsets, theta=0.0):
    """Net planar force and torque of per-node forces.

    ``offsets`` are rest-frame node positions relative to the rotation centre;
    they are rotated by ``theta`` before taking moments. Only the XY force
    components contribute.
    """
    f = np.asarray(forces)[..., :2]
    arms = np.asarray(offsets)[:, :2] @ np.swapaxes(rotation_2d(theta), -1, -2)
    tau = (arms[..., 0] * f[..., 1] - arms[..., 1] * f[..., 0]).sum(axis=-1)
    net = np.broadcast_to(f.sum(axis=-2), np.shape(tau) + (2,))
    return np.concatenate([net, np.asarray(tau)[..., None]], axis=-1)
