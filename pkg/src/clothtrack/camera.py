"""Ideal pinhole camera: world -> pixel projection and flat-plane backprojection.

Pixel convention: origin at the top-left corner, u to the right, v downward.
World Y maps to image "up", so ``v = cy - f*Y/depth``.

All functions accept stacked points with shape ``(..., 3)`` / ``(..., 2)`` and
are written so complex-valued inputs pass straight through (complex-step
Jacobians rely on this).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, ValidationError

IMAGE_WIDTH = 640
IMAGE_HEIGHT = 480


@dataclass(frozen=True)
class CameraIntrinsics:
    f: float = 500.0
    width: int = IMAGE_WIDTH
    height: int = IMAGE_HEIGHT

    def __post_init__(self):
        if not (np.isfinite(self.f) and self.f > 0):
            raise ValidationError(f"focal length must be positive, got {self.f}")
        if self.width <= 0 or self.height <= 0:
            raise ValidationError("image size must be positive")

    @property
    def cx(self) -> float:
        return self.width / 2.0

    @property
    def cy(self) -> float:
        return self.height / 2.0

    @property
    def K(self) -> np.ndarray:
        return np.diag([self.f, self.f, 1.0])


@dataclass(frozen=True)
class CameraPose:
    """Camera extrinsics; ``M = [R | t]`` maps world points into the camera frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        t = np.array(self.translation, dtype=float)
        if R.shape != (3, 3) or t.shape != (3,):
            raise ValidationError("rotation must be 3x3 and translation a 3-vector")
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-10, rtol=0):
            raise ValidationError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > 1e-10:
            raise ValidationError("rotation must have determinant +1")
        if not t[2] > 0:
            raise ValidationError(f"camera height t_z must be positive, got {t[2]}")
        R.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def overhead(cls, tz: float) -> "CameraPose":
        """Camera straight above the origin looking down the Z axis."""
        return cls(np.eye(3), np.array([0.0, 0.0, float(tz)]))

    @property
    def tz(self) -> float:
        return float(self.translation[2])

    @property
    def M(self) -> np.ndarray:
        return np.hstack([self.rotation, self.translation[:, None]])


def project(points, cam: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Project world points ``(..., 3)`` to pixels ``(..., 2)``."""
    p = np.asarray(points)
    if p.shape[-1] != 3:
        raise ValidationError(f"expected (..., 3) world points, got shape {p.shape}")
    hom = (p @ pose.rotation.T + pose.translation) @ cam.K.T
    depth = hom[..., 2]
    if np.any(np.real(depth) <= 0):
        raise BehindCameraError("point at or behind the camera plane")
    u = hom[..., 0] / depth
    v = hom[..., 1] / depth
    return np.stack([u + cam.cx, cam.cy - v], axis=-1)


def backproject_flat(pixels, cam: CameraIntrinsics, pose: CameraPose) -> np.ndarray:
    """Lift pixels ``(..., 2)`` onto the Z = 0 plane.

    Only valid for a camera looking straight down (identity rotation).
    """
    if not np.array_equal(pose.rotation, np.eye(3)):
        raise ValidationError("flat backprojection requires an identity camera rotation")
    q = np.asarray(pixels, dtype=float)
    if q.shape[-1] != 2:
        raise ValidationError(f"expected (..., 2) pixels, got shape {q.shape}")
    centered = np.stack([q[..., 0] - cam.cx, cam.cy - q[..., 1], np.ones(q.shape[:-1])], axis=-1)
    ray = centered @ np.linalg.inv(cam.K).T
    z = ray[..., 2]
    if np.any(z == 0):
        raise ValidationError("degenerate viewing ray")
    alpha = pose.tz / z
    return alpha[..., None] * ray - pose.translation
