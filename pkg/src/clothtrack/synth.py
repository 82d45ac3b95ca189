"""Synthetic ground truth for the three cloth experiments.

Truth is produced by the mesh simulator run at a finer substep count than the
tracker uses. Features are scattered uniformly over the cloth interior and
observed through the camera with i.i.d. Gaussian pixel noise. Everything
random is drawn from one generator seeded by ``ScenarioSpec.seed``: feature
locations first, then noise frame by frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, CameraPose
from .errors import DivergenceError, ValidationError
from .measurement import FeatureSet, anchor_features, measure_mesh
from .mesh import ClothParams, MeshState, MeshTopology, build_mesh, step_mesh
from .rigid import wrench_from_forces

TRANSLATION_Y = "translation_y"
APPLIED_MOMENT = "applied_moment"
COMPRESSION_TENSION = "compression_tension"
KINDS = (TRANSLATION_Y, APPLIED_MOMENT, COMPRESSION_TENSION)

DEFAULT_FRAMES = {TRANSLATION_Y: 30, APPLIED_MOMENT: 30, COMPRESSION_TENSION: 45}
# newtons, sized for the default 10x10 mesh of 1 g nodes (0.1 kg of cloth)
DEFAULT_FORCE = {TRANSLATION_Y: 0.3, APPLIED_MOMENT: 0.15, COMPRESSION_TENSION: 1.5}


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str = TRANSLATION_Y
    frames: int | None = None
    fps: float = 30.0
    n_features: int = 20
    noise_sigma: float = 0.5
    seed: int = 0
    force_magnitude: float | None = None
    substeps: int = 100
    feature_margin: float = 0.05

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown scenario kind {self.kind!r}; expected one of {KINDS}")
        if self.frames is None:
            object.__setattr__(self, "frames", DEFAULT_FRAMES[self.kind])
        if self.force_magnitude is None:
            object.__setattr__(self, "force_magnitude", DEFAULT_FORCE[self.kind])
        if self.frames < 1:
            raise ValidationError("a scenario needs at least one frame")
        if not self.fps > 0:
            raise ValidationError("fps must be positive")
        if self.n_features < 1:
            raise ValidationError("need at least one feature")
        if not self.noise_sigma >= 0:
            raise ValidationError("noise_sigma must be non-negative")
        if not 0 <= self.feature_margin < 0.5:
            raise ValidationError("feature_margin must lie in [0, 0.5)")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def dt(self) -> float:
        return 1.0 / self.fps


@dataclass
class ScenarioData:
    """Per-frame truth and measurements.

    ``node_forces[k]`` acts during the step from frame ``k`` to ``k + 1``;
    ``measurements[k]`` is the stacked pixel vector observed at frame ``k``.
    """

    spec: ScenarioSpec
    features: FeatureSet
    mesh_positions: np.ndarray   # (frames, N, 3)
    mesh_velocities: np.ndarray  # (frames, N, 3)
    rigid_states: np.ndarray     # (frames, 6)
    node_forces: np.ndarray      # (frames, N, 3)
    wrenches: np.ndarray         # (frames, 3)
    measurements: np.ndarray     # (frames, 2n)
    max_violation: np.ndarray    # (frames,)

    @property
    def frames(self) -> int:
        return len(self.measurements)


def centered_mesh(rows: int, cols: int, spacing: float):
    """Mesh whose node centroid sits at the world origin."""
    origin = (-(cols - 1) * spacing / 2, -(rows - 1) * spacing / 2, 0.0)
    return build_mesh(rows, cols, spacing, origin)


def force_schedule(spec: ScenarioSpec, topo: MeshTopology) -> np.ndarray:
    """External node forces ``(frames, N, 3)`` for the scenario."""
    n = topo.n_nodes
    forces = np.zeros((spec.frames, n, 3))
    F = spec.force_magnitude
    if spec.kind == TRANSLATION_Y:
        forces[:, :, 1] = F / n
    elif spec.kind == APPLIED_MOMENT:
        # whole force at the middle of the right edge, pushing +Y
        node = topo.node_index(topo.rows // 2, topo.cols - 1)
        forces[:, node, 1] = F
    else:
        left = [topo.node_index(i, 0) for i in range(topo.rows)]
        right = [topo.node_index(i, topo.cols - 1) for i in range(topo.rows)]
        sign = np.where(np.arange(spec.frames) < math.ceil(spec.frames / 2), 1.0, -1.0)
        per_node = F / topo.rows
        forces[:, left, 0] = (sign * per_node)[:, None]
        forces[:, right, 0] = (-sign * per_node)[:, None]
    return forces


def rigid_fit(positions, velocities, rest):
    """Planar rigid pose ``[X, Y, theta, vx, vy, omega]`` best matching a mesh.

    The pose maps rest positions ``r`` to ``R(theta) r + (X, Y)``; theta is the
    least-squares rotation about the centroids.
    """
    c0 = rest[:, :2].mean(axis=0)
    c = positions[:, :2].mean(axis=0)
    r0 = rest[:, :2] - c0
    r = positions[:, :2] - c
    theta = math.atan2(np.sum(r0[:, 0] * r[:, 1] - r0[:, 1] * r[:, 0]),
                       np.sum(r0[:, 0] * r[:, 0] + r0[:, 1] * r[:, 1]))
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    X, Y = c - rot @ c0
    vbar = velocities[:, :2].mean(axis=0)
    dv = velocities[:, :2] - vbar
    spin = np.sum(r[:, 0] * dv[:, 1] - r[:, 1] * dv[:, 0])
    omega = spin / np.sum(r * r)
    return np.array([X, Y, theta, vbar[0], vbar[1], omega])


def add_noise(clean, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise; always consumes one draw per component."""
    if sigma < 0:
        raise ValidationError("noise sigma must be non-negative")
    clean = np.asarray(clean, dtype=float)
    return clean + sigma * rng.standard_normal(clean.shape)


def scatter_features(spec: ScenarioSpec, topo: MeshTopology, rng) -> FeatureSet:
    lo = topo.origin[:2]
    extent = np.array([(topo.cols - 1) * topo.spacing, (topo.rows - 1) * topo.spacing])
    margin = spec.feature_margin * extent
    coords = rng.uniform(lo + margin, lo + extent - margin, size=(spec.n_features, 2))
    return anchor_features(coords, topo)


def generate_scenario(spec: ScenarioSpec, topo: MeshTopology, params: ClothParams,
                      cam: CameraIntrinsics, pose: CameraPose,
                      initial: MeshState | None = None) -> ScenarioData:
    rng = np.random.default_rng(spec.seed)
    features = scatter_features(spec, topo, rng)
    rest = topo.rest_positions()
    state = initial or MeshState(rest, np.zeros_like(rest))
    forces = force_schedule(spec, topo)

    F, N = spec.frames, topo.n_nodes
    positions = np.empty((F, N, 3))
    velocities = np.empty((F, N, 3))
    rigid = np.empty((F, 6))
    wrenches = np.empty((F, 3))
    clean = np.empty((F, 2 * len(features)))
    violation = np.zeros(F)
    offsets = rest - rest.mean(axis=0)
    for k in range(F):
        if k > 0:
            try:
                state = step_mesh(state, topo, params, forces[k - 1], spec.dt, spec.substeps)
            except DivergenceError as exc:
                raise DivergenceError(f"scenario diverged at frame {k}: {exc}", frame=k) from exc
            violation[k] = state.max_violation
        positions[k] = state.positions
        velocities[k] = state.velocities
        rigid[k] = rigid_fit(state.positions, state.velocities, rest)
        if k > 0:
            rigid[k, 2] = rigid[k - 1, 2] + np.angle(np.exp(1j * (rigid[k, 2] - rigid[k - 1, 2])))
        wrenches[k] = wrench_from_forces(forces[k], offsets, rigid[k, 2])
        clean[k] = measure_mesh(state.positions, topo, features, cam, pose)

    measurements = np.stack([add_noise(clean[k], spec.noise_sigma, rng) for k in range(F)])
    return ScenarioData(spec, features, positions, velocities, rigid, forces, wrenches,
                        measurements, violation)
