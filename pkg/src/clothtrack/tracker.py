"""Predict / measure / correct loop over a pixel measurement sequence.

Three models are supported:

``rigid``
    six planar rigid-body states driven by the net wrench of the assumed node
    forces; complex-step Jacobians throughout.
``mesh``
    stacked node positions (3N states). Node velocities come from the
    simulator and are carried forward without correction. The process
    Jacobian uses central differences because the deformation limit and the
    ground clamp are piecewise.
``none``
    no model at all: every feature is predicted to stay where it was first
    seen. This is the baseline the filters are compared against.

Residuals are reported between each frame's a priori predicted feature
locations and the measurements, i.e. before the correction uses them.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ekf
from .camera import CameraIntrinsics, CameraPose
from .errors import BehindCameraError, ValidationError
from .measurement import FeatureSet, init_features, measure_mesh, measure_rigid, stack_uv, unstack_uv
from .mesh import ClothParams, MeshState, MeshTopology, step_mesh, step_mesh_batch
from .report import ResidualReport
from .rigid import RIGID_FIELDS, RigidParams, step_rigid, wrench_from_forces

MODELS = ("rigid", "mesh", "none")


@dataclass(frozen=True)
class TrackerConfig:
    model: str = "rigid"
    dt: float = 1.0 / 30.0
    substeps: int = 10
    q_rigid: float = 1e-4
    q_mesh: float = 1e-5
    r_sigma: float = 1.0
    p0: float = 1e-2
    update: bool = True
    keep_covariances: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValidationError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if not (self.dt > 0 and self.substeps >= 1):
            raise ValidationError("dt must be positive and substeps at least 1")
        if self.q_rigid < 0 or self.q_mesh < 0 or self.p0 < 0 or not self.r_sigma > 0:
            raise ValidationError("noise settings must be non-negative (r_sigma positive)")


@dataclass
class TrackResult:
    model: str
    features: FeatureSet
    state_names: tuple
    estimates: np.ndarray    # (frames, m) a posteriori
    priors: np.ndarray       # (frames, m) a priori
    predicted: np.ndarray    # (frames, n, 2) a priori feature pixels
    corrected: np.ndarray    # (frames, n, 2) a posteriori feature pixels
    dropped: np.ndarray      # (frames,) bool
    report: ResidualReport
    posterior_report: ResidualReport
    covariances: list = field(default_factory=list)


def rigid_params_for_mesh(topo: MeshTopology, cloth: ClothParams) -> RigidParams:
    """Rigid-body equivalent of a flat mesh of equal-mass nodes with uniform damping."""
    rest = topo.rest_positions()
    r = rest[:, :2] - rest[:, :2].mean(axis=0)
    rate = cloth.damping / cloth.node_mass
    return RigidParams(mass=topo.n_nodes * cloth.node_mass,
                       inertia=cloth.node_mass * float(np.sum(r * r)),
                       linear_damping=rate, angular_damping=rate)


class _RigidProcess:
    def __init__(self, params, offsets, forces, dt, substeps):
        self.params, self.offsets, self.forces = params, offsets, forces
        self.h, self.substeps = dt / substeps, substeps

    def __call__(self, x):
        for _ in range(self.substeps):
            wrench = wrench_from_forces(self.forces, self.offsets, x[..., 2])
            x = step_rigid(x, self.params, wrench, self.h)
        return x


class _MeshProcess:
    """Node positions -> next positions, with velocities held at their current values."""

    def __init__(self, topo, cloth, velocities, forces, dt, substeps):
        self.topo, self.cloth, self.velocities = topo, cloth, velocities
        self.forces, self.dt, self.substeps = forces, dt, substeps
        self.next_velocities = None

    def __call__(self, x):
        x = np.asarray(x)
        n = self.topo.n_nodes
        if x.ndim == 1:
            state = step_mesh(MeshState(x.reshape(n, 3), self.velocities), self.topo, self.cloth,
                              self.forces, self.dt, self.substeps)
            self.next_velocities = state.velocities
            return state.positions.ravel()
        pos, _ = step_mesh_batch(x.reshape(len(x), n, 3),
                                 np.broadcast_to(self.velocities, (len(x), n, 3)),
                                 self.topo, self.cloth, self.forces, self.dt, self.substeps)
        return pos.reshape(len(x), -1)


def _measurement_fn(model, features, topo, cam, pose):
    if model == "rigid":
        return lambda x: measure_rigid(x, features, cam, pose)
    return lambda x: measure_mesh(x, topo, features, cam, pose)


def run_tracker(pixels, config: TrackerConfig, cam: CameraIntrinsics, pose: CameraPose,
                topo: MeshTopology, cloth: ClothParams, node_forces=None,
                feature_ids=None) -> TrackResult:
    """Track a feature sequence.

    ``pixels`` is ``(frames, n, 2)`` with NaN rows for features missing on a
    frame (or ``(frames, 2n)`` stacked). ``node_forces`` is the assumed
    ``(frames, N, 3)`` force schedule, entry ``k`` acting between frames ``k``
    and ``k + 1``; ``None`` means no assumed force.
    """
    uv = np.asarray(pixels, dtype=float)
    if uv.ndim == 2:
        uv = unstack_uv(uv)
    if uv.ndim != 3 or uv.shape[-1] != 2 or len(uv) < 1:
        raise ValidationError(f"pixels must be (frames, n, 2), got {uv.shape}")
    frames, n, _ = uv.shape
    if np.any(np.isnan(uv[0])):
        missing = np.flatnonzero(np.isnan(uv[0]).any(axis=1)).tolist()
        raise ValidationError(f"features {missing} are missing on the initial frame")
    N = topo.n_nodes
    if node_forces is None:
        node_forces = np.zeros((frames, N, 3))
    node_forces = np.asarray(node_forces, dtype=float)
    if node_forces.shape[1:] != (N, 3) or len(node_forces) < frames - 1:
        raise ValidationError(f"force schedule must be (frames, {N}, 3), got {node_forces.shape}")

    features = init_features(uv[0], cam, pose, topo, feature_ids)
    model = config.model
    rest = topo.rest_positions()
    if model == "rigid":
        names = RIGID_FIELDS
        x0 = np.zeros(6)
        q = config.q_rigid
        rigid = rigid_params_for_mesh(topo, cloth)
        offsets = rest - rest.mean(axis=0)
    elif model == "mesh":
        names = tuple(f"n{i}_{c}" for i in range(N) for c in "xyz")
        x0 = rest.ravel()
        q = config.q_mesh
        velocities = np.zeros((N, 3))
    else:
        names = ()
        x0 = np.zeros(0)
        q = 0.0
    m = len(x0)
    fs = ekf.FilterState(x0, config.p0 * np.eye(m))
    Q = q * np.eye(m)
    complex_jac = ekf.JacobianConfig(ekf.COMPLEX_STEP)
    central_jac = ekf.JacobianConfig(ekf.CENTRAL_DIFFERENCE)

    estimates = np.empty((frames, m))
    priors = np.empty((frames, m))
    predicted = np.full((frames, n, 2), np.nan)
    corrected = np.full((frames, n, 2), np.nan)
    dropped = np.zeros(frames, dtype=bool)
    covariances = []

    for k in range(frames):
        if k > 0 and model != "none":
            forces = node_forces[k - 1]
            noise = ekf.NoiseConfig(Q, None, None)
            if model == "rigid":
                step = _RigidProcess(rigid, offsets, forces, config.dt, config.substeps)
                fs = ekf.predict(fs, step, noise, complex_jac, vectorized=True)
            else:
                step = _MeshProcess(topo, cloth, velocities, forces, config.dt, config.substeps)
                fs = ekf.predict(fs, step, noise, central_jac, vectorized=True)
                velocities = step.next_velocities
        priors[k] = fs.x

        seen = ~np.isnan(uv[k]).any(axis=1)
        if model == "none":
            predicted[k] = uv[0]
            corrected[k] = uv[0]
            dropped[k] = not seen.any()
        else:
            h_all = _measurement_fn(model, features, topo, cam, pose)
            try:
                predicted[k] = unstack_uv(h_all(fs.x))
            except BehindCameraError:
                dropped[k] = True
            if not seen.any():
                dropped[k] = True
            if k > 0 and config.update and not dropped[k]:
                sub = features.subset(seen)
                W = stack_uv(uv[k][seen])
                R = config.r_sigma ** 2 * np.eye(len(W))
                h = _measurement_fn(model, sub, topo, cam, pose)
                fs = ekf.update(fs, W, h, ekf.NoiseConfig(None, R, None), complex_jac,
                                vectorized=True)
            try:
                corrected[k] = unstack_uv(h_all(fs.x))
            except BehindCameraError:
                pass
        estimates[k] = fs.x
        if config.keep_covariances:
            covariances.append(fs.P.copy())

    observed = np.where(np.isnan(uv), np.nan, 1.0)
    report = ResidualReport.from_pixels(predicted * observed, uv)
    posterior = ResidualReport.from_pixels(corrected * observed, uv)
    return TrackResult(model, features, names, estimates, priors, predicted, corrected,
                       dropped, report, posterior, covariances)
