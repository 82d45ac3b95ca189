"""Maps from filter states to expected pixel measurements.

Features live in cloth space ``(s, t)``, which equals world XY on the flat
initial frame. For the mesh model each feature is anchored once to the cell
containing it and to bilinear natural coordinates in ``[-1, 1]^2``; its world
position is then the shape-function blend of that cell's four corner nodes.

Measurement vectors are stacked as all u components followed by all v
components, so element ``j`` and element ``n + j`` belong to feature ``j``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, CameraPose, backproject_flat, project
from .errors import OutsideMeshError, ValidationError
from .mesh import MeshState, MeshTopology

NATURAL_EPS = 1e-9


@dataclass(frozen=True)
class FeatureSet:
    """Ordered feature anchors; the order fixes the measurement layout.

    ``cells[j]`` is the ``(row, col)`` of the anchoring cell and ``natural[j]``
    the ``(x_o, y_o)`` coordinates inside it.
    """

    ids: np.ndarray
    coords: np.ndarray
    cells: np.ndarray
    natural: np.ndarray

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        coords = np.asarray(self.coords, dtype=float).reshape(-1, 2)
        cells = np.asarray(self.cells, dtype=np.int64).reshape(-1, 2)
        natural = np.asarray(self.natural, dtype=float).reshape(-1, 2)
        n = len(ids)
        if not (len(coords) == len(cells) == len(natural) == n):
            raise ValidationError("feature arrays disagree in length")
        if len(np.unique(ids)) != n:
            raise ValidationError("feature ids must be unique")
        if np.any(np.abs(natural) > 1 + NATURAL_EPS):
            raise ValidationError("natural coordinates outside [-1, 1]")
        for arr in (ids, coords, cells, natural):
            arr.flags.writeable = False
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "natural", natural)

    def __len__(self):
        return len(self.ids)

    def subset(self, mask) -> "FeatureSet":
        mask = np.asarray(mask, dtype=bool)
        return FeatureSet(self.ids[mask], self.coords[mask], self.cells[mask], self.natural[mask])

    def corner_nodes(self, topo: MeshTopology) -> np.ndarray:
        """Node indices ``(n, 4)`` of each anchoring cell, ordered N1..N4."""
        r, c = self.cells[:, 0], self.cells[:, 1]
        cols = topo.cols
        return np.stack([r * cols + c, r * cols + c + 1,
                         (r + 1) * cols + c + 1, (r + 1) * cols + c], axis=-1)

    def weights(self) -> np.ndarray:
        return shape_weights(self.natural[:, 0], self.natural[:, 1])


def stack_uv(uv) -> np.ndarray:
    """``(..., n, 2)`` pixel pairs -> ``(..., 2n)`` stacked vector."""
    uv = np.asarray(uv)
    return np.concatenate([uv[..., 0], uv[..., 1]], axis=-1)


def unstack_uv(stacked) -> np.ndarray:
    w = np.asarray(stacked)
    if w.shape[-1] % 2:
        raise ValidationError(f"stacked measurement has odd length {w.shape[-1]}")
    n = w.shape[-1] // 2
    return np.stack([w[..., :n], w[..., n:]], axis=-1)


def shape_weights(x_o, y_o) -> np.ndarray:
    """Bilinear weights ``(..., 4)`` for corners (-1,-1), (1,-1), (1,1), (-1,1)."""
    x = np.asarray(x_o, dtype=float)
    y = np.asarray(y_o, dtype=float)
    if np.any(np.abs(x) > 1 + NATURAL_EPS) or np.any(np.abs(y) > 1 + NATURAL_EPS):
        raise ValidationError("natural coordinates must lie in [-1, 1]")
    return 0.25 * np.stack([(1 - x) * (1 - y), (1 + x) * (1 - y),
                            (1 + x) * (1 + y), (1 - x) * (1 + y)], axis=-1)


def locate_feature(coord, topo: MeshTopology):
    """Cell ``(row, col)`` and natural coordinates of a cloth-space point.

    Points on the far boundary belong to the last cell.
    """
    s, t = (float(v) for v in coord)
    gx = (s - topo.origin[0]) / topo.spacing
    gy = (t - topo.origin[1]) / topo.spacing
    tol = NATURAL_EPS
    if not (-tol <= gx <= topo.cols - 1 + tol and -tol <= gy <= topo.rows - 1 + tol):
        raise OutsideMeshError(f"cloth coordinate ({s}, {t}) lies outside the mesh", coord=(s, t))
    col = int(min(max(np.floor(gx), 0), topo.cols - 2))
    row = int(min(max(np.floor(gy), 0), topo.rows - 2))
    natural = np.clip([2 * (gx - col) - 1, 2 * (gy - row) - 1], -1.0, 1.0)
    return (row, col), (float(natural[0]), float(natural[1]))


def anchor_features(coords, topo: MeshTopology, ids=None) -> FeatureSet:
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    ids = np.arange(len(coords)) if ids is None else np.asarray(ids)
    cells, natural, outside = [], [], []
    for fid, c in zip(ids, coords):
        try:
            cell, nat = locate_feature(c, topo)
        except OutsideMeshError:
            outside.append(int(fid))
            continue
        cells.append(cell)
        natural.append(nat)
    if outside:
        raise OutsideMeshError(f"features {outside} fall outside the mesh footprint",
                               feature_ids=outside)
    return FeatureSet(ids, coords, cells, natural)


def init_features(pixels, cam: CameraIntrinsics, pose: CameraPose, topo: MeshTopology,
                  ids=None) -> FeatureSet:
    """Backproject first-frame pixels onto the flat cloth and anchor them to the mesh."""
    world = backproject_flat(np.asarray(pixels, dtype=float).reshape(-1, 2), cam, pose)
    return anchor_features(world[:, :2], topo, ids)


def rigid_world_points(state, features: FeatureSet):
    """Rotate cloth coordinates by theta about the cloth origin, then translate."""
    x = np.asarray(state)
    X, Y, theta = x[..., 0:1], x[..., 1:2], x[..., 2:3]
    s, t = features.coords[:, 0], features.coords[:, 1]
    c, sn = np.cos(theta), np.sin(theta)
    wx = c * s - sn * t + X
    wy = sn * s + c * t + Y
    return np.stack([wx, wy, np.zeros_like(wx)], axis=-1)


def measure_rigid(state, features: FeatureSet, cam: CameraIntrinsics,
                  pose: CameraPose) -> np.ndarray:
    """Expected stacked pixels for a rigid state ``(..., 6)`` (only X, Y, theta are used)."""
    return stack_uv(project(rigid_world_points(state, features), cam, pose))


def mesh_world_points(positions, topo: MeshTopology, features: FeatureSet):
    """Shape-function blend of cell corners; ``positions`` is ``(..., N, 3)`` or ``(..., 3N)``."""
    if isinstance(positions, MeshState):
        positions = positions.positions
    pos = np.asarray(positions)
    if pos.shape[-1] != 3:
        pos = pos.reshape(pos.shape[:-1] + (-1, 3))
    if pos.shape[-2] != topo.n_nodes:
        raise ValidationError(f"expected {topo.n_nodes} nodes, got {pos.shape[-2]}")
    corners = pos[..., features.corner_nodes(topo), :]
    return np.einsum("...fkc,fk->...fc", corners, features.weights())


def measure_mesh(positions, topo: MeshTopology, features: FeatureSet, cam: CameraIntrinsics,
                 pose: CameraPose) -> np.ndarray:
    return stack_uv(project(mesh_world_points(positions, topo, features), cam, pose))
