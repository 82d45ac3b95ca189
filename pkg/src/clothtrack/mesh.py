"""Mass-spring cloth mesh (Provot-style) with deformation-rate limiting.

Nodes sit on a rectangular grid; node ``(i, j)`` has flat index ``i*cols + j``
and rest position ``origin + (j*spacing, i*spacing, 0)``. Three spring
families connect them:

* structural: grid neighbours, rest length ``spacing``
* shear: both cell diagonals, rest length ``spacing*sqrt(2)``
* flexion: nodes two apart along a row or column, rest length ``2*spacing``

Integration is semi-implicit Euler, split into substeps. After each substep the
over-stretched structural and shear springs are projected back to
``(1 + tau_c)`` times their rest length, then nodes below the ground plane are
clamped. The hot loops are numba kernels so they run sequentially in a fixed
order, which keeps results bitwise reproducible for Jacobian evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numba
import numpy as np

from .errors import DivergenceError, ValidationError

STRUCTURAL, SHEAR, FLEXION = 0, 1, 2
FAMILY_NAMES = ("structural", "shear", "flexion")
DEFAULT_SUBSTEPS = 10


@dataclass(frozen=True)
class ClothParams:
    """Physical and solver parameters for the mesh.

    The effective spring constants are the base constants scaled by the
    dimensionless ``stretch_stiffness`` (structural and shear) and
    ``bend_stiffness`` (flexion). ``limit_sweeps`` is the number of
    deformation-limit passes per substep. ``thickness`` is the contact margin
    above the ground within which ``friction`` acts.
    """

    k_structural: float = 20.0
    k_shear: float = 10.0
    k_flexion: float = 5.0
    node_mass: float = 1e-3
    damping: float = 2e-2
    gravity: float = 9.81
    tau_c: float = 0.1
    bend_stiffness: float = 1.0
    stretch_stiffness: float = 1.0
    thickness: float = 0.0032
    friction: float = 0.0
    limit_sweeps: int = 3
    ground_contact: bool = True
    planar: bool = False

    def __post_init__(self):
        for name in ("k_structural", "k_shear", "k_flexion", "bend_stiffness",
                     "stretch_stiffness", "damping", "thickness", "friction", "gravity"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {value}")
        if not self.node_mass > 0:
            raise ValidationError(f"node_mass must be positive, got {self.node_mass}")
        if not 0 < self.tau_c <= 1:
            raise ValidationError(f"tau_c must lie in (0, 1], got {self.tau_c}")
        if int(self.limit_sweeps) != self.limit_sweeps or self.limit_sweeps < 0:
            raise ValidationError("limit_sweeps must be a non-negative integer")

    def family_stiffness(self) -> np.ndarray:
        return np.array([
            self.k_structural * self.stretch_stiffness,
            self.k_shear * self.stretch_stiffness,
            self.k_flexion * self.bend_stiffness,
        ])


@dataclass(frozen=True)
class MeshTopology:
    rows: int
    cols: int
    spacing: float
    origin: np.ndarray
    spring_a: np.ndarray
    spring_b: np.ndarray
    rest_length: np.ndarray
    family: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.rows * self.cols

    @property
    def n_springs(self) -> int:
        return len(self.spring_a)

    def node_index(self, i: int, j: int) -> int:
        return i * self.cols + j

    def rest_positions(self) -> np.ndarray:
        ii, jj = np.divmod(np.arange(self.n_nodes), self.cols)
        pos = np.zeros((self.n_nodes, 3))
        pos[:, 0] = jj * self.spacing
        pos[:, 1] = ii * self.spacing
        return pos + self.origin

    def family_counts(self) -> dict:
        return {name: int(np.sum(self.family == k)) for k, name in enumerate(FAMILY_NAMES)}

    @property
    def springs(self) -> list:
        """Springs as ``(node_a, node_b, rest_length, family_name)`` tuples."""
        return [(int(a), int(b), float(l), FAMILY_NAMES[f])
                for a, b, l, f in zip(self.spring_a, self.spring_b, self.rest_length, self.family)]


@dataclass(frozen=True)
class MeshState:
    """Node positions and velocities.

    ``max_violation`` is the largest remaining over-stretch (relative to rest
    length) seen by the last limiting pass and ``degenerate_springs`` counts
    zero-length springs encountered; both are diagnostics, not state.
    """

    positions: np.ndarray
    velocities: np.ndarray
    pinned: np.ndarray = None
    max_violation: float = 0.0
    degenerate_springs: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        vel = np.asarray(self.velocities, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or vel.shape != pos.shape:
            raise ValidationError("positions and velocities must both be (N, 3)")
        pinned = (np.zeros(len(pos), dtype=bool) if self.pinned is None
                  else np.asarray(self.pinned, dtype=bool))
        if pinned.shape != (len(pos),):
            raise ValidationError("pinned must have one flag per node")
        if np.any(vel[pinned] != 0):
            raise ValidationError("pinned nodes must have zero velocity")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "pinned", pinned)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)


@dataclass(frozen=True)
class NodeForces:
    forces: np.ndarray
    degenerate_springs: int = 0


def make_topology(rows, cols, spacing, origin, springs) -> MeshTopology:
    """Build a topology from an explicit ``(a, b, rest, family)`` spring list."""
    springs = list(springs)
    a = np.array([s[0] for s in springs], dtype=np.int64)
    b = np.array([s[1] for s in springs], dtype=np.int64)
    rest = np.array([s[2] for s in springs], dtype=float)
    fam = np.array([FAMILY_NAMES.index(s[3]) if isinstance(s[3], str) else s[3]
                    for s in springs], dtype=np.int64)
    n = rows * cols
    if len(springs) and (a.min() < 0 or b.min() < 0 or a.max() >= n or b.max() >= n):
        raise ValidationError("spring endpoint out of range")
    if np.any(rest <= 0):
        raise ValidationError("rest lengths must be positive")
    arrays = [np.asarray(origin, dtype=float), a, b, rest, fam]
    for arr in arrays:
        arr.flags.writeable = False
    return MeshTopology(rows, cols, float(spacing), *arrays)


def build_mesh(rows: int, cols: int, spacing: float, origin=(0.0, 0.0, 0.0)):
    """Flat grid mesh at rest. Returns ``(topology, state)``."""
    if rows < 2 or cols < 2:
        raise ValidationError(f"mesh needs at least 2x2 nodes, got {rows}x{cols}")
    if not spacing > 0:
        raise ValidationError(f"spacing must be positive, got {spacing}")
    origin = np.asarray(origin, dtype=float)
    if origin.shape != (3,):
        raise ValidationError("origin must be a 3-vector")

    def idx(i, j):
        return i * cols + j

    diag = spacing * np.sqrt(2.0)
    springs = []
    for i in range(rows):
        for j in range(cols):
            if j + 1 < cols:
                springs.append((idx(i, j), idx(i, j + 1), spacing, STRUCTURAL))
            if i + 1 < rows:
                springs.append((idx(i, j), idx(i + 1, j), spacing, STRUCTURAL))
    for i in range(rows - 1):
        for j in range(cols - 1):
            springs.append((idx(i, j), idx(i + 1, j + 1), diag, SHEAR))
            springs.append((idx(i, j + 1), idx(i + 1, j), diag, SHEAR))
    for i in range(rows):
        for j in range(cols):
            if j + 2 < cols:
                springs.append((idx(i, j), idx(i, j + 2), 2 * spacing, FLEXION))
            if i + 2 < rows:
                springs.append((idx(i, j), idx(i + 2, j), 2 * spacing, FLEXION))
    topo = make_topology(rows, cols, spacing, origin, springs)
    pos = topo.rest_positions()
    return topo, MeshState(pos, np.zeros_like(pos))


# ---------------------------------------------------------------------------
# numba kernels

@numba.njit(cache=True)
def _accumulate_forces(pos, vel, pinned, a, b, rest, k, node_mass, damping, gravity, ext, out):
    n = pos.shape[0]
    degenerate = 0
    for i in range(n):
        out[i, 0] = ext[i, 0] - damping * vel[i, 0]
        out[i, 1] = ext[i, 1] - damping * vel[i, 1]
        out[i, 2] = ext[i, 2] - damping * vel[i, 2] - node_mass * gravity
    for s in range(a.shape[0]):
        ia = a[s]
        ib = b[s]
        dx = pos[ia, 0] - pos[ib, 0]
        dy = pos[ia, 1] - pos[ib, 1]
        dz = pos[ia, 2] - pos[ib, 2]
        length = np.sqrt(dx * dx + dy * dy + dz * dz)
        if length == 0.0:
            degenerate += 1
            continue
        scale = -k[s] * (length - rest[s]) / length
        fx = scale * dx
        fy = scale * dy
        fz = scale * dz
        out[ia, 0] += fx
        out[ia, 1] += fy
        out[ia, 2] += fz
        out[ib, 0] -= fx
        out[ib, 1] -= fy
        out[ib, 2] -= fz
    for i in range(n):
        if pinned[i]:
            out[i, 0] = 0.0
            out[i, 1] = 0.0
            out[i, 2] = 0.0
    return degenerate


@numba.njit(cache=True)
def _limit_deformation(pos, pinned, a, b, rest, limited, tau_c, sweeps):
    """Gauss-Seidel projection of over-stretched springs, in spring-index order.

    Returns the largest remaining relative over-stretch after the last sweep.
    """
    stretch = 1.0 + tau_c
    for _ in range(sweeps):
        for s in range(a.shape[0]):
            if not limited[s]:
                continue
            ia = a[s]
            ib = b[s]
            pa = pinned[ia]
            pb = pinned[ib]
            if pa and pb:
                continue
            dx = pos[ia, 0] - pos[ib, 0]
            dy = pos[ia, 1] - pos[ib, 1]
            dz = pos[ia, 2] - pos[ib, 2]
            length = np.sqrt(dx * dx + dy * dy + dz * dz)
            max_len = stretch * rest[s]
            if length <= max_len:
                continue
            excess = (length - max_len) / length
            if pa:
                wa = 0.0
                wb = 1.0
            elif pb:
                wa = 1.0
                wb = 0.0
            else:
                wa = 0.5
                wb = 0.5
            pos[ia, 0] -= wa * excess * dx
            pos[ia, 1] -= wa * excess * dy
            pos[ia, 2] -= wa * excess * dz
            pos[ib, 0] += wb * excess * dx
            pos[ib, 1] += wb * excess * dy
            pos[ib, 2] += wb * excess * dz
    worst = 0.0
    for s in range(a.shape[0]):
        if not limited[s]:
            continue
        ia = a[s]
        ib = b[s]
        dx = pos[ia, 0] - pos[ib, 0]
        dy = pos[ia, 1] - pos[ib, 1]
        dz = pos[ia, 2] - pos[ib, 2]
        over = (np.sqrt(dx * dx + dy * dy + dz * dz) - stretch * rest[s]) / rest[s]
        if over > worst:
            worst = over
    return worst


@numba.njit(cache=True)
def _step_kernel(pos, vel, pinned, a, b, rest, k, limited, ext, node_mass, damping,
                 gravity, tau_c, sweeps, h, substeps, ground, thickness, friction, planar):
    n = pos.shape[0]
    force = np.empty_like(pos)
    before = np.empty_like(pos)
    inv_m = 1.0 / node_mass
    worst = 0.0
    degenerate = 0
    for _ in range(substeps):
        degenerate += _accumulate_forces(pos, vel, pinned, a, b, rest, k, node_mass,
                                         damping, gravity, ext, force)
        for i in range(n):
            if pinned[i]:
                continue
            for c in range(3):
                if planar and c == 2:
                    continue
                vel[i, c] += h * force[i, c] * inv_m
                pos[i, c] += h * vel[i, c]
        if sweeps > 0:
            before[:, :] = pos
            over = _limit_deformation(pos, pinned, a, b, rest, limited, tau_c, sweeps)
            if over > worst:
                worst = over
            for i in range(n):
                for c in range(3):
                    vel[i, c] += (pos[i, c] - before[i, c]) / h
        if ground:
            decel = friction * gravity * h
            for i in range(n):
                if pinned[i]:
                    continue
                if pos[i, 2] < 0.0:
                    pos[i, 2] = 0.0
                    vel[i, 2] = 0.0
                if decel > 0.0 and pos[i, 2] <= thickness:
                    speed = np.sqrt(vel[i, 0] * vel[i, 0] + vel[i, 1] * vel[i, 1])
                    if speed <= decel:
                        vel[i, 0] = 0.0
                        vel[i, 1] = 0.0
                    else:
                        shrink = 1.0 - decel / speed
                        vel[i, 0] *= shrink
                        vel[i, 1] *= shrink
    return worst, degenerate


@numba.njit(cache=True)
def _step_batch(pos, vel, pinned, a, b, rest, k, limited, ext, node_mass, damping,
                gravity, tau_c, sweeps, h, substeps, ground, thickness, friction, planar):
    worst = np.zeros(pos.shape[0])
    degenerate = np.zeros(pos.shape[0], dtype=np.int64)
    for m in range(pos.shape[0]):
        worst[m], degenerate[m] = _step_kernel(
            pos[m], vel[m], pinned, a, b, rest, k, limited, ext, node_mass, damping,
            gravity, tau_c, sweeps, h, substeps, ground, thickness, friction, planar)
    return worst, degenerate


# ---------------------------------------------------------------------------

def _check_dims(state: MeshState, topo: MeshTopology):
    if state.n_nodes != topo.n_nodes:
        raise ValidationError(
            f"state has {state.n_nodes} nodes but topology expects {topo.n_nodes}")


def _external_array(external, n):
    if external is None:
        return np.zeros((n, 3))
    ext = np.asarray(getattr(external, "forces", external), dtype=float)
    if ext.shape != (n, 3):
        raise ValidationError(f"external forces must be ({n}, 3), got {ext.shape}")
    if not np.all(np.isfinite(ext)):
        raise DivergenceError("non-finite external force")
    return np.ascontiguousarray(ext)


def spring_forces(state: MeshState, topo: MeshTopology, params: ClothParams) -> NodeForces:
    """Spring, viscous damping and gravity forces on every node.

    Pinned nodes get zero rows. Zero-length springs contribute nothing and are
    counted in ``degenerate_springs``.
    """
    _check_dims(state, topo)
    out = np.empty((state.n_nodes, 3))
    k = params.family_stiffness()[topo.family]
    degenerate = _accumulate_forces(
        state.positions, state.velocities, state.pinned, topo.spring_a, topo.spring_b,
        topo.rest_length, k, params.node_mass, params.damping, params.gravity,
        np.zeros((state.n_nodes, 3)), out)
    return NodeForces(out, int(degenerate))


def enforce_deformation_limit(state: MeshState, topo: MeshTopology, tau_c: float,
                              sweeps: int = 3) -> MeshState:
    """Pull structural/shear springs longer than ``(1 + tau_c) * rest`` back to that length.

    Positions only; velocities are returned unchanged. The returned state's
    ``max_violation`` holds whatever over-stretch the sweeps could not remove.
    """
    if not tau_c > 0:
        raise ValidationError(f"tau_c must be positive, got {tau_c}")
    _check_dims(state, topo)
    pos = state.positions.copy()
    worst = _limit_deformation(pos, state.pinned, topo.spring_a, topo.spring_b,
                               topo.rest_length, topo.family != FLEXION, float(tau_c),
                               int(sweeps))
    return replace(state, positions=pos, max_violation=float(worst))


def _kernel_args(topo: MeshTopology, params: ClothParams):
    k = np.ascontiguousarray(params.family_stiffness()[topo.family])
    limited = np.ascontiguousarray(topo.family != FLEXION)
    return (topo.spring_a, topo.spring_b, topo.rest_length, k, limited)


def step_mesh(state: MeshState, topo: MeshTopology, params: ClothParams, external=None,
              dt: float = 1.0 / 30.0, substeps: int = DEFAULT_SUBSTEPS) -> MeshState:
    """Advance the mesh by ``dt`` seconds split into ``substeps`` integrator steps."""
    if not dt > 0:
        raise ValidationError(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise ValidationError("substeps must be at least 1")
    _check_dims(state, topo)
    ext = _external_array(external, state.n_nodes)
    pos = state.positions.copy()
    vel = state.velocities.copy()
    worst, degenerate = _step_kernel(
        pos, vel, state.pinned, *_kernel_args(topo, params), ext, params.node_mass,
        params.damping, params.gravity, params.tau_c, int(params.limit_sweeps),
        dt / substeps, int(substeps), params.ground_contact, params.thickness,
        params.friction, params.planar)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(vel))):
        raise DivergenceError("mesh simulation produced non-finite values")
    return MeshState(pos, vel, state.pinned, float(worst), int(degenerate))


def step_mesh_batch(positions, velocities, topo: MeshTopology, params: ClothParams,
                    external=None, dt: float = 1.0 / 30.0, substeps: int = DEFAULT_SUBSTEPS,
                    pinned=None):
    """Step many states ``(B, N, 3)`` sharing one topology and force field.

    Returns ``(positions, velocities)``; non-finite rows are left for the
    caller to detect.
    """
    pos = np.array(positions, dtype=float, order="C")
    vel = np.array(velocities, dtype=float, order="C")
    if pos.ndim != 3 or pos.shape[1:] != (topo.n_nodes, 3) or vel.shape != pos.shape:
        raise ValidationError("batched positions/velocities must be (B, N, 3)")
    pinned = np.zeros(topo.n_nodes, dtype=bool) if pinned is None else np.asarray(pinned, bool)
    ext = _external_array(external, topo.n_nodes)
    _step_batch(pos, vel, pinned, *_kernel_args(topo, params), ext, params.node_mass,
                params.damping, params.gravity, params.tau_c, int(params.limit_sweeps),
                dt / substeps, int(substeps), params.ground_contact, params.thickness,
                params.friction, params.planar)
    return pos, vel


def total_momentum(state: MeshState, params: ClothParams) -> np.ndarray:
    return params.node_mass * state.velocities.sum(axis=0)
