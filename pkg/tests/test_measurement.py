import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clothtrack.camera import CameraIntrinsics, CameraPose, project
from clothtrack.errors import BehindCameraError, OutsideMeshError, ValidationError
from clothtrack.measurement import (FeatureSet, anchor_features, init_features, locate_feature,
                                    measure_mesh, measure_rigid, mesh_world_points, shape_weights,
                                    stack_uv, unstack_uv)
from clothtrack.mesh import build_mesh
from clothtrack.synth import centered_mesh

CORNERS = [(-1, -1), (1, -1), (1, 1), (-1, 1)]
natural = st.floats(-1, 1)


@pytest.mark.parametrize("xy, expected", [
    ((0.0, 0.0), (0.25, 0.25, 0.25, 0.25)),
    ((-1.0, -1.0), (1, 0, 0, 0)),
    ((0.5, -0.5), (0.1875, 0.5625, 0.1875, 0.0625)),
])
def test_shape_weight_examples(xy, expected):
    np.testing.assert_allclose(shape_weights(*xy), expected, atol=1e-15)


@pytest.mark.parametrize("k", range(4))
def test_kronecker_at_corners(k):
    w = shape_weights(*CORNERS[k])
    np.testing.assert_array_equal(w, np.eye(4)[k])


@pytest.mark.parametrize("xy", [(1.1, 0), (0, -1.01)])
def test_shape_weights_reject_out_of_domain(xy):
    with pytest.raises(ValidationError):
        shape_weights(*xy)


@settings(max_examples=300, deadline=None)
@given(x=natural, y=natural, a=st.floats(-10, 10), b=st.floats(-10, 10), c=st.floats(-10, 10))
def test_partition_of_unity_and_affine_exactness(x, y, a, b, c):
    w = shape_weights(x, y)
    assert abs(w.sum() - 1) <= 1e-12
    assert np.all(w >= 0)
    corner_vals = np.array([a + b * cx + c * cy for cx, cy in CORNERS])
    assert abs(w @ corner_vals - (a + b * x + c * y)) <= 1e-12 * (1 + abs(a) + abs(b) + abs(c))


def test_locate_examples():
    topo, _ = build_mesh(4, 4, 0.1)
    assert locate_feature((0.0, 0.0), topo) == ((0, 0), (-1.0, -1.0))
    cell, nat = locate_feature((0.05, 0.05), topo)
    assert cell == (0, 0)
    np.testing.assert_allclose(nat, (0, 0), atol=1e-12)
    cell, nat = locate_feature((0.3, 0.3), topo)
    assert cell == (2, 2)
    np.testing.assert_allclose(nat, (1, 1), atol=1e-12)


def test_locate_interior_node_is_a_corner():
    topo, _ = build_mesh(4, 4, 0.1)
    cell, nat = locate_feature((0.1, 0.2), topo)
    assert set(np.round(nat, 12)) <= {-1.0, 1.0}
    nodes = FeatureSet([0], [(0.1, 0.2)], [cell], [nat]).corner_nodes(topo)[0]
    w = shape_weights(*nat)
    assert nodes[np.argmax(w)] == topo.node_index(2, 1)


@pytest.mark.parametrize("coord", [(-0.01, 0.1), (0.1, 0.31), (1.0, 1.0)])
def test_locate_rejects_outside(coord):
    topo, _ = build_mesh(4, 4, 0.1)
    with pytest.raises(OutsideMeshError) as info:
        locate_feature(coord, topo)
    assert info.value.coord == coord


@settings(max_examples=200, deadline=None)
@given(s=st.floats(0, 0.5), t=st.floats(0, 0.3))
def test_located_anchor_reproduces_coordinate(s, t):
    topo, state = build_mesh(4, 6, 0.1)
    feats = anchor_features([(s, t)], topo)
    world = mesh_world_points(state.positions, topo, feats)
    np.testing.assert_allclose(world[0], (s, t, 0), atol=1e-12)


def test_anchor_reports_offending_ids():
    topo, _ = build_mesh(3, 3, 0.1)
    with pytest.raises(OutsideMeshError) as info:
        anchor_features([(0.1, 0.1), (0.5, 0.1), (0.1, -1)], topo, ids=[7, 8, 9])
    assert info.value.feature_ids == (8, 9)


def test_feature_set_invariants():
    with pytest.raises(ValidationError):
        FeatureSet([1, 1], [(0, 0), (0, 0)], [(0, 0), (0, 0)], [(0, 0), (0, 0)])
    fs = FeatureSet([1], [(0, 0)], [(0, 0)], [(0, 0)])
    with pytest.raises(ValueError):
        fs.ids[0] = 3


def test_init_features_center_and_cell_center(cam, pose):
    topo, _ = centered_mesh(4, 4, 0.1)
    feats = init_features([(320, 240), (320 + 500 * 0.1, 240 - 500 * 0.1)], cam, pose, topo)
    np.testing.assert_allclose(feats.coords[0], (0, 0), atol=1e-12)
    # the origin is the centre of the middle cell of a 4x4 centred mesh
    assert tuple(feats.cells[0]) == (1, 1)
    np.testing.assert_allclose(feats.natural[0], (0, 0), atol=1e-12)
    np.testing.assert_allclose(feats.coords[1], (0.1, 0.1), atol=1e-12)


def test_init_features_outside_footprint(cam, pose):
    topo, _ = centered_mesh(4, 4, 0.1)
    with pytest.raises(OutsideMeshError):
        init_features([(320, 240), (620, 240)], cam, pose, topo, ids=[3, 4])


def test_stacking_layout():
    uv = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    w = stack_uv(uv)
    np.testing.assert_array_equal(w, [1, 3, 5, 2, 4, 6])
    np.testing.assert_array_equal(unstack_uv(w), uv)
    with pytest.raises(ValidationError):
        unstack_uv(np.zeros(5))


def some_features(topo, rng, n=12):
    lo = topo.origin[:2]
    hi = lo + [(topo.cols - 1) * topo.spacing, (topo.rows - 1) * topo.spacing]
    return anchor_features(rng.uniform(lo, hi, size=(n, 2)), topo)


def test_measure_rigid_identity_pose(cam, pose, rng):
    topo, _ = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, rng)
    world = np.c_[feats.coords, np.zeros(len(feats))]
    np.testing.assert_allclose(measure_rigid(np.zeros(6), feats, cam, pose),
                               stack_uv(project(world, cam, pose)), atol=1e-12)


def test_measure_rigid_rotation_convention(cam, pose):
    topo, _ = centered_mesh(5, 5, 0.05)
    feats = anchor_features([(0.1, 0.0)], topo)
    got = measure_rigid(np.array([0, 0, np.pi / 2, 0, 0, 0]), feats, cam, pose)
    np.testing.assert_allclose(got, stack_uv(project(np.array([[0, 0.1, 0]]), cam, pose)),
                               atol=1e-12)


def test_measure_rigid_translation_shifts_u(cam, rng):
    pose = CameraPose.overhead(2.0)
    topo, _ = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, rng)
    n = len(feats)
    base = measure_rigid(np.zeros(6), feats, cam, pose)
    moved = measure_rigid(np.array([0.1, 0, 0, 0, 0, 0]), feats, cam, pose)
    np.testing.assert_allclose(moved[:n] - base[:n], 500 * 0.1 / 2.0, rtol=1e-12)
    np.testing.assert_allclose(moved[n:], base[n:], atol=1e-12)


def test_measure_rigid_batches(cam, pose, rng):
    topo, _ = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, rng)
    X = rng.normal(0, 0.05, (4, 6))
    batch = measure_rigid(X, feats, cam, pose)
    for i in range(4):
        np.testing.assert_allclose(batch[i], measure_rigid(X[i], feats, cam, pose), atol=1e-12)


def test_measure_mesh_rest(cam, pose, rng):
    topo, state = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, rng)
    world = np.c_[feats.coords, np.zeros(len(feats))]
    np.testing.assert_allclose(measure_mesh(state, topo, feats, cam, pose),
                               stack_uv(project(world, cam, pose)), atol=1e-12)


def test_measure_mesh_accepts_flat_state(cam, pose, rng):
    topo, state = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, rng)
    np.testing.assert_array_equal(measure_mesh(state.positions.ravel(), topo, feats, cam, pose),
                                  measure_mesh(state.positions, topo, feats, cam, pose))
    with pytest.raises(ValidationError):
        measure_mesh(np.zeros((24, 3)), topo, feats, cam, pose)


@settings(max_examples=50, deadline=None)
@given(a=st.floats(-1, 1), b=st.floats(-1, 1), seed=st.integers(0, 1000))
def test_mesh_translation_moves_features_identically(a, b, seed):
    topo, state = centered_mesh(5, 5, 0.05)
    feats = some_features(topo, np.random.default_rng(seed))
    base = mesh_world_points(state.positions, topo, feats)
    moved = mesh_world_points(state.positions + [a, b, 0], topo, feats)
    np.testing.assert_allclose(moved - base, np.broadcast_to([a, b, 0], base.shape), atol=1e-12)


def test_lifted_corner_raises_center_feature():
    topo, state = build_mesh(3, 3, 0.1)
    feats = anchor_features([(0.05, 0.05)], topo)
    pos = state.positions.copy()
    pos[topo.node_index(1, 1), 2] += 0.08
    assert mesh_world_points(pos, topo, feats)[0, 2] == pytest.approx(0.02, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(X=st.floats(-0.2, 0.2), Y=st.floats(-0.2, 0.2), seed=st.integers(0, 1000))
def test_rigid_and_mesh_models_agree_on_translation(X, Y, seed):
    cam, pose = CameraIntrinsics(500.0), CameraPose.overhead(1.0)
    topo, state = centered_mesh(6, 6, 0.04)
    feats = some_features(topo, np.random.default_rng(seed))
    rigid = measure_rigid(np.array([X, Y, 0, 0, 0, 0]), feats, cam, pose)
    mesh = measure_mesh(state.positions + [X, Y, 0], topo, feats, cam, pose)
    np.testing.assert_allclose(rigid, mesh, atol=1e-9)


def test_measurement_behind_camera(cam, pose):
    topo, state = centered_mesh(3, 3, 0.1)
    feats = anchor_features([(0.0, 0.0)], topo)
    with pytest.raises(BehindCameraError):
        measure_mesh(state.positions - [0, 0, 2.0], topo, feats, cam, pose)
