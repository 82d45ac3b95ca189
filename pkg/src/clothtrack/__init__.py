"""Physics-based cloth tracking from feature points.

A rigid-body or mass-spring mesh process model drives an extended Kalman
filter over projected feature pixels; a genetic algorithm identifies the
cloth parameters from reference sequences.
"""
from .camera import CameraIntrinsics, CameraPose, backproject_flat, project
from .ekf import FilterState, JacobianConfig, NoiseConfig, numerical_jacobian, predict, update
from .errors import (BehindCameraError, ClothTrackError, DivergenceError, FormatError,
                     NumericalError, OutsideMeshError, SingularInnovationError, ValidationError)
from .measurement import FeatureSet, init_features, measure_mesh, measure_rigid, shape_weights
from .mesh import ClothParams, MeshState, MeshTopology, build_mesh, step_mesh
from .param_id import ClothObjective, GaConfig, ParamBounds, Reference, run_ga
from .rigid import RigidParams, step_rigid
from .synth import ScenarioSpec, generate_scenario
from .tracker import TrackerConfig, run_tracker

__version__ = "0.1.0"
