"""Run configuration: INI-style ``key = value`` text with section headers.

Several files may be layered; later files override earlier ones key by key.
Unknown sections or keys are rejected. Every file must carry
``format_version`` in its ``[meta]`` section.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path

from .camera import CameraIntrinsics, CameraPose
from .errors import ValidationError
from .mesh import ClothParams
from .param_id import TABLE2_BOUNDS, WORST_WEIGHT, GaConfig
from .synth import ScenarioSpec, centered_mesh
from .tracker import TrackerConfig

FORMAT_VERSION = 1


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("", "none", "default") else conv(text)
    return parse


def _names(text: str) -> tuple:
    return tuple(part.strip() for part in text.split(",") if part.strip())


SCHEMA = {
    "meta": {"format_version": int},
    "camera": {"f": float, "tz": float, "width": int, "height": int},
    "mesh": {"rows": int, "cols": int, "spacing": float},
    "cloth": {f.name: (_bool if f.type == "bool" else int if f.type == "int" else float)
              for f in fields(ClothParams)},
    "scenario": {"kind": str, "frames": _optional(int), "fps": float, "n_features": int,
                 "noise_sigma": float, "seed": int, "force_magnitude": _optional(float),
                 "substeps": int, "feature_margin": float},
    "ekf": {"substeps": int, "q_rigid": float, "q_mesh": float, "r_sigma": float, "p0": float},
    "ga": {f.name: (int if f.type == "int" else float) for f in fields(GaConfig)}
          | {"params": _names, "substeps": int, "worst_weight": float},
}


@dataclass
class RunConfig:
    camera: dict
    mesh: dict
    cloth: dict
    scenario: dict
    ekf: dict
    ga: dict

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics(self.camera.get("f", 500.0), self.camera.get("width", 640),
                                self.camera.get("height", 480))

    def pose(self) -> CameraPose:
        return CameraPose.overhead(self.camera.get("tz", 1.0))

    def mesh_pair(self):
        return centered_mesh(self.mesh.get("rows", 10), self.mesh.get("cols", 10),
                             self.mesh.get("spacing", 0.04))

    def cloth_params(self) -> ClothParams:
        return ClothParams(**self.cloth)

    def scenario_spec(self, seed: int | None = None) -> ScenarioSpec:
        values = dict(self.scenario)
        if seed is not None:
            values["seed"] = seed
        return ScenarioSpec(**values)

    @property
    def fps(self) -> float:
        return self.scenario.get("fps", 30.0)

    def tracker_config(self, model: str, update: bool = True) -> TrackerConfig:
        return TrackerConfig(model=model, dt=1.0 / self.fps, update=update, **self.ekf)

    def ga_config(self, seed: int | None = None, generations: int | None = None) -> GaConfig:
        values = {k: v for k, v in self.ga.items() if k not in ("params", "substeps", "worst_weight")}
        if seed is not None:
            values["seed"] = seed
        if generations is not None:
            values["generations"] = generations
        return GaConfig(**values)

    @property
    def ga_params(self) -> tuple:
        names = self.ga.get("params", tuple(TABLE2_BOUNDS))
        unknown = [n for n in names if n not in TABLE2_BOUNDS]
        if unknown:
            raise ValidationError(f"[ga] params: unknown parameters {unknown}")
        return names

    @property
    def ga_substeps(self) -> int:
        return self.ga.get("substeps", 10)

    @property
    def worst_weight(self) -> float:
        return self.ga.get("worst_weight", WORST_WEIGHT)

    def validate(self) -> "RunConfig":
        """Construct every object once so bad values fail early."""
        try:
            self.intrinsics()
            self.pose()
            self.mesh_pair()
            self.cloth_params()
            self.scenario_spec()
            self.tracker_config("rigid")
            self.ga_config()
            self.ga_params
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc
        return self


def _parse_text(text: str, source: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                       inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ValidationError(f"{source}: {exc}") from exc
    values = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValidationError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ValidationError(f"{source}: unknown key {key!r} in [{section}]")
            try:
                values.setdefault(section, {})[key] = conv(raw)
            except ValueError as exc:
                raise ValidationError(f"{source}: [{section}] {key} = {raw!r}: {exc}") from exc
    version = values.get("meta", {}).get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"{source}: expected [meta] format_version = {FORMAT_VERSION}, "
                              f"got {version}")
    return values


def load_config(paths=()) -> RunConfig:
    """Layer config files in order; no paths gives all defaults."""
    merged = {name: {} for name in SCHEMA}
    for path in paths:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}") from exc
        for section, values in _parse_text(text, str(path)).items():
            merged[section].update(values)
    merged.pop("meta")
    return RunConfig(**merged).validate()


def format_section(name: str, values: dict) -> str:
    lines = [f"[{name}]"]
    for key, value in values.items():
        if isinstance(value, (tuple, list)):
            value = ", ".join(value)
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def cloth_fragment(params: ClothParams) -> str:
    """Config text that pins every cloth parameter, reusable with ``--config``."""
    values = {f.name: getattr(params, f.name) for f in fields(ClothParams)}
    return (format_section("meta", {"format_version": FORMAT_VERSION}) + "\n"
            + format_section("cloth", values))
