"""Genetic-algorithm identification of cloth parameters.

The objective simulates the mesh open loop under a reference force schedule
and compares the projected features with the reference measurements. The
score is ``-(average pixel error + 2 * worst pixel error)``, so higher is
better and a perfect fit scores 0.

Genes and how they land in :class:`~clothtrack.mesh.ClothParams`:

===================  ==============================================
bend_stiffness       scales the flexion springs
stretch_stiffness    scales the structural and shear springs
density              kg/m^2; node mass = density * spacing^2
thickness            ground-contact margin (m)
damping              node damping rate = gene * DAMPING_RATE (1/s)
solver_iterations    deformation-limit sweeps (rounded to an int)
friction             Coulomb coefficient against the ground
gravity              m/s^2
===================  ==============================================
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import CameraIntrinsics, CameraPose
from .errors import NumericalError, ValidationError
from .measurement import init_features, measure_mesh, unstack_uv
from .mesh import ClothParams, MeshState, MeshTopology, step_mesh

log = logging.getLogger(__name__)

DAMPING_RATE = 40.0
WORST_WEIGHT = 2.0
FAILED_FITNESS = -np.inf

TABLE2_BOUNDS = {
    "bend_stiffness": (0.0, 1.0),
    "stretch_stiffness": (0.0, 1.0),
    "density": (0.02, 2.0),
    "thickness": (0.0005, 0.01),
    "damping": (0.0, 1.0),
    "solver_iterations": (1.0, 5.0),
    "friction": (0.0, 1.0),
    "gravity": (5.0, 15.0),
}
INTEGER_GENES = frozenset({"solver_iterations"})


@dataclass(frozen=True)
class ParamBounds:
    names: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (len(self.names),) or hi.shape != lo.shape:
            raise ValidationError("bounds must have one (lower, upper) pair per name")
        unknown = set(self.names) - set(TABLE2_BOUNDS)
        if unknown:
            raise ValidationError(f"unknown parameters {sorted(unknown)}")
        if np.any(lo >= hi):
            raise ValidationError("each lower bound must be below its upper bound")
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def table2(cls, names=None) -> "ParamBounds":
        names = tuple(TABLE2_BOUNDS) if names is None else tuple(names)
        missing = [n for n in names if n not in TABLE2_BOUNDS]
        if missing:
            raise ValidationError(f"unknown parameters {missing}")
        return cls(names, [TABLE2_BOUNDS[n][0] for n in names],
                   [TABLE2_BOUNDS[n][1] for n in names])

    def as_dict(self, genes) -> dict:
        out = {}
        for name, value in zip(self.names, genes):
            out[name] = int(round(value)) if name in INTEGER_GENES else float(value)
        return out

    def contains(self, genes) -> bool:
        g = np.asarray(genes)
        return bool(np.all(g >= self.lower) and np.all(g <= self.upper))


def genes_from_params(params: ClothParams, spacing: float) -> dict:
    """Inverse of :func:`apply_genes` for all eight genes."""
    return {
        "bend_stiffness": params.bend_stiffness,
        "stretch_stiffness": params.stretch_stiffness,
        "density": params.node_mass / spacing ** 2,
        "thickness": params.thickness,
        "damping": params.damping / (params.node_mass * DAMPING_RATE),
        "solver_iterations": params.limit_sweeps,
        "friction": params.friction,
        "gravity": params.gravity,
    }


def apply_genes(base: ClothParams, genes: dict, spacing: float) -> ClothParams:
    g = genes_from_params(base, spacing)
    g.update(genes)
    node_mass = g["density"] * spacing ** 2
    return replace(
        base,
        bend_stiffness=g["bend_stiffness"],
        stretch_stiffness=g["stretch_stiffness"],
        node_mass=node_mass,
        thickness=g["thickness"],
        damping=g["damping"] * node_mass * DAMPING_RATE,
        limit_sweeps=int(round(g["solver_iterations"])),
        friction=g["friction"],
        gravity=g["gravity"],
    )


def cost_to_fitness(average: float, worst: float, worst_weight: float = WORST_WEIGHT) -> float:
    return -(average + worst_weight * worst)


@dataclass(frozen=True)
class Reference:
    """A measured sequence: pixels ``(frames, n, 2)`` plus the force schedule that produced it."""

    pixels: np.ndarray
    node_forces: np.ndarray
    feature_ids: np.ndarray | None = None

    @classmethod
    def from_scenario(cls, data) -> "Reference":
        return cls(unstack_uv(data.measurements), data.node_forces,
                   np.asarray(data.features.ids))


class ClothObjective:
    """Callable fitness over a list of references (costs are summed)."""

    def __init__(self, references, bounds: ParamBounds, base: ClothParams, topo: MeshTopology,
                 cam: CameraIntrinsics, pose: CameraPose, dt: float = 1.0 / 30.0,
                 substeps: int = 10, worst_weight: float = WORST_WEIGHT):
        if isinstance(references, Reference):
            references = [references]
        self.references = list(references)
        if not self.references:
            raise ValidationError("need at least one reference sequence")
        self.bounds, self.base, self.topo = bounds, base, topo
        self.cam, self.pose = cam, pose
        self.dt, self.substeps = dt, substeps
        self.worst_weight = worst_weight
        self.features = [init_features(r.pixels[0], cam, pose, topo, r.feature_ids)
                         for r in self.references]

    def params_for(self, genes) -> ClothParams:
        return apply_genes(self.base, self.bounds.as_dict(genes), self.topo.spacing)

    def errors(self, params: ClothParams, index: int = 0) -> np.ndarray:
        """Per-frame, per-feature pixel errors ``(frames, n)`` of an open-loop rollout."""
        ref, feats = self.references[index], self.features[index]
        rest = self.topo.rest_positions()
        state = MeshState(rest, np.zeros_like(rest))
        frames = len(ref.pixels)
        positions = np.empty((frames,) + rest.shape)
        positions[0] = rest
        for k in range(1, frames):
            state = step_mesh(state, self.topo, params, ref.node_forces[k - 1], self.dt,
                              self.substeps)
            positions[k] = state.positions
        predicted = unstack_uv(measure_mesh(positions, self.topo, feats, self.cam, self.pose))
        return np.linalg.norm(predicted - ref.pixels, axis=-1)

    def __call__(self, genes) -> float:
        params = self.params_for(genes)
        cost = 0.0
        for i in range(len(self.references)):
            try:
                err = self.errors(params, i)
            except NumericalError as exc:
                log.debug("simulation failed for %s: %s", self.bounds.as_dict(genes), exc)
                return FAILED_FITNESS
            cost -= cost_to_fitness(np.nanmean(err), np.nanmax(err), self.worst_weight)
        return -cost


@dataclass(frozen=True)
class GaConfig:
    population: int = 30
    generations: int = 100
    tournament: int = 3
    crossover_rate: float = 0.9
    mutation_rate: float = 0.1
    mutation_scale: float = 0.1
    blend_alpha: float = 0.0
    elitism: int = 2
    top_k: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.population < 1 or self.generations < 0 or self.tournament < 1:
            raise ValidationError("population and tournament must be positive, generations >= 0")
        for name in ("crossover_rate", "mutation_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValidationError(f"{name} must lie in [0, 1]")
        if self.mutation_scale < 0 or self.blend_alpha < 0:
            raise ValidationError("mutation_scale and blend_alpha must be non-negative")
        if not 0 <= self.elitism < self.population:
            raise ValidationError("elitism must be below the population size")
        if self.top_k < 1:
            raise ValidationError("top_k must be positive")


@dataclass(frozen=True)
class Individual:
    genes: np.ndarray
    fitness: float
    params: dict


@dataclass
class GaResult:
    best: Individual
    top: list
    trace: np.ndarray          # (generations + 1, 2 + d): best, mean, best genes
    populations: list = field(default_factory=list)
    fitnesses: list = field(default_factory=list)


def _tournament(rng, fitness, size):
    picks = rng.integers(0, len(fitness), size=size)
    return picks[np.argmax(fitness[picks])]


def run_ga(cfg: GaConfig, bounds: ParamBounds, objective) -> GaResult:
    """Maximise ``objective(genes)`` inside ``bounds``.

    Tournament selection, blend crossover (``blend_alpha = 0`` keeps children
    between their parents; larger values let them land up to that fraction of
    the parent gap outside), Gaussian mutation clamped to the bounds, and
    elitism. All randomness comes from one generator seeded with
    ``cfg.seed`` and consumed in a fixed order.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = bounds.lower, bounds.upper
    d = len(lo)
    sigma = cfg.mutation_scale * (hi - lo)

    pop = rng.uniform(lo, hi, size=(cfg.population, d))
    fit = np.array([objective(g) for g in pop], dtype=float)
    populations, fitnesses, rows = [pop.copy()], [fit.copy()], []

    def record():
        i = int(np.argmax(fit))
        rows.append(np.concatenate([[fit[i], np.mean(fit)], pop[i]]))

    record()
    for gen in range(1, cfg.generations + 1):
        order = np.argsort(-fit, kind="stable")
        elite = order[:cfg.elitism]
        children = []
        while len(children) < cfg.population - cfg.elitism:
            a = pop[_tournament(rng, fit, cfg.tournament)]
            b = pop[_tournament(rng, fit, cfg.tournament)]
            if rng.random() < cfg.crossover_rate:
                w = rng.uniform(-cfg.blend_alpha, 1 + cfg.blend_alpha, d)
                pair = (np.clip(w * a + (1 - w) * b, lo, hi),
                        np.clip((1 - w) * a + w * b, lo, hi))
            else:
                pair = (a.copy(), b.copy())
            for child in pair:
                mask = rng.random(d) < cfg.mutation_rate
                child = np.clip(child + mask * rng.normal(0.0, 1.0, d) * sigma, lo, hi)
                children.append(child)
        children = np.array(children[:cfg.population - cfg.elitism]).reshape(-1, d)
        child_fit = np.array([objective(g) for g in children], dtype=float)
        pop = np.concatenate([pop[elite], children])
        fit = np.concatenate([fit[elite], child_fit])
        populations.append(pop.copy())
        fitnesses.append(fit.copy())
        record()
        log.info("generation %d: best %.4f mean %.4f", gen, rows[-1][0], rows[-1][1])

    order = np.argsort(-fit, kind="stable")
    top = [Individual(pop[i].copy(), float(fit[i]), bounds.as_dict(pop[i]))
           for i in order[:cfg.top_k]]
    return GaResult(top[0], top, np.array(rows), populations, fitnesses)
