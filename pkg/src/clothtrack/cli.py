"""Command-line front end: ``simulate``, ``track``, ``tune`` and ``report``.

Exit codes: 0 on success, 1 for invalid input (config, files, arguments),
2 when the numerics fail (divergence, singular innovation covariance).
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import fileio
from .config import cloth_fragment, load_config
from .errors import ClothTrackError, NumericalError, ValidationError
from .measurement import unstack_uv
from .param_id import ClothObjective, ParamBounds, Reference, run_ga
from .report import ResidualReport
from .synth import generate_scenario
from .tracker import MODELS, run_tracker

log = logging.getLogger("clothtrack")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _out_dir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ValidationError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.scenario_spec(seed=args.seed)
    topo, _ = cfg.mesh_pair()
    data = generate_scenario(spec, topo, cfg.cloth_params(), cfg.intrinsics(), cfg.pose())
    out = _out_dir(args.out)
    fileio.write_measurements(out / fileio.MEASUREMENTS, unstack_uv(data.measurements),
                              data.features.ids)
    fileio.write_truth(out / fileio.TRUTH, data.rigid_states, data.mesh_positions)
    fileio.write_forces(out / fileio.FORCES, data.node_forces)
    print(f"{spec.kind}: {data.frames} frames, {len(data.features)} features, "
          f"noise {spec.noise_sigma} px, seed {spec.seed}, max over-stretch "
          f"{data.max_violation.max():.3g} -> {out}")
    return EXIT_OK


def _load_reference(path: Path, n_nodes: int):
    """A reference is a directory holding measurements.txt and forces.csv, or the measurement file."""
    meas = path / fileio.MEASUREMENTS if path.is_dir() else path
    forces_path = meas.parent / fileio.FORCES
    ids, uv = fileio.read_measurements(meas)
    if not forces_path.exists():
        raise ValidationError(f"no force schedule next to {meas} (expected {forces_path})")
    forces = fileio.read_forces(forces_path, n_nodes, len(uv))
    return Reference(uv, forces, ids)


def cmd_track(args) -> int:
    cfg = load_config(args.config)
    topo, _ = cfg.mesh_pair()
    ids, uv = fileio.read_measurements(args.measurements)
    forces = None
    if args.force == "true" and args.model != "none":
        forces_path = Path(args.forces) if args.forces else Path(args.measurements).parent / fileio.FORCES
        forces = fileio.read_forces(forces_path, topo.n_nodes, len(uv))
    tcfg = cfg.tracker_config(args.model, update=not args.open_loop)
    result = run_tracker(uv, tcfg, cfg.intrinsics(), cfg.pose(), topo, cfg.cloth_params(),
                         forces, ids)
    out = _out_dir(args.out)
    fileio.write_estimates(out / fileio.ESTIMATES, result.state_names, result.estimates,
                           result.dropped)
    fileio.write_residuals(out / fileio.RESIDUALS, result.report)
    fileio.write_feature_residuals(out / fileio.FEATURE_RESIDUALS, result.report, ids)
    fileio.write_measurements(out / fileio.PREDICTIONS, result.predicted, ids)
    print(f"{args.model} model, {args.force} force: {len(uv)} frames, mean residual "
          f"{result.report.mean:.3f} px, worst {result.report.max:.3f} px, "
          f"{int(result.dropped.sum())} dropped -> {out}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cfg = load_config(args.config)
    topo, _ = cfg.mesh_pair()
    references = [_load_reference(Path(p), topo.n_nodes) for p in args.reference]
    bounds = ParamBounds.table2(cfg.ga_params)
    weight = cfg.worst_weight if args.worst_weight is None else args.worst_weight
    objective = ClothObjective(references, bounds, cfg.cloth_params(), topo, cfg.intrinsics(),
                               cfg.pose(), dt=1.0 / cfg.fps, substeps=cfg.ga_substeps,
                               worst_weight=weight)
    result = run_ga(cfg.ga_config(seed=args.seed, generations=args.generations), bounds, objective)
    out = _out_dir(args.out)
    rows = [[g, *row] for g, row in enumerate(result.trace)]
    fileio.write_table(out / fileio.TRACE, ["generation", "best_fitness", "mean_fitness",
                                            *bounds.names], rows)
    fileio.write_table(out / fileio.TOP_K, ["rank", "fitness", *bounds.names],
                       [[r, ind.fitness, *ind.genes] for r, ind in enumerate(result.top)])
    best = objective.params_for(result.best.genes)
    (out / fileio.BEST_PARAMS).write_text(cloth_fragment(best))
    print(f"best fitness {result.best.fitness:.4f} after {len(result.trace) - 1} generations: "
          + ", ".join(f"{k}={v:.4g}" for k, v in result.best.params.items()) + f" -> {out}")
    return EXIT_OK


def cmd_report(args) -> int:
    ids_m, measured = fileio.read_measurements(args.measurements)
    ids_p, predicted = fileio.read_measurements(args.predictions)
    if list(ids_m) != list(ids_p) or measured.shape != predicted.shape:
        # align predictions to the measurement ordering
        lookup = {int(f): j for j, f in enumerate(ids_p)}
        missing = [int(f) for f in ids_m if int(f) not in lookup]
        if missing or len(predicted) != len(measured):
            raise ValidationError("predictions and measurements cover different features or frames")
        predicted = predicted[:, [lookup[int(f)] for f in ids_m]]
    report = ResidualReport.from_pixels(predicted, measured)
    if args.out:
        out = _out_dir(args.out)
        fileio.write_residuals(out / fileio.RESIDUALS, report)
        fileio.write_feature_residuals(out / fileio.FEATURE_RESIDUALS, report, ids_m)
    print(f"{len(measured)} frames: mean residual {report.mean:.3f} px, worst {report.max:.3f} px")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clothtrack", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_config(p):
        p.add_argument("--config", action="append", default=[], metavar="PATH",
                       help="config file; repeat to layer overrides")
        p.add_argument("--out", required=True, metavar="DIR")
        return p

    p = with_config(sub.add_parser("simulate", help="generate a synthetic scenario"))
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("track", help="run the tracker on a measurement file"))
    p.add_argument("--measurements", required=True, metavar="PATH")
    p.add_argument("--forces", metavar="PATH",
                   help="force schedule (default: forces.csv beside the measurements)")
    p.add_argument("--model", choices=MODELS, default="rigid")
    p.add_argument("--force", choices=("true", "zero"), default="true")
    p.add_argument("--open-loop", action="store_true", help="predict only, never correct")
    p.set_defaults(func=cmd_track)

    p = with_config(sub.add_parser("tune", help="identify cloth parameters with the GA"))
    p.add_argument("--reference", action="append", required=True, metavar="PATH",
                   help="scenario directory or measurement file; repeat to sum several")
    p.add_argument("--seed", type=int)
    p.add_argument("--generations", type=int)
    p.add_argument("--worst-weight", type=float,
                   help="weight of the worst pixel error in the cost (default 2)")
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("report", help="recompute residual statistics from files")
    p.add_argument("--measurements", required=True, metavar="PATH")
    p.add_argument("--predictions", required=True, metavar="PATH")
    p.add_argument("--out", metavar="DIR")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"clothtrack: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, OSError) as exc:
        print(f"clothtrack: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ClothTrackError as exc:
        print(f"clothtrack: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
