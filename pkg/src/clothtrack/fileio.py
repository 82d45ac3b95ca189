"""Plain-text file formats.

Measurement exchange file::

    n_features <n>
    <frame>,<feature_id>,<u>,<v>
    ...

One line per observed feature per frame; a feature absent from a frame was
not observed there. Frame indices start at 0 and the file covers frames
``0 .. max(frame)``.

Every other output is a CSV with a one-line header naming the columns:

* truth: ``frame,X,Y,theta,vx,vy,omega,n0_x,n0_y,n0_z,...``
* forces: ``frame,node,fx,fy,fz`` (rows with a zero force are omitted)
* estimates: ``frame,<state names>,dropped``
* residuals: ``frame,avg_px,worst_px``
* feature residuals: ``frame,feature_id,residual_px``
* GA trace: ``generation,best_fitness,mean_fitness,<gene names>``

Floats are written with ``repr`` so they round-trip exactly.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import FormatError

MEASUREMENTS = "measurements.txt"
TRUTH = "truth.csv"
FORCES = "forces.csv"
ESTIMATES = "estimates.csv"
RESIDUALS = "residuals.csv"
FEATURE_RESIDUALS = "feature_residuals.csv"
PREDICTIONS = "predictions.txt"
TRACE = "trace.csv"
TOP_K = "top_k.csv"
BEST_PARAMS = "best_params.cfg"


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer, bool, np.bool_)):
        return str(int(value))
    return repr(float(value))


def write_measurements(path, pixels, ids=None) -> None:
    """Write ``(frames, n, 2)`` pixels; NaN rows are skipped."""
    uv = np.asarray(pixels, dtype=float)
    frames, n, _ = uv.shape
    ids = np.arange(n) if ids is None else np.asarray(ids)
    lines = [f"n_features {n}"]
    for k in range(frames):
        for j in range(n):
            u, v = uv[k, j]
            if math.isnan(u) or math.isnan(v):
                continue
            lines.append(f"{k},{int(ids[j])},{_fmt(u)},{_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_measurements(path):
    """Returns ``(ids, pixels)`` with pixels ``(frames, n, 2)``, NaN where unobserved.

    Feature order is the order of first appearance in the file.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read measurements: {exc}", path) from exc
    lines = text.splitlines()
    if not lines:
        raise FormatError("empty file", path, 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != "n_features":
        raise FormatError("expected header 'n_features <n>'", path, 1)
    try:
        n = int(head[1])
    except ValueError:
        raise FormatError(f"bad feature count {head[1]!r}", path, 1) from None
    if n < 1:
        raise FormatError("feature count must be positive", path, 1)

    order = {}
    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise FormatError(f"expected 'frame,feature_id,u,v', got {line!r}", path, lineno)
        try:
            frame, fid = int(parts[0]), int(parts[1])
            u, v = float(parts[2]), float(parts[3])
        except ValueError:
            raise FormatError(f"unparsable values in {line!r}", path, lineno) from None
        if frame < 0:
            raise FormatError("negative frame index", path, lineno)
        if not (math.isfinite(u) and math.isfinite(v)):
            raise FormatError("non-finite pixel coordinate", path, lineno)
        if fid not in order:
            if len(order) == n:
                raise FormatError(f"more than {n} distinct feature ids", path, lineno)
            order[fid] = len(order)
        records.append((lineno, frame, order[fid], u, v))
    if len(order) != n:
        raise FormatError(f"header declares {n} features but {len(order)} appear", path)
    frames = max(r[1] for r in records) + 1
    uv = np.full((frames, n, 2), np.nan)
    for lineno, frame, j, u, v in records:
        if not np.isnan(uv[frame, j, 0]):
            raise FormatError("duplicate observation of a feature in one frame", path, lineno)
        uv[frame, j] = (u, v)
    return np.array(list(order), dtype=np.int64), uv


def write_table(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("row length does not match header")
        lines.append(",".join(_fmt(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_table(path):
    """Returns ``(header, values)`` with values a float array ``(rows, columns)``."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise FormatError(f"cannot read table: {exc}", path) from exc
    if not lines:
        raise FormatError("empty file", path, 1)
    header = lines[0].split(",")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise FormatError(f"expected {len(header)} columns, got {len(parts)}", path, lineno)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise FormatError(f"unparsable number in {line!r}", path, lineno) from None
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def truth_header(n_nodes: int) -> list:
    from .rigid import RIGID_FIELDS
    return ["frame", *RIGID_FIELDS, *(f"n{i}_{c}" for i in range(n_nodes) for c in "xyz")]


def write_truth(path, rigid_states, mesh_positions) -> None:
    frames, n_nodes, _ = mesh_positions.shape
    rows = [[k, *rigid_states[k], *mesh_positions[k].ravel()] for k in range(frames)]
    write_table(path, truth_header(n_nodes), rows)


def read_truth(path):
    """Returns ``(rigid_states (frames, 6), mesh_positions (frames, N, 3))``."""
    header, values = read_table(path)
    if header[:7] != truth_header(0) or (len(header) - 7) % 3:
        raise FormatError("not a truth file", path, 1)
    frames = len(values)
    return values[:, 1:7], values[:, 7:].reshape(frames, -1, 3)


def write_forces(path, node_forces) -> None:
    rows = []
    for k, frame in enumerate(np.asarray(node_forces)):
        for i in np.flatnonzero(np.any(frame != 0, axis=1)):
            rows.append([k, int(i), *frame[i]])
    write_table(path, ["frame", "node", "fx", "fy", "fz"], rows)


def read_forces(path, n_nodes: int, frames: int) -> np.ndarray:
    header, values = read_table(path)
    if header != ["frame", "node", "fx", "fy", "fz"]:
        raise FormatError("expected header 'frame,node,fx,fy,fz'", path, 1)
    out = np.zeros((frames, n_nodes, 3))
    for lineno, (k, i, fx, fy, fz) in enumerate(values, start=2):
        if k != int(k) or i != int(i) or not 0 <= i < n_nodes:
            raise FormatError(f"node index {i} out of range for {n_nodes} nodes", path, lineno)
        if 0 <= k < frames:
            out[int(k), int(i)] = (fx, fy, fz)
    return out


def write_estimates(path, names, estimates, dropped) -> None:
    rows = [[k, *estimates[k], bool(dropped[k])] for k in range(len(dropped))]
    write_table(path, ["frame", *names, "dropped"], rows)


def write_residuals(path, report) -> None:
    rows = [[k, a, w] for k, (a, w) in enumerate(zip(report.average, report.worst))]
    write_table(path, ["frame", "avg_px", "worst_px"], rows)


def write_feature_residuals(path, report, ids) -> None:
    rows = []
    for k, frame in enumerate(report.per_feature):
        for fid, r in zip(ids, frame):
            if not math.isnan(r):
                rows.append([k, int(fid), r])
    write_table(path, ["frame", "feature_id", "residual_px"], rows)
