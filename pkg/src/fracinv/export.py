"""Plain-text artifact writers and readers.

All numbers are written as locale-independent decimal text. Floats in CSV
use 9 significant digits; JSON uses Python's shortest round-trip repr.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .clustering import ClusterModel, ElbowCurve
from .dfn import DFNRealization
from .flow import FlowSolution, mass_balance
from .mesh import DFNMesh
from .orientation import AngleDistribution, FractureConstraint


def fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def read_csv(path, header) -> list[list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path}: expected header {','.join(header)}")
    return rows[1:]


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


HIST_HEADER = ("bin_lo_deg", "bin_hi_deg", "mass")


def write_histogram(dist: AngleDistribution, path) -> None:
    e = dist.edges
    write_csv(path, HIST_HEADER, zip(e[:-1], e[1:], dist.masses))


def read_histogram(path, angle_kind: str) -> AngleDistribution:
    rows = np.array(read_csv(path, HIST_HEADER), dtype=float).reshape(-1, 3)
    width = float(rows[0, 1] - rows[0, 0])
    m = rows[:, 2]
    if m.sum() == 0:
        return AngleDistribution.empty(width, angle_kind)
    return AngleDistribution(width, m / m.sum(), angle_kind)


CLUSTER_HEADER = ("event_index", "cluster_index")


def write_cluster_model(model: ClusterModel, csv_path, json_path, extra: dict | None = None) -> None:
    write_csv(csv_path, CLUSTER_HEADER, enumerate(model.assignments.tolist()))
    doc = {
        "k": model.k,
        "centroids": model.centroids.tolist(),
        "distortion": model.distortion,
        "iterations_run": model.iterations_run,
    }
    doc.update(extra or {})
    write_json(json_path, doc)


def read_cluster_model(csv_path, json_path) -> tuple[ClusterModel, dict]:
    rows = read_csv(csv_path, CLUSTER_HEADER)
    doc = read_json(json_path)
    labels = np.array([int(r[1]) for r in rows], dtype=int)
    model = ClusterModel(int(doc["k"]), labels, np.array(doc["centroids"], float),
                         float(doc["distortion"]), int(doc["iterations_run"]))
    return model, doc


def write_elbow(elbow: ElbowCurve, path) -> None:
    write_csv(path, ("k", "pct_variance_explained"), elbow.entries)


def write_constraints(constraints: list[FractureConstraint], path) -> None:
    write_json(path, {"constraints": [c.to_dict() for c in constraints]})


def read_constraints(path) -> list[FractureConstraint]:
    return [FractureConstraint.from_dict(d) for d in read_json(path)["constraints"]]


def write_realization(real: DFNRealization, path) -> None:
    write_json(path, real.to_dict())


def write_mesh(mesh: DFNMesh, cells_path, adjacency_path) -> None:
    write_csv(cells_path, ("cell_id", "fracture", "x", "y", "z", "area_m2"),
              ((i, int(f), *c, a) for i, (f, c, a) in
               enumerate(zip(mesh.fracture, mesh.center, mesh.area))))
    rows = [(int(i), int(j), "intra", L, d) for (i, j), L, d in
            zip(mesh.adj, mesh.adj_length, mesh.adj_dist)]
    rows += [(int(i), int(j), "intersection", L, d[0] + d[1]) for (i, j), L, d in
             zip(mesh.link, mesh.link_length, mesh.link_dist)]
    write_csv(adjacency_path, ("cell_i", "cell_j", "kind", "length_m", "distance_m"), rows)


def write_solution(sol: FlowSolution, mesh: DFNMesh, csv_path, summary_path) -> None:
    write_csv(csv_path, ("cell_id", "x", "y", "z", "pressure_Pa"),
              ((i, *c, p) for i, (c, p) in enumerate(zip(mesh.center, sol.pressure))))
    write_json(summary_path, {
        "n_cells": int(mesh.n_cells),
        "boundary_flux_kg_per_s": {k: float(v) for k, v in sorted(sol.boundary_flux.items())},
        "inflow_kg_per_s": sol.inflow,
        "outflow_kg_per_s": sol.outflow,
        "relative_imbalance": mass_balance(sol),
        "cg_iterations": sol.iterations,
        "relative_residual": sol.residual,
        "pinned_cells": int(len(sol.pinned_cells)),
    })
