"""Stage functions behind the command line.

Every stage reads its inputs from the artifact directory and writes its
outputs there, so ``all`` and a sequence of single-stage runs produce the
same files. A stage whose outputs already exist is skipped unless forced.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import export
from .clustering import elbow_curve, elbow_plateau, kmeans, select_k
from .config import ConfigError, PipelineConfig
from .dfn import Case1, FractureSample, build_realization
from .flow import extract_observation, solve_steady
from .inversion import (
    GroundTruth,
    InversionReport,
    SamplingRanges,
    run_inversion,
    write_report,
    write_tables,
)
from .mesh import mesh_dfn
from .orientation import (
    AngleDistribution,
    TooManyCombinations,
    cluster_constraints,
    extract_constraints,
    per_cluster_distributions,
    triple_angle_distribution,
)
from .seismic import focal_angle_histograms, generate_catalog, read_catalog, write_catalog

log = logging.getLogger(__name__)

STAGES = ("synth", "cluster", "orient", "invert", "report")


class StageError(RuntimeError):
    def __init__(self, stage: str, msg: str):
        super().__init__(f"[{stage}] {msg}")
        self.stage = stage


def _done(paths) -> bool:
    return all(Path(p).exists() for p in paths)


def truth_realization(cfg: PipelineConfig):
    t = cfg.require_truth()
    normals = [np.asarray(n, float) / np.linalg.norm(n) for n in t["normals"]]
    samples = [FractureSample.from_normal(n, float(t["minor_radius"]), float(a), tuple(c))
               for n, a, c in zip(normals, t["aspect_ratios"], t["centers"])]
    case = Case1(float(t["aperture"]), float(t["permeability"]))
    return build_realization(samples, case, cfg.domain, int(cfg["flow"]["n_vertices"]),
                             seed=cfg["seed"], fluid=cfg.fluid, normals=normals)


def stage_synth(cfg: PipelineConfig, out: Path, force: bool = False) -> None:
    outputs = [out / "catalog.csv"]
    if not force and _done(outputs):
        log.info("synth: outputs present, skipping")
        return
    c = cfg["catalog"]
    if c["file"] is not None:
        cat = read_catalog(cfg.resolve(c["file"]))
        write_catalog(cat, out / "catalog.csv")
        return
    truth = truth_realization(cfg)
    export.write_realization(truth, out / "truth_realization.json")
    cat = generate_catalog(truth, int(c["n_events"]), float(c["noise_sigma_m"]),
                           float(c["focal_noise_sigma_deg"]), cfg["seed"], c["event_radius_m"])
    write_catalog(cat, out / "catalog.csv")


def _relabel(model):
    """Order clusters by centroid (x, then y, then z) for stable numbering."""
    order = np.lexsort(model.centroids.T[::-1])
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    model.assignments = rank[model.assignments]
    model.centroids = model.centroids[order]
    return model


def stage_cluster(cfg: PipelineConfig, out: Path, force: bool = False) -> None:
    outputs = [out / "clusters.csv", out / "clusters.json", out / "elbow.csv",
               out / "hist_focal_strike.csv", out / "hist_focal_dip.csv"]
    if not force and _done(outputs):
        log.info("cluster: outputs present, skipping")
        return
    cat = read_catalog(out / "catalog.csv")
    k = cfg["clustering"]
    o = cfg["orientation"]
    k_max = min(int(k["k_max"]), len(cat))
    elbow = elbow_curve(cat.locations, range(int(k["k_min"]), k_max + 1), int(k["max_iters"]),
                        float(k["tol"]), cfg["seed"], int(k["n_init"]))
    export.write_elbow(elbow, out / "elbow.csv")
    fs, fd = focal_angle_histograms(cat, float(o["bin_width"]))
    export.write_histogram(fs, out / "hist_focal_strike.csv")
    export.write_histogram(fd, out / "hist_focal_dip.csv")
    _, (ns, nd) = extract_constraints([fs, fd], float(o["mass_threshold"]))
    plateau = elbow_plateau(elbow, float(k["gain_threshold"]))
    chosen = select_k(elbow, max(ns, 1), max(nd, 1), float(k["gain_threshold"]))
    model = elbow.models.get(chosen) or kmeans(cat.locations, chosen, int(k["max_iters"]),
                                               float(k["tol"]), cfg["seed"], int(k["n_init"]))
    model = _relabel(model)
    export.write_cluster_model(model, out / "clusters.csv", out / "clusters.json", {
        "elbow_plateau": plateau,
        "focal_strike_peaks": ns,
        "focal_dip_peaks": nd,
        "gain_threshold": float(k["gain_threshold"]),
    })


def stage_orient(cfg: PipelineConfig, out: Path, force: bool = False, jobs: int = 1) -> None:
    outputs = [out / "constraints.json"]
    if not force and _done(outputs):
        log.info("orient: outputs present, skipping")
        return
    cat = read_catalog(out / "catalog.csv")
    model, _ = export.read_cluster_model(out / "clusters.csv", out / "clusters.json")
    o = cfg["orientation"]
    bw, thr, mc = float(o["bin_width"]), float(o["mass_threshold"]), int(o["max_combo"])
    try:
        th = triple_angle_distribution(cat.locations, mc, bw, jobs)
        export.write_histogram(th.strike, out / "hist_triple_strike.csv")
        export.write_histogram(th.dip, out / "hist_triple_dip.csv")
    except TooManyCombinations as exc:
        # the whole-set pass is optional; per-cluster passes still run
        log.warning("orient: whole-set enumeration skipped: %s", exc)
    per = per_cluster_distributions(cat.locations, model.assignments, model.k, mc, bw, jobs)
    focal = []
    for ca in per:
        export.write_histogram(ca.strike, out / f"hist_cluster{ca.cluster}_strike.csv")
        export.write_histogram(ca.dip, out / f"hist_cluster{ca.cluster}_dip.csv")
        members = model.members(ca.cluster)
        if len(members):
            pair = focal_angle_histograms(cat, bw, members)
        else:
            pair = (AngleDistribution.empty(bw, "strike"), AngleDistribution.empty(bw, "dip"))
        export.write_histogram(pair[0], out / f"hist_cluster{ca.cluster}_focal_strike.csv")
        export.write_histogram(pair[1], out / f"hist_cluster{ca.cluster}_focal_dip.csv")
        focal.append(pair)
        if ca.insufficient:
            log.warning("orient: cluster %d: %s", ca.cluster, ca.error)
    cons = cluster_constraints(per, focal, model.centroids, thr)
    export.write_constraints(cons, out / "constraints.json")


OBS_HEADER = ("x", "y", "z", "pressure_Pa")


def _observations(cfg: PipelineConfig, out: Path, points) -> np.ndarray:
    path = cfg["inversion"]["observations"]
    if path is not None:
        rows = np.array(export.read_csv(cfg.resolve(path), OBS_HEADER), dtype=float).reshape(-1, 4)
        if len(rows) != len(points):
            raise ValueError(f"{len(rows)} observations for {len(points)} fracture clusters")
        export.write_csv(out / "observations.csv", OBS_HEADER, rows.tolist())
    else:
        truth = truth_realization(cfg)
        flow = cfg.flow
        mesh = mesh_dfn(truth, flow.h)
        sol = solve_steady(mesh, flow.fluid, flow.bcs, tol=flow.tol)
        export.write_mesh(mesh, out / "truth_mesh_cells.csv", out / "truth_mesh_adjacency.csv")
        export.write_solution(sol, mesh, out / "truth_solution.csv", out / "truth_solution_summary.json")
        rows = [(*p, extract_observation(sol, mesh, p)) for p in points]
        export.write_csv(out / "observations.csv", OBS_HEADER, rows)
    # re-read so a resumed run sees exactly the persisted values
    return np.array(export.read_csv(out / "observations.csv", OBS_HEADER), dtype=float).reshape(-1, 4)


def stage_invert(cfg: PipelineConfig, out: Path, cases, force: bool = False, jobs: int = 1) -> None:
    cons = export.read_constraints(out / "constraints.json")
    obs_path = out / "observations.csv"
    if obs_path.exists() and not force:
        obs = np.array(export.read_csv(obs_path, OBS_HEADER), dtype=float).reshape(-1, 4)
    else:
        obs = _observations(cfg, out, [c.centroid for c in cons])
    minor, aspect = cfg.ranges()
    n_lhs = int(cfg["inversion"]["n_lhs"])
    for case in cases:
        path = out / f"inversion_case{case}.json"
        if path.exists() and not force:
            log.info("invert: %s present, skipping", path.name)
            continue
        ranges = SamplingRanges(cons, minor, aspect, case)
        rep = run_inversion(cons, obs[:, :3], obs[:, 3], case, n_lhs, cfg.flow,
                            seed=cfg["seed"] + 1000 * case, ranges=ranges, jobs=jobs)
        write_report(rep, path)


def _truth_for_report(out: Path, obs: np.ndarray, centroids) -> GroundTruth | None:
    p = out / "truth_realization.json"
    if not p.exists():
        return None
    doc = export.read_json(p)
    fr = sorted(doc["fractures"], key=lambda f: f["index"])
    centers = np.array([f["center"] for f in fr])
    # match clusters to truth fractures by centre distance
    cost = np.linalg.norm(np.asarray(centroids)[:, None, :] - centers[None, :, :], axis=2)
    rows, cols = linear_sum_assignment(cost)
    pick = [fr[c] for c in cols[np.argsort(rows)]]
    return GroundTruth([f["aperture"] for f in pick], [f["permeability"] for f in pick],
                       obs[:, 3].tolist(), [f["minor_radius"] for f in pick],
                       [f["major_radius"] for f in pick])


def stage_report(cfg: PipelineConfig, out: Path, cases) -> None:
    cons = export.read_constraints(out / "constraints.json")
    obs = np.array(export.read_csv(out / "observations.csv", OBS_HEADER), dtype=float).reshape(-1, 4)
    reports = []
    for case in cases:
        p = out / f"inversion_case{case}.json"
        if not p.exists():
            raise FileNotFoundError(f"{p.name} missing; run the invert stage first")
        reports.append(InversionReport.from_dict(export.read_json(p)))
    truth = _truth_for_report(out, obs, [c.centroid for c in cons])
    write_tables(reports, truth, out)
    clusters = export.read_json(out / "clusters.json")
    summary = {
        "selected_k": clusters["k"],
        "elbow_plateau": clusters["elbow_plateau"],
        "focal_peaks": {"strike": clusters["focal_strike_peaks"], "dip": clusters["focal_dip_peaks"]},
        "constraints": [c.to_dict() for c in cons],
        "observations_Pa": obs[:, 3].tolist(),
        "misfit_units": "Pa",
        "cases": [{
            "case": r.case,
            "best_index": r.best_index,
            "best_misfit": r.best.misfit,
            "n_samples": len(r.samples),
            "n_failed": sum(1 for s in r.samples if s.error is not None),
            "best_minor_radius_m": r.best.params.minor_radius,
            "best_aspect_ratios": r.best.params.aspects,
            "best_strikes_deg": r.best.params.strikes,
            "best_dips_deg": r.best.params.dips,
            "best_case_params": r.best.params.case_params,
            "best_pressures_Pa": r.best.pressures,
        } for r in reports],
    }
    export.write_json(out / "report.json", summary)


def run(cfg: PipelineConfig, stage: str, cases=None, force: bool = False, jobs: int = 1) -> Path:
    """Run one stage (or ``all``); raises StageError tagged with the stage."""
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cases = list(cases or cfg["inversion"]["cases"])
    todo = STAGES if stage == "all" else (stage,)
    for st in todo:
        log.info("stage %s", st)
        try:
            if st == "synth":
                stage_synth(cfg, out, force)
            elif st == "cluster":
                stage_cluster(cfg, out, force)
            elif st == "orient":
                stage_orient(cfg, out, force, jobs)
            elif st == "invert":
                stage_invert(cfg, out, cases, force, jobs)
            elif st == "report":
                stage_report(cfg, out, cases)
            else:
                raise ConfigError(f"unknown stage {st!r}")
        except ConfigError:
            raise
        except Exception as exc:       # noqa: BLE001 - re-raised with the stage tag
            raise StageError(st, f"{type(exc).__name__}: {exc}") from exc
    return out

