"""Latin Hypercube search over fracture lengths and closure parameters.

Each sample fixes, per fracture, a strike and dip inside that fracture's
orientation constraint and an aspect ratio; one minor radius and one set
of closure-case parameters are shared by all fractures. Every sample is
run through the forward flow model and scored against observed pressures.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .dfn import (
    Case1,
    Case2,
    Case3,
    Case4,
    DFNRealization,
    EmptyNetwork,
    FluidProperties,
    FractureSample,
    build_realization,
)
from .flow import BoundaryConditions, NoConvergence, SingularSystem, extract_observation, solve_steady
from .geometry import AxisBox, StrikeDip
from .mesh import MeshTooCoarse, mesh_dfn
from .orientation import AngleInterval, FractureConstraint

log = logging.getLogger(__name__)

CASE_F = 1.6e-9          # transmissivity prefactor, case 3
CASE_FL = 5e-5           # aperture prefactor, case 4
CASE2_LOG10_MEAN = -5.0


class LengthMismatch(ValueError):
    pass


class AllSamplesFailed(RuntimeError):
    pass


@dataclass(frozen=True)
class Range:
    lo: float
    hi: float
    log10: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)) or self.lo > self.hi:
            raise ValueError(f"invalid range [{self.lo}, {self.hi}]")

    def map(self, u):
        v = self.lo + (self.hi - self.lo) * np.asarray(u, float)
        return 10.0 ** v if self.log10 else v


def default_case_ranges(case: int) -> dict:
    if case == 1:
        return {"aperture": Range(-6.0, -4.0, True), "permeability": Range(-13.0, -11.0, True)}
    if case == 2:
        return {"sigma": Range(0.6, 0.9)}
    if case in (3, 4):
        return {"alpha": Range(0.5, 2.0)}
    raise ValueError(f"unknown case {case}")


@dataclass
class SamplingRanges:
    orientations: list              # FractureConstraint per fracture
    minor_radius: Range = field(default_factory=lambda: Range(200.0, 300.0))
    aspect_ratio: Range = field(default_factory=lambda: Range(1.0, 1.5))
    case: int = 1
    case_ranges: dict | None = None

    def __post_init__(self):
        if not self.orientations:
            raise ValueError("at least one fracture constraint is required")
        if self.case_ranges is None:
            self.case_ranges = default_case_ranges(self.case)
        if self.minor_radius.lo <= 0 or self.aspect_ratio.lo < 1:
            raise ValueError("minor radius must be positive and aspect ratio >= 1")

    @property
    def n_fractures(self) -> int:
        return len(self.orientations)

    @property
    def dimension(self) -> int:
        return 3 * self.n_fractures + 1 + len(self.case_ranges)


@dataclass
class LhsDesign:
    n_samples: int
    matrix: np.ndarray        # (n_samples, dim) in [0, 1)
    seed: int


def lhs_design(dim: int, n: int, seed: int) -> LhsDesign:
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed))
    return LhsDesign(n, sampler.random(n), seed)


@dataclass
class SampleParameters:
    """One point of the search space."""

    strikes: list
    dips: list
    aspects: list
    minor_radius: float
    case: int
    case_params: dict
    draw_seed: int = 0
    label: str = "lhs"

    def closure(self):
        p = self.case_params
        if self.case == 1:
            return Case1(p["aperture"], p["permeability"])
        if self.case == 2:
            return Case2(CASE2_LOG10_MEAN, p["sigma"])
        if self.case == 3:
            return Case3(CASE_F, p["alpha"])
        if self.case == 4:
            return Case4(CASE_FL, p["alpha"])
        raise ValueError(f"unknown case {self.case}")

    def fracture_samples(self, centers) -> list[FractureSample]:
        return [FractureSample(float(s), float(d), float(self.minor_radius), float(a), tuple(c))
                for s, d, a, c in zip(self.strikes, self.dips, self.aspects, centers)]

    def to_dict(self) -> dict:
        return {k: (list(map(float, v)) if isinstance(v, (list, np.ndarray)) else v)
                for k, v in asdict(self).items()}


def _interval_value(iv: AngleInterval, u: float) -> float:
    # u < 1, so a strike interval ending at 180 never yields 180 itself
    return float(iv.lo + (iv.hi - iv.lo) * u)


def lhs_sample(ranges: SamplingRanges, n: int, seed: int) -> list[SampleParameters]:
    """``n`` stratified parameter vectors.

    Column layout: (strike, dip, aspect) per fracture, then the shared
    minor radius, then the case parameters in sorted-name order.
    """
    design = lhs_design(ranges.dimension, n, seed)
    draw_seeds = np.random.SeedSequence(seed).generate_state(n, dtype=np.uint32)
    nf = ranges.n_fractures
    names = sorted(ranges.case_ranges)
    out = []
    for i, u in enumerate(design.matrix):
        strikes, dips, aspects = [], [], []
        for f, con in enumerate(ranges.orientations):
            us, ud, ua = u[3 * f:3 * f + 3]
            strikes.append(_interval_value(con.strike, us))
            dips.append(_interval_value(con.dip, ud))
            aspects.append(float(ranges.aspect_ratio.map(ua)))
        minor = float(ranges.minor_radius.map(u[3 * nf]))
        cp = {nm: float(ranges.case_ranges[nm].map(u[3 * nf + 1 + j])) for j, nm in enumerate(names)}
        out.append(SampleParameters(strikes, dips, aspects, minor, ranges.case, cp, int(draw_seeds[i])))
    return out


def misfit(model_pressures, obs_pressures) -> float:
    """Sum of squared deviations scaled by the largest observation (Pa)."""
    m = np.asarray(model_pressures, float)
    o = np.asarray(obs_pressures, float)
    if m.shape != o.shape or m.ndim != 1 or len(m) == 0:
        raise LengthMismatch(f"{m.shape} model values vs {o.shape} observations")
    if np.any(o <= 0):
        raise ValueError("observation pressures must be positive")
    return float(((m - o) ** 2).sum() / o.max())


@dataclass(frozen=True)
class FlowConfig:
    domain: AxisBox
    h: float = 10.0
    fluid: FluidProperties = field(default_factory=FluidProperties)
    bcs: BoundaryConditions = field(default_factory=BoundaryConditions.left_right)
    n_vertices: int = 32
    tol: float = 1e-10


def forward(params: SampleParameters, centers, obs_points, flow: FlowConfig,
            normals=None) -> tuple[DFNRealization, np.ndarray]:
    """Realize, mesh and solve one parameter set; pressures at ``obs_points``."""
    real = build_realization(params.fracture_samples(centers), params.closure(), flow.domain,
                             flow.n_vertices, params.draw_seed, flow.fluid, normals)
    mesh = mesh_dfn(real, flow.h)
    sol = solve_steady(mesh, flow.fluid, flow.bcs, tol=flow.tol)
    return real, np.array([extract_observation(sol, mesh, p) for p in obs_points])


@dataclass
class FractureResult:
    minor_radius: float
    major_radius: float
    mean_length: float
    aperture: float
    permeability: float
    normal: tuple
    strike: float
    dip: float


@dataclass
class SampleResult:
    index: int
    params: SampleParameters
    pressures: list | None
    misfit: float
    fractures: list | None = None
    error: str | None = None


def _evaluate(args) -> SampleResult:
    idx, params, centers, obs_points, obs, flow = args
    try:
        real, p = forward(params, centers, obs_points, flow)
    except (EmptyNetwork, NoConvergence, SingularSystem, MeshTooCoarse, ValueError) as exc:
        log.warning("sample %d failed: %s", idx, exc)
        return SampleResult(idx, params, None, math.inf, None, f"{type(exc).__name__}: {exc}")
    fr = []
    for rf in real.fractures:
        f = rf.fracture
        sd = StrikeDip(params.strikes[rf.source_index], params.dips[rf.source_index])
        fr.append(FractureResult(f.minor_radius, f.major_radius, f.mean_length, rf.aperture,
                                 rf.permeability, tuple(map(float, f.normal)), sd.strike, sd.dip))
    return SampleResult(idx, params, [float(x) for x in p], misfit(p, obs), fr)


@dataclass
class InversionReport:
    case: int
    samples: list                     # SampleResult, in sample-index order
    best_index: int
    observations: list
    observation_points: list
    seed: int
    misfit_units: str = "Pa"

    @property
    def best(self) -> SampleResult:
        return self.samples[self.best_index]

    @property
    def misfits(self) -> list[float]:
        return [s.misfit for s in self.samples]

    def to_dict(self) -> dict:
        def fin(x):
            return x if math.isfinite(x) else None
        return {
            "case": self.case,
            "seed": self.seed,
            "misfit_units": self.misfit_units,
            "misfit_definition": "sum_i (p_i - p_obs_i)^2 / max(p_obs), pressures in Pa",
            "observation_points": [list(map(float, p)) for p in self.observation_points],
            "observations_Pa": [float(x) for x in self.observations],
            "best_index": self.best_index,
            "samples": [{
                "index": s.index,
                "label": s.params.label,
                "params": s.params.to_dict(),
                "pressures_Pa": s.pressures,
                "misfit": fin(s.misfit),
                "error": s.error,
                "fractures": None if s.fractures is None else [asdict(f) for f in s.fractures],
            } for s in self.samples],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InversionReport":
        samples = []
        for s in d["samples"]:
            fr = None if s["fractures"] is None else [FractureResult(**{**f, "normal": tuple(f["normal"])})
                                                      for f in s["fractures"]]
            mis = math.inf if s["misfit"] is None else float(s["misfit"])
            samples.append(SampleResult(s["index"], SampleParameters(**s["params"]), s["pressures_Pa"],
                                        mis, fr, s["error"]))
        return cls(d["case"], samples, d["best_index"], d["observations_Pa"],
                   [tuple(p) for p in d["observation_points"]], d["seed"], d["misfit_units"])


def run_inversion(constraints: list[FractureConstraint], obs_points, obs_pressures,
                  case: int, n_lhs: int, flow: FlowConfig, seed: int = 0,
                  ranges: SamplingRanges | None = None, extra_samples=(),
                  jobs: int = 1) -> InversionReport:
    """Score ``n_lhs`` LHS samples (after any ``extra_samples``) against observations.

    Fracture centres are the constraint centroids. Failed forward runs get
    an infinite misfit. The lowest misfit wins, ties going to the lower index.
    """
    if not constraints:
        raise ValueError("constraints must be nonempty")
    obs_points = [tuple(map(float, p)) for p in obs_points]
    obs = np.asarray(obs_pressures, float)
    if len(obs_points) != len(obs):
        raise LengthMismatch("one pressure per observation point is required")
    if ranges is None:
        ranges = SamplingRanges(list(constraints), case=case)
    centers = [c.centroid for c in constraints]
    params = list(extra_samples) + (lhs_sample(ranges, n_lhs, seed) if n_lhs > 0 else [])
    for p in params:
        if len(p.strikes) != len(centers):
            raise LengthMismatch("sample fracture count differs from constraint count")
    tasks = [(i, p, centers, obs_points, obs, flow) for i, p in enumerate(params)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_evaluate, tasks))
    else:
        results = [_evaluate(t) for t in tasks]
    mis = np.array([r.misfit for r in results])
    if not np.isfinite(mis).any():
        raise AllSamplesFailed(f"all {len(results)} forward runs failed")
    best = int(np.argmin(mis))          # argmin returns the first minimum
    return InversionReport(case, results, best, obs.tolist(), obs_points, seed)


@dataclass
class GroundTruth:
    apertures: list
    permeabilities: list
    pressures: list
    minor_radii: list
    major_radii: list

    @classmethod
    def from_realization(cls, real: DFNRealization, pressures) -> "GroundTruth":
        fr = sorted(real.fractures, key=lambda f: f.source_index)
        return cls([f.aperture for f in fr], [f.permeability for f in fr], list(map(float, pressures)),
                   [f.fracture.minor_radius for f in fr], [f.fracture.major_radius for f in fr])


def relative_error(value: float, truth: float) -> float:
    return value / truth - 1.0


TABLE_COLUMNS = {
    "aperture": ("case", "fracture", "aperture_m", "relative_error"),
    "permeability": ("case", "fracture", "permeability_m2", "relative_error"),
    "pressure": ("case", "observation", "pressure_Pa", "relative_error"),
    "axes": ("case", "fracture", "minor_m", "minor_relative_error", "major_m", "major_relative_error"),
}


def relative_error_table(report: InversionReport, truth: GroundTruth | None) -> dict:
    """Rows for the aperture, permeability, pressure and axis-length tables.

    Without a ground truth the error columns hold NaN.
    """
    best = report.best
    rows = {k: [] for k in TABLE_COLUMNS}
    if truth is None:
        n = max(len(best.fractures or []), len(best.pressures or []))
        nan = [math.nan] * n
        truth = GroundTruth(nan, nan, nan, nan, nan)
    for i, f in enumerate(best.fractures or []):
        rows["aperture"].append((report.case, i + 1, f.aperture, relative_error(f.aperture, truth.apertures[i])))
        rows["permeability"].append((report.case, i + 1, f.permeability,
                                     relative_error(f.permeability, truth.permeabilities[i])))
        rows["axes"].append((report.case, i + 1, f.minor_radius,
                             relative_error(f.minor_radius, truth.minor_radii[i]),
                             f.major_radius, relative_error(f.major_radius, truth.major_radii[i])))
    for i, p in enumerate(best.pressures or []):
        rows["pressure"].append((report.case, i + 1, p, relative_error(p, truth.pressures[i])))
    return rows


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def write_report(report: InversionReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def write_tables(reports: list[InversionReport], truth: GroundTruth | None, out_dir) -> list[Path]:
    """Four CSV tables covering all given cases; without truth the error column is empty."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    merged = {k: [] for k in TABLE_COLUMNS}
    for rep in reports:
        rows = relative_error_table(rep, truth)
        for k in merged:
            merged[k].extend(rows[k])
    paths = []
    for k, cols in TABLE_COLUMNS.items():
        p = out_dir / f"table_{k}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in merged[k]:
                w.writerow(["" if isinstance(v, float) and math.isnan(v) else _fmt(v) for v in r])
        paths.append(p)
    return paths


def truth_parameters(case: int, strikes, dips, aspects, minor_radius: float = 250.0,
                     draw_seed: int = 0) -> SampleParameters:
    """Ground-truth parameter vector for the self-consistency check."""
    cp = {1: {"aperture": 1e-5, "permeability": 1e-12}, 2: {"sigma": 0.75},
          3: {"alpha": 0.75}, 4: {"alpha": 0.804}}[case]
    return SampleParameters([float(s) for s in strikes], [float(d) for d in dips],
                            [float(a) for a in aspects], float(minor_radius), case, cp,
                            draw_seed, "truth")

