"""Pipeline configuration: YAML overrides on top of synthetic-example defaults."""

from __future__ import annotations

import copy
from dataclasses import dataclass
from pathlib import Path

import yaml

from .dfn import FluidProperties
from .flow import BoundaryConditions
from .geometry import AxisBox
from .inversion import FlowConfig, Range


class ConfigError(ValueError):
    pass


DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "fracinv_out",
    "jobs": 1,
    "domain": {"min": [-100.0, -100.0, -100.0], "max": [100.0, 100.0, 100.0]},
    "truth": {
        "normals": [[-0.355, -0.646, 0.676], [-0.996, 0.077, -0.038], [0.316, 0.715, 0.623]],
        "centers": [[-5.543, -19.861, 98.218], [0.577, 19.39, 91.1], [9.42, 39.088, 53.548]],
        "minor_radius": 250.0,
        "aspect_ratios": [1.1, 1.2, 1.25],
        "aperture": 1e-5,
        "permeability": 1e-12,
    },
    "catalog": {
        "n_events": 332,
        "noise_sigma_m": 5.0,
        "focal_noise_sigma_deg": 5.0,
        "event_radius_m": 20.0,
        "file": None,
    },
    "clustering": {"k_min": 1, "k_max": 10, "max_iters": 20, "tol": 1e-8, "n_init": 10,
                   "gain_threshold": 5.0},
    "orientation": {"max_combo": 10_000_000, "bin_width": 10.0, "mass_threshold": 0.25},
    "flow": {
        "h": 10.0,
        "n_vertices": 32,
        "tol": 1e-10,
        "dirichlet": {"x_min": 30e6, "x_max": 10e6},
        "fluid": {"density": 997.0, "viscosity": 8.94e-4, "gravity": 9.8, "porosity": 0.25},
    },
    "inversion": {
        "cases": [1, 2, 3, 4],
        "n_lhs": 10,
        "minor_radius": [200.0, 300.0],
        "aspect_ratio": [1.0, 1.5],
        "observations": None,
    },
}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k}")
        if isinstance(base[k], dict) and isinstance(v, dict):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = v
    return out


@dataclass
class PipelineConfig:
    data: dict
    base_dir: Path

    @classmethod
    def load(cls, path=None, overrides: dict | None = None) -> "PipelineConfig":
        raw, base = {}, Path.cwd()
        if path is not None:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file {p} not found")
            try:
                raw = yaml.safe_load(p.read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{p}: {exc}") from exc
            if not isinstance(raw, dict):
                raise ConfigError(f"{p}: top level must be a mapping")
            base = p.parent
        data = _merge(DEFAULTS, raw)
        for k, v in (overrides or {}).items():
            if v is not None:
                data[k] = v
        cfg = cls(data, base)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.data[key]

    def resolve(self, p) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def out_dir(self) -> Path:
        return self.resolve(self.data["out_dir"])

    @property
    def domain(self) -> AxisBox:
        return AxisBox(tuple(self.data["domain"]["min"]), tuple(self.data["domain"]["max"]))

    @property
    def fluid(self) -> FluidProperties:
        return FluidProperties(**self.data["flow"]["fluid"])

    @property
    def flow(self) -> FlowConfig:
        f = self.data["flow"]
        return FlowConfig(self.domain, float(f["h"]), self.fluid,
                          BoundaryConditions({k: float(v) for k, v in f["dirichlet"].items()}),
                          int(f["n_vertices"]), float(f["tol"]))

    def ranges(self) -> tuple[Range, Range]:
        inv = self.data["inversion"]
        return Range(*map(float, inv["minor_radius"])), Range(*map(float, inv["aspect_ratio"]))

    def require_truth(self) -> dict:
        if not self.data.get("truth"):
            raise ConfigError("this stage needs a 'truth' section (ground-truth fractures)")
        return self.data["truth"]

    def validate(self) -> None:
        d = self.data
        try:
            if not isinstance(d["seed"], int) or d["seed"] < 0:
                raise ConfigError("seed must be a non-negative integer")
            if not isinstance(d["jobs"], int) or d["jobs"] < 1:
                raise ConfigError("jobs must be a positive integer")
            self.domain
            self.flow
            self.ranges()
            t = d["truth"]
            if t:
                n = len(t["normals"])
                if n == 0 or len(t["centers"]) != n or len(t["aspect_ratios"]) != n:
                    raise ConfigError("truth normals, centers and aspect_ratios must have equal nonzero length")
                if any(not self.domain.contains(c, 1e-9) for c in t["centers"]):
                    raise ConfigError("truth centers must lie inside the domain")
            c = d["catalog"]
            if int(c["n_events"]) < 3:
                raise ConfigError("catalog.n_events must be >= 3")
            if c["noise_sigma_m"] < 0 or c["focal_noise_sigma_deg"] < 0:
                raise ConfigError("catalog noise levels must be non-negative")
            if c["event_radius_m"] is not None and c["event_radius_m"] <= 0:
                raise ConfigError("catalog.event_radius_m must be positive or null")
            if c["file"] is not None and not self.resolve(c["file"]).is_file():
                raise ConfigError(f"catalog file {c['file']} not found")
            k = d["clustering"]
            if not (1 <= k["k_min"] <= k["k_max"]):
                raise ConfigError("clustering requires 1 <= k_min <= k_max")
            if k["max_iters"] < 1 or k["tol"] < 0 or k["n_init"] < 1 or k["gain_threshold"] <= 0:
                raise ConfigError("clustering parameters out of range")
            o = d["orientation"]
            if o["max_combo"] < 1 or not (0 < o["mass_threshold"] <= 1):
                raise ConfigError("orientation parameters out of range")
            if 180.0 % float(o["bin_width"]) != 0:
                raise ConfigError("orientation.bin_width must divide 180")
            inv = d["inversion"]
            if not inv["cases"] or any(c not in (1, 2, 3, 4) for c in inv["cases"]):
                raise ConfigError("inversion.cases must be a nonempty subset of {1, 2, 3, 4}")
            if int(inv["n_lhs"]) < 1:
                raise ConfigError("inversion.n_lhs must be >= 1")
            if inv["observations"] is not None and not self.resolve(inv["observations"]).is_file():
                raise ConfigError(f"observation file {inv['observations']} not found")
            if d["flow"]["h"] <= 0:
                raise ConfigError("flow.h must be positive")
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
