"""DFN realizations: sampled fracture parameters -> clipped ellipses with
aperture and permeability under one of four closure relations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .geometry import (
    AxisBox,
    EllipticalFracture,
    StrikeDip,
    clip_polygon_to_box,
    fracture_polygon,
    normal_from_strike_dip,
    polygon_area,
    strike_dip_from_normal,
)

log = logging.getLogger(__name__)


class EmptyNetwork(RuntimeError):
    """No fracture survives clipping to the domain."""


class NonPositiveLength(ValueError):
    pass


@dataclass(frozen=True)
class FluidProperties:
    density: float = 997.0        # kg/m3
    viscosity: float = 8.94e-4    # Pa s
    gravity: float = 9.8          # m/s2
    porosity: float = 0.25

    def __post_init__(self):
        if self.density <= 0 or self.viscosity <= 0:
            raise ValueError("density and viscosity must be positive")
        if self.gravity < 0:
            raise ValueError("gravity must be non-negative")
        if not 0 < self.porosity < 1:
            raise ValueError("porosity must lie in (0, 1)")


@dataclass(frozen=True)
class Case1:
    """Constant aperture and permeability, sampled independently."""
    aperture: float
    permeability: float
    number = 1


@dataclass(frozen=True)
class Case2:
    """log10(aperture) ~ Normal(mean, sigma); k = b^2 / 12."""
    log10_mean_aperture: float
    log10_sigma: float
    number = 2


@dataclass(frozen=True)
class Case3:
    """Aperture from transmissivity F * (l_mean / 2)^alpha via the cubic law."""
    F: float
    alpha: float
    number = 3


@dataclass(frozen=True)
class Case4:
    """Length-correlated aperture b = F_l * (l_mean / 2)^alpha."""
    F_l: float
    alpha: float
    number = 4


ClosureCase = Union[Case1, Case2, Case3, Case4]


def _check_case(case: ClosureCase) -> None:
    vals = {
        Case1: lambda c: (c.aperture, c.permeability),
        Case2: lambda c: (c.log10_sigma,),
        Case3: lambda c: (c.F, c.alpha),
        Case4: lambda c: (c.F_l, c.alpha),
    }[type(case)](case)
    if any(v <= 0 for v in vals):
        raise ValueError(f"{case} has non-positive magnitudes")


def apply_case(case: ClosureCase, l_mean: float, rng: np.random.Generator | None = None,
               fluid: FluidProperties | None = None) -> tuple[float, float]:
    """Return (aperture [m], permeability [m2]) for one fracture.

    ``rng`` is only consumed by Case2 (one normal draw per call).
    """
    if not l_mean > 0:
        raise NonPositiveLength(f"l_mean must be positive, got {l_mean}")
    _check_case(case)
    fluid = fluid or FluidProperties()
    if isinstance(case, Case1):
        return float(case.aperture), float(case.permeability)
    if isinstance(case, Case2):
        if rng is None:
            raise ValueError("Case2 needs a random generator")
        x = rng.normal(case.log10_mean_aperture, case.log10_sigma)
        b = 10.0 ** x
    elif isinstance(case, Case3):
        transmissivity = case.F * (0.5 * l_mean) ** case.alpha
        b = (12.0 * transmissivity * fluid.viscosity / (fluid.density * fluid.gravity)) ** (1.0 / 3.0)
    elif isinstance(case, Case4):
        b = case.F_l * (0.5 * l_mean) ** case.alpha
    else:
        raise TypeError(f"unknown closure case {case!r}")
    return float(b), float(b * b / 12.0)


@dataclass(frozen=True)
class FractureSample:
    strike: float
    dip: float
    minor_radius: float
    aspect_ratio: float
    center: tuple[float, float, float]

    def __post_init__(self):
        StrikeDip(self.strike, self.dip)
        if self.minor_radius <= 0:
            raise ValueError("minor_radius must be positive")
        if self.aspect_ratio < 1:
            raise ValueError("aspect_ratio must be >= 1")

    @classmethod
    def from_normal(cls, normal, minor_radius, aspect_ratio, center) -> "FractureSample":
        sd = strike_dip_from_normal(normal)
        return cls(sd.strike, sd.dip, minor_radius, aspect_ratio, tuple(map(float, center)))


@dataclass
class RealizedFracture:
    fracture: EllipticalFracture
    polygon: np.ndarray
    aperture: float
    permeability: float
    source_index: int = 0

    @property
    def area(self) -> float:
        return polygon_area(self.polygon)


@dataclass
class DFNRealization:
    fractures: list[RealizedFracture]
    domain: AxisBox

    def __len__(self):
        return len(self.fractures)

    def to_dict(self) -> dict:
        return {
            "domain": {"min": list(self.domain.min_corner), "max": list(self.domain.max_corner)},
            "fractures": [
                {
                    "index": f.source_index,
                    "center": [float(x) for x in f.fracture.center],
                    "normal": [float(x) for x in f.fracture.unit_normal],
                    "minor_radius": f.fracture.minor_radius,
                    "major_radius": f.fracture.major_radius,
                    "aperture": f.aperture,
                    "permeability": f.permeability,
                    "clipped_area": f.area,
                }
                for f in self.fractures
            ],
        }


def build_realization(samples: Sequence[FractureSample], case: ClosureCase, domain: AxisBox,
                      n_vertices: int = 32, seed: int = 0,
                      fluid: FluidProperties | None = None,
                      normals: Sequence | None = None) -> DFNRealization:
    """Turn fracture samples into clipped, parameterised fractures.

    ``normals`` optionally overrides the strike/dip-derived normals (used
    for ground-truth networks specified by normal vectors).
    """
    rng = np.random.default_rng(seed)
    out = []
    for idx, s in enumerate(samples):
        if not domain.contains(s.center, tol=1e-9):
            raise ValueError(f"fracture {idx} center {s.center} lies outside the domain")
        n = normal_from_strike_dip(StrikeDip(s.strike, s.dip)) if normals is None \
            else np.asarray(normals[idx], float) / np.linalg.norm(normals[idx])
        frac = EllipticalFracture(tuple(map(float, s.center)), tuple(map(float, n)),
                                  s.minor_radius, s.aspect_ratio, n_vertices)
        # every fracture consumes its draw so dropping one keeps the others fixed
        b, k = apply_case(case, frac.mean_length, rng, fluid)
        poly = clip_polygon_to_box(fracture_polygon(frac), domain)
        if len(poly) == 0:
            log.warning("fracture %d does not intersect the domain; dropped", idx)
            continue
        out.append(RealizedFracture(frac, poly, b, k, idx))
    if not out:
        raise EmptyNetwork("all fractures were clipped away")
    return DFNRealization(out, domain)
