"""Synthetic microseismic catalogs on known fractures.

Events are scattered over the clipped fracture polygons and perturbed by
Gaussian location noise; each event's focal (strike, dip) is its host
fracture's orientation plus Gaussian angle noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dfn import DFNRealization, EmptyNetwork
from .geometry import (
    EllipticalFracture,
    StrikeDip,
    clip_convex_polygons,
    fracture_polygon,
    polygon_area,
    strike_dip_from_normal,
)
from .orientation import AngleDistribution

CATALOG_HEADER = ("x", "y", "z", "strike", "dip")


@dataclass(frozen=True)
class MicroseismicEvent:
    location: tuple[float, float, float]
    focal: StrikeDip
    host_fracture_id: int = -1


@dataclass
class MicroseismicCatalog:
    locations: np.ndarray          # (n, 3) m
    focal: np.ndarray              # (n, 2) strike, dip in degrees
    host: np.ndarray               # (n,) -1 when unknown
    noise_sigma_m: float = 0.0
    focal_noise_sigma_deg: float = 0.0
    rng_seed: int | None = None

    def __post_init__(self):
        self.locations = np.asarray(self.locations, float).reshape(-1, 3)
        self.focal = np.asarray(self.focal, float).reshape(-1, 2)
        self.host = np.asarray(self.host, int)
        if len(self.locations) == 0:
            raise ValueError("catalog must contain at least one event")
        if self.noise_sigma_m < 0 or self.focal_noise_sigma_deg < 0:
            raise ValueError("noise levels must be non-negative")
        if not np.all(np.isfinite(self.locations)):
            raise ValueError("event locations must be finite")

    def __len__(self):
        return len(self.locations)

    @property
    def events(self) -> list[MicroseismicEvent]:
        return [MicroseismicEvent(tuple(p), StrikeDip(*f), int(h))
                for p, f, h in zip(self.locations, self.focal, self.host)]


def fold_strike(s):
    return np.mod(s, 180.0)


def fold_dip(d):
    """Reflect dips into [0, 180]."""
    d = np.mod(np.asarray(d, float), 360.0)
    return np.where(d > 180.0, 360.0 - d, d)


def _sample_polygon(poly: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points in a convex planar polygon (fan triangulation)."""
    a, b, c = poly[0], poly[1:-1], poly[2:]
    w = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    tri = rng.choice(len(w), size=n, p=w / w.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    return ((1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b[tri]
            + (r1 * r2)[:, None] * c[tri])


def seismogenic_region(fracture, polygon: np.ndarray, event_radius: float | None) -> np.ndarray:
    """Part of the clipped polygon within ``event_radius`` of the centre."""
    if event_radius is None:
        return polygon
    disk = fracture_polygon(EllipticalFracture(fracture.center, fracture.unit_normal,
                                               float(event_radius), 1.0, 64))
    return clip_convex_polygons(polygon, disk)


def generate_catalog(truth: DFNRealization, n_events: int, noise_sigma_m: float = 5.0,
                     focal_noise_sigma_deg: float = 5.0, seed: int = 0,
                     event_radius: float | None = None) -> MicroseismicCatalog:
    """Draw ``n_events`` events over the truth fractures, area-weighted.

    With ``event_radius`` set, events are confined to the part of each
    clipped polygon within that distance of the fracture centre.
    """
    if n_events < 1:
        raise ValueError("n_events must be >= 1")
    regions = [(f, seismogenic_region(f.fracture, f.polygon, event_radius)) for f in truth.fractures]
    regions = [(f, r) for f, r in regions if len(r) >= 3 and polygon_area(r) > 0]
    if not regions:
        raise EmptyNetwork("no fracture with positive clipped area")
    fracs = [f for f, _ in regions]
    rng = np.random.default_rng(seed)
    areas = np.array([polygon_area(r) for _, r in regions])
    host = rng.choice(len(fracs), size=n_events, p=areas / areas.sum())
    locs = np.empty((n_events, 3))
    focal = np.empty((n_events, 2))
    for fi, (f, region) in enumerate(regions):
        sel = np.flatnonzero(host == fi)
        if len(sel) == 0:
            continue
        locs[sel] = _sample_polygon(region, len(sel), rng)
        sd = strike_dip_from_normal(f.fracture.normal)
        focal[sel] = (sd.strike, sd.dip)
    locs += rng.normal(0.0, noise_sigma_m, size=locs.shape) if noise_sigma_m > 0 else 0.0
    if focal_noise_sigma_deg > 0:
        focal += rng.normal(0.0, focal_noise_sigma_deg, size=focal.shape)
    focal[:, 0] = fold_strike(focal[:, 0])
    focal[:, 1] = fold_dip(focal[:, 1])
    host_ids = np.array([fracs[h].source_index for h in host])
    return MicroseismicCatalog(locs, focal, host_ids, noise_sigma_m, focal_noise_sigma_deg, seed)


def focal_angle_histograms(catalog: MicroseismicCatalog, bin_width: float = 10.0,
                           members=None) -> tuple[AngleDistribution, AngleDistribution]:
    """Normalised strike and dip histograms of the focal angles.

    ``members`` optionally restricts to a subset of event indices.
    """
    focal = catalog.focal if members is None else catalog.focal[members]
    return (AngleDistribution.from_angles(focal[:, 0], bin_width, "strike"),
            AngleDistribution.from_angles(focal[:, 1], bin_width, "dip"))


def _fmt(x: float) -> str:
    return format(float(x), ".9g")


def write_catalog(catalog: MicroseismicCatalog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_HEADER)
        for p, f in zip(catalog.locations, catalog.focal):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(f[0]), _fmt(f[1])])


def read_catalog(path) -> MicroseismicCatalog:
    with open(Path(path), newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CATALOG_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CATALOG_HEADER)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 5)
    # rounding to 9 digits can push a strike of 179.99999999995 to 180
    data[:, 3] = fold_strike(data[:, 3])
    return MicroseismicCatalog(data[:, :3], data[:, 3:], -np.ones(len(data), int))
