"""Strike/dip distributions from three-point plane fits over event triples,
and extraction of orientation constraint intervals from binned histograms.

The enumeration over all C(n, 3) triples is split into contiguous rank
chunks; each chunk is unranked to (i, j, k) index triples and accumulated
into private integer histograms, so chunk results merge exactly in any
order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .geometry import DEGENERACY_TOL, strike_dip_arrays

log = logging.getLogger(__name__)

DEFAULT_BIN_WIDTH = 10.0
DEFAULT_MAX_COMBO = 10_000_000


class TooManyCombinations(ValueError):
    pass


class AllDegenerate(ValueError):
    pass


def n_bins(bin_width: float) -> int:
    nb = 180.0 / bin_width
    if bin_width <= 0 or abs(nb - round(nb)) > 1e-9:
        raise ValueError(f"bin width {bin_width} must divide 180")
    return int(round(nb))


@dataclass
class AngleDistribution:
    """Binned probability masses over [0, 180) degrees.

    Dip values of exactly 180 fall in the last bin. ``counts`` keeps the raw
    integer tallies when the distribution comes from counting.
    """

    bin_width: float
    masses: np.ndarray
    angle_kind: str
    counts: np.ndarray | None = None
    insufficient: bool = False

    def __post_init__(self):
        self.masses = np.asarray(self.masses, float)
        if self.angle_kind not in ("strike", "dip"):
            raise ValueError("angle_kind must be 'strike' or 'dip'")
        if len(self.masses) != n_bins(self.bin_width):
            raise ValueError("bin count x bin width must equal 180")
        if np.any(self.masses < 0):
            raise ValueError("masses must be non-negative")
        if not self.insufficient and abs(self.masses.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {self.masses.sum()}, not 1")

    @classmethod
    def from_counts(cls, counts, bin_width: float, angle_kind: str) -> "AngleDistribution":
        counts = np.asarray(counts, dtype=np.int64)
        total = counts.sum()
        if total == 0:
            return cls.empty(bin_width, angle_kind)
        return cls(bin_width, counts / total, angle_kind, counts)

    @classmethod
    def from_angles(cls, angles, bin_width: float, angle_kind: str) -> "AngleDistribution":
        return cls.from_counts(bin_counts(angles, bin_width), bin_width, angle_kind)

    @classmethod
    def empty(cls, bin_width: float, angle_kind: str) -> "AngleDistribution":
        nb = n_bins(bin_width)
        return cls(bin_width, np.zeros(nb), angle_kind, np.zeros(nb, np.int64), insufficient=True)

    @property
    def edges(self) -> np.ndarray:
        return np.arange(len(self.masses) + 1) * self.bin_width

    def bin_of(self, angle: float) -> int:
        return int(min(int(angle // self.bin_width), len(self.masses) - 1))


@dataclass(frozen=True)
class AngleInterval:
    lo: float
    hi: float
    angle_kind: str

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 180.0):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, angle: float) -> bool:
        return self.lo <= angle <= self.hi


def bin_counts(angles, bin_width: float) -> np.ndarray:
    nb = n_bins(bin_width)
    idx = np.floor(np.asarray(angles, float) / bin_width).astype(np.int64)
    idx = np.clip(idx, 0, nb - 1)
    return np.bincount(idx, minlength=nb).astype(np.int64)


def combination_count(n: int) -> int:
    """Number of unordered triples, n (n-1) (n-2) / 6."""
    if n < 3:
        raise ValueError("need at least three points")
    return math.comb(int(n), 3)


def unrank_triples(ranks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Colexicographic unranking: rank = C(k,3) + C(j,2) + C(i,1), i < j < k."""
    r = np.asarray(ranks, dtype=np.int64)
    k = np.floor(np.cbrt(6.0 * r.astype(float))).astype(np.int64) + 1
    # fix the float estimate so that C(k,3) <= r < C(k+1,3)
    for _ in range(3):
        ck = k * (k - 1) * (k - 2) // 6
        k = np.where(ck > r, k - 1, k)
        ck1 = (k + 1) * k * (k - 1) // 6
        k = np.where(ck1 <= r, k + 1, k)
    r = r - k * (k - 1) * (k - 2) // 6
    j = np.floor(np.sqrt(2.0 * r.astype(float))).astype(np.int64) + 1
    for _ in range(3):
        cj = j * (j - 1) // 2
        j = np.where(cj > r, j - 1, j)
        cj1 = (j + 1) * j // 2
        j = np.where(cj1 <= r, j + 1, j)
    i = r - j * (j - 1) // 2
    return i, j, k


def _triple_counts(coords: np.ndarray, r0: int, r1: int, bin_width: float,
                   batch: int = 500_000) -> tuple[np.ndarray, np.ndarray, int]:
    nb = n_bins(bin_width)
    s_counts = np.zeros(nb, np.int64)
    d_counts = np.zeros(nb, np.int64)
    degenerate = 0
    for start in range(r0, r1, batch):
        stop = min(start + batch, r1)
        i, j, k = unrank_triples(np.arange(start, stop, dtype=np.int64))
        p = coords[i]
        e1 = coords[j] - p
        e2 = coords[k] - p
        n = np.cross(e1, e2)
        scale = np.linalg.norm(e1, axis=1) * np.linalg.norm(e2, axis=1)
        ok = np.linalg.norm(n, axis=1) >= DEGENERACY_TOL * scale
        ok &= scale > 0
        degenerate += int((~ok).sum())
        n = n[ok]
        s, d = strike_dip_arrays(n[:, 0], n[:, 1], n[:, 2])
        s_counts += bin_counts(s, bin_width)
        d_counts += bin_counts(d, bin_width)
    return s_counts, d_counts, degenerate


def _chunk_job(args):
    return _triple_counts(*args)


@dataclass
class TripleHistogram:
    strike: AngleDistribution
    dip: AngleDistribution
    n_triples: int
    n_degenerate: int

    def __iter__(self):
        return iter((self.strike, self.dip))


def triple_angle_distribution(coords, max_combo: int = DEFAULT_MAX_COMBO,
                              bin_width: float = DEFAULT_BIN_WIDTH, jobs: int = 1,
                              chunk_size: int = 1_000_000) -> TripleHistogram:
    """Strike and dip histograms over every three-point plane fit.

    Raises TooManyCombinations when C(n,3) >= max_combo.
    """
    coords = np.ascontiguousarray(coords, dtype=float)
    total = combination_count(len(coords))
    if total >= max_combo:
        raise TooManyCombinations(f"{total} combinations exceed MaxCombo={max_combo}")
    bounds = [(r, min(r + chunk_size, total)) for r in range(0, total, chunk_size)]
    tasks = [(coords, a, b, bin_width) for a, b in bounds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_chunk_job, tasks))
    else:
        parts = [_chunk_job(t) for t in tasks]
    nb = n_bins(bin_width)
    s = np.zeros(nb, np.int64)
    d = np.zeros(nb, np.int64)
    degenerate = 0
    for ps, pd, pdeg in parts:
        s += ps
        d += pd
        degenerate += pdeg
    if degenerate == total:
        raise AllDegenerate("every triple is collinear")
    if degenerate > 0.5 * total:
        log.warning("%d of %d triples are degenerate", degenerate, total)
    return TripleHistogram(AngleDistribution.from_counts(s, bin_width, "strike"),
                           AngleDistribution.from_counts(d, bin_width, "dip"),
                           total, degenerate)


@dataclass
class ClusterAngles:
    cluster: int
    n_members: int
    strike: AngleDistribution
    dip: AngleDistribution
    insufficient: bool = False
    error: str | None = None


def per_cluster_distributions(coords, labels, k: int | None = None,
                              max_combo: int = DEFAULT_MAX_COMBO,
                              bin_width: float = DEFAULT_BIN_WIDTH, jobs: int = 1) -> list[ClusterAngles]:
    """Triple-fit histograms for each cluster's member coordinates."""
    coords = np.asarray(coords, float)
    labels = np.asarray(labels)
    k = int(labels.max()) + 1 if k is None else k
    out = []
    for c in range(k):
        pts = coords[labels == c]
        if len(pts) < 3:
            out.append(ClusterAngles(c, len(pts), AngleDistribution.empty(bin_width, "strike"),
                                     AngleDistribution.empty(bin_width, "dip"), True,
                                     "fewer than three members"))
            continue
        try:
            th = triple_angle_distribution(pts, max_combo, bin_width, jobs)
        except (TooManyCombinations, AllDegenerate) as exc:
            out.append(ClusterAngles(c, len(pts), AngleDistribution.empty(bin_width, "strike"),
                                     AngleDistribution.empty(bin_width, "dip"), True, str(exc)))
            continue
        out.append(ClusterAngles(c, len(pts), th.strike, th.dip))
    return out


@dataclass
class Peak:
    first_bin: int
    last_bin: int
    mass: float
    interval: AngleInterval


def find_peaks(dist: AngleDistribution, mass_threshold: float = 0.25) -> list[Peak]:
    """Maximal runs of bins with mass >= threshold x max mass, each widened
    by one bin per side (clamped to [0, 180])."""
    m = dist.masses
    if dist.insufficient or m.max() <= 0:
        return []
    hot = m >= mass_threshold * m.max()
    peaks = []
    i = 0
    nb = len(m)
    while i < nb:
        if not hot[i]:
            i += 1
            continue
        j = i
        while j + 1 < nb and hot[j + 1]:
            j += 1
        lo = max(0.0, (i - 1) * dist.bin_width)
        hi = min(180.0, (j + 2) * dist.bin_width)
        peaks.append(Peak(i, j, float(m[i:j + 1].sum()), AngleInterval(lo, hi, dist.angle_kind)))
        i = j + 1
    return peaks


def extract_constraints(dists, mass_threshold: float = 0.25) -> tuple[list[AngleInterval], list[int]]:
    """Constraint intervals of all peaks (flattened) and the peak count of
    each distribution."""
    intervals, counts = [], []
    for d in dists:
        pk = find_peaks(d, mass_threshold)
        intervals.extend(p.interval for p in pk)
        counts.append(len(pk))
    return intervals, counts


def dominant_interval(dist: AngleDistribution, mass_threshold: float = 0.25) -> AngleInterval | None:
    """Interval of the peak holding the largest single bin."""
    peaks = find_peaks(dist, mass_threshold)
    if not peaks:
        return None
    top = int(np.argmax(dist.masses))
    for p in peaks:
        if p.first_bin <= top <= p.last_bin:
            return p.interval
    return peaks[0].interval


def fuse(*dists: AngleDistribution) -> AngleDistribution:
    """Equal-weight mixture of the non-empty distributions given."""
    usable = [d for d in dists if not d.insufficient]
    if not usable:
        return AngleDistribution.empty(dists[0].bin_width, dists[0].angle_kind)
    m = np.mean([d.masses for d in usable], axis=0)
    m = m / m.sum()
    return AngleDistribution(usable[0].bin_width, m, usable[0].angle_kind)


def fuse_product(*dists: AngleDistribution) -> AngleDistribution:
    """Bin-wise product of the usable distributions, renormalised.

    Treats the histograms as independent evidence about one plane. Falls
    back to :func:`fuse` when the supports do not overlap.
    """
    usable = [d for d in dists if not d.insufficient]
    if not usable:
        return AngleDistribution.empty(dists[0].bin_width, dists[0].angle_kind)
    m = np.prod([d.masses for d in usable], axis=0)
    if m.sum() <= 0:
        return fuse(*usable)
    return AngleDistribution(usable[0].bin_width, m / m.sum(), usable[0].angle_kind)


@dataclass
class FractureConstraint:
    """Strike and dip sampling intervals for one fracture (one cluster)."""

    cluster: int
    strike: AngleInterval
    dip: AngleInterval
    centroid: tuple = field(default=(0.0, 0.0, 0.0))

    def to_dict(self) -> dict:
        return {
            "cluster": self.cluster,
            "centroid": [float(x) for x in self.centroid],
            "strike": [self.strike.lo, self.strike.hi],
            "dip": [self.dip.lo, self.dip.hi],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FractureConstraint":
        return cls(int(d["cluster"]), AngleInterval(*d["strike"], "strike"),
                   AngleInterval(*d["dip"], "dip"), tuple(d["centroid"]))


def cluster_constraints(cluster_angles: list[ClusterAngles], focal: list, centroids,
                        mass_threshold: float = 0.25) -> list[FractureConstraint]:
    """One strike/dip constraint per cluster.

    ``focal[c]`` is the (strike, dip) focal histogram pair of cluster c's
    members. Triple and focal histograms are fused bin-wise by product and
    the dominant peak becomes the constraint. A cluster with no peak at
    all is given the full [0, 180] range.
    """
    out = []
    for ca, (fs, fd), cen in zip(cluster_angles, focal, centroids):
        s = dominant_interval(fuse_product(ca.strike, fs), mass_threshold)
        d = dominant_interval(fuse_product(ca.dip, fd), mass_threshold)
        s = s or AngleInterval(0.0, 180.0, "strike")
        d = d or AngleInterval(0.0, 180.0, "dip")
        out.append(FractureConstraint(ca.cluster, s, d, tuple(float(x) for x in cen)))
    return out
