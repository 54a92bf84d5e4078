"""Planes, elliptical fractures, strike/dip conversion and box clipping.

Angles are in degrees. Strike is in [0, 180) and dip in [0, 180]; obtuse
dips are legal and encode which side of vertical the plane leans to.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEGENERACY_TOL = 1e-9
ON_PLANE_TOL = 1e-9


class DegenerateTriple(ValueError):
    """Three points are (nearly) collinear and define no plane."""


@dataclass(frozen=True)
class PlaneCoefficients:
    a: float
    b: float
    c: float
    d: float = 0.0

    def __post_init__(self):
        if self.a == 0 and self.b == 0 and self.c == 0:
            raise ValueError("plane normal must be nonzero")

    @property
    def normal(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c], dtype=float)


@dataclass(frozen=True)
class StrikeDip:
    strike: float
    dip: float

    def __post_init__(self):
        if not (0.0 <= self.strike < 180.0):
            raise ValueError(f"strike {self.strike} outside [0, 180)")
        if not (0.0 <= self.dip <= 180.0):
            raise ValueError(f"dip {self.dip} outside [0, 180]")


@dataclass(frozen=True)
class AxisBox:
    min_corner: tuple[float, float, float]
    max_corner: tuple[float, float, float]

    def __post_init__(self):
        lo = np.asarray(self.min_corner, float)
        hi = np.asarray(self.max_corner, float)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(lo < hi):
            raise ValueError("AxisBox requires min_corner < max_corner componentwise")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.min_corner, float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.max_corner, float)

    def contains(self, p, tol: float = 0.0) -> bool:
        p = np.asarray(p, float)
        return bool(np.all(p >= self.lo - tol) and np.all(p <= self.hi + tol))


@dataclass(frozen=True)
class EllipticalFracture:
    center: tuple[float, float, float]
    unit_normal: tuple[float, float, float]
    minor_radius: float
    aspect_ratio: float = 1.0
    n_vertices: int = 32
    _normal: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = np.asarray(self.unit_normal, float)
        if abs(np.linalg.norm(n) - 1.0) > 1e-12:
            raise ValueError("unit_normal must have unit length")
        if self.minor_radius <= 0:
            raise ValueError("minor_radius must be positive")
        if self.aspect_ratio < 1:
            raise ValueError("aspect_ratio must be >= 1")
        if self.n_vertices < 8:
            raise ValueError("n_vertices must be >= 8")
        object.__setattr__(self, "_normal", n)

    @property
    def major_radius(self) -> float:
        return self.aspect_ratio * self.minor_radius

    @property
    def mean_length(self) -> float:
        """Average of the major and minor axis lengths."""
        return 0.5 * (self.major_radius + self.minor_radius)

    @property
    def normal(self) -> np.ndarray:
        return self._normal.copy()


def unit(v) -> np.ndarray:
    v = np.asarray(v, float)
    return v / np.linalg.norm(v)


def plane_from_points(p1, p2, p3) -> PlaneCoefficients:
    """Plane through three points; normal is (p2 - p1) x (p3 - p1)."""
    p1, p2, p3 = (np.asarray(p, float) for p in (p1, p2, p3))
    e1, e2 = p2 - p1, p3 - p1
    n = np.cross(e1, e2)
    scale = np.linalg.norm(e1) * np.linalg.norm(e2)
    if scale == 0 or np.linalg.norm(n) < DEGENERACY_TOL * scale:
        raise DegenerateTriple("points are collinear or coincident")
    return PlaneCoefficients(float(n[0]), float(n[1]), float(n[2]), float(n @ p1))


def canonical_normal(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Flip sign so c > 0, else b > 0, else a > 0."""
    if c != 0:
        s = 1.0 if c > 0 else -1.0
    elif b != 0:
        s = 1.0 if b > 0 else -1.0
    else:
        s = 1.0 if a > 0 else -1.0
    return s * a, s * b, s * c


def strike_dip_arrays(a, b, c) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised strike/dip (degrees) from plane-normal components.

    Strike is ``atan(-b/a)`` mapped into [0, 180); dip is
    ``atan(sqrt((a^2 + b^2) / c^2))``, reflected to ``180 - dip`` when
    ``-c * a > 0``. Zero-coefficient cases take the limiting values:
    a = b = 0 gives (0, 0), a = 0 gives strike 90, c = 0 gives dip 90.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    c = np.asarray(c, float)
    a, b, c = np.broadcast_arrays(a, b, c)
    # both branches of the formulas are invariant under (a,b,c) -> -(a,b,c)
    with np.errstate(divide="ignore", invalid="ignore"):
        strike = np.degrees(np.arctan(-b / a))
        strike = np.where(strike < 0, 180.0 - np.abs(strike), strike)
        strike = np.where(a == 0, 90.0, strike)
        horiz = np.sqrt(a * a + b * b)
        theta = np.degrees(np.arctan(horiz / np.abs(c)))
        dip = np.where(np.sign(-c * a) > 0, 180.0 - theta, theta)
    dip = np.where(c == 0, 90.0, dip)
    flat = (a == 0) & (b == 0)
    strike = np.where(flat, 0.0, strike)
    dip = np.where(flat, 0.0, dip)
    # atan(-0/a) yields -0.0 and 180 - tiny rounds to 180.0
    strike = np.where(strike >= 180.0, 0.0, strike) + 0.0
    return strike, dip


def strike_dip_from_plane(coeffs: PlaneCoefficients) -> StrikeDip:
    a, b, c = canonical_normal(coeffs.a, coeffs.b, coeffs.c)
    s, d = strike_dip_arrays(a, b, c)
    return StrikeDip(float(s), float(d))


def strike_dip_from_normal(n) -> StrikeDip:
    n = np.asarray(n, float)
    return strike_dip_from_plane(PlaneCoefficients(n[0], n[1], n[2]))


def normal_from_strike_dip(sd: StrikeDip) -> np.ndarray:
    """Unit normal whose strike/dip (by :func:`strike_dip_arrays`) is ``sd``."""
    t = sd.strike if sd.strike <= 90.0 else sd.strike - 180.0
    t, d = np.radians(t), np.radians(sd.dip)
    n = np.array([np.sin(d) * np.cos(t), -np.sin(d) * np.sin(t), np.cos(d)])
    return n / np.linalg.norm(n)


def in_plane_axes(fracture: EllipticalFracture) -> tuple[np.ndarray, np.ndarray]:
    """Major-axis direction (strike direction projected on the plane) and its
    in-plane complement, so that major x minor = normal."""
    n = fracture.normal
    sd = strike_dip_from_normal(n)
    s = np.radians(sd.strike)
    u = np.array([np.sin(s), np.cos(s), 0.0])
    u = u - (u @ n) * n
    if np.linalg.norm(u) < 1e-12:
        # only reachable for numerically vertical normals with odd strike
        u = np.cross(n, [0.0, 0.0, 1.0])
    u = unit(u)
    v = np.cross(n, u)
    return u, v


def fracture_polygon(fracture: EllipticalFracture) -> np.ndarray:
    """Boundary vertices of the ellipse, counterclockwise about the normal."""
    u, v = in_plane_axes(fracture)
    phi = 2.0 * np.pi * np.arange(fracture.n_vertices) / fracture.n_vertices
    c = np.asarray(fracture.center, float)
    return (c + fracture.major_radius * np.cos(phi)[:, None] * u
            + fracture.minor_radius * np.sin(phi)[:, None] * v)


def _dedupe(poly: list[np.ndarray], tol: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    for p in poly:
        if not out or np.linalg.norm(p - out[-1]) > tol:
            out.append(p)
    if len(out) > 1 and np.linalg.norm(out[0] - out[-1]) <= tol:
        out.pop()
    return out


def clip_polygon_halfspace(poly, normal, offset, tol: float = 1e-12):
    """Keep the part of a convex polygon with ``normal . p <= offset``."""
    poly = [np.asarray(p, float) for p in poly]
    if not poly:
        return []
    normal = np.asarray(normal, float)
    out = []
    n = len(poly)
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        dp, dq = normal @ p - offset, normal @ q - offset
        if dp <= tol:
            out.append(p)
        if (dp < -tol and dq > tol) or (dp > tol and dq < -tol):
            t = dp / (dp - dq)
            out.append(p + t * (q - p))
    return _dedupe(out, 1e-12)


def clip_polygon_to_box(poly, box: AxisBox) -> np.ndarray:
    """Intersection of a planar convex polygon with the box (may be empty)."""
    cur = [np.asarray(p, float) for p in poly]
    lo, hi = box.lo, box.hi
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        cur = clip_polygon_halfspace(cur, e, hi[axis])
        cur = clip_polygon_halfspace(cur, -e, -lo[axis])
        if len(cur) < 3:
            return np.empty((0, 3))
    cur = np.array(cur)
    # snap coordinates that sit on a box face to the face exactly
    for axis in range(3):
        col = cur[:, axis]
        col[np.abs(col - lo[axis]) < 1e-9] = lo[axis]
        col[np.abs(col - hi[axis]) < 1e-9] = hi[axis]
    if polygon_area(cur) <= 0.0:
        return np.empty((0, 3))
    return cur


def newell_normal(poly) -> np.ndarray:
    """Area-weighted normal of a planar polygon (length = 2 x area)."""
    p = np.asarray(poly, float)
    q = np.roll(p, -1, axis=0)
    return np.cross(p, q).sum(axis=0)


def polygon_area(poly) -> float:
    if len(poly) < 3:
        return 0.0
    return 0.5 * float(np.linalg.norm(newell_normal(poly)))


def polygon_centroid(poly) -> np.ndarray:
    """Area centroid of a planar polygon in 3-D (fan triangulation)."""
    p = np.asarray(poly, float)
    a, b, c = p[0], p[1:-1], p[2:]
    w = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    if w.sum() == 0:
        return p.mean(axis=0)
    return ((a + b + c) / 3.0 * w[:, None]).sum(axis=0) / w.sum()


def _line_clip_convex(p0, direction, poly, normal, t0, t1):
    """Restrict the parameter range [t0, t1] of ``p0 + t * direction`` to the
    inside of a convex planar polygon (vertices counterclockwise about
    ``normal``)."""
    m = len(poly)
    for i in range(m):
        a, b = poly[i], poly[(i + 1) % m]
        inward = np.cross(normal, b - a)
        num = inward @ (p0 - a)
        den = inward @ direction
        if abs(den) < 1e-15:
            if num < -1e-9 * np.linalg.norm(inward):
                return None
            continue
        t = -num / den
        if den > 0:
            t0 = max(t0, t)
        else:
            t1 = min(t1, t)
        if t0 >= t1:
            return None
    return t0, t1


def plane_intersection_segment(poly_a, poly_b, tol: float = 1e-9):
    """Segment shared by two convex planar polygons, or None.

    Parallel and coplanar pairs return None.
    """
    pa = np.asarray(poly_a, float)
    pb = np.asarray(poly_b, float)
    if len(pa) < 3 or len(pb) < 3:
        return None
    na, nb = unit(newell_normal(pa)), unit(newell_normal(pb))
    direction = np.cross(na, nb)
    dn = np.linalg.norm(direction)
    if dn < 1e-10:
        return None
    direction /= dn
    da, db = na @ pa[0], nb @ pb[0]
    # point on both planes closest to the origin
    p0 = np.linalg.solve(np.array([na, nb, direction]), np.array([da, db, 0.0]))
    big = 1e12
    ra = _line_clip_convex(p0, direction, pa, na, -big, big)
    if ra is None:
        return None
    rb = _line_clip_convex(p0, direction, pb, nb, *ra)
    if rb is None or rb[1] - rb[0] <= tol:
        return None
    return p0 + rb[0] * direction, p0 + rb[1] * direction


def clip_convex_polygons(poly, clipper) -> np.ndarray:
    """Intersection of two coplanar convex polygons."""
    clipper = np.asarray(clipper, float)
    n = unit(newell_normal(clipper))
    cur = [np.asarray(p, float) for p in poly]
    m = len(clipper)
    for i in range(m):
        a, b = clipper[i], clipper[(i + 1) % m]
        inward = np.cross(n, b - a)
        cur = clip_polygon_halfspace(cur, -inward, -(inward @ a))
        if len(cur) < 3:
            return np.empty((0, 3))
    return np.array(cur)
