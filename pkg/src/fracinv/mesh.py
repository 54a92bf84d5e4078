"""Structured in-plane meshing of a DFN realization.

Each clipped fracture polygon is covered by a rectangular grid in its own
(major, minor) frame; grid squares are clipped to the polygon. Cells on
different fractures are coupled along the intersection traces.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dfn import DFNRealization
from .geometry import in_plane_axes, plane_intersection_segment

FACE_TOL = 1e-6
FACE_NAMES = ("x_min", "x_max", "y_min", "y_max", "z_min", "z_max")


class MeshTooCoarse(ValueError):
    pass


@dataclass
class DFNMesh:
    """Cell-centred mesh. Pair arrays store each pair once."""

    center: np.ndarray              # (n, 3)
    area: np.ndarray                # (n,)
    fracture: np.ndarray            # (n,) index into realization.fractures
    aperture: np.ndarray
    permeability: np.ndarray
    adj: np.ndarray                 # (m, 2) same-fracture neighbours
    adj_length: np.ndarray
    adj_dist: np.ndarray
    link: np.ndarray                # (q, 2) cross-fracture neighbours
    link_length: np.ndarray
    link_dist: np.ndarray           # (q, 2) centre-to-trace distances
    bnd_cell: np.ndarray
    bnd_face: np.ndarray            # index into FACE_NAMES
    bnd_length: np.ndarray
    bnd_dist: np.ndarray
    bnd_point: np.ndarray           # (b, 3) face midpoints
    cell_polygons: list = field(default_factory=list, repr=False)
    traces: list = field(default_factory=list, repr=False)

    @property
    def n_cells(self) -> int:
        return len(self.area)


def _convex_clip_2d(poly: np.ndarray, edges_n: np.ndarray, edges_c: np.ndarray) -> np.ndarray:
    """Clip a 2-D polygon by half-planes ``n . p <= c``."""
    cur = list(poly)
    for n, c in zip(edges_n, edges_c):
        if not cur:
            break
        out = []
        m = len(cur)
        for i in range(m):
            p, q = cur[i], cur[(i + 1) % m]
            dp, dq = n @ p - c, n @ q - c
            if dp <= 1e-12:
                out.append(p)
            if (dp < -1e-12 and dq > 1e-12) or (dp > 1e-12 and dq < -1e-12):
                out.append(p + dp / (dp - dq) * (q - p))
        cur = out
    return np.array(cur) if len(cur) >= 3 else np.empty((0, 2))


def _area_centroid_2d(p: np.ndarray) -> tuple[float, np.ndarray]:
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cr = x * yn - xn * y
    a = 0.5 * cr.sum()
    if abs(a) < 1e-300:
        return 0.0, p.mean(axis=0)
    cx = ((x + xn) * cr).sum() / (6 * a)
    cy = ((y + yn) * cr).sum() / (6 * a)
    return abs(a), np.array([cx, cy])


def _segment_clip(p0, d, normals, offsets, t0=0.0, t1=1.0):
    """Parameter range of p0 + t d (t in [t0, t1]) inside ``n . p <= c``."""
    for n, c in zip(normals, offsets):
        den = n @ d
        num = c - n @ p0
        if abs(den) < 1e-14:
            if num < -1e-9:
                return None
            continue
        t = num / den
        if den > 0:
            t1 = min(t1, t)
        else:
            t0 = max(t0, t)
        if t0 >= t1:
            return None
    return t0, t1


class _FractureGrid:
    """Grid of one fracture in its local frame."""

    def __init__(self, rf, h: float, box, first_cell: int):
        poly3 = rf.polygon
        self.origin = poly3.mean(axis=0)
        self.u, self.v = in_plane_axes(rf.fracture)
        self.normal = np.cross(self.u, self.v)
        rel = poly3 - self.origin
        poly = np.column_stack([rel @ self.u, rel @ self.v])
        if _signed_area(poly) < 0:
            poly = poly[::-1]
            poly3 = poly3[::-1]
        self.poly, self.poly3 = poly, poly3
        edge = np.roll(poly, -1, axis=0) - poly
        # outward normals of a counterclockwise polygon
        self.hn = np.column_stack([edge[:, 1], -edge[:, 0]])
        self.hn /= np.linalg.norm(self.hn, axis=1)[:, None]
        self.hc = np.einsum("ij,ij->i", self.hn, poly)
        self.edge_face = self._edge_faces(poly3, box)

        lo, hi = poly.min(axis=0), poly.max(axis=0)
        ext = hi - lo
        self.nu = max(1, int(np.ceil(ext[0] / h - 1e-9)))
        self.nv = max(1, int(np.ceil(ext[1] / h - 1e-9)))
        self.us = np.linspace(lo[0], hi[0], self.nu + 1)
        self.vs = np.linspace(lo[1], hi[1], self.nv + 1)
        self.h = h
        self._build_cells(first_cell)

    @staticmethod
    def _edge_faces(poly3, box) -> list:
        lo, hi = box.lo, box.hi
        faces = []
        q3 = np.roll(poly3, -1, axis=0)
        for p, q in zip(poly3, q3):
            fid = -1
            for axis in range(3):
                if abs(p[axis] - lo[axis]) < FACE_TOL and abs(q[axis] - lo[axis]) < FACE_TOL:
                    fid = 2 * axis
                elif abs(p[axis] - hi[axis]) < FACE_TOL and abs(q[axis] - hi[axis]) < FACE_TOL:
                    fid = 2 * axis + 1
            faces.append(fid)
        return faces

    def to3d(self, p2) -> np.ndarray:
        p2 = np.atleast_2d(p2)
        return self.origin + p2[:, :1] * self.u + p2[:, 1:2] * self.v

    def _inside(self, pts: np.ndarray) -> np.ndarray:
        return np.all(pts @ self.hn.T - self.hc <= 1e-9 * self.h, axis=1)

    def _build_cells(self, first_cell: int):
        us, vs = self.us, self.vs
        I, J = np.meshgrid(np.arange(self.nu), np.arange(self.nv), indexing="ij")
        I, J = I.ravel(), J.ravel()
        corners = [np.column_stack([us[I + di], vs[J + dj]]) for di, dj in ((0, 0), (1, 0), (1, 1), (0, 1))]
        full = np.logical_and.reduce([self._inside(c) for c in corners])
        self.index = -np.ones((self.nu, self.nv), dtype=int)
        self.full = np.zeros((self.nu, self.nv), dtype=bool)
        polys, areas, cents = [], [], []
        min_area = 1e-12 * self.h * self.h
        for k, (i, j) in enumerate(zip(I, J)):
            sq = np.array([[us[i], vs[j]], [us[i + 1], vs[j]], [us[i + 1], vs[j + 1]], [us[i], vs[j + 1]]])
            if full[k]:
                cp = sq
                a = (us[i + 1] - us[i]) * (vs[j + 1] - vs[j])
                c = sq.mean(axis=0)
            else:
                cp = _convex_clip_2d(sq, self.hn, self.hc)
                if len(cp) == 0:
                    continue
                a, c = _area_centroid_2d(cp)
                if a <= min_area:
                    continue
            self.index[i, j] = first_cell + len(areas)
            self.full[i, j] = full[k]
            polys.append(cp)
            areas.append(a)
            cents.append(c)
        self.polys2 = polys
        self.areas = np.array(areas)
        self.cents2 = np.array(cents).reshape(-1, 2)
        self.cells_ij = np.argwhere(self.index >= 0)
        # argwhere walks in row-major order, matching the append order above
        self.first = first_cell

    def adjacency(self):
        """(cell_a, cell_b, shared edge length) for grid neighbours."""
        out = []
        us, vs = self.us, self.vs
        for di, dj in ((1, 0), (0, 1)):
            for i, j in self.cells_ij:
                i2, j2 = i + di, j + dj
                if i2 >= self.nu or j2 >= self.nv or self.index[i2, j2] < 0:
                    continue
                if di:
                    p0, d = np.array([us[i2], vs[j]]), np.array([0.0, vs[j + 1] - vs[j]])
                else:
                    p0, d = np.array([us[i], vs[j2]]), np.array([us[i + 1] - us[i], 0.0])
                if self.full[i, j] and self.full[i2, j2]:
                    length = np.linalg.norm(d)
                else:
                    r = _segment_clip(p0, d, self.hn, self.hc)
                    if r is None:
                        continue
                    length = (r[1] - r[0]) * np.linalg.norm(d)
                if length > 1e-12 * self.h:
                    out.append((self.index[i, j], self.index[i2, j2], length))
        return out

    def boundary_faces(self):
        """(cell, face id, edge length, centre distance, midpoint) for cell
        edges lying on domain faces."""
        out = []
        face_edges = [(k, f) for k, f in enumerate(self.edge_face) if f >= 0]
        if not face_edges:
            return out
        for (i, j) in self.cells_ij:
            cell = self.index[i, j]
            cp = self.polys2[cell - self.first]
            cen = self.cents2[cell - self.first]
            q = np.roll(cp, -1, axis=0)
            for k, fid in face_edges:
                n, c = self.hn[k], self.hc[k]
                on = (np.abs(cp @ n - c) < FACE_TOL) & (np.abs(q @ n - c) < FACE_TOL)
                for p_, q_ in zip(cp[on], q[on]):
                    length = np.linalg.norm(q_ - p_)
                    if length <= 1e-12 * self.h:
                        continue
                    dist = c - n @ cen
                    mid = self.to3d(0.5 * (p_ + q_))[0]
                    out.append((cell, fid, length, max(dist, 1e-9 * self.h), mid))
        return out

    def trace_pieces(self, a3, b3):
        """Split a 3-D trace segment into per-cell pieces (t0, t1, cell) with
        t the fraction along the segment.

        Cells are slightly inflated, so a trace running along a grid line
        appears in the cells on both sides.
        """
        a2 = np.array([(a3 - self.origin) @ self.u, (a3 - self.origin) @ self.v])
        b2 = np.array([(b3 - self.origin) @ self.u, (b3 - self.origin) @ self.v])
        d = b2 - a2
        us, vs = self.us, self.vs
        i0 = max(0, np.searchsorted(us, min(a2[0], b2[0]), side="right") - 2)
        i1 = min(self.nu - 1, np.searchsorted(us, max(a2[0], b2[0]), side="left") + 1)
        j0 = max(0, np.searchsorted(vs, min(a2[1], b2[1]), side="right") - 2)
        j1 = min(self.nv - 1, np.searchsorted(vs, max(a2[1], b2[1]), side="left") + 1)
        pieces = []
        eps = 1e-9 * self.h
        for i in range(i0, i1 + 1):
            for j in range(j0, j1 + 1):
                cell = self.index[i, j]
                if cell < 0:
                    continue
                cp = self.polys2[cell - self.first]
                e = np.roll(cp, -1, axis=0) - cp
                n = np.column_stack([e[:, 1], -e[:, 0]])
                n /= np.linalg.norm(n, axis=1)[:, None]
                c = np.einsum("ij,ij->i", n, cp)
                r = _segment_clip(a2, d, n, c + eps)
                if r is None or r[1] - r[0] <= 1e-12:
                    continue
                pieces.append((max(r[0], 0.0), min(r[1], 1.0), cell))
        pieces.sort()
        return pieces


def _share_trace(pa, pb, length: float, h: float) -> dict:
    """Link lengths between the cells of two fractures along one trace.

    The trace is cut at every piece end. Each sub-interval's length is
    split evenly over all (cell on a, cell on b) pairs covering it, which
    shares a trace lying on a grid line between the two adjacent cells.
    """
    breaks = sorted({t for p in (*pa, *pb) for t in p[:2]})
    min_dt = 1e-6 * h / length
    out: dict = {}
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= min_dt:
            continue
        mid = 0.5 * (lo + hi)
        A = [c for t0, t1, c in pa if t0 <= mid <= t1]
        B = [c for t0, t1, c in pb if t0 <= mid <= t1]
        if not A or not B:
            continue
        w = (hi - lo) * length / (len(A) * len(B))
        for x in A:
            for y in B:
                out[(x, y)] = out.get((x, y), 0.0) + w
    return out


def _signed_area(p: np.ndarray) -> float:
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float((x * np.roll(y, -1) - np.roll(x, -1) * y).sum())


def _line_distance(points, a3, b3):
    d = (b3 - a3) / np.linalg.norm(b3 - a3)
    rel = points - a3
    return np.linalg.norm(rel - np.outer(rel @ d, d), axis=1)


def mesh_dfn(realization: DFNRealization, h: float, min_trace_dist: float = 1e-3) -> DFNMesh:
    """Mesh every clipped fracture with cells of size about ``h``.

    ``min_trace_dist`` (fraction of ``h``) floors the centre-to-trace
    distance of intersection links so that cells centred on a trace do not
    produce unbounded conductances.
    """
    if not h > 0:
        raise ValueError("cell size must be positive")
    for rf in realization.fractures:
        diam = np.max(np.linalg.norm(rf.polygon[:, None] - rf.polygon[None], axis=2))
        if h >= diam:
            raise MeshTooCoarse(f"h={h} is not smaller than fracture diameter {diam:.3g}")
    grids = []
    first = 0
    for rf in realization.fractures:
        g = _FractureGrid(rf, h, realization.domain, first)
        if len(g.areas) < 4:
            raise MeshTooCoarse(f"fracture {rf.source_index} yields only {len(g.areas)} cells")
        grids.append(g)
        first += len(g.areas)

    centers, areas, frac_ids, apertures, perms, polys = [], [], [], [], [], []
    for fi, (g, rf) in enumerate(zip(grids, realization.fractures)):
        centers.append(g.to3d(g.cents2))
        areas.append(g.areas)
        frac_ids.append(np.full(len(g.areas), fi))
        apertures.append(np.full(len(g.areas), rf.aperture))
        perms.append(np.full(len(g.areas), rf.permeability))
        polys.extend(g.to3d(p) for p in g.polys2)
    center = np.vstack(centers)

    adj = [t for g in grids for t in g.adjacency()]
    adj_ij = np.array([(a, b) for a, b, _ in adj], dtype=int).reshape(-1, 2)
    adj_len = np.array([l for _, _, l in adj], dtype=float)
    adj_dist = np.linalg.norm(center[adj_ij[:, 0]] - center[adj_ij[:, 1]], axis=1) if len(adj) else np.empty(0)

    bnd = [t for g in grids for t in g.boundary_faces()]

    links, link_len, link_dist, traces = [], [], [], []
    floor = min_trace_dist * h
    for a in range(len(grids)):
        for b in range(a + 1, len(grids)):
            seg = plane_intersection_segment(grids[a].poly3, grids[b].poly3)
            if seg is None:
                continue
            p, q = seg
            length = np.linalg.norm(q - p)
            pa, pb = grids[a].trace_pieces(p, q), grids[b].trace_pieces(p, q)
            if not pa or not pb:
                continue
            traces.append((a, b, p, q))
            for (ca_, cb_), ln in _share_trace(pa, pb, length, h).items():
                links.append((ca_, cb_))
                link_len.append(ln)
            ca = center[[l[0] for l in links[len(link_dist):]]]
            cb = center[[l[1] for l in links[len(link_dist):]]]
            da = np.maximum(_line_distance(ca, p, q), floor)
            db = np.maximum(_line_distance(cb, p, q), floor)
            link_dist.extend(zip(da, db))

    return DFNMesh(
        center=center,
        area=np.concatenate(areas),
        fracture=np.concatenate(frac_ids),
        aperture=np.concatenate(apertures),
        permeability=np.concatenate(perms),
        adj=adj_ij,
        adj_length=adj_len,
        adj_dist=adj_dist,
        link=np.array(links, dtype=int).reshape(-1, 2),
        link_length=np.array(link_len, dtype=float),
        link_dist=np.array(link_dist, dtype=float).reshape(-1, 2),
        bnd_cell=np.array([t[0] for t in bnd], dtype=int),
        bnd_face=np.array([t[1] for t in bnd], dtype=int),
        bnd_length=np.array([t[2] for t in bnd], dtype=float),
        bnd_dist=np.array([t[3] for t in bnd], dtype=float),
        bnd_point=np.array([t[4] for t in bnd], dtype=float).reshape(-1, 3),
        cell_polygons=polys,
        traces=traces,
    )
