"""Steady, fully saturated Darcy flow on a DFN mesh (two-point flux).

Flux between cells i and j is ``T_ij * (phi_i - phi_j)`` with the
potential ``phi = p - rho * g * depth``. Domain coordinates have z pointing
up, so depth = -z and ``phi = p + rho * g * z``. Conductances are
volumetric (m3/s per Pa); reported boundary fluxes are mass rates (kg/s).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import LinearOperator, cg

from .dfn import FluidProperties
from .mesh import FACE_NAMES, DFNMesh

log = logging.getLogger(__name__)


class SingularSystem(RuntimeError):
    pass


class NoConvergence(RuntimeError):
    def __init__(self, msg, iterations=None, residual=None):
        super().__init__(msg)
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class BoundaryConditions:
    """Dirichlet pressures (Pa) keyed by face name; other faces are no-flow."""

    dirichlet: dict

    def __post_init__(self):
        if not self.dirichlet:
            raise ValueError("at least one Dirichlet face is required")
        for k in self.dirichlet:
            if k not in FACE_NAMES:
                raise ValueError(f"unknown face {k!r}; expected one of {FACE_NAMES}")

    @classmethod
    def left_right(cls, p_left: float = 30e6, p_right: float = 10e6) -> "BoundaryConditions":
        return cls({"x_min": float(p_left), "x_max": float(p_right)})


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    # Conductances kept for flux evaluation after the solve.
    pair: np.ndarray
    pair_T: np.ndarray
    bnd_cell: np.ndarray
    bnd_T: np.ndarray
    bnd_pressure: np.ndarray
    bnd_face: np.ndarray
    bnd_z: np.ndarray
    pinned: np.ndarray
    pinned_value: float
    z: np.ndarray
    fluid: FluidProperties


@dataclass
class FlowSolution:
    pressure: np.ndarray
    boundary_flux: dict        # face name -> kg/s, positive into the domain
    iterations: int
    residual: float
    pinned_cells: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    inflow: float = 0.0
    outflow: float = 0.0


def harmonic_mean(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    return 2.0 * x * y / (x + y)


def assemble(mesh: DFNMesh, fluid: FluidProperties, bcs: BoundaryConditions) -> LinearSystem:
    """Assemble the SPD system ``A p = rhs`` for cell pressures."""
    n = mesh.n_cells
    kb = mesh.permeability * mesh.aperture
    mu = fluid.viscosity
    rg = fluid.density * fluid.gravity
    z = mesh.center[:, 2]

    T_adj = harmonic_mean(kb[mesh.adj[:, 0]], kb[mesh.adj[:, 1]]) * mesh.adj_length / (mu * mesh.adj_dist)
    li, lj = mesh.link[:, 0], mesh.link[:, 1]
    T_link = mesh.link_length / (mu * (mesh.link_dist[:, 0] / kb[li] + mesh.link_dist[:, 1] / kb[lj]))
    pair = np.vstack([mesh.adj, mesh.link])
    T = np.concatenate([T_adj, T_link])

    names = np.array(FACE_NAMES)[mesh.bnd_face] if len(mesh.bnd_face) else np.empty(0, str)
    on = np.array([nm in bcs.dirichlet for nm in names], dtype=bool)
    b_cell = mesh.bnd_cell[on]
    b_T = kb[b_cell] * mesh.bnd_length[on] / (mu * mesh.bnd_dist[on])
    b_p = np.array([bcs.dirichlet[nm] for nm in names[on]], dtype=float)
    b_z = mesh.bnd_point[on, 2] if on.any() else np.empty(0)

    i, j = pair[:, 0], pair[:, 1]
    rows = np.concatenate([i, j, i, j, b_cell])
    cols = np.concatenate([i, j, j, i, b_cell])
    vals = np.concatenate([T, T, -T, -T, b_T])
    A = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()

    rhs = np.zeros(n)
    # gravity: sum_j T (p_i - p_j) = -sum_j T rho g (z_i - z_j)
    g_flux = T * rg * (z[i] - z[j])
    np.add.at(rhs, i, -g_flux)
    np.add.at(rhs, j, g_flux)
    np.add.at(rhs, b_cell, b_T * (b_p - rg * (z[b_cell] - b_z)))

    # components without Dirichlet contact are pinned to the mean BC pressure
    ncomp, labels = connected_components(A, directed=False)
    touched = np.zeros(ncomp, dtype=bool)
    touched[labels[b_cell]] = True
    pinned = np.flatnonzero(~touched[labels])
    pinned_value = float(np.mean(list(bcs.dirichlet.values())))
    if len(b_cell) == 0:
        raise SingularSystem("no Dirichlet face touches the network")
    if len(pinned):
        log.warning("%d cells in %d components have no Dirichlet contact; pinned to %.6g Pa",
                    len(pinned), int((~touched).sum()), pinned_value)
        keep = np.ones(n)
        keep[pinned] = 0.0
        D = sp.diags(keep)
        A = (D @ A @ D + sp.diags(1.0 - keep)).tocsr()
        rhs = rhs * keep + (1.0 - keep) * pinned_value
    return LinearSystem(A, rhs, pair, T, b_cell, b_T, b_p, mesh.bnd_face[on], b_z,
                        pinned, pinned_value, z, fluid)


def pcg(A, b, tol=1e-10, max_iters=None, x0=None):
    """Jacobi-preconditioned conjugate gradients; returns (x, iters, relres)."""
    n = A.shape[0]
    max_iters = max_iters or 10 * n
    dinv = 1.0 / A.diagonal()
    M = LinearOperator((n, n), matvec=lambda r: dinv * r, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    if x0 is None:
        x0 = b * dinv
    x, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=max_iters, M=M, callback=cb)
    bn = np.linalg.norm(b)
    relres = float(np.linalg.norm(b - A @ x) / (bn if bn > 0 else 1.0))
    if info != 0 and relres > tol:
        raise NoConvergence(f"CG stopped after {count[0]} iterations with relative residual {relres:.3e}",
                            count[0], relres)
    return x, count[0], relres


def solve_steady(mesh: DFNMesh, fluid: FluidProperties, bcs: BoundaryConditions,
                 tol: float = 1e-10, max_iters: int | None = None) -> FlowSolution:
    system = assemble(mesh, fluid, bcs)
    # precondition the scale: pressures are O(1e7) Pa
    scale = max(abs(v) for v in bcs.dirichlet.values()) or 1.0
    x, iters, relres = pcg(system.matrix, system.rhs / scale, tol=tol, max_iters=max_iters)
    p = x * scale
    return _finish(system, p, iters, relres)


def _finish(system: LinearSystem, p: np.ndarray, iters: int, relres: float) -> FlowSolution:
    rg = system.fluid.density * system.fluid.gravity
    rho = system.fluid.density
    phi_cell = p[system.bnd_cell] + rg * system.z[system.bnd_cell]
    phi_bnd = system.bnd_pressure + rg * system.bnd_z
    q = rho * system.bnd_T * (phi_bnd - phi_cell)       # kg/s into the domain
    flux = {}
    for fid, qq in zip(system.bnd_face, q):
        name = FACE_NAMES[fid]
        flux[name] = flux.get(name, 0.0) + float(qq)
    if len(system.pinned):
        q = q[~np.isin(system.bnd_cell, system.pinned)]
    inflow = float(q[q > 0].sum())
    outflow = float(q[q < 0].sum())
    return FlowSolution(p, flux, iters, relres, system.pinned, inflow, outflow)


def pair_fluxes(system: LinearSystem, p: np.ndarray) -> np.ndarray:
    """Mass flux i -> j for every stored pair (kg/s)."""
    rg = system.fluid.density * system.fluid.gravity
    phi = p + rg * system.z
    i, j = system.pair[:, 0], system.pair[:, 1]
    return system.fluid.density * system.pair_T * (phi[i] - phi[j])


def extract_observation(solution: FlowSolution, mesh: DFNMesh, point) -> float:
    """Pressure of the cell whose centre is nearest ``point`` (lowest index on ties)."""
    d2 = ((mesh.center - np.asarray(point, float)) ** 2).sum(axis=1)
    return float(solution.pressure[int(np.argmin(d2))])


def mass_balance(solution: FlowSolution) -> float:
    """Relative imbalance between boundary inflow and outflow."""
    big = max(abs(solution.inflow), abs(solution.outflow))
    if big == 0:
        return 0.0
    return abs(solution.inflow + solution.outflow) / big
