"""Global mixed system  [A B^T; B 0] [p; y] = [G; -F]  and its solves.

Unknowns are one flux per edge (global orientation) followed by one value
per cell. State and adjoint share the block matrix, so it is factored once
per mesh and reused for every right-hand side.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .local import local_flux_matrix
from .mesh import PolygonalMesh
from .problems import ProblemData
from .quadrature import edge_points

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
SINGULAR_DEGREE = 8


class LinearSolveError(RuntimeError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class LinearSolveReport:
    residual: float
    method: str = "direct"
    refinements: int = 0


def cell_inverse_coefficient(mesh: PolygonalMesh, problem: ProblemData, degree: int = 4) -> np.ndarray:
    """Per-cell integral of A^{-1}, shape (n_cells, 2, 2)."""
    if problem.A_const is not None:
        Ainv = np.linalg.inv(np.asarray(problem.A_const, dtype=float))
        return mesh.areas[:, None, None] * Ainv
    pts, w, own = mesh.cell_quadrature(degree)
    A = problem.coefficient(pts[:, 0], pts[:, 1])
    det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
    inv = np.empty_like(A)
    inv[:, 0, 0] = A[:, 1, 1] / det
    inv[:, 1, 1] = A[:, 0, 0] / det
    inv[:, 0, 1] = inv[:, 1, 0] = -A[:, 0, 1] / det
    out = np.zeros((mesh.n_cells, 2, 2))
    np.add.at(out, own, w[:, None, None] * inv)
    return out


def cell_integrals(mesh: PolygonalMesh, fn, degree: int = 4, singular_point=None) -> np.ndarray:
    """int_E fn for every cell; cells touching `singular_point` use a higher degree."""
    elevated = None
    if singular_point is not None:
        elevated = {c: max(degree, SINGULAR_DEGREE) for c in mesh.cells_touching(singular_point)}
    pts, w, own = mesh.cell_quadrature(degree, elevated)
    vals = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
    return np.bincount(own, weights=w * vals, minlength=mesh.n_cells)


def boundary_edge_quadrature(mesh: PolygonalMesh, npoints: int = 3):
    """Points (nb, q, 2), weights (nb, q) and outward normals (nb, 2) on boundary edges."""
    be = mesh.boundary_edges
    v = mesh.vertices
    pts, w = edge_points(v[mesh.edges[be, 0]], v[mesh.edges[be, 1]], npoints)
    normals = mesh.boundary_signs[:, None] * mesh.edge_normals[be]
    return pts, w, normals


def boundary_load(mesh: PolygonalMesh, data, npoints: int = 3, with_normal: bool = False) -> np.ndarray:
    """Global vector l with l @ dofs = <data, v.n>_Gamma."""
    pts, w, nrm = boundary_edge_quadrature(mesh, npoints)
    if with_normal:
        vals = data(pts[..., 0], pts[..., 1], nrm[:, None, 0], nrm[:, None, 1])
    else:
        vals = data(pts[..., 0], pts[..., 1])
    be = mesh.boundary_edges
    out = np.zeros(mesh.n_edges)
    out[be] = mesh.boundary_signs * np.sum(np.asarray(vals, dtype=float) * w, axis=-1) / mesh.edge_lengths[be]
    return out


def interpolate_flux(field, mesh: PolygonalMesh, npoints: int = 3) -> np.ndarray:
    """Global edge dofs  int_e v . n_e  of a vector field."""
    v = mesh.vertices
    pts, w = edge_points(v[mesh.edges[:, 0]], v[mesh.edges[:, 1]], npoints)
    vals = np.asarray(field(pts[..., 0], pts[..., 1]), dtype=float)
    n = mesh.edge_normals
    vn = vals[..., 0] * n[:, None, 0] + vals[..., 1] * n[:, None, 1]
    return np.sum(vn * w, axis=-1)


def assemble_blocks(mesh: PolygonalMesh, Kint: np.ndarray, stabilization: str = "scaled",
                    weighted: bool = False):
    """Sparse A (edges x edges) and B (cells x edges)."""
    rows, cols, vals = [], [], []
    brow, bcol, bval = [], [], []
    for ids, loops in mesh.size_groups.values():
        xy = mesh.vertices[loops]
        a = local_flux_matrix(xy, Kint[ids], stabilization, weighted)
        edges = np.array([mesh.cell_edges[c] for c in ids])
        signs = np.array([mesh.cell_signs[c] for c in ids], dtype=float)
        a = signs[:, :, None] * a * signs[:, None, :]
        m = loops.shape[1]
        rows.append(np.repeat(edges, m, axis=1).ravel())
        cols.append(np.tile(edges, (1, m)).ravel())
        vals.append(a.ravel())
        brow.append(np.repeat(ids, m))
        bcol.append(edges.ravel())
        bval.append(signs.ravel())
    ne, nc = mesh.n_edges, mesh.n_cells
    A = sps.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ne, ne)).tocsr()
    B = sps.coo_matrix((np.concatenate(bval), (np.concatenate(brow), np.concatenate(bcol))), shape=(nc, ne)).tocsr()
    A.sum_duplicates()
    B.sum_duplicates()
    return A, B


def linear_solve(K, rhs, lu=None, tol: float = RESIDUAL_TOL, max_refine: int = 3):
    """Solve K x = rhs by sparse LU with iterative refinement.

    Returns (x, LinearSolveReport). Raises LinearSolveError when the
    relative residual stays above `tol`.
    """
    rhs = np.asarray(rhs, dtype=float)
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros_like(rhs), LinearSolveReport(0.0)
    if lu is None:
        try:
            lu = spla.splu(sps.csc_matrix(K))
        except RuntimeError as exc:
            raise LinearSolveError(f"factorization failed: {exc}") from exc
    x = lu.solve(rhs)
    res = np.linalg.norm(rhs - K @ x) / bnorm
    k = 0
    while res > tol * 1e-2 and k < max_refine and np.isfinite(res):
        x = x + lu.solve(rhs - K @ x)
        res = np.linalg.norm(rhs - K @ x) / bnorm
        k += 1
    report = LinearSolveReport(float(res), "direct", k)
    if not res <= tol:
        raise LinearSolveError(f"relative residual {res:.3e} above tolerance {tol:.1e}", report)
    return x, report


@dataclass(eq=False)
class SaddleSystem:
    """Assembled blocks, loads and a cached factorization for one mesh/problem."""

    mesh: PolygonalMesh
    problem: ProblemData
    A: sps.csr_matrix
    B: sps.csr_matrix
    boundary_mass: sps.csr_matrix
    load_g: np.ndarray
    load_yd: np.ndarray
    load_f: np.ndarray
    edge_points: int = 3
    reports: list = field(default_factory=list)
    _lu: object = field(default=None, repr=False)

    @property
    def n_flux(self) -> int:
        return self.A.shape[0]

    @property
    def n_cells(self) -> int:
        return self.B.shape[0]

    @property
    def matrix(self) -> sps.csc_matrix:
        return sps.bmat([[self.A, self.B.T], [self.B, None]], format="csc")

    def factorization(self):
        if self._lu is None:
            K = self.matrix
            try:
                self._lu = spla.splu(K)
            except RuntimeError as exc:
                raise LinearSolveError(f"saddle-point matrix is singular: {exc}") from exc
            self._K = K
        return self._lu

    def solve(self, rhs):
        lu = self.factorization()
        x, report = linear_solve(self._K, rhs, lu)
        self.reports.append(report)
        return x[: self.n_flux], x[self.n_flux:]

    def solve_state(self, u) -> tuple[np.ndarray, np.ndarray]:
        """(p_h, y_h) for the cellwise control u."""
        u = np.broadcast_to(np.asarray(u, dtype=float), (self.n_cells,))
        F = self.load_f + self.mesh.areas * u
        return self.solve(np.concatenate([self.load_g, -F]))

    def solve_adjoint(self, p) -> tuple[np.ndarray, np.ndarray]:
        """(r_h, z_h) for the boundary mismatch y_d - p_h.n."""
        rhs = self.load_yd - self.boundary_mass @ p
        return self.solve(np.concatenate([rhs, np.zeros(self.n_cells)]))

    def boundary_norm2(self, dofs) -> float:
        """|v.n|^2 on Gamma for the flux with edge dofs `dofs`."""
        return float(dofs @ (self.boundary_mass @ dofs))

    def dump(self, path) -> None:
        """Write the block matrix as zero-based 'row col value' lines."""
        K = self.matrix
        K.eliminate_zeros()
        K = K.tocoo()
        order = np.lexsort((K.col, K.row))
        with Path(path).open("w") as fh:
            for i, j, v in zip(K.row[order], K.col[order], K.data[order]):
                fh.write(f"{i} {j} {v:.17g}\n")


def assemble(mesh: PolygonalMesh, problem: ProblemData, cell_degree: int = 4, edge_points: int = 3,
             stabilization: str = "scaled", weighted: bool = False) -> SaddleSystem:
    Kint = cell_inverse_coefficient(mesh, problem, cell_degree)
    A, B = assemble_blocks(mesh, Kint, stabilization, weighted)
    be = mesh.boundary_edges
    diag = np.zeros(mesh.n_edges)
    diag[be] = 1.0 / mesh.edge_lengths[be]
    M = sps.diags(diag, format="csr")
    return SaddleSystem(
        mesh=mesh, problem=problem, A=A, B=B, boundary_mass=M,
        load_g=boundary_load(mesh, problem.g, edge_points),
        load_yd=boundary_load(mesh, problem.y_d, edge_points, with_normal=True),
        load_f=cell_integrals(mesh, problem.f, cell_degree, problem.singular_point),
        edge_points=edge_points,
    )


def solve_state(sys: SaddleSystem, u):
    return sys.solve_state(u)


def solve_adjoint(sys: SaddleSystem, p):
    return sys.solve_adjoint(p)


def inf_sup_constant(sys: SaddleSystem) -> float:
    """Smallest singular value of M_W^{-1/2} B A^{-1/2} (dense; small meshes only).

    This is the discrete inf-sup constant of b over V_h x W_h with the a_h
    norm on fluxes and the L2 norm on cellwise constants.
    """
    A = sys.A.toarray()
    B = sys.B.toarray()
    w, V = np.linalg.eigh(A)
    Ainv_half = V @ np.diag(w ** -0.5) @ V.T
    scaled = (B / np.sqrt(sys.mesh.areas)[:, None]) @ Ainv_half
    return float(np.linalg.svd(scaled, compute_uv=False).min())
