"""Error norms and empirical orders of convergence."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .local import local_projector
from .mesh import PolygonalMesh
from .quadrature import edge_points
from .saddle import boundary_edge_quadrature


@dataclass(frozen=True)
class ErrorReport:
    h: float
    err_y: float
    err_z: float
    err_u: float
    err_flux_boundary: Optional[float] = None
    err_flux_domain: Optional[float] = None
    n: Optional[int] = None
    iterations: Optional[int] = None

    def __post_init__(self):
        for name in ("err_y", "err_z", "err_u", "err_flux_boundary", "err_flux_domain"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")


def l2_error_cellwise(w_h, exact, mesh: PolygonalMesh, degree: int = 4) -> float:
    """(sum_E int_E (exact - w_E)^2)^{1/2} by polygon quadrature."""
    pts, w, own = mesh.cell_quadrature(degree)
    diff = np.asarray(exact(pts[:, 0], pts[:, 1]), dtype=float) - np.asarray(w_h, dtype=float)[own]
    return float(np.sqrt(np.sum(w * diff * diff)))


def cell_averages(fn, mesh: PolygonalMesh, degree: int = 4) -> np.ndarray:
    pts, w, own = mesh.cell_quadrature(degree)
    vals = np.asarray(fn(pts[:, 0], pts[:, 1]), dtype=float)
    return np.bincount(own, weights=w * vals, minlength=mesh.n_cells) / mesh.areas


def l2_norm_cellwise(w_h, mesh: PolygonalMesh) -> float:
    return float(np.sqrt(np.sum(mesh.areas * np.asarray(w_h, dtype=float) ** 2)))


def boundary_flux_error(p_h, exact_flux, mesh: PolygonalMesh, npoints: int = 3) -> float:
    """||(p - p_h).n||_{0,Gamma} with p_h.n = d_e / h_e on each boundary edge."""
    pts, w, nrm = boundary_edge_quadrature(mesh, npoints)
    be = mesh.boundary_edges
    pn_h = mesh.boundary_signs * np.asarray(p_h)[be] / mesh.edge_lengths[be]
    vals = np.asarray(exact_flux(pts[..., 0], pts[..., 1]), dtype=float)
    pn = vals[..., 0] * nrm[:, None, 0] + vals[..., 1] * nrm[:, None, 1]
    return float(np.sqrt(np.sum(w * (pn - pn_h[:, None]) ** 2)))


def projected_flux(p_h, mesh: PolygonalMesh) -> np.ndarray:
    """Cell means of the discrete flux, shape (n_cells, 2)."""
    out = np.empty((mesh.n_cells, 2))
    p_h = np.asarray(p_h, dtype=float)
    for ids, loops in mesh.size_groups.values():
        P = local_projector(mesh.vertices[loops])
        edges = np.array([mesh.cell_edges[c] for c in ids])
        signs = np.array([mesh.cell_signs[c] for c in ids])
        out[ids] = np.einsum("kij,kj->ki", P, signs * p_h[edges])
    return out


def domain_flux_error(p_h, exact_flux, mesh: PolygonalMesh, degree: int = 4) -> float:
    """||p - Pi p_h||_{0,Omega} with Pi the cellwise mean."""
    mean = projected_flux(p_h, mesh)
    pts, w, own = mesh.cell_quadrature(degree)
    diff = np.asarray(exact_flux(pts[:, 0], pts[:, 1]), dtype=float) - mean[own]
    return float(np.sqrt(np.sum(w[:, None] * diff * diff)))


def edge_flux_oscillation(exact_flux, mesh: PolygonalMesh, npoints: int = 5) -> float:
    """||p.n - mean_e(p.n)||_{0,Gamma}: the boundary error of the flux interpolant."""
    be = mesh.boundary_edges
    v = mesh.vertices
    pts, w = edge_points(v[mesh.edges[be, 0]], v[mesh.edges[be, 1]], npoints)
    vals = np.asarray(exact_flux(pts[..., 0], pts[..., 1]), dtype=float)
    n = mesh.edge_normals[be]
    pn = vals[..., 0] * n[:, None, 0] + vals[..., 1] * n[:, None, 1]
    mean = np.sum(w * pn, axis=1) / mesh.edge_lengths[be]
    return float(np.sqrt(np.sum(w * (pn - mean[:, None]) ** 2)))


def eoc(errors: Sequence[float], hs: Sequence[float]) -> list:
    """order_i = log(e_i / e_{i+1}) / log(h_i / h_{i+1}); None where undefined."""
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need equally many errors and mesh sizes, at least two")
    if any(not h > 0.0 for h in hs) or any(not a > b for a, b in zip(hs, hs[1:])):
        raise ValueError("mesh sizes must be positive and strictly decreasing")
    out = []
    for (e0, e1), (h0, h1) in zip(zip(errors, errors[1:]), zip(hs, hs[1:])):
        if e0 is None or e1 is None or not (e0 > 0.0 and e1 > 0.0):
            out.append(None)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


# --------------------------------------------------------------------------
# reference-solution comparison on uniform square grids


class ReferenceGrid:
    """Cellwise constant fields on gen_square_grid(N), evaluated by O(1) lookup."""

    def __init__(self, N: int, **fields):
        self.N = N
        self.fields = {k: np.asarray(v, dtype=float) for k, v in fields.items()}
        for k, v in self.fields.items():
            if v.shape != (N * N,):
                raise ValueError(f"field {k!r} has shape {v.shape}, expected ({N * N},)")

    def locate(self, x, y) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if np.any((x < 0.0) | (x > 1.0) | (y < 0.0) | (y > 1.0)):
            raise ValueError("quadrature point outside the unit square")
        i = np.minimum((x * self.N).astype(np.int64), self.N - 1)
        j = np.minimum((y * self.N).astype(np.int64), self.N - 1)
        return j * self.N + i

    def evaluator(self, name: str):
        vals = self.fields[name]
        return lambda x, y: vals[self.locate(x, y)]


def reference_error(mesh: PolygonalMesh, y, z, u, reference: ReferenceGrid, degree: int = 10) -> ErrorReport:
    """L2 distance of cellwise (y, z, u) from the reference fields."""
    if math.sqrt(2.0) / reference.N > mesh.h * (1.0 + 1e-12):
        raise ValueError("reference grid must be at least as fine as the coarse mesh")
    return ErrorReport(
        h=mesh.h,
        err_y=l2_error_cellwise(y, reference.evaluator("y"), mesh, degree),
        err_z=l2_error_cellwise(z, reference.evaluator("z"), mesh, degree),
        err_u=l2_error_cellwise(u, reference.evaluator("u"), mesh, degree),
    )
