"""Lowest-order mixed virtual element on one polygon.

Local degrees of freedom are the outward edge fluxes ``d_i = int_{e_i} v.n``
on the CCW edges ``e_i = (x_i, x_{i+1})``. Every function here accepts a
single polygon ``xy`` of shape (m, 2) or a stack of polygons of shape
(k, m, 2) and broadcasts accordingly.

Since v.n is constant on each edge and div v is constant on the cell,
the cell mean of v follows from the dofs alone:

    int_E v = sum_i d_i (mid_i - c),

with ``mid_i`` the edge midpoints and ``c`` any fixed point (the centroid
is used). That is the projector onto constant vector fields.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import CellGeometry, GeometryError, PolygonalMesh, polygon_geometry
from .quadrature import edge_points, signed_area

STABILIZATIONS = ("scaled", "raw")


def _centroid(xy: np.ndarray) -> np.ndarray:
    nxt = np.roll(xy, -1, axis=-2)
    cr = xy[..., 0] * nxt[..., 1] - nxt[..., 0] * xy[..., 1]
    a = 0.5 * cr.sum(axis=-1)
    cx = np.sum((xy[..., 0] + nxt[..., 0]) * cr, axis=-1) / (6.0 * a)
    cy = np.sum((xy[..., 1] + nxt[..., 1]) * cr, axis=-1) / (6.0 * a)
    return np.stack([cx, cy], axis=-1)


def _area(xy: np.ndarray) -> np.ndarray:
    area = signed_area(xy)
    if np.any(~(area > 0.0)):
        raise GeometryError("degenerate or clockwise cell")
    return area


def edge_lengths(xy: np.ndarray) -> np.ndarray:
    t = np.roll(xy, -1, axis=-2) - xy
    return np.hypot(t[..., 0], t[..., 1])


def constant_dofs(xy: np.ndarray) -> np.ndarray:
    """Dofs of the unit constant fields: D[..., i, :] = h_i n_i."""
    t = np.roll(xy, -1, axis=-2) - xy
    return np.stack([t[..., 1], -t[..., 0]], axis=-1)


def flux_dofs(field, xy, npoints: int = 3) -> np.ndarray:
    """Outward edge fluxes of a vector field `field(x, y) -> (..., 2)`."""
    xy = np.asarray(xy, dtype=float)
    a = xy.reshape(-1, 2)
    b = np.roll(xy, -1, axis=-2).reshape(-1, 2)
    pts, w = edge_points(a, b, npoints)
    vals = np.asarray(field(pts[..., 0], pts[..., 1]), dtype=float)
    t = b - a
    n = np.column_stack([t[:, 1], -t[:, 0]]) / np.hypot(t[:, 0], t[:, 1])[:, None]
    vn = vals[..., 0] * n[:, None, 0] + vals[..., 1] * n[:, None, 1]
    return np.sum(vn * w, axis=-1).reshape(xy.shape[:-1])


def local_div(dofs, xy) -> np.ndarray:
    """Cellwise constant divergence: sum of outward fluxes over |E|."""
    return np.sum(dofs, axis=-1) / _area(np.asarray(xy, dtype=float))


def local_projector(xy) -> np.ndarray:
    """Matrix P of shape (..., 2, m) with  mean_E(v) = P @ dofs(v)."""
    xy = np.asarray(xy, dtype=float)
    area = _area(xy)
    mid = 0.5 * (xy + np.roll(xy, -1, axis=-2))
    rel = mid - _centroid(xy)[..., None, :]
    return np.swapaxes(rel, -1, -2) / area[..., None, None]


def local_flux_matrix(xy, Kint, stabilization: str = "scaled", weighted: bool = False) -> np.ndarray:
    """Local a_h in outward dofs.

    ``a = P^T Kint P + |E| (I - D P)^T W (I - D P)``, where ``Kint`` is the
    cell integral of A^{-1} and ``W`` weighs the dof-by-dof stabilization:
    ``diag(1/h_i^2)`` for "scaled" (edge-mean dofs) or the identity for
    "raw". `weighted` multiplies the stabilization by the mean eigenvalue
    of the cell average of A^{-1}.
    """
    if stabilization not in STABILIZATIONS:
        raise ValueError(f"stabilization must be one of {STABILIZATIONS}")
    xy = np.asarray(xy, dtype=float)
    Kint = np.asarray(Kint, dtype=float)
    Ksym = 0.5 * (Kint + np.swapaxes(Kint, -1, -2))
    if np.any(np.linalg.eigvalsh(Ksym) <= 0.0) or not np.allclose(Kint, Ksym, rtol=1e-12, atol=0.0):
        raise ValueError("integrated inverse coefficient is not symmetric positive definite")
    area = _area(xy)
    P = local_projector(xy)
    D = constant_dofs(xy)
    m = xy.shape[-2]
    Q = np.eye(m) - D @ P
    if stabilization == "scaled":
        wdiag = 1.0 / edge_lengths(xy) ** 2
    else:
        wdiag = np.ones(xy.shape[:-1])
    scale = area
    if weighted:
        scale = scale * 0.5 * np.trace(Ksym, axis1=-2, axis2=-1) / area
    S = np.swapaxes(Q, -1, -2) @ (wdiag[..., :, None] * Q)
    cons = np.swapaxes(P, -1, -2) @ Ksym @ P
    a = cons + scale[..., None, None] * S
    return 0.5 * (a + np.swapaxes(a, -1, -2))


def local_div_matrix(xy) -> np.ndarray:
    """b_local in outward dofs: int_E div v = sum_i d_i."""
    xy = np.asarray(xy, dtype=float)
    return np.ones(xy.shape[:-1])


def local_boundary_load(data, xy, local_edges, npoints: int = 3) -> np.ndarray:
    """Coefficients l_i = (1/h_i) int_{e_i} data ds on the given local edges.

    With outward dofs d, ``l @ d`` equals ``<data, v.n>`` over those edges,
    because v.n = d_i / h_i on edge i.
    """
    xy = np.asarray(xy, dtype=float)
    m = len(xy)
    idx = np.asarray(local_edges, dtype=int)
    a = xy[idx]
    b = xy[(idx + 1) % m]
    pts, w = edge_points(a, b, npoints)
    vals = np.asarray(data(pts[..., 0], pts[..., 1]), dtype=float)
    lengths = np.hypot(*(b - a).T)
    out = np.zeros(m)
    out[idx] = np.sum(vals * w, axis=-1) / lengths
    return out


@dataclass(frozen=True)
class LocalElement:
    """Local blocks of one cell, in outward dof orientation.

    ``signs`` converts to global edge orientation: global dof = signs * local dof.
    """

    geometry: CellGeometry
    projector: np.ndarray
    a_local: np.ndarray
    b_local: np.ndarray
    signs: np.ndarray
    edges: np.ndarray

    @property
    def m(self) -> int:
        return len(self.signs)

    @classmethod
    def build(cls, mesh: PolygonalMesh, c: int, Kint=None, stabilization: str = "scaled", weighted: bool = False):
        xy = mesh.cell_xy(c)
        geo = polygon_geometry(xy)
        if Kint is None:
            Kint = geo.area * np.eye(2)
        return cls(
            geometry=geo,
            projector=local_projector(xy),
            a_local=local_flux_matrix(xy, Kint, stabilization, weighted),
            b_local=local_div_matrix(xy),
            signs=mesh.cell_signs[c].copy(),
            edges=mesh.cell_edges[c].copy(),
        )

    def a_global(self) -> np.ndarray:
        return self.signs[:, None] * self.a_local * self.signs[None, :]

    def b_global(self) -> np.ndarray:
        return self.signs * self.b_local
