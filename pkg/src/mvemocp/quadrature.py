"""Edge and polygon quadrature.

Edges use Gauss-Legendre rules. Polygons are ear-clipped into positively
oriented triangles, each integrated with a collapsed (conical product)
Gauss rule: Gauss-Jacobi in the collapsed direction times Gauss-Legendre
in the other. All nodes are strictly interior and all weights positive.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi

MAX_EDGE_POINTS = 10
MAX_CELL_DEGREE = 10


class TriangulationError(ValueError):
    """Raised when ear clipping cannot proceed (polygon not simple)."""


@dataclass(frozen=True)
class QuadRule:
    points: np.ndarray
    weights: np.ndarray

    def integrate(self, f) -> float:
        vals = f(*self.points.T) if self.points.ndim == 2 else f(self.points)
        return float(np.dot(self.weights, np.broadcast_to(vals, self.weights.shape)))


@lru_cache(maxsize=None)
def gauss_legendre01(npoints: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    if not 1 <= npoints <= MAX_EDGE_POINTS:
        raise ValueError(f"npoints must be in 1..{MAX_EDGE_POINTS}, got {npoints}")
    x, w = np.polynomial.legendre.leggauss(npoints)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the triangle (0,0),(1,0),(0,1), exact up to total `degree`.

    Weights sum to 1/2.
    """
    if not 0 <= degree <= MAX_CELL_DEGREE:
        raise ValueError(f"degree must be in 0..{MAX_CELL_DEGREE}, got {degree}")
    k = max(1, (degree + 2) // 2)
    # s in [0,1] with weight (1 - s); Jacobi weight (1-x)^1 on [-1,1]
    xs, ws = roots_jacobi(k, 1.0, 0.0)
    s = 0.5 * (xs + 1.0)
    ws = ws / 4.0
    t, wt = gauss_legendre01(k)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt)
    pts = np.column_stack([S.ravel(), (T * (1.0 - S)).ravel()])
    return pts, W.ravel()


def edge_rule(a, b, npoints: int) -> QuadRule:
    """Gauss-Legendre rule on the segment from `a` to `b`.

    Exact for polynomials of degree <= 2*npoints - 1. Weights carry the
    segment length.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t, w = gauss_legendre01(npoints)
    length = float(np.linalg.norm(b - a)) if a.ndim else abs(float(b - a))
    if a.ndim == 0:
        return QuadRule(a + (b - a) * t, w * length)
    return QuadRule(a + np.outer(t, b - a), w * length)


def edge_points(starts: np.ndarray, ends: np.ndarray, npoints: int):
    """Batched edge rule.

    Returns points of shape (n_edges, npoints, 2) and weights of shape
    (n_edges, npoints) that include the edge length.
    """
    t, w = gauss_legendre01(npoints)
    d = ends - starts
    pts = starts[:, None, :] + t[None, :, None] * d[:, None, :]
    lengths = np.hypot(d[:, 0], d[:, 1])
    return pts, lengths[:, None] * w[None, :]


def signed_area(xy: np.ndarray) -> np.ndarray:
    """Shoelace area; accepts (m, 2) or batched (..., m, 2)."""
    x, y = xy[..., 0], xy[..., 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=-1) - np.roll(x, -1, axis=-1) * y, axis=-1)


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _in_triangle(p, a, b, c, eps) -> bool:
    return _cross(a, b, p) >= -eps and _cross(b, c, p) >= -eps and _cross(c, a, p) >= -eps


def ear_clip(xy: np.ndarray) -> np.ndarray:
    """Triangulate a simple CCW polygon by ear clipping.

    Returns an (m-2, 3) array of local vertex indices, every triangle
    positively oriented.
    """
    xy = np.asarray(xy, dtype=float)
    m = len(xy)
    if m < 3:
        raise TriangulationError(f"polygon with {m} vertices")
    if signed_area(xy) <= 0.0:
        raise TriangulationError("polygon is not counter-clockwise")
    scale = np.ptp(xy, axis=0).max()
    eps = 1e-14 * scale * scale
    idx = list(range(m))
    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = xy[i0], xy[i1], xy[i2]
            if _cross(a, b, c) <= eps:
                continue
            if any(
                _in_triangle(xy[j], a, b, c, eps)
                for j in idx
                if j not in (i0, i1, i2) and not np.array_equal(xy[j], a)
                and not np.array_equal(xy[j], b) and not np.array_equal(xy[j], c)
            ):
                continue
            tris.append((i0, i1, i2))
            del idx[k]
            break
        else:
            raise TriangulationError("no ear found; polygon is not simple")
        guard += 1
        if guard > m:
            raise TriangulationError("ear clipping did not terminate")
    a, b, c = (xy[i] for i in idx)
    if _cross(a, b, c) <= 0.0:
        raise TriangulationError("degenerate final triangle")
    tris.append(tuple(idx))
    return np.array(tris, dtype=np.int64)


def triangle_rule(tri_xy: np.ndarray, degree: int):
    """Map the reference rule onto triangles.

    `tri_xy` has shape (n_tri, 3, 2). Returns points (n_tri, q, 2) and
    weights (n_tri, q).
    """
    ref, w = reference_triangle_rule(degree)
    v0 = tri_xy[:, 0, :]
    e1 = tri_xy[:, 1, :] - v0
    e2 = tri_xy[:, 2, :] - v0
    pts = v0[:, None, :] + ref[None, :, 0:1] * e1[:, None, :] + ref[None, :, 1:2] * e2[:, None, :]
    jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    return pts, jac[:, None] * w[None, :]


def polygon_rule(xy, degree: int) -> QuadRule:
    """Quadrature on a simple CCW polygon, exact to total `degree`."""
    xy = np.asarray(xy, dtype=float)
    tris = ear_clip(xy)
    pts, wts = triangle_rule(xy[tris], degree)
    return QuadRule(pts.reshape(-1, 2), wts.ravel())


def integrate_cell(f, xy, degree: int = 4) -> float:
    """Integrate f(x, y) over the polygon `xy`."""
    rule = polygon_rule(xy, degree)
    return float(np.dot(rule.weights, f(rule.points[:, 0], rule.points[:, 1])))


def integrate_edge(f, a, b, npoints: int = 3) -> float:
    """Integrate f(x, y) along the segment a -> b."""
    rule = edge_rule(a, b, npoints)
    return float(np.dot(rule.weights, f(rule.points[:, 0], rule.points[:, 1])))
