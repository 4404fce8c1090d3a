"""Polygonal meshes of the unit square.

A mesh stores vertices, counter-clockwise cell loops and an edge table.
Each edge is globally oriented from its lower to its higher vertex index;
its global unit normal is the tangent rotated clockwise, which points out
of the cell lying to the left of the edge. A cell recovers its outward
normal on local edge ``i`` through the sign ``cell_signs[c][i]``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .quadrature import TriangulationError, ear_clip, signed_area, triangle_rule


class MeshError(ValueError):
    """Invalid mesh input: bad indices, inconsistent topology."""


class GeometryError(MeshError):
    """Degenerate, clockwise or self-intersecting cell."""


@dataclass(frozen=True)
class CellGeometry:
    area: float
    centroid: np.ndarray
    diameter: float
    edge_lengths: np.ndarray
    normals: np.ndarray
    midpoints: np.ndarray


def polygon_geometry(xy) -> CellGeometry:
    """Geometry of a single CCW polygon given by its vertex coordinates."""
    xy = np.asarray(xy, dtype=float)
    area = float(signed_area(xy))
    if not area > 0.0:
        raise GeometryError(f"nonpositive cell area {area:.3e}")
    nxt = np.roll(xy, -1, axis=0)
    cr = xy[:, 0] * nxt[:, 1] - nxt[:, 0] * xy[:, 1]
    centroid = np.array([np.sum((xy[:, 0] + nxt[:, 0]) * cr),
                         np.sum((xy[:, 1] + nxt[:, 1]) * cr)]) / (6.0 * area)
    t = nxt - xy
    lengths = np.hypot(t[:, 0], t[:, 1])
    if np.any(lengths == 0.0):
        raise GeometryError("repeated consecutive vertex")
    normals = np.column_stack([t[:, 1], -t[:, 0]]) / lengths[:, None]
    diff = xy[:, None, :] - xy[None, :, :]
    diameter = float(np.sqrt(np.max(np.sum(diff * diff, axis=-1))))
    return CellGeometry(area, centroid, diameter, lengths, normals, 0.5 * (xy + nxt))


def _segments_cross(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def is_simple(xy) -> bool:
    """True when no two non-adjacent edges of the polygon meet."""
    xy = np.asarray(xy, dtype=float)
    m = len(xy)
    if m < 3 or len({tuple(p) for p in xy}) != m:
        return False
    for i in range(m):
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_cross(xy[i], xy[(i + 1) % m], xy[j], xy[(j + 1) % m]):
                return False
    return True


def is_convex(xy) -> bool:
    xy = np.asarray(xy, dtype=float)
    a = np.roll(xy, 1, axis=0)
    c = np.roll(xy, -1, axis=0)
    cr = (xy[:, 0] - a[:, 0]) * (c[:, 1] - xy[:, 1]) - (xy[:, 1] - a[:, 1]) * (c[:, 0] - xy[:, 0])
    return bool(np.all(cr >= 0.0))


@dataclass(frozen=True, eq=False)
class PolygonalMesh:
    """Immutable polygonal mesh.

    Attributes
    ----------
    vertices : (V, 2) float array
    cells : tuple of int arrays, CCW vertex loops
    edges : (E, 4) int array of (v0, v1, left_cell, right_cell); -1 marks
        the missing side of a boundary edge. ``v0 < v1`` always.
    boundary_edges : int array of edge ids with a single incident cell
    cell_edges, cell_signs : per cell, the global edge of local edge i
        (from loop[i] to loop[i+1]) and +1/-1 when the global normal is
        outward/inward for that cell.
    """

    vertices: np.ndarray
    cells: tuple
    edges: np.ndarray
    boundary_edges: np.ndarray
    cell_edges: tuple
    cell_signs: tuple
    family: str = field(default="custom", compare=False)

    @classmethod
    def from_cells(cls, vertices, cells, family: str = "custom", validate: bool = True):
        verts = np.ascontiguousarray(vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2:
            raise MeshError("vertices must be an (N, 2) array")
        nv = len(verts)
        loops = []
        for c, loop in enumerate(cells):
            arr = np.asarray(loop, dtype=np.int64)
            if arr.ndim != 1 or len(arr) < 3:
                raise MeshError(f"cell {c}: needs at least 3 vertices")
            if arr.min() < 0 or arr.max() >= nv:
                raise MeshError(f"cell {c}: vertex index out of range [0, {nv})")
            if len(np.unique(arr)) != len(arr):
                raise MeshError(f"cell {c}: repeated vertex index")
            loops.append(arr)
        if validate:
            for c, arr in enumerate(loops):
                xy = verts[arr]
                area = signed_area(xy)
                if not area > 0.0:
                    raise GeometryError(f"cell {c}: nonpositive signed area {area:.3e} (not CCW or degenerate)")
                if not is_simple(xy):
                    raise GeometryError(f"cell {c}: polygon is self-intersecting")

        sizes = np.array([len(a) for a in loops])
        starts = np.concatenate(loops)
        ends = np.concatenate([np.roll(a, -1) for a in loops])
        owner = np.repeat(np.arange(len(loops)), sizes)
        lo = np.minimum(starts, ends)
        hi = np.maximum(starts, ends)
        keys = lo * nv + hi
        uniq, inverse, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            bad = int(uniq[np.argmax(counts > 2)])
            raise MeshError(f"edge ({bad // nv}, {bad % nv}) shared by more than two cells")
        forward = starts < ends
        ne = len(uniq)
        left = np.full(ne, -1, dtype=np.int64)
        right = np.full(ne, -1, dtype=np.int64)
        for e, own, fw in zip(inverse, owner, forward):
            slot = left if fw else right
            if slot[e] != -1:
                raise MeshError(f"edge {e}: two cells traverse it in the same direction (inconsistent orientation)")
            slot[e] = own
        edges = np.column_stack([uniq // nv, uniq % nv, left, right]).astype(np.int64)
        boundary = np.flatnonzero((left == -1) | (right == -1))
        signs = np.where(forward, 1, -1)
        splits = np.cumsum(sizes)[:-1]
        cell_edges = tuple(np.split(inverse.astype(np.int64), splits))
        cell_signs = tuple(np.split(signs.astype(np.int64), splits))
        used = np.zeros(nv, dtype=bool)
        used[starts] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.argmin(used))} is not used by any cell")
        return cls(verts, tuple(loops), edges, boundary, cell_edges, cell_signs, family)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def cell_xy(self, c: int) -> np.ndarray:
        return self.vertices[self.cells[c]]

    @cached_property
    def size_groups(self) -> dict:
        """Cells grouped by vertex count: m -> (cell ids, (k, m) loops)."""
        sizes = np.array([len(loop) for loop in self.cells])
        groups = {}
        for m in np.unique(sizes):
            ids = np.flatnonzero(sizes == m)
            groups[int(m)] = (ids, np.array([self.cells[c] for c in ids]))
        return groups

    def _batched(self, fn, width=None) -> np.ndarray:
        out = np.empty((self.n_cells,) if width is None else (self.n_cells, width))
        for ids, loops in self.size_groups.values():
            out[ids] = fn(self.vertices[loops])
        return out

    @cached_property
    def areas(self) -> np.ndarray:
        return self._batched(signed_area)

    @cached_property
    def centroids(self) -> np.ndarray:
        def centroid(xy):
            nxt = np.roll(xy, -1, axis=1)
            cr = xy[..., 0] * nxt[..., 1] - nxt[..., 0] * xy[..., 1]
            a = 0.5 * cr.sum(axis=1)
            cx = np.sum((xy[..., 0] + nxt[..., 0]) * cr, axis=1) / (6.0 * a)
            cy = np.sum((xy[..., 1] + nxt[..., 1]) * cr, axis=1) / (6.0 * a)
            return np.column_stack([cx, cy])
        return self._batched(centroid, 2)

    @cached_property
    def diameters(self) -> np.ndarray:
        def diam(xy):
            d = xy[:, :, None, :] - xy[:, None, :, :]
            return np.sqrt(np.max(np.sum(d * d, axis=-1), axis=(1, 2)))
        return self._batched(diam)

    @property
    def h(self) -> float:
        """Mesh size: the largest cell diameter."""
        return float(self.diameters.max())

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(t[:, 0], t[:, 1])

    @cached_property
    def edge_normals(self) -> np.ndarray:
        """Global unit normals (tangent rotated clockwise)."""
        t = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.column_stack([t[:, 1], -t[:, 0]]) / self.edge_lengths[:, None]

    @cached_property
    def boundary_signs(self) -> np.ndarray:
        """+1 where the global normal of a boundary edge points out of Omega."""
        left = self.edges[self.boundary_edges, 2]
        return np.where(left >= 0, 1, -1)

    def cell_geometry(self, c: int) -> CellGeometry:
        if not 0 <= c < self.n_cells:
            raise IndexError(f"cell id {c} out of range")
        return polygon_geometry(self.cell_xy(c))

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_cells

    def min_edge_ratio(self) -> float:
        """min over cells of shortest edge / cell diameter."""
        ratios = []
        for c in range(self.n_cells):
            ratios.append(self.edge_lengths[self.cell_edges[c]].min() / self.diameters[c])
        return float(min(ratios))

    @cached_property
    def triangulation(self) -> tuple[np.ndarray, np.ndarray]:
        """Ear-clipped triangles as global vertex triples and owning cells."""
        tris, owner = [], []
        for c, loop in enumerate(self.cells):
            if len(loop) == 3:
                local = np.array([[0, 1, 2]])
            else:
                try:
                    local = ear_clip(self.vertices[loop])
                except TriangulationError as exc:
                    raise GeometryError(f"cell {c}: {exc}") from exc
            tris.append(loop[local])
            owner.append(np.full(len(local), c))
        return np.concatenate(tris), np.concatenate(owner)

    def cell_quadrature(self, degree: int, elevated: dict | None = None):
        """Quadrature over every cell at once.

        Returns (points (Q, 2), weights (Q,), owner (Q,)), grouped by cell
        in increasing cell order. `elevated` maps cell id -> degree to use
        instead of `degree` on that cell.
        """
        tris, owner = self.triangulation
        degs = np.full(self.n_cells, degree)
        if elevated:
            for c, d in elevated.items():
                degs[c] = d
        pts_all, w_all, own_all = [], [], []
        tdeg = degs[owner]
        for d in np.unique(tdeg):
            sel = np.flatnonzero(tdeg == d)
            pts, w = triangle_rule(self.vertices[tris[sel]], int(d))
            pts_all.append(pts.reshape(-1, 2))
            w_all.append(w.ravel())
            own_all.append(np.repeat(owner[sel], w.shape[1]))
        pts = np.concatenate(pts_all)
        w = np.concatenate(w_all)
        own = np.concatenate(own_all)
        order = np.argsort(own, kind="stable")
        return pts[order], w[order], own[order]

    def cells_touching(self, point, tol: float = 1e-14) -> list[int]:
        """Cells having `point` as a vertex."""
        d = np.hypot(*(self.vertices - np.asarray(point, dtype=float)).T)
        hits = set(np.flatnonzero(d <= tol).tolist())
        return [c for c, loop in enumerate(self.cells) if hits.intersection(loop.tolist())]

    def same_as(self, other: "PolygonalMesh") -> bool:
        return (np.array_equal(self.vertices, other.vertices)
                and len(self.cells) == len(other.cells)
                and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells)))


# --------------------------------------------------------------------------
# generators


def _grid_vertices(n: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="xy")
    return np.column_stack([X.ravel(), Y.ravel()])


def _grid_cells(n: int) -> list:
    cells = []
    for j in range(n):
        for i in range(n):
            v = j * (n + 1) + i
            cells.append([v, v + 1, v + n + 2, v + n + 1])
    return cells


def gen_square_grid(n: int) -> PolygonalMesh:
    """n x n uniform squares; cell (i, j) has index j*n + i."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return PolygonalMesh.from_cells(_grid_vertices(n), _grid_cells(n), family="square", validate=False)


def gen_perturbed_grid(n: int, seed: int = 0, delta: float = 0.2) -> PolygonalMesh:
    """Square grid with interior vertices moved by up to delta/n per coordinate."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= delta <= 0.4:
        raise ValueError("delta must lie in [0, 0.4]")
    verts = _grid_vertices(n)
    rng = np.random.default_rng(seed)
    shift = rng.uniform(-delta / n, delta / n, size=verts.shape)
    interior = np.all((verts > 0.0) & (verts < 1.0), axis=1)
    verts[interior] += shift[interior]
    cells = _grid_cells(n)
    for c, loop in enumerate(cells):
        xy = verts[loop]
        if not signed_area(xy) > 0.0 or not is_simple(xy):
            raise GeometryError(f"cell {c}: perturbation (seed={seed}, delta={delta}) produced an invalid cell")
    return PolygonalMesh.from_cells(verts, cells, family="random", validate=False)


def gen_nonconvex_grid(n: int) -> PolygonalMesh:
    """Each grid square split into two congruent hexagons by a zigzag cut.

    The cut runs bottom midpoint -> (3/4, 1/3) -> (1/4, 2/3) -> top
    midpoint in local square coordinates. The two interior points are
    mirror images through the square center, so the halves are congruent
    under a half turn and each has exactly one reflex vertex.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h = 1.0 / n
    nc = (n + 1) * (n + 1)
    corners = _grid_vertices(n)
    mids = []  # midpoints of horizontal edges, row-major over (j in 0..n, i in 0..n-1)
    for j in range(n + 1):
        for i in range(n):
            mids.append(((i + 0.5) * h, j * h))
    inner = []
    for j in range(n):
        for i in range(n):
            inner.append(((i + 0.75) * h, (j + 1.0 / 3.0) * h))
            inner.append(((i + 0.25) * h, (j + 2.0 / 3.0) * h))
    verts = np.vstack([corners, np.array(mids), np.array(inner)])
    nm = (n + 1) * n
    cells = []
    for j in range(n):
        for i in range(n):
            sw = j * (n + 1) + i
            se, nw, ne = sw + 1, sw + n + 1, sw + n + 2
            bot = nc + j * n + i
            top = nc + (j + 1) * n + i
            p1 = nc + nm + 2 * (j * n + i)
            p2 = p1 + 1
            cells.append([sw, bot, p1, p2, top, nw])
            cells.append([bot, se, ne, top, p2, p1])
    return PolygonalMesh.from_cells(verts, cells, family="nonconvex", validate=False)


def generate(family: str, n: int, seed: int = 0, delta: float = 0.2) -> PolygonalMesh:
    if family == "square":
        return gen_square_grid(n)
    if family == "random":
        return gen_perturbed_grid(n, seed=seed, delta=delta)
    if family == "nonconvex":
        return gen_nonconvex_grid(n)
    raise ValueError(f"unknown mesh family {family!r}")


def cell_geometry(mesh: PolygonalMesh, cell_id: int) -> CellGeometry:
    return mesh.cell_geometry(cell_id)


# --------------------------------------------------------------------------
# JSON I/O


def _fmt(x: float) -> str:
    if not math.isfinite(x):
        raise MeshError(f"non-finite coordinate {x}")
    return f"{x:.17g}"


def save_mesh(mesh: PolygonalMesh, path) -> None:
    """Write `{"vertices": [...], "cells": [...]}` with 17 significant digits."""
    verts = ",".join(f"[{_fmt(x)},{_fmt(y)}]" for x, y in mesh.vertices)
    cells = ",".join("[" + ",".join(str(int(v)) for v in loop) + "]" for loop in mesh.cells)
    Path(path).write_text(f'{{"vertices": [{verts}], "cells": [{cells}]}}\n')


def load_mesh(path) -> PolygonalMesh:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(data, dict) or "vertices" not in data or "cells" not in data:
        raise MeshError(f"{path}: expected an object with 'vertices' and 'cells'")
    verts = data["vertices"]
    if not all(isinstance(v, list) and len(v) == 2 for v in verts):
        raise MeshError(f"{path}: every vertex must be an [x, y] pair")
    for c, loop in enumerate(data["cells"]):
        if not isinstance(loop, list) or not all(isinstance(i, int) for i in loop):
            raise MeshError(f"cell {c}: vertex indices must be integers")
    return PolygonalMesh.from_cells(np.array(verts, dtype=float), data["cells"])
