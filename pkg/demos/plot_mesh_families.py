"""
Mesh families
=============

Three families of polygonal meshes of the unit square: uniform squares,
squares with randomly shifted interior vertices, and squares cut in two by
a zigzag so that every cell is a nonconvex hexagon.
"""

import sys

import numpy as np

from mvemocp.mesh import generate, is_convex, save_mesh

n = int(sys.argv[1]) if len(sys.argv) > 1 else 8

for family in ("square", "random", "nonconvex"):
    m = generate(family, n, seed=0)
    sizes = sorted({len(c) for c in m.cells})
    convex = sum(is_convex(m.cell_xy(c)) for c in range(m.n_cells))
    print(f"{family:>9}: {m.n_cells:5d} cells, {m.n_edges:5d} edges, h = {m.h:.4f}, "
          f"polygon sizes {sizes}, convex cells {convex}/{m.n_cells}, "
          f"V - E + C = {m.euler_characteristic()}")

# the areas always partition the square, and each cell is closed:
# the sum of length-weighted outward normals vanishes
m = generate("nonconvex", n)
print("total area", m.areas.sum())
xy = m.cell_xy(0)
t = np.roll(xy, -1, axis=0) - xy
print("sum of h_e n_e on cell 0:", np.column_stack([t[:, 1], -t[:, 0]]).sum(axis=0))

# meshes round-trip through a small JSON format
save_mesh(m, "nonconvex.json")
print("wrote nonconvex.json")
