"""
Variable coefficient and inhomogeneous boundary data
====================================================

A = [[y^2 + 1, x y], [x y, x^2 + 1]] enters the scheme only through its cell
integral of A^{-1}. First order is expected for y, z and u.
"""

from mvemocp.study import StudyConfig, run_study, table_markdown

for family in ("square", "nonconvex"):
    res = run_study(StudyConfig(problem="example3", family=family, ns=(8, 16, 32, 64)))
    print(f"\n{family} meshes")
    print(table_markdown(res.reports))
