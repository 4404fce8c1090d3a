"""
First-order convergence for a smooth solution
=============================================

Manufactured state y = sin(pi x) sin(pi y) + 1 and adjoint
z = x^2 - x + y - y^2, control bounds [0, 0.5], gamma = 1. The errors of
state, adjoint and control in L2 should halve with h on every family.
"""

from mvemocp.study import StudyConfig, run_study, table_markdown

for family in ("square", "random", "nonconvex"):
    res = run_study(StudyConfig(problem="example1", family=family, ns=(8, 16, 32, 64)))
    print(f"\n{family} meshes")
    print(table_markdown(res.reports))
