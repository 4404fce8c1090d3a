"""
Rough source: a table against a fine reference
==============================================

With f = |x|^{-4/5}, homogeneous data and bounds [-0.5, -0.1] there is no
closed-form solution. The fine square-grid solution serves as reference;
the coarse solutions are compared with it cell by cell.

Usage: ``python plot_rough_source_table.py [N_ref]`` (default 200; larger
values take minutes).
"""

import sys
import time

from mvemocp.study import StudyConfig, compute_reference, resolve_problem, run_study, table_markdown

N = int(sys.argv[1]) if len(sys.argv) > 1 else 200
config = StudyConfig(problem="example2", ns=(10, 20, 30, 40), ref_n=N)

t0 = time.perf_counter()
reference = compute_reference(resolve_problem(config), config)
print(f"reference on {N} x {N} squares: {time.perf_counter() - t0:.1f} s")

for family in ("square", "random", "nonconvex"):
    res = run_study(StudyConfig(problem="example2", family=family, ns=config.ns, ref_n=N), reference=reference)
    print(f"\n{family} meshes")
    print(table_markdown(res.reports))
