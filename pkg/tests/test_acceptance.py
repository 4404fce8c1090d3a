"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import time

import numpy as np
import pytest

from mvemocp.analysis import boundary_flux_error, cell_averages, eoc, l2_error_cellwise
from mvemocp.local import flux_dofs, local_flux_matrix, local_projector
from mvemocp.mesh import generate
from mvemocp.ocp import FixedPointConfig, fixed_point_solve
from mvemocp.problems import builtin_problem, example1
from mvemocp.saddle import assemble, inf_sup_constant, interpolate_flux
from mvemocp.study import StudyConfig, run_study

from conftest import ACCEPTANCE_LINES, FAMILIES, random_star_polygon

PUBLISHED_SQUARE = {  # square meshes, h = 0.1414, 0.0707, 0.0471, 0.0353
    "y": [9.4677e-03, 3.7207e-03, 2.2582e-03, 1.6256e-03],
    "z": [1.5097e-02, 7.3138e-03, 4.7321e-03, 3.4892e-03],
    "u": [1.3039e-02, 6.2118e-03, 4.0437e-03, 3.0181e-03],
}


def record(number, title, ok, detail):
    line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def fmt(orders):
    return "[" + ", ".join("nan" if o is None else f"{o:.3f}" for o in orders) + "]"


def test_criterion_1_patch_exactness():
    t0 = time.perf_counter()
    prob = builtin_problem("patch_constant_flux")
    worst_p = worst_y = 0.0
    for fam in FAMILIES:
        m = generate(fam, 8)
        sol = fixed_point_solve(assemble(m, prob))
        worst_p = max(worst_p, np.abs(sol.p - interpolate_flux(prob.exact.flux, m)).max())
        dy = sol.y - cell_averages(prob.exact.y, m)
        worst_y = max(worst_y, float(np.sqrt(np.sum(m.areas * dy * dy))))
    dt = time.perf_counter() - t0
    record(1, "patch test", worst_p <= 1e-9 and worst_y <= 1e-9 and dt < 5,
           f"flux dof err {worst_p:.2e}, y err {worst_y:.2e}, {dt:.1f}s")


def _rates(problem, number, title):
    t0 = time.perf_counter()
    res = run_study(StudyConfig(problem=problem, family="square", ns=(8, 16, 32, 64)))
    dt = time.perf_counter() - t0
    finest = {k: res.orders[k][-1] for k in ("y", "z", "u")}
    ok = all(o is not None and o >= 0.9 for o in finest.values()) and dt < 120
    record(number, title, ok, ", ".join(f"{k} {fmt(res.orders[k])}" for k in "yzu") + f", {dt:.1f}s")


def test_criterion_2_example1_rates():
    _rates("example1", 2, "example 1 rates on squares")


def _example2(family, reference, ns):
    cfg = StudyConfig(problem="example2", family=family, ns=ns, seed=0, ref_n=200)
    return run_study(cfg, reference=reference)


def test_criterion_3_rough_source_square(example2_reference):
    t0 = time.perf_counter()
    res = _example2("square", example2_reference, (10, 20, 30, 40))
    dt = time.perf_counter() - t0 + example2_reference.elapsed
    orders = [o for k in "yzu" for o in res.orders[k]]
    in_band = all(o is not None and 0.85 <= o <= 1.45 for o in orders)
    ratios = [getattr(r, f"err_{k}") / PUBLISHED_SQUARE[k][i] for k in "yzu" for i, r in enumerate(res.reports)]
    magnitude = all(1 / 3 <= q <= 3 for q in ratios)
    hs_ok = [round(r.h, 4) for r in res.reports] == [0.1414, 0.0707, 0.0471, 0.0354]
    record(3, "example 2 square table", in_band and magnitude and hs_ok and dt < 300,
           ", ".join(f"{k} {fmt(res.orders[k])}" for k in "yzu")
           + f", error/table ratios in [{min(ratios):.2f}, {max(ratios):.2f}], {dt:.1f}s")


@pytest.mark.parametrize("family", ["random", "nonconvex"])
def test_criterion_4_example2_other_families(family, example2_reference):
    t0 = time.perf_counter()
    res = _example2(family, example2_reference, (10, 20, 30, 40))
    dt = time.perf_counter() - t0 + example2_reference.elapsed
    orders = [o for k in "yzu" for o in res.orders[k]]
    ok = all(o is not None and 0.85 <= o <= 1.45 for o in orders) and dt < 300
    record(4, f"example 2 {family} rates", ok,
           ", ".join(f"{k} {fmt(res.orders[k])}" for k in "yzu") + f", {dt:.1f}s")


def test_criterion_5_example3_rates():
    _rates("example3", 5, "example 3 rates on squares")


def test_criterion_6_boundary_flux_rate():
    prob = example1()
    errs, hs = [], []
    for n in (8, 16, 32):
        m = generate("square", n)
        p, _ = assemble(m, prob).solve_state(cell_averages(prob.exact.u, m, 8))
        errs.append(boundary_flux_error(p, prob.exact.flux, m))
        hs.append(m.h)
    orders = eoc(errs, hs)
    record(6, "boundary flux rate", all(o >= 0.4 for o in orders),
           f"errors {', '.join(f'{e:.3e}' for e in errs)}, orders {fmt(orders)}")


def test_criterion_7_solver_contracts():
    worst_res = worst_gap = 0.0
    max_its = 0
    feasible = True
    cfg = FixedPointConfig(tol=1e-10)
    for name in ("example1", "example2", "example3"):
        prob = builtin_problem(name)
        a, b = prob.bounds
        for fam in FAMILIES:
            sys_ = assemble(generate(fam, 16), prob)
            sol = fixed_point_solve(sys_, cfg)
            max_its = max(max_its, sol.iterations)
            worst_res = max(worst_res, max(r.residual for r in sys_.reports))
            feasible &= bool(np.all((sol.u >= a) & (sol.u <= b)))
            inactive = (sol.u > a) & (sol.u < b)
            if inactive.any():
                worst_gap = max(worst_gap, np.abs(prob.gamma * sol.u + sol.z)[inactive].max())
    ok = worst_res <= 1e-10 and max_its <= 50 and feasible and worst_gap <= 1e-8
    record(7, "solver contracts", ok,
           f"max residual {worst_res:.1e}, max iterations {max_its}, feasible {feasible}, "
           f"max |gamma u + z| on inactive cells {worst_gap:.1e}")


def test_criterion_8_structural_suite():
    rng = np.random.default_rng(8)
    worst_proj = 0.0
    for _ in range(100):
        xy = random_star_polygon(rng)
        P = local_projector(xy)
        for c in [(1.0, 0.0), (0.0, 1.0), (0.3, -0.7)]:
            d = flux_dofs(lambda x, y, c=c: np.stack(np.broadcast_arrays(c[0], c[1] + 0 * x), -1), xy)
            worst_proj = max(worst_proj, np.abs(P @ d - c).max())
    spd = mesh_ok = True
    for fam in FAMILIES:
        for n in (1, 2, 4, 8, 16, 32, 64):
            m = generate(fam, n)
            mesh_ok &= m.euler_characteristic() == 1 and abs(m.areas.sum() - 1) <= 1e-12 and bool(np.all(m.areas > 0))
            if n <= 16:
                for c in range(m.n_cells):
                    lam = np.linalg.eigvalsh(local_flux_matrix(m.cell_xy(c), m.areas[c] * np.eye(2)))
                    spd &= bool(lam.min() > 0)
    prob = builtin_problem("patch_zero")
    ratios = {}
    for fam in FAMILIES:
        b2 = inf_sup_constant(assemble(generate(fam, 2), prob))
        b4 = inf_sup_constant(assemble(generate(fam, 4), prob))
        ratios[fam] = b4 / b2
    ok = worst_proj <= 1e-12 and spd and mesh_ok and all(r >= 0.8 for r in ratios.values())
    record(8, "structural properties", ok,
           f"projector err {worst_proj:.1e}, a_h SPD {spd}, mesh invariants {mesh_ok}, "
           f"inf-sup n4/n2 {', '.join(f'{k} {v:.2f}' for k, v in ratios.items())}")
