"""Convergence studies, table output and the command-line interface.

Studies are configured by a flat ``key = value`` file::

    problem = example2
    mesh.family = square          # square | random | nonconvex | file
    mesh.n = 10, 20, 30, 40
    mesh.seed = 0
    ref.n = 200                   # reference grid, problems without exact solution
    out.csv = table.csv
    out.md = table.md

Blank lines and ``#`` comments are ignored.
"""
from __future__ import annotations

import argparse
import csv
import importlib.util
import io
import json
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import (ErrorReport, ReferenceGrid, boundary_flux_error, cell_averages,
                       domain_flux_error, eoc, l2_error_cellwise, reference_error)
from .mesh import GeometryError, MeshError, generate, gen_square_grid, load_mesh, save_mesh
from .ocp import FixedPointConfig, FixedPointError, fixed_point_solve
from .problems import BUILTIN, ProblemData, builtin_problem
from .saddle import LinearSolveError, assemble, interpolate_flux

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4
FAMILIES = ("square", "random", "nonconvex", "file")


class ConfigError(ValueError):
    pass


class StudyError(RuntimeError):
    def __init__(self, stage: str, index: int, cause: Exception):
        super().__init__(f"stage '{stage}' failed on mesh #{index}: {cause}")
        self.stage = stage
        self.index = index
        self.cause = cause


@dataclass(frozen=True)
class StudyConfig:
    problem: str = "example1"
    family: str = "square"
    ns: tuple = (8, 16, 32, 64)
    seed: int = 0
    delta: float = 0.2
    mesh_file: Optional[str] = None
    gamma: Optional[float] = None
    bounds: Optional[tuple] = None
    tol: float = 1e-10
    max_iter: int = 100
    omega: float = 1.0
    cell_degree: int = 4
    edge_points: int = 3
    error_degree: int = 4
    ref_n: int = 500
    ref_degree: int = 10
    stabilization: str = "scaled"
    weighted: bool = False
    out_csv: Optional[str] = None
    out_md: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"mesh.family must be one of {FAMILIES}")
        if self.family == "file" and not self.mesh_file:
            raise ConfigError("mesh.family = file needs mesh.file")
        if self.family != "file":
            if not self.ns or any(n < 1 for n in self.ns):
                raise ConfigError("mesh.n must list positive integers")
            if any(a >= b for a, b in zip(self.ns, self.ns[1:])):
                raise ConfigError("mesh.n must be strictly increasing")
        if not self.tol > 0.0:
            raise ConfigError("fp.tol must be positive")
        if self.max_iter < 1:
            raise ConfigError("fp.max_iter must be >= 1")
        if not 0.0 < self.omega <= 1.0:
            raise ConfigError("fp.omega must lie in (0, 1]")
        if self.ref_n < 1:
            raise ConfigError("ref.n must be positive")
        if self.stabilization not in ("scaled", "raw"):
            raise ConfigError("vem.stabilization must be 'scaled' or 'raw'")
        if self.gamma is not None and not self.gamma > 0.0:
            raise ConfigError("gamma must be positive")


_KEYS = {
    "problem": ("problem", str),
    "mesh.family": ("family", str),
    "mesh.n": ("ns", lambda s: tuple(int(v) for v in s.split(",") if v.strip())),
    "mesh.seed": ("seed", int),
    "mesh.delta": ("delta", float),
    "mesh.file": ("mesh_file", str),
    "gamma": ("gamma", float),
    "bounds": ("bounds", lambda s: tuple(float(v) for v in s.split(","))),
    "fp.tol": ("tol", float),
    "fp.max_iter": ("max_iter", int),
    "fp.omega": ("omega", float),
    "quad.cell_degree": ("cell_degree", int),
    "quad.edge_points": ("edge_points", int),
    "quad.error_degree": ("error_degree", int),
    "ref.n": ("ref_n", int),
    "ref.degree": ("ref_degree", int),
    "vem.stabilization": ("stabilization", str),
    "vem.weighted": ("weighted", lambda s: {"true": True, "false": False}[s.lower()]),
    "out.csv": ("out_csv", str),
    "out.md": ("out_md", str),
}


def parse_config(text: str) -> StudyConfig:
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, conv = _KEYS[key]
        try:
            kwargs[attr] = conv(value)
        except (ValueError, KeyError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    if "bounds" in kwargs and len(kwargs["bounds"]) != 2:
        raise ConfigError("bounds needs exactly two values 'a, b'")
    return StudyConfig(**kwargs)


def load_config(path) -> StudyConfig:
    return parse_config(Path(path).read_text())


def load_problem_file(path) -> ProblemData:
    """Import a Python file defining ``PROBLEM`` (a ProblemData) or ``problem()``."""
    path = Path(path)
    spec = importlib.util.spec_from_file_location(f"_mvemocp_problem_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ConfigError(f"cannot import problem file {path}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    prob = getattr(module, "PROBLEM", None)
    if prob is None and callable(getattr(module, "problem", None)):
        prob = module.problem()
    if not isinstance(prob, ProblemData):
        raise ConfigError(f"{path} defines neither PROBLEM nor problem() returning ProblemData")
    return prob


def resolve_problem(config: StudyConfig) -> ProblemData:
    if config.problem.endswith(".py"):
        prob = load_problem_file(config.problem)
    else:
        try:
            prob = builtin_problem(config.problem)
        except KeyError as exc:
            raise ConfigError(exc.args[0]) from None
    if config.gamma is not None or config.bounds is not None:
        prob = prob.with_overrides(config.gamma, config.bounds)
    return prob


def _meshes(config: StudyConfig):
    if config.family == "file":
        yield None, load_mesh(config.mesh_file)
        return
    for n in config.ns:
        yield n, generate(config.family, n, seed=config.seed, delta=config.delta)


def _fp(config: StudyConfig) -> FixedPointConfig:
    return FixedPointConfig(config.tol, config.max_iter, config.omega)


def compute_reference(problem: ProblemData, config: StudyConfig) -> ReferenceGrid:
    mesh = gen_square_grid(config.ref_n)
    sys_ = assemble(mesh, problem, config.cell_degree, config.edge_points, config.stabilization, config.weighted)
    sol = fixed_point_solve(sys_, _fp(config))
    return ReferenceGrid(config.ref_n, y=sol.y, z=sol.z, u=sol.u)


def exact_errors(mesh, sol, problem: ProblemData, degree: int = 4, edge_points: int = 3) -> ErrorReport:
    ex = problem.exact
    if problem.error_mode == "projected":
        def err(vals, fn):
            diff = np.asarray(vals) - cell_averages(fn, mesh, max(degree, 4))
            return float(np.sqrt(np.sum(mesh.areas * diff * diff)))
        # flux against its edge interpolant, which is what the scheme reproduces
        diff = sol.p - interpolate_flux(ex.flux, mesh, edge_points)
        be = mesh.boundary_edges
        flux_b = float(np.sqrt(np.sum(diff[be] ** 2 / mesh.edge_lengths[be])))
        return ErrorReport(h=mesh.h, err_y=err(sol.y, ex.y), err_z=err(sol.z, ex.z), err_u=err(sol.u, ex.u),
                           err_flux_boundary=flux_b, err_flux_domain=float(np.abs(diff).max()))
    return ErrorReport(
        h=mesh.h,
        err_y=l2_error_cellwise(sol.y, ex.y, mesh, degree),
        err_z=l2_error_cellwise(sol.z, ex.z, mesh, degree),
        err_u=l2_error_cellwise(sol.u, ex.u, mesh, degree),
        err_flux_boundary=boundary_flux_error(sol.p, ex.flux, mesh, edge_points),
        err_flux_domain=domain_flux_error(sol.p, ex.flux, mesh, degree),
    )


@dataclass
class StudyResult:
    config: StudyConfig
    reports: list
    orders: dict = field(default_factory=dict)


def orders_of(reports) -> dict:
    hs = [r.h for r in reports]
    if len(reports) < 2:
        return {k: [] for k in ("y", "z", "u")}
    return {k: eoc([getattr(r, f"err_{k}") for r in reports], hs) for k in ("y", "z", "u")}


def run_study(config: StudyConfig, problem: Optional[ProblemData] = None,
              reference: Optional[ReferenceGrid] = None) -> StudyResult:
    """Solve on every mesh of the sequence and collect errors and orders.

    Problems without an exact solution are compared against a reference
    solve on ``gen_square_grid(config.ref_n)``; pass `reference` to reuse
    one across studies.
    """
    problem = problem or resolve_problem(config)
    if problem.exact is None and reference is None:
        try:
            reference = compute_reference(problem, config)
        except (FixedPointError, LinearSolveError) as exc:
            raise StudyError("reference", -1, exc) from exc
    reports = []
    for index, (n, mesh) in enumerate(_meshes(config)):
        stage = "assemble"
        try:
            sys_ = assemble(mesh, problem, config.cell_degree, config.edge_points, config.stabilization, config.weighted)
            stage = "fixed_point"
            sol = fixed_point_solve(sys_, _fp(config))
            stage = "errors"
            if problem.exact is None:
                rep = reference_error(mesh, sol.y, sol.z, sol.u, reference, config.ref_degree)
            else:
                rep = exact_errors(mesh, sol, problem, config.error_degree, config.edge_points)
        except Exception as exc:
            raise StudyError(stage, index, exc) from exc
        rep = replace(rep, n=n, iterations=sol.iterations)
        log.info("n=%s h=%.4f |y-yh|=%.3e |z-zh|=%.3e |u-uh|=%.3e (%d its)",
                 n, rep.h, rep.err_y, rep.err_z, rep.err_u, sol.iterations)
        reports.append(rep)
    return StudyResult(config, reports, orders_of(reports))


# --------------------------------------------------------------------------
# tables


CSV_COLUMNS = ("h", "err_y", "order_y", "err_z", "order_z", "err_u", "order_u")


def _g17(x) -> str:
    return "" if x is None else f"{x:.17g}"


def table_csv(reports) -> str:
    orders = orders_of(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for i, r in enumerate(reports):
        row = [_g17(r.h)]
        for k in ("y", "z", "u"):
            row.append(_g17(getattr(r, f"err_{k}")))
            row.append("" if i == 0 else _g17(orders[k][i - 1]))
        w.writerow(row)
    return buf.getvalue()


_MD_LABELS = {"y": "‖y−y_h‖_{0,Ω}", "z": "‖z−z_h‖_{0,Ω}", "u": "‖u−u_h‖_{0,Ω}"}


def table_markdown(reports, title: Optional[str] = None) -> str:
    """h row, then error / Order row pairs, four significant digits."""
    orders = orders_of(reports)
    head = "| h | " + " | ".join(f"{r.h:.4g}" for r in reports) + " |"
    lines = [] if title is None else [f"**{title}**", ""]
    lines += [head, "|" + "---|" * (len(reports) + 1)]
    for k in ("y", "z", "u"):
        lines.append(f"| {_MD_LABELS[k]} | " + " | ".join(f"{getattr(r, f'err_{k}'):.3e}" for r in reports) + " |")
        cells = ["\\"] + ["" if o is None else f"{o:.4f}" for o in orders[k]]
        lines.append("| Order | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_table(reports, fmt: str, path=None) -> str:
    if not reports:
        raise ValueError("need at least one report")
    if fmt == "csv":
        text = table_csv(reports)
    elif fmt in ("md", "markdown"):
        text = table_markdown(reports)
    else:
        raise ValueError(f"unknown table format {fmt!r}")
    if path is not None:
        Path(path).write_text(text)
    return text


def read_table_csv(path) -> list:
    reports = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            reports.append(ErrorReport(h=float(row["h"]), err_y=float(row["err_y"]),
                                       err_z=float(row["err_z"]), err_u=float(row["err_u"])))
    return reports


# --------------------------------------------------------------------------
# command line


def _mesh_args(p):
    p.add_argument("--mesh", "--family", dest="family", default="square", choices=FAMILIES)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.2)
    p.add_argument("--mesh-file")


def _problem_args(p):
    p.add_argument("--problem", default="example1", help=f"one of {sorted(BUILTIN)} or a .py file")
    p.add_argument("--gamma", type=float)
    p.add_argument("--stabilization", default="scaled", choices=("scaled", "raw"))


def _build_mesh(args):
    if args.family == "file":
        if not args.mesh_file:
            raise ConfigError("--mesh file requires --mesh-file")
        return load_mesh(args.mesh_file)
    return generate(args.family, args.n, seed=args.seed, delta=args.delta)


def _cmd_mesh(args):
    mesh = _build_mesh(args)
    save_mesh(mesh, args.out)
    print(json.dumps({"cells": mesh.n_cells, "edges": mesh.n_edges, "vertices": mesh.n_vertices,
                      "h": mesh.h, "out": args.out}))


def _problem(args) -> ProblemData:
    return resolve_problem(StudyConfig(problem=args.problem, gamma=args.gamma))


def _cmd_solve(args):
    mesh = _build_mesh(args)
    prob = _problem(args)
    sys_ = assemble(mesh, prob, stabilization=args.stabilization)
    if args.dump_matrix:
        sys_.dump(args.dump_matrix)
    u = cell_averages(prob.exact.u, mesh) if (args.control == "exact" and prob.exact) else np.zeros(mesh.n_cells)
    p, y = sys_.solve_state(u)
    out = {"problem": prob.name, "h": mesh.h, "n_flux": sys_.n_flux, "n_cells": sys_.n_cells,
           "residual": sys_.reports[-1].residual}
    if prob.exact is not None and args.control == "exact":
        out["err_y"] = l2_error_cellwise(y, prob.exact.y, mesh)
        out["err_flux_boundary"] = boundary_flux_error(p, prob.exact.flux, mesh)
    print(json.dumps(out))


def _cmd_ocp(args):
    mesh = _build_mesh(args)
    prob = _problem(args)
    sys_ = assemble(mesh, prob, stabilization=args.stabilization)
    sol = fixed_point_solve(sys_, FixedPointConfig(args.tol, args.max_iter, args.omega), track_objective=True)
    out = {"problem": prob.name, "h": mesh.h, "iterations": sol.iterations, "update_norm": sol.update_norm,
           "objective": sol.objective, "max_residual": max(r.residual for r in sys_.reports),
           "u_min": float(sol.u.min()), "u_max": float(sol.u.max()), "history": list(sol.history)}
    if prob.exact is not None:
        rep = exact_errors(mesh, sol, prob)
        out.update(err_y=rep.err_y, err_z=rep.err_z, err_u=rep.err_u)
    print(json.dumps(out))


def _cmd_study(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    result = run_study(config)
    out_dir = Path(args.out_dir) if args.out_dir else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    def target(name, default):
        if name is None and out_dir is None:
            return None
        name = name or default
        return str(out_dir / name) if out_dir is not None and not Path(name).is_absolute() else name

    csv_path = target(config.out_csv, "study.csv")
    md_path = target(config.out_md, "study.md")
    if csv_path:
        emit_table(result.reports, "csv", csv_path)
    if md_path:
        emit_table(result.reports, "md", md_path)
    sys.stdout.write(table_markdown(result.reports))


def _cmd_tables(args):
    reports = read_table_csv(args.csv)
    text = emit_table(reports, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mvemocp", description="Mixed virtual element optimal control: meshes, solves and convergence studies.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate and export a mesh")
    _mesh_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_mesh)

    p = sub.add_parser("solve", help="forward state solve")
    _mesh_args(p)
    _problem_args(p)
    p.add_argument("--control", default="zero", choices=("zero", "exact"))
    p.add_argument("--dump-matrix")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("ocp", help="single optimal control solve with diagnostics")
    _mesh_args(p)
    _problem_args(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--omega", type=float, default=1.0)
    p.set_defaults(func=_cmd_ocp)

    p = sub.add_parser("study", help="convergence study from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_study)

    p = sub.add_parser("tables", help="re-emit a saved CSV study as CSV or Markdown")
    p.add_argument("--csv", required=True)
    p.add_argument("--format", default="md", choices=("md", "csv"))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (ConfigError, KeyError, MeshError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StudyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc.cause, (FixedPointError, LinearSolveError)):
            return EXIT_SOLVER
        if isinstance(exc.cause, OSError):
            return EXIT_IO
        return EXIT_CONFIG
    except (FixedPointError, LinearSolveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
