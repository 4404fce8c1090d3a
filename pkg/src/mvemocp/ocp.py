"""Fixed-point solution of the discrete optimality system.

Each sweep solves the state for the current control, the adjoint for the
resulting boundary mismatch, and projects ``-z_h / gamma`` onto the box.
With cellwise constant z_h the projected control is cellwise constant too,
so the control needs no mesh space of its own.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .problems import ProblemData
from .saddle import SaddleSystem, boundary_edge_quadrature

log = logging.getLogger(__name__)


class FixedPointError(RuntimeError):
    """The fixed-point iteration hit max_iter; carries the update history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class FixedPointConfig:
    tol: float = 1e-10
    max_iter: int = 100
    omega: float = 1.0

    def __post_init__(self):
        if not self.tol > 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0.0 < self.omega <= 1.0:
            raise ValueError("omega must lie in (0, 1]")


@dataclass(frozen=True)
class OcpSolution:
    p: np.ndarray
    y: np.ndarray
    r: np.ndarray
    z: np.ndarray
    u: np.ndarray
    iterations: int
    update_norm: float
    objective: float
    history: tuple = field(default=(), repr=False)
    objectives: tuple = field(default=(), repr=False)


def project_control(z, gamma: float, bounds) -> np.ndarray:
    """u_E = max(a, min(b, -z_E / gamma)).

    The sign follows from the gradient gamma*u + z of the reduced
    objective; some statements of the optimality condition write
    gamma*u - z, which would flip the control.
    """
    if not gamma > 0.0:
        raise ValueError("gamma must be positive")
    lo, hi = bounds
    return np.minimum(hi, np.maximum(lo, -np.asarray(z, dtype=float) / gamma))


def l2_norm_cellwise(w, areas) -> float:
    return float(np.sqrt(np.sum(areas * np.asarray(w) ** 2)))


def objective_value(sys: SaddleSystem, p, u, npoints: int = 3) -> float:
    """1/2 |p_h.n - y_d|^2 on Gamma + gamma/2 |u_h|^2 on Omega."""
    mesh, prob = sys.mesh, sys.problem
    be = mesh.boundary_edges
    pts, w, nrm = boundary_edge_quadrature(mesh, npoints)
    pn = mesh.boundary_signs * p[be] / mesh.edge_lengths[be]
    yd = prob.y_d(pts[..., 0], pts[..., 1], nrm[:, None, 0], nrm[:, None, 1])
    mismatch = np.sum(w * (pn[:, None] - yd) ** 2)
    return float(0.5 * mismatch + 0.5 * prob.gamma * np.sum(mesh.areas * np.asarray(u) ** 2))


def fixed_point_solve(sys: SaddleSystem, config: FixedPointConfig | None = None,
                      u0=None, track_objective: bool = False) -> OcpSolution:
    """Iterate state -> adjoint -> projection until the control settles.

    Stops when the L2 norm of the cellwise control update drops to
    ``config.tol``; raises FixedPointError after ``config.max_iter`` sweeps.
    """
    config = config or FixedPointConfig()
    prob = sys.problem
    areas = sys.mesh.areas
    start = np.zeros(sys.n_cells) if u0 is None else np.asarray(u0, dtype=float)
    u = np.clip(np.broadcast_to(start, (sys.n_cells,)), *prob.bounds)
    history, objectives = [], []
    for k in range(1, config.max_iter + 1):
        p, y = sys.solve_state(u)
        if track_objective:
            objectives.append(objective_value(sys, p, u, sys.edge_points))
        r, z = sys.solve_adjoint(p)
        u_new = (1.0 - config.omega) * u + config.omega * project_control(z, prob.gamma, prob.bounds)
        step = l2_norm_cellwise(u_new - u, areas)
        history.append(step)
        log.debug("fixed point %d: |du| = %.3e", k, step)
        u = u_new
        if step <= config.tol:
            return OcpSolution(p, y, r, z, u, k, step, objective_value(sys, p, u, sys.edge_points),
                               tuple(history), tuple(objectives))
    raise FixedPointError(
        f"fixed point did not converge in {config.max_iter} iterations (last update {history[-1]:.3e})",
        history)
