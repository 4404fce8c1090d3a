"""Problem data and the built-in problem registry.

Boundary data take the outward unit normal as well as the point, so that
the observation target ``y_d = A grad(y) . n + z`` of the manufactured
examples can be written without knowing which side of the square a point
sits on.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp

Scalar = Callable[..., np.ndarray]


@dataclass(frozen=True)
class ExactSolution:
    y: Scalar
    z: Scalar
    u: Scalar
    flux: Callable[..., np.ndarray]  # p = A grad y, returns (..., 2)
    adjoint_flux: Optional[Callable[..., np.ndarray]] = None


@dataclass(frozen=True)
class ProblemData:
    """Data of  min 1/2 |p.n - y_d|^2_Gamma + gamma/2 |u|^2  s.t. the mixed state equation.

    ``A(x, y)`` returns (..., 2, 2); ``A_const`` short-circuits it when the
    coefficient is constant. ``f(x, y)``, ``g(x, y)`` and
    ``y_d(x, y, nx, ny)`` broadcast over arrays.
    """

    name: str
    f: Scalar
    g: Scalar
    y_d: Scalar
    gamma: float
    bounds: tuple[float, float]
    A: Optional[Callable[..., np.ndarray]] = None
    A_const: Optional[np.ndarray] = field(default_factory=lambda: np.eye(2))
    exact: Optional[ExactSolution] = None
    singular_point: Optional[tuple[float, float]] = None
    error_mode: str = "exact"  # "exact" | "projected" (compare with cell averages)

    def __post_init__(self):
        if not self.gamma > 0.0:
            raise ValueError("gamma must be positive")
        lo, hi = self.bounds
        if not lo <= hi:
            raise ValueError(f"lower bound {lo} exceeds upper bound {hi}")
        if self.A is None and self.A_const is None:
            raise ValueError("either A or A_const is required")
        if self.A_const is not None:
            check_spd(np.asarray(self.A_const, dtype=float))
        if self.error_mode not in ("exact", "projected"):
            raise ValueError("error_mode must be 'exact' or 'projected'")

    def coefficient(self, x, y) -> np.ndarray:
        if self.A_const is not None:
            return np.broadcast_to(np.asarray(self.A_const, dtype=float), np.shape(x) + (2, 2))
        vals = np.asarray(self.A(x, y), dtype=float)
        check_spd(vals)
        return vals

    def project(self, w) -> np.ndarray:
        lo, hi = self.bounds
        return np.clip(-np.asarray(w) / self.gamma, lo, hi)

    def with_overrides(self, gamma=None, bounds=None) -> "ProblemData":
        """Copy with a new gamma or bounds. The exact solution is dropped
        since it no longer matches."""
        if gamma is None and bounds is None:
            return self
        return replace(self, gamma=self.gamma if gamma is None else float(gamma),
                       bounds=self.bounds if bounds is None else tuple(map(float, bounds)),
                       exact=None)


def check_spd(A: np.ndarray) -> None:
    det = A[..., 0, 0] * A[..., 1, 1] - A[..., 0, 1] * A[..., 1, 0]
    tr = A[..., 0, 0] + A[..., 1, 1]
    if np.any(~(det > 0.0)) or np.any(~(tr > 0.0)) or np.any(A[..., 0, 1] != A[..., 1, 0]):
        raise ValueError("coefficient matrix is not symmetric positive definite")


X1, X2, NX, NY = sp.symbols("x1 x2 nx ny", real=True)


def _scalar(expr) -> Scalar:
    fn = sp.lambdify((X1, X2), expr, "numpy")

    def wrapped(x, y):
        return np.broadcast_to(np.asarray(fn(x, y), dtype=float), np.broadcast(x, y).shape).copy()
    return wrapped


def _vector(exprs) -> Callable[..., np.ndarray]:
    fns = [_scalar(e) for e in exprs]
    return lambda x, y: np.stack([fn(x, y) for fn in fns], axis=-1)


def _matrix(M) -> Callable[..., np.ndarray]:
    fns = [[_scalar(M[i, j]) for j in range(2)] for i in range(2)]
    return lambda x, y: np.stack([np.stack([fns[i][j](x, y) for j in range(2)], -1) for i in range(2)], -2)


def manufactured(name: str, y_expr, z_expr, A_mat, gamma: float, bounds) -> ProblemData:
    """Build data from a state y and adjoint z with -div(A grad z) = 0.

    u = clamp(-z/gamma), f = -div(A grad y) - u, g = y on the boundary,
    y_d = A grad y . n + z so that the adjoint boundary value y_d - p.n
    equals z.
    """
    A_mat = sp.Matrix(A_mat)
    grad_y = sp.Matrix([sp.diff(y_expr, X1), sp.diff(y_expr, X2)])
    grad_z = sp.Matrix([sp.diff(z_expr, X1), sp.diff(z_expr, X2)])
    p = A_mat * grad_y
    r = A_mat * grad_z
    if sp.simplify(sp.diff(r[0], X1) + sp.diff(r[1], X2)) != 0:
        raise ValueError("adjoint state is not A-harmonic")
    minus_div_p = sp.simplify(-(sp.diff(p[0], X1) + sp.diff(p[1], X2)))
    y_fn = _scalar(y_expr)
    z_fn = _scalar(z_expr)
    lap = _scalar(minus_div_p)
    lo, hi = bounds

    def u_fn(x, y):
        return np.clip(-z_fn(x, y) / gamma, lo, hi)

    def f_fn(x, y):
        return lap(x, y) - u_fn(x, y)

    yd_expr = p[0] * NX + p[1] * NY + z_expr
    yd_raw = sp.lambdify((X1, X2, NX, NY), yd_expr, "numpy")

    def yd_fn(x, y, nx, ny):
        shape = np.broadcast(x, y, nx, ny).shape
        return np.broadcast_to(np.asarray(yd_raw(x, y, nx, ny), dtype=float), shape).copy()

    const = all(sp.sympify(e).is_number for e in A_mat)
    A_const = np.array(A_mat.tolist(), dtype=float) if const else None
    return ProblemData(
        name=name, f=f_fn, g=y_fn, y_d=yd_fn, gamma=gamma, bounds=(float(lo), float(hi)),
        A=None if const else _matrix(A_mat), A_const=A_const,
        exact=ExactSolution(y=y_fn, z=z_fn, u=u_fn, flux=_vector(p), adjoint_flux=_vector(r)),
    )


def example1(gamma: float = 1.0) -> ProblemData:
    y = sp.sin(sp.pi * X1) * sp.sin(sp.pi * X2) + 1
    z = (X1**2 - X1) + (X2 - X2**2)
    return manufactured("example1", y, z, sp.eye(2), gamma, (0.0, 0.5))


def example2(gamma: float = 1.0) -> ProblemData:
    def f(x, y):
        return 1.0 / (x * x + y * y) ** 0.4

    def zero(x, y, *normal):
        return np.zeros(np.broadcast(x, y).shape)

    return ProblemData(name="example2", f=f, g=zero, y_d=zero, gamma=gamma,
                       bounds=(-0.5, -0.1), singular_point=(0.0, 0.0))


def example3(gamma: float = 1.0) -> ProblemData:
    y = X1**2 * X2 + sp.sin(sp.pi * X1) * sp.sin(sp.pi * X2)
    z = -(X1**2 - X2**2)
    A = sp.Matrix([[X2**2 + 1, X1 * X2], [X1 * X2, X1**2 + 1]])
    return manufactured("example3", y, z, A, gamma, (0.0, 0.5))


def patch_constant_flux() -> ProblemData:
    """Linear state, constant flux, zero adjoint and control."""
    y = 1 + X1 + 2 * X2
    prob = manufactured("patch_constant_flux", y, sp.Integer(0), sp.eye(2), 1.0, (-1.0, 1.0))
    return replace(prob, error_mode="projected")


def patch_zero() -> ProblemData:
    prob = manufactured("patch_zero", sp.Integer(0), sp.Integer(0), sp.eye(2), 1.0, (-1.0, 1.0))
    return replace(prob, error_mode="projected")


BUILTIN = {
    "example1": example1,
    "example2": example2,
    "example3": example3,
    "patch_constant_flux": patch_constant_flux,
    "patch_zero": patch_zero,
}


def builtin_problem(name: str) -> ProblemData:
    try:
        return BUILTIN[name]()
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(BUILTIN)}") from None
