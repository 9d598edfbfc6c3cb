"""Damped Newton solver for the second-order S2 equations

    f_xx + f_yy = C(f, x, y) * K^2,   K = 1 + (f_x + y/2)^2 (1 + u^2),

on a rectangle with Dirichlet data, using the 5-point Laplacian and central
differences for f_x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .charts import _as_expr
from .expr import Expr, eval_jet2, to_text
from .ruled import PDE_EQUATIONS, UMode, k_factor, rhs_coefficient

DAMPING_FLOOR = 2.0**-20


class ConvergenceError(ArithmeticError):
    def __init__(self, message: str, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(f"{message} (residual {residual:.3e} after {iterations} iterations)")


@dataclass
class PdeProblem:
    equation: str
    lam: tuple[float, float, float] = (0.0, 0.0, 0.0)
    u_mode: Union[UMode, float, str, Expr] = 0.0
    x_range: tuple[float, float] = (-1.0, 1.0)
    y_range: tuple[float, float] = (-1.0, 1.0)
    nx: int = 33
    ny: int = 33
    boundary: Union[np.ndarray, Expr, str, None] = None
    coef39: str = "lambda2"
    max_iter: int = 50
    tol: float = 1e-10
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.equation not in PDE_EQUATIONS:
            raise ValueError(f"equation must be one of {PDE_EQUATIONS}")
        if self.nx < 5 or self.ny < 5:
            raise ValueError("grid must be at least 5x5")
        if not isinstance(self.u_mode, UMode):
            self.u_mode = UMode(self.u_mode, self.constants)
        if self.boundary is None:
            raise ValueError("Dirichlet boundary data is required")
        if isinstance(self.boundary, np.ndarray) and self.boundary.shape != (self.nx, self.ny):
            raise ValueError(f"boundary array must have shape {(self.nx, self.ny)}")

    def nodes(self):
        return np.linspace(*self.x_range, self.nx), np.linspace(*self.y_range, self.ny)

    def boundary_grid(self) -> np.ndarray:
        x, y = self.nodes()
        if isinstance(self.boundary, np.ndarray):
            return np.array(self.boundary, dtype=float)
        X, Y = np.meshgrid(x, y, indexing="ij")
        e = _as_expr(self.boundary)
        vals = eval_jet2(e, {"x": X, "y": Y, **self.constants}, nparams=1).value
        return np.broadcast_to(np.asarray(vals, dtype=float), X.shape).copy()

    def describe(self) -> dict:
        bd = "array" if isinstance(self.boundary, np.ndarray) else to_text(_as_expr(self.boundary))
        return {
            "equation": self.equation,
            "lambda": list(self.lam),
            "u": self.u_mode.describe(),
            "x_range": list(self.x_range),
            "y_range": list(self.y_range),
            "nx": self.nx,
            "ny": self.ny,
            "boundary": bd,
            "coef39": self.coef39,
        }


@dataclass
class PdeSolution:
    x: np.ndarray
    y: np.ndarray
    f: np.ndarray
    residual: float
    iterations: int
    history: list[float]

    def as_dict(self) -> dict:
        return {"residual_max": self.residual, "iterations": self.iterations, "history": self.history}


def _coons(b: np.ndarray) -> np.ndarray:
    """Transfinite interpolation of the perimeter values into the interior."""
    nx, ny = b.shape
    s = np.linspace(0.0, 1.0, nx)[:, None]
    t = np.linspace(0.0, 1.0, ny)[None, :]
    left, right = b[0:1, :], b[-1:, :]
    bottom, top = b[:, 0:1], b[:, -1:]
    out = (
        (1 - s) * left
        + s * right
        + (1 - t) * bottom
        + t * top
        - (1 - s) * (1 - t) * b[0, 0]
        - (1 - s) * t * b[0, -1]
        - s * (1 - t) * b[-1, 0]
        - s * t * b[-1, -1]
    )
    out[0, :], out[-1, :], out[:, 0], out[:, -1] = b[0, :], b[-1, :], b[:, 0], b[:, -1]
    return out


class _Discretization:
    def __init__(self, prob: PdeProblem):
        self.prob = prob
        self.x, self.y = prob.nodes()
        self.hx = self.x[1] - self.x[0]
        self.hy = self.y[1] - self.y[0]
        X, Y = np.meshgrid(self.x[1:-1], self.y[1:-1], indexing="ij")
        self.X, self.Y = X, Y
        self.u = prob.u_mode.values(X, Y)
        self.shape = X.shape
        self.idx = np.arange(X.size).reshape(self.shape)

    def residual(self, f: np.ndarray):
        hx, hy = self.hx, self.hy
        fc = f[1:-1, 1:-1]
        lap = (f[2:, 1:-1] - 2 * fc + f[:-2, 1:-1]) / hx**2 + (f[1:-1, 2:] - 2 * fc + f[1:-1, :-2]) / hy**2
        fx = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2 * hx)
        p = self.prob
        C, dC = rhs_coefficient(p.equation, fc, self.X, self.Y, p.lam, p.coef39)
        K = k_factor(fx, self.Y, self.u)
        dK = 2.0 * (fx + 0.5 * self.Y) * (1.0 + self.u**2)
        R = lap - C * K**2
        return R, dC * K**2, C * 2.0 * K * dK

    def jacobian(self, d_f: np.ndarray, d_fx: np.ndarray) -> sp.csr_matrix:
        hx, hy = self.hx, self.hy
        nxi, nyi = self.shape
        rows, cols, vals = [], [], []

        def add(mask_rows, mask_cols, v):
            rows.append(mask_rows.ravel())
            cols.append(mask_cols.ravel())
            vals.append(np.broadcast_to(v, mask_rows.shape).ravel())

        idx = self.idx
        add(idx, idx, -2.0 / hx**2 - 2.0 / hy**2 - d_f)
        add(idx[1:, :], idx[:-1, :], 1.0 / hx**2 + d_fx[1:, :] / (2 * hx))  # west neighbour
        add(idx[:-1, :], idx[1:, :], 1.0 / hx**2 - d_fx[:-1, :] / (2 * hx))  # east neighbour
        add(idx[:, 1:], idx[:, :-1], np.full((nxi, nyi - 1), 1.0 / hy**2))
        add(idx[:, :-1], idx[:, 1:], np.full((nxi, nyi - 1), 1.0 / hy**2))
        n = idx.size
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
        )


def pde_solve(prob: PdeProblem, initial: Optional[np.ndarray] = None) -> PdeSolution:
    disc = _Discretization(prob)
    b = prob.boundary_grid()
    f = _coons(b) if initial is None else np.array(initial, dtype=float)
    f[0, :], f[-1, :], f[:, 0], f[:, -1] = b[0, :], b[-1, :], b[:, 0], b[:, -1]
    R, d_f, d_fx = disc.residual(f)
    norm = float(np.max(np.abs(R)))
    history = [norm]
    it = 0
    while norm > prob.tol:
        if it >= prob.max_iter:
            raise ConvergenceError("Newton iteration did not converge", norm, it)
        J = disc.jacobian(d_f, d_fx)
        try:
            delta = spla.spsolve(J.tocsc(), -R.ravel())
        except RuntimeError as exc:  # singular factorisation
            raise ConvergenceError(f"singular Jacobian: {exc}", norm, it) from None
        if not np.all(np.isfinite(delta)):
            raise ConvergenceError("singular Jacobian", norm, it)
        step = 1.0
        while True:
            trial = f.copy()
            trial[1:-1, 1:-1] += step * delta.reshape(disc.shape)
            R_new, df_new, dfx_new = disc.residual(trial)
            new_norm = float(np.max(np.abs(R_new)))
            if np.isfinite(new_norm) and new_norm < norm:
                break
            step *= 0.5
            if step < DAMPING_FLOOR:
                raise ConvergenceError("damping floor reached without decrease", norm, it)
        f, R, d_f, d_fx, norm = trial, R_new, df_new, dfx_new, new_norm
        it += 1
        history.append(norm)
    return PdeSolution(disc.x, disc.y, f, norm, it, history)
