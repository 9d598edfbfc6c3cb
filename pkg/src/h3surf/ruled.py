"""The two families of surfaces ruled by straight-line geodesics of H3.

S1: r(t, s) = (t, a(t), s)            (vertical rulings)
S2: r(t, s) = (t, 0, a(t)) + s (u(t), 1, t/2)   (rulings in ker omega)

S2 is locally the graph z = f(x, y) with t = t(x, y) given implicitly by
x = t + y u(t).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .charts import GraphChart, S1Chart, S2Chart, _as_expr
from .core import line_is_geodesic
from .expr import Expr, profile, to_text
from .geometry import surface_data
from .jet import Jet2
from .laplace import GridSpec, finite_type_fit

SOLVE_TOL = 1e-12
QUP_TOL = 1e-9


class ImplicitSolveError(ArithmeticError):
    pass


# ---------------------------------------------------------------- S1


@dataclass(frozen=True)
class S1Params:
    a: Expr
    t_range: tuple[float, float] = (-1.0, 1.0)
    s_range: tuple[float, float] = (0.0, 1.0)
    constants: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "a", _as_expr(self.a))


def s1_chart(p: S1Params) -> S1Chart:
    return S1Chart(p.a, dict(p.constants))


def s1_closed_form(p: S1Params, t) -> dict:
    """Closed-form quantities of S1 along the profile.

    ``H_closed`` is a''/(2 W^2), the quantity in terms of which the scalar
    Laplacians of the coordinates take their short form. The mean curvature
    of the immersion (unit normal, sign convention of ``geometry``) is
    ``-H_closed / W``; ``L_closed``, ``M_closed`` are the matching
    second-form coefficients for the unnormalised normal (a', -1, 0).
    """
    j = profile(p.a, t, p.constants)
    t = np.asarray(t, dtype=float)
    a, a1, a2 = j.value, j.grad[..., 0], j.hess[..., 0, 0]
    k = a - t * a1
    W2 = 1.0 + a1 * a1
    return {
        "a": a,
        "da": a1,
        "dda": a2,
        "E": W2 + 0.25 * k * k,
        "F": 0.5 * k,
        "G": np.ones_like(W2),
        "W2": W2,
        "L_closed": a2 - 0.5 * k * W2,
        "M_closed": -0.5 * W2,
        "N_closed": np.zeros_like(W2),
        "H_closed": a2 / (2.0 * W2),
        "H": -a2 / (2.0 * W2**1.5),
    }


def s1_laplacian_closed(p: S1Params, t, s=0.0) -> np.ndarray:
    """(2 a' Hc / W^2, -2 Hc / W^2, -(t + a a') Hc / W^2) with Hc = a''/(2 W^2)."""
    d = s1_closed_form(p, t)
    t = np.asarray(t, dtype=float)
    Hc, W2 = d["H_closed"], d["W2"]
    out = np.stack(
        [2.0 * d["da"] * Hc / W2, -2.0 * Hc / W2, -(t + d["a"] * d["da"]) * Hc / W2], axis=-1
    )
    return np.broadcast_to(out, np.broadcast_shapes(out.shape, np.shape(s) + (3,))).copy()


def s1_system_residuals(p: S1Params, t, s, lam) -> np.ndarray:
    """Residuals lap(r_i) - lam_i r_i of the S1 eigen-system, closed form."""
    lap = s1_laplacian_closed(p, t, s)
    a = s1_closed_form(p, t)["a"]
    t, s = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(s, dtype=float))
    r = np.stack([t, np.broadcast_to(a, t.shape), s], axis=-1)
    return lap - np.asarray(lam, dtype=float) * r


def s1_cylinder_system(p: S1Params, t, lam1: float, lam2: float) -> np.ndarray:
    """Rows (1), (2) of the S1 system after eliminating t = -a a' and
    multiplying (2) by a'; shape S + (2,). On a cylinder with lam1 = lam2 the
    two rows are negatives of each other."""
    d = s1_closed_form(p, t)
    g = 2.0 * d["da"] * d["H_closed"] / d["W2"]
    aa = d["a"] * d["da"]
    return np.stack([g + lam1 * aa, -g - lam2 * aa], axis=-1)


@dataclass
class S1Classification:
    case: str
    c: Optional[float]
    evidence: dict

    def as_dict(self) -> dict:
        return {"case": self.case, "c": self.c, "evidence": self.evidence}


def s1_classify(p: S1Params, grid: GridSpec, tol: float = 1e-8) -> S1Classification:
    ch = s1_chart(p)
    U, V = grid.mesh()
    H = surface_data(ch, U, V).H
    d = s1_closed_form(p, U[:, 0])
    t = U[:, 0]
    circ = d["a"] * d["da"] + t
    evidence = {"max_abs_H": float(np.max(np.abs(H))), "max_abs_aa_plus_t": float(np.max(np.abs(circ)))}
    if evidence["max_abs_H"] <= tol:
        return S1Classification("minimal", None, evidence)
    if evidence["max_abs_aa_plus_t"] <= tol:
        c = float(np.mean(d["a"] ** 2 + t**2))
        fit = finite_type_fit(ch, grid)
        evidence["lambda"] = fit.lam
        evidence["lambda_expected"] = 1.0 / c
        evidence["lambda_error"] = max(abs(fit.lam[0] - 1.0 / c), abs(fit.lam[1] - 1.0 / c))
        return S1Classification("cylinder", c, evidence)
    return S1Classification("neither", None, evidence)


# ---------------------------------------------------------------- S2


@dataclass(frozen=True)
class S2Params:
    a: Expr
    u: Expr
    t_range: tuple[float, float] = (-1.0, 1.0)
    s_range: tuple[float, float] = (-1.0, 1.0)
    constants: Mapping[str, float] = field(default_factory=dict)
    max_iter: int = 50
    tol: float = SOLVE_TOL
    bracket: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "a", _as_expr(self.a))
        object.__setattr__(self, "u", _as_expr(self.u))


def s2_chart(p: S2Params) -> S2Chart:
    return S2Chart(p.a, p.u, dict(p.constants))


def _u_profile(p: S2Params, t):
    j = profile(p.u, t, p.constants)
    return j.value, j.grad[..., 0]


def _solve_scalar(p: S2Params, x: float, y: float, t0: float) -> float:
    def g(t):
        return t + y * float(_u_profile(p, t)[0]) - x

    width = p.bracket
    lo, hi = t0 - width, t0 + width
    for _ in range(60):
        glo, ghi = g(lo), g(hi)
        if np.sign(glo) != np.sign(ghi):
            break
        width *= 2.0
        lo, hi = t0 - width, t0 + width
    else:
        raise ImplicitSolveError(f"no bracket found for x={x}, y={y}")
    t = brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    # polish: one Newton step
    uv, du = _u_profile(p, t)
    denom = 1.0 + y * float(du)
    if denom != 0.0:
        t -= g(t) / denom
    return t


def s2_solve_t(p: S2Params, x, y):
    """Solve x = t + y u(t) for t; returns (t, t_x, t_y) with
    t_x = 1/(1 + y u'(t)) and t_y = -u(t) t_x."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    u0, _ = _u_profile(p, x)
    t = x - y * u0
    for _ in range(p.max_iter):
        uv, du = _u_profile(p, t)
        g = t + y * uv - x
        denom = 1.0 + y * du
        step = np.where(np.abs(denom) > 1e-14, g / np.where(denom == 0, 1.0, denom), 0.0)
        t = t - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(t))):
            break
    uv, du = _u_profile(p, t)
    resid = np.abs(t + y * uv - x)
    bad = ~(resid <= p.tol) | ~np.isfinite(t)
    if np.any(bad):
        t = np.array(t, dtype=float, copy=True)
        for idx in zip(*np.nonzero(np.atleast_1d(bad))):
            xi, yi = float(np.atleast_1d(x)[idx]), float(np.atleast_1d(y)[idx])
            ti = _solve_scalar(p, xi, yi, xi - yi * float(_u_profile(p, xi)[0]))
            if t.ndim == 0:
                t = np.asarray(ti)
            else:
                t[idx] = ti
        uv, du = _u_profile(p, t)
        resid = np.abs(t + y * uv - x)
        if np.any(resid > p.tol):
            raise ImplicitSolveError(f"implicit solve residual {float(np.max(resid)):.3g} > {p.tol:g}")
    denom = 1.0 + y * du
    if np.any(np.abs(denom) <= 1e-10):
        raise ImplicitSolveError("1 + y u'(t) vanishes: implicit function condition violated")
    tx = 1.0 / denom
    return t, tx, -uv * tx


def s2_P_Q(p: S2Params, x, y):
    """P = f_x + y/2 and Q = f_y - x/2 through the implicit parametrisation,
    with f_x = (a' + y/2) t_x and f_y = (a' + y/2) t_y + t/2."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    t, tx, ty = s2_solve_t(p, x, y)
    da = profile(p.a, t, p.constants).grad[..., 0]
    fx = (da + 0.5 * y) * tx
    fy = (da + 0.5 * y) * ty + 0.5 * t
    P = fx + 0.5 * y
    Q = fy - 0.5 * x
    uv, _ = _u_profile(p, t)
    gap = np.abs(Q + uv * P)
    if np.any(gap > QUP_TOL * (1.0 + np.abs(uv * P))):
        raise AssertionError(f"Q + uP = {float(np.max(gap)):.3g} exceeds {QUP_TOL:g}")
    return P, Q


def s2_graph_jet(p: S2Params, x, y) -> Jet2:
    """Jet of f(x, y) in (x, y), by inverting the (t, s) -> (x, y) jets."""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    t, _, _ = s2_solve_t(p, x, y)
    X, Y, Z = s2_chart(p).coords(t, y)
    J = np.stack([X.grad, Y.grad], axis=-2)  # [..., a, b] = d phi^a / d q^b
    Jinv = np.linalg.inv(J)
    # psi^a_bc = - Jinv^a_d phi^d_ef Jinv^e_b Jinv^f_c
    phi_h = np.stack([X.hess, Y.hess], axis=-3)
    inner = np.einsum("...ad,...def,...eb,...fc->...abc", Jinv, phi_h, Jinv, Jinv)
    inner = -0.5 * (inner + np.swapaxes(inner, -1, -2))
    T = Jet2(t, Jinv[..., 0, :], inner[..., 0, :, :])
    S = Jet2(y, Jinv[..., 1, :], inner[..., 1, :, :])
    return Z.compose([T, S])


@dataclass
class S2Residuals:
    x: np.ndarray
    y: np.ndarray
    residuals: np.ndarray  # [..., 3]
    lam: tuple[float, float, float]
    fitted: bool

    @property
    def max_abs(self) -> list[float]:
        return [float(np.max(np.abs(self.residuals[..., i]))) for i in range(3)]

    def as_dict(self) -> dict:
        return {"lambda": list(self.lam), "fitted": self.fitted, "max_abs_residual": self.max_abs}


def _s2_terms(p: S2Params, x, y):
    f = s2_graph_jet(p, x, y)
    P = f.d(0) + 0.5 * y
    Q = f.d(1) - 0.5 * x
    W = np.sqrt(1.0 + P * P + Q * Q)
    H = (
        f.dd(0, 0) * (1 + Q * Q) - 2.0 * f.dd(0, 1) * P * Q + f.dd(1, 1) * (1 + P * P)
    ) / (2.0 * W**3)
    t, _, _ = s2_solve_t(p, x, y)
    u, _ = _u_profile(p, t)
    return f.value, P, W, H, u


def s2_system_residuals(p: S2Params, grid: GridSpec, lam=(0.0, 0.0, 0.0), fit: bool = False) -> S2Residuals:
    """Pointwise residuals of the S2 eigen-system in the form

        -P (u - 2 H W) / W^2 = l1 x
        -P (1 + 2 u H W) / W^2 = l2 y
        4 H / W = (l2 - l1) x y - 2 l3 f

    on an (x, y) grid. With ``fit`` the l_i are least-squares fitted first.
    """
    X, Y = grid.mesh()
    f, P, W, H, u = _s2_terms(p, X, Y)
    lhs1 = -P * (u - 2.0 * H * W) / W**2
    lhs2 = -P * (1.0 + 2.0 * u * H * W) / W**2
    lhs3 = 4.0 * H / W
    if fit:
        l1 = float(np.sum(lhs1 * X) / np.sum(X * X))
        l2 = float(np.sum(lhs2 * Y) / np.sum(Y * Y))
        rest = lhs3 - (l2 - l1) * X * Y
        ff = float(np.sum(f * f))
        l3 = float(-np.sum(rest * f) / (2.0 * ff)) if ff > 0 else 0.0
        lam = (l1, l2, l3)
    l1, l2, l3 = lam
    res = np.stack(
        [lhs1 - l1 * X, lhs2 - l2 * Y, lhs3 - ((l2 - l1) * X * Y - 2.0 * l3 * f)], axis=-1
    )
    return S2Residuals(X, Y, res, tuple(float(v) for v in lam), fit)


def ruling_geodesic_check(family: str, a: Expr, t, u: Optional[Expr] = None, constants=None):
    """Run the geodesic predicate on the ruling through parameter t."""
    constants = constants or {}
    av = float(profile(_as_expr(a), t, constants).value)
    if family == "s1":
        base, direction = (t, av, 0.0), (0.0, 0.0, 1.0)
    else:
        uv = float(profile(_as_expr(u), t, constants).value)
        base, direction = (t, 0.0, av), (uv, 1.0, 0.5 * t)
    return line_is_geodesic(base, direction)


# ---------------------------------------------------------------- profile ODE (equation id 3.7 at y = 0)


@dataclass
class ProfileTable:
    t: np.ndarray
    a: np.ndarray
    da: np.ndarray

    def __post_init__(self):
        self._spline = CubicHermiteSpline(self.t, self.a, self.da)

    def __call__(self, t):
        return self._spline(t)


def _eq37_slope(u: Expr, t, constants):
    uv = profile(u, t, constants).value
    return -2.0 * uv * t / (1.0 + uv * uv)


def build_a_from_eq37(
    u, t_range: tuple[float, float], t0: float, a0: float, n: int = 2000, constants=None
) -> ProfileTable:
    """Integrate a'(t) = -2 u(t) t / (1 + u(t)^2) from (t0, a0) with classical
    RK4 over ``t_range`` (which must contain t0)."""
    u = _as_expr(u)
    constants = constants or {}
    lo, hi = t_range
    if not lo <= t0 <= hi:
        raise ValueError("t0 must lie in t_range")
    span = hi - lo
    if span <= 0:
        raise ValueError("empty t_range")

    def march(t_end):
        m = max(1, int(np.ceil(n * abs(t_end - t0) / span)))
        ts = np.linspace(t0, t_end, m + 1)
        vals = np.empty_like(ts)
        vals[0] = a0
        a = a0
        for i in range(m):
            dt = ts[i + 1] - ts[i]
            k1 = _eq37_slope(u, ts[i], constants)
            k23 = _eq37_slope(u, ts[i] + 0.5 * dt, constants)
            k4 = _eq37_slope(u, ts[i + 1], constants)
            a = a + dt / 6.0 * (k1 + 4.0 * k23 + k4)
            if not np.isfinite(a) or abs(a) > 1e150:
                raise OverflowError(f"integration blew up near t={ts[i + 1]:.6g}")
            vals[i + 1] = a
        return ts, vals

    tl, al = march(lo) if lo < t0 else (np.array([t0]), np.array([a0]))
    tr, ar = march(hi) if hi > t0 else (np.array([t0]), np.array([a0]))
    ts = np.concatenate([tl[::-1], tr[1:]])
    vals = np.concatenate([al[::-1], ar[1:]])
    slopes = np.asarray(_eq37_slope(u, ts, constants), dtype=float)
    return ProfileTable(ts, vals, slopes)


# ---------------------------------------------------------------- S2 equations, ids 3.7 to 3.13

EQUATIONS = ("3.7", "3.8", "3.9", "3.10", "3.11", "3.12", "3.13")
PDE_EQUATIONS = ("3.9", "3.10", "3.11", "3.12", "3.13")


def rhs_coefficient(eq: str, f, x, y, lam, coef39: str = "lambda2"):
    """C(f, x, y) and dC/df such that RHS = C * K^2 with
    K = 1 + (f_x + y/2)^2 (1 + u^2)."""
    l1, l2, l3 = lam
    zero = np.zeros_like(np.asarray(f, dtype=float))
    if eq == "3.9":
        k = l2 if coef39 == "lambda2" else l2 - l1
        return 0.5 * k * x * y + zero, zero
    if eq == "3.10":
        return 0.5 * (l2 * x * y - 2.0 * l3 * f), zero - l3
    if eq == "3.11":
        return -0.5 * (l1 * x * y + 2.0 * l3 * f), zero - l3
    if eq in ("3.12", "3.13"):
        # id 3.13 is the case l1 = l2 = l3; its common value is read from l3
        return -l3 * f, zero - l3
    raise ValueError(f"not a second-order equation: {eq}")


def k_factor(fx, y, u):
    return 1.0 + (fx + 0.5 * y) ** 2 * (1.0 + u * u)


class UMode:
    """How u enters the equations: a constant, or u(t(x, y)) via the implicit
    relation x = t + y u(t)."""

    def __init__(self, value: Union[float, Expr, str], constants=None):
        if isinstance(value, (int, float)):
            self.constant: Optional[float] = float(value)
            self.expr: Optional[Expr] = None
        else:
            self.constant = None
            self.expr = _as_expr(value)
        self.constants = dict(constants or {})

    def values(self, x, y) -> np.ndarray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.constant is not None:
            return np.full(x.shape, self.constant)
        p = S2Params(a="0", u=self.expr, constants=self.constants)
        t, _, _ = s2_solve_t(p, x, y)
        return _u_profile(p, t)[0]

    def describe(self):
        if self.constant is not None:
            return {"mode": "constant", "u0": self.constant}
        return {"mode": "implicit", "u": to_text(self.expr)}


def _residual_from_derivs(eq, f, fx, fxx, fyy, x, y, u, lam, coef39):
    if eq == "3.7":
        return fx - (-2.0 * u * x / (1.0 + u * u) - 0.5 * y)
    if eq == "3.8":
        if np.any(np.asarray(y) == 0.0):
            raise ZeroDivisionError("equation 3.8 has a pole at y = 0")
        return fx - (2.0 / (y * (1.0 + u * u)) - 0.5 * y)
    C, _ = rhs_coefficient(eq, f, x, y, lam, coef39)
    return fxx + fyy - C * k_factor(fx, y, u) ** 2


@dataclass
class GridFunction:
    """Nodal values f[i, j] = f(x_i, y_j) on a tensor grid."""

    x: np.ndarray
    y: np.ndarray
    f: np.ndarray


def eq_residual(source, x=None, y=None, eq: str = "3.12", lam=(0.0, 0.0, 0.0), u_mode=None, coef39="lambda2", constants=None):
    """LHS - RHS of one of the S2 equations.

    ``source`` is an :class:`S2Params` (f from the ruled parametrisation), a
    graph expression / :class:`GraphChart`, or a :class:`GridFunction` (in which
    case derivatives are central differences and the residual is returned on
    interior nodes, ignoring x and y).
    """
    if eq not in EQUATIONS:
        raise ValueError(f"unknown equation {eq!r}")
    if isinstance(source, GridFunction):
        gx, gy = source.x, source.y
        hx, hy = gx[1] - gx[0], gy[1] - gy[0]
        f = source.f
        fc = f[1:-1, 1:-1]
        fx = (f[2:, 1:-1] - f[:-2, 1:-1]) / (2.0 * hx)
        fxx = (f[2:, 1:-1] - 2.0 * fc + f[:-2, 1:-1]) / hx**2
        fyy = (f[1:-1, 2:] - 2.0 * fc + f[1:-1, :-2]) / hy**2
        X, Y = np.meshgrid(gx[1:-1], gy[1:-1], indexing="ij")
        mode = u_mode if isinstance(u_mode, UMode) else UMode(0.0 if u_mode is None else u_mode)
        return _residual_from_derivs(eq, fc, fx, fxx, fyy, X, Y, mode.values(X, Y), lam, coef39)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if isinstance(source, S2Params):
        j = s2_graph_jet(source, x, y)
        if u_mode is None:
            u_mode = UMode(source.u, source.constants)
    else:
        ch = source if isinstance(source, GraphChart) else GraphChart(_as_expr(source), dict(constants or {}))
        j = ch.height(x, y)
    mode = u_mode if isinstance(u_mode, UMode) else UMode(0.0 if u_mode is None else u_mode)
    return _residual_from_derivs(
        eq, j.value, j.d(0), j.dd(0, 0), j.dd(1, 1), x, y, mode.values(x, y), lam, coef39
    )
