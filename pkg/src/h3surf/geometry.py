"""Extrinsic geometry of charts in H3.

Everything is evaluated on arrays of parameter values at once. Frame
components are with respect to (e1, e2, e3) at the image point.

Conventions:

* unit normal: N = -(r_u x r_v) / |r_u x r_v| (frame cross product), which for
  a graph gives N = (P e1 + Q e2 - e3) / W;
* second form: L = -<D_{r_u} r_u, N>, M = -<D_{r_u} r_v, N>, N = -<D_{r_v} r_v, N>;
* mean curvature: H = (E N - 2 F M + G L) / (2 W^2);
* the operator applied to the immersion carries a leading minus, like the
  scalar Beltrami operator, so that it equals +2 H N.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .charts import Chart, GraphChart
from .core import connection, frame_cross, frame_dot
from .expr import Expr, eval_jet2
from .jet import Jet2

DEGENERATE_W2 = 1e-12
GRAPH_H_RTOL = 1e-9


class DegenerateChartError(ArithmeticError):
    """The chart fails to be an immersion (W^2 <= threshold) somewhere."""


def default_fd_step(u, v) -> np.ndarray:
    """Step for central differences of metric coefficients: 1e-4 (1 + |p|)."""
    return 1e-4 * (1.0 + np.hypot(u, v))


@dataclass
class SurfaceData:
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    W2: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    normal: np.ndarray
    H: np.ndarray
    r_u: np.ndarray
    r_v: np.ndarray
    point: np.ndarray
    P: Optional[np.ndarray] = None
    Q: Optional[np.ndarray] = None
    tension: Optional[np.ndarray] = None


def _tangents(X: Jet2, Y: Jet2, Z: Jet2) -> np.ndarray:
    """Frame components of r_u, r_v; shape S + (2, 3)."""
    x, y = X.value[..., None], Y.value[..., None]
    third = Z.grad + 0.5 * (y * X.grad - x * Y.grad)
    out = np.stack(np.broadcast_arrays(X.grad, Y.grad, third), axis=-1)
    return out


def _covariant_hessian(X: Jet2, Y: Jet2, Z: Jet2, b: np.ndarray) -> np.ndarray:
    """D_{d_i} d_j r in frame components; shape S + (2, 2, 3)."""
    x, y = X.value[..., None, None], Y.value[..., None, None]
    xi, yi = X.grad[..., :, None], Y.grad[..., :, None]
    xj, yj = X.grad[..., None, :], Y.grad[..., None, :]
    third = Z.hess + 0.5 * (yi * xj + y * X.hess - xi * yj - x * Y.hess)
    d_b = np.stack(np.broadcast_arrays(X.hess, Y.hess, third), axis=-1)
    conn = connection(b[..., :, None, :], b[..., None, :, :])
    return d_b + conn


def first_form_from_tangents(b: np.ndarray):
    E = frame_dot(b[..., 0, :], b[..., 0, :])
    F = frame_dot(b[..., 0, :], b[..., 1, :])
    G = frame_dot(b[..., 1, :], b[..., 1, :])
    return E, F, G, E * G - F * F


def _check_regular(W2) -> None:
    bad = ~(np.asarray(W2) > DEGENERATE_W2)
    if np.any(bad):
        raise DegenerateChartError(
            f"degenerate chart: W^2 <= {DEGENERATE_W2:g} at {int(np.sum(bad))} point(s)"
        )


def surface_data(ch: Chart, u, v, with_tension: bool = False, h=None) -> SurfaceData:
    X, Y, Z = ch.coords(u, v)
    b = _tangents(X, Y, Z)
    E, F, G, W2 = first_form_from_tangents(b)
    _check_regular(W2)
    cross = frame_cross(b[..., 0, :], b[..., 1, :])
    normal = -cross / np.sqrt(W2)[..., None]
    D = _covariant_hessian(X, Y, Z, b)
    L = -frame_dot(D[..., 0, 0, :], normal)
    M = -frame_dot(D[..., 0, 1, :], normal)
    N = -frame_dot(D[..., 1, 1, :], normal)
    H = (E * N - 2.0 * F * M + G * L) / (2.0 * W2)
    point = np.stack(np.broadcast_arrays(X.value, Y.value, Z.value), axis=-1)
    P = Q = None
    if ch.is_graph:
        P = Z.d(0) + 0.5 * Y.value
        Q = Z.d(1) - 0.5 * X.value
    data = SurfaceData(E, F, G, W2, L, M, N, normal, H, b[..., 0, :], b[..., 1, :], point, P, Q)
    if with_tension:
        data.tension = _tension(ch, u, v, b, D, E, F, G, W2, h)
    return data


def tangent_basis(ch: Chart, u, v) -> tuple[np.ndarray, np.ndarray]:
    b = _tangents(*ch.coords(u, v))
    return b[..., 0, :], b[..., 1, :]


def first_form(ch: Chart, u, v):
    """(E, F, G, W2); raises on degenerate points."""
    E, F, G, W2 = first_form_from_tangents(_tangents(*ch.coords(u, v)))
    _check_regular(W2)
    return E, F, G, W2


def unit_normal(ch: Chart, u, v) -> np.ndarray:
    return surface_data(ch, u, v).normal


def second_form(ch: Chart, u, v):
    d = surface_data(ch, u, v)
    return d.L, d.M, d.N


def mean_curvature(ch: Chart, u, v) -> np.ndarray:
    """Mean curvature from the general formula.

    On graph charts the result is also checked against the graph-equation
    form; a mismatch raises ``AssertionError``.
    """
    d = surface_data(ch, u, v)
    if isinstance(ch, GraphChart):
        H_graph = graph_mean_curvature(ch.f, u, v, ch.constants)
        scale = np.maximum(1.0, np.abs(d.H))
        if np.any(np.abs(H_graph - d.H) > GRAPH_H_RTOL * scale):
            raise AssertionError("general and graph mean-curvature formulas disagree")
    return d.H


def _graph_jet(f: Expr, x, y, constants=None) -> Jet2:
    X, Y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    env = {"x": Jet2.seed(X, 0, 2), "y": Jet2.seed(Y, 1, 2), **(constants or {})}
    return eval_jet2(f, env, nparams=2)


def minimal_residual_h3(f: Expr, x, y, constants=None) -> np.ndarray:
    """Left-hand side of the H3 minimal graph equation
    f_xx (1+Q^2) - 2 f_xy P Q + f_yy (1+P^2), with P = f_x + y/2, Q = f_y - x/2."""
    j = _graph_jet(f, x, y, constants)
    P = j.d(0) + 0.5 * np.asarray(y, dtype=float)
    Q = j.d(1) - 0.5 * np.asarray(x, dtype=float)
    return j.dd(0, 0) * (1 + Q * Q) - 2.0 * j.dd(0, 1) * P * Q + j.dd(1, 1) * (1 + P * P)


def minimal_residual_e3(f: Expr, x, y, constants=None) -> np.ndarray:
    """Left-hand side of the Euclidean minimal graph equation."""
    j = _graph_jet(f, x, y, constants)
    fx, fy = j.d(0), j.d(1)
    return j.dd(0, 0) * (1 + fy * fy) - 2.0 * fx * fy * j.dd(0, 1) + j.dd(1, 1) * (1 + fx * fx)


def graph_mean_curvature(f: Expr, x, y, constants=None) -> np.ndarray:
    """H = (H3 minimal-graph residual) / (2 W^3)."""
    j = _graph_jet(f, x, y, constants)
    P = j.d(0) + 0.5 * np.asarray(y, dtype=float)
    Q = j.d(1) - 0.5 * np.asarray(x, dtype=float)
    W = np.sqrt(1.0 + P * P + Q * Q)
    return minimal_residual_h3(f, x, y, constants) / (2.0 * W**3)


def shape_operator(ch: Chart, u, v) -> np.ndarray:
    """A = I^{-1} II, shape S + (2, 2)."""
    d = surface_data(ch, u, v)
    I = np.stack([np.stack([d.E, d.F], -1), np.stack([d.F, d.G], -1)], -2)
    II = np.stack([np.stack([d.L, d.M], -1), np.stack([d.M, d.N], -1)], -2)
    return np.linalg.solve(I, II)


def _metric_at(ch: Chart, u, v):
    E, F, G, _ = first_form_from_tangents(_tangents(*ch.coords(u, v)))
    return E, F, G


def christoffel(ch: Chart, u, v, h=None) -> np.ndarray:
    """Surface Christoffel symbols Gamma^k_ij, shape S + (2, 2, 2) indexed
    [..., k, i, j], from central differences of E, F, G with step h."""
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if h is None:
        h = default_fd_step(u, v)
    h = np.broadcast_to(np.asarray(h, dtype=float), u.shape)
    if np.any(h <= 0) or np.any(u + h == u) or np.any(v + h == v):
        raise ArithmeticError("finite-difference step underflow")
    # fourth-order central stencil; the second-order one leaves errors of a
    # few 1e-6 where the metric varies fast (cylinder near its rim)
    def diff(shift):
        p1, m1 = _metric_at(ch, *shift(h)), _metric_at(ch, *shift(-h))
        p2, m2 = _metric_at(ch, *shift(2 * h)), _metric_at(ch, *shift(-2 * h))
        return [(8 * (a - b) - (c - d)) / (12 * h) for a, b, c, d in zip(p1, m1, p2, m2)]

    dg_u = diff(lambda d: (u + d, v))
    dg_v = diff(lambda d: (u, v + d))

    def as_matrix(e, f, g):
        return np.stack([np.stack([e, f], -1), np.stack([f, g], -1)], -2)

    dg = np.stack([as_matrix(*dg_u), as_matrix(*dg_v)], axis=-3)  # [..., l, i, j] = d_l g_ij
    E, F, G = _metric_at(ch, u, v)
    ginv = np.linalg.inv(as_matrix(E, F, G))
    # first kind: Gamma_{ij,l} = (d_i g_jl + d_j g_il - d_l g_ij) / 2
    first = 0.5 * (
        np.einsum("...ijl->...ijl", dg)
        + np.einsum("...jil->...ijl", dg)
        - np.einsum("...lij->...ijl", dg)
    )
    return np.einsum("...kl,...ijl->...kij", ginv, first)


def _tension(ch, u, v, b, D, E, F, G, W2, h):
    gamma = christoffel(ch, u, v, h)
    ginv = np.stack(
        [np.stack([G / W2, -F / W2], -1), np.stack([-F / W2, E / W2], -1)], -2
    )
    tangential = np.einsum("...kij,...kc->...ijc", gamma, b)
    hess = D - tangential
    return -np.einsum("...ij,...ijc->...c", ginv, hess)


def tension_field(ch: Chart, u, v, h=None) -> np.ndarray:
    """Operator of the induced metric applied to the immersion, in frame
    components: -sum g^ij (D_{d_i} d_j r - Gamma^k_ij d_k r).

    Christoffel symbols come from central differences of E, F, G, so the
    identity with 2 H N is a genuine numerical check rather than a rewrite.
    """
    return surface_data(ch, u, v, with_tension=True, h=h).tension


def s2_h1_diagnostic(f: Expr, x, y, constants=None) -> dict:
    """Compare the general numerator E N - 2 F M + G L of a graph with the
    simplified (f_xx + f_yy)/W form; returns both and their difference."""
    j = _graph_jet(f, x, y, constants)
    P = j.d(0) + 0.5 * np.asarray(y, dtype=float)
    Q = j.d(1) - 0.5 * np.asarray(x, dtype=float)
    W = np.sqrt(1.0 + P * P + Q * Q)
    general = minimal_residual_h3(f, x, y, constants) / W
    simplified = (j.dd(0, 0) + j.dd(1, 1)) / W
    return {"general": general, "simplified": simplified, "difference": general - simplified}
