"""Scalar Beltrami operator, identity checks and finite-type fitting.

The scalar operator is used in divergence form with a leading minus:

    lap(phi) = -(1/W) [ ((G phi_u - F phi_v)/W)_u + ((-F phi_u + E phi_v)/W)_v ]

The fluxes are evaluated exactly from jets and their outer derivatives are
taken by second-order central differences.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .charts import Chart
from .core import frame_to_coord
from .geometry import _check_regular, _tangents, first_form_from_tangents, surface_data
from .jet import Jet2

ScalarField = Callable[[Jet2, Jet2, Jet2], Jet2]

TOL_EIGEN = 1e-5
TOL_MINIMAL = 1e-8


class StencilError(ValueError):
    """A finite-difference stencil leaves the chart domain."""


def coordinate(i: int) -> ScalarField:
    """The i-th global coordinate of the immersion as a scalar field."""

    def phi(X, Y, Z):
        return (X, Y, Z)[i]

    phi.__name__ = f"r{i + 1}"
    return phi


@dataclass(frozen=True)
class GridSpec:
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    nu: int
    nv: int
    h: Optional[float] = None

    def __post_init__(self):
        if self.nu < 3 or self.nv < 3:
            raise ValueError("grid needs at least 3 samples per direction")
        if not (self.u_range[1] > self.u_range[0] and self.v_range[1] > self.v_range[0]):
            raise ValueError("grid ranges must be increasing")

    @property
    def spacing(self) -> float:
        du = (self.u_range[1] - self.u_range[0]) / (self.nu - 1)
        dv = (self.v_range[1] - self.v_range[0]) / (self.nv - 1)
        return min(du, dv)

    @property
    def step(self) -> float:
        """FD step; default 1e-3 * min(grid spacing, 1)."""
        return self.h if self.h is not None else 1e-3 * min(self.spacing, 1.0)

    @property
    def diameter(self) -> float:
        return float(
            np.hypot(self.u_range[1] - self.u_range[0], self.v_range[1] - self.v_range[0])
        )

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        u = np.linspace(*self.u_range, self.nu)
        v = np.linspace(*self.v_range, self.nv)
        return np.meshgrid(u, v, indexing="ij")

    def check_inside(self, ch: Chart) -> None:
        dom = ch.domain
        if dom is None:
            return
        m = 2.0 * self.step
        (u0, u1), (v0, v1) = dom
        if not (
            self.u_range[0] - m >= u0
            and self.u_range[1] + m <= u1
            and self.v_range[0] - m >= v0
            and self.v_range[1] + m <= v1
        ):
            raise StencilError("grid must lie inside the chart domain by at least 2h")

    def describe(self) -> dict:
        return {
            "u_range": list(self.u_range),
            "v_range": list(self.v_range),
            "nu": self.nu,
            "nv": self.nv,
            "h": self.step,
        }


def _fluxes(ch: Chart, u, v, fields: list[ScalarField]):
    X, Y, Z = ch.coords(u, v)
    E, F, G, W2 = first_form_from_tangents(_tangents(X, Y, Z))
    _check_regular(W2)
    W = np.sqrt(W2)
    out = []
    for phi in fields:
        p = phi(X, Y, Z)
        pu, pv = np.broadcast_arrays(p.d(0), p.d(1))
        out.append(((G * pu - F * pv) / W, (-F * pu + E * pv) / W))
    return out, W


def _check_stencil(ch: Chart, u, v, h) -> None:
    dom = ch.domain
    if dom is None:
        return
    (u0, u1), (v0, v1) = dom
    if np.any(u - h < u0) or np.any(u + h > u1) or np.any(v - h < v0) or np.any(v + h > v1):
        raise StencilError("finite-difference stencil leaves the chart domain")


def beltrami_fields(ch: Chart, u, v, h: float, fields: list[ScalarField]) -> np.ndarray:
    """Scalar operator applied to several fields; shape (len(fields),) + S."""
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    _check_stencil(ch, u, v, h)
    up, _ = _fluxes(ch, u + h, v, fields)
    um, _ = _fluxes(ch, u - h, v, fields)
    vp, _ = _fluxes(ch, u, v + h, fields)
    vm, _ = _fluxes(ch, u, v - h, fields)
    _, W = _fluxes(ch, u, v, fields[:1])
    res = []
    for k in range(len(fields)):
        div = (up[k][0] - um[k][0]) / (2 * h) + (vp[k][1] - vm[k][1]) / (2 * h)
        res.append(-div / W)
    return np.stack(res)


def scalar_beltrami(ch: Chart, phi: ScalarField, u, v, h: float) -> np.ndarray:
    return beltrami_fields(ch, u, v, h, [phi])[0]


def beltrami_coords(ch: Chart, u, v, h: float) -> np.ndarray:
    """Scalar operator on each coordinate function; shape S + (3,)."""
    out = beltrami_fields(ch, u, v, h, [coordinate(0), coordinate(1), coordinate(2)])
    return np.moveaxis(out, 0, -1)


@dataclass
class IdentityReport:
    tension_max: float
    tension_rms: float
    coords_max: float
    coords_rms: float
    max_abs_H: float

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def beltrami_identity_check(ch: Chart, grid: GridSpec, fd_h=None) -> IdentityReport:
    """Compare, on a grid, (a) the operator applied to the immersion in frame
    components with 2 H N and (b) the scalar operator on coordinates with the
    coordinate components of 2 H N. Only (a) is an identity; (b) measures how
    far the two notions of the Laplacian of r differ in H3."""
    grid.check_inside(ch)
    U, V = grid.mesh()
    d = surface_data(ch, U, V, with_tension=True, h=fd_h)
    target = 2.0 * d.H[..., None] * d.normal
    dev_t = np.linalg.norm(d.tension - target, axis=-1)
    lap = beltrami_coords(ch, U, V, grid.step)
    target_coord = frame_to_coord(d.point, target)
    dev_c = np.linalg.norm(lap - target_coord, axis=-1)
    return IdentityReport(
        float(dev_t.max()),
        float(np.sqrt(np.mean(dev_t**2))),
        float(dev_c.max()),
        float(np.sqrt(np.mean(dev_c**2))),
        float(np.abs(d.H).max()),
    )


CLASSES = ("minimal", "one-type", "multi-eigenvalue", "not-finite-type")


@dataclass
class FiniteTypeReport:
    lam: list[Optional[float]]
    residual: list[float]
    classification: str
    holds: list[bool]
    distinct: int
    table: dict = field(repr=False, default_factory=dict)

    def as_dict(self, with_table: bool = False) -> dict:
        out = {
            "lambda": self.lam,
            "residual": self.residual,
            "classification": self.classification,
            "eigenrelation_holds": self.holds,
            "distinct_eigenvalues": self.distinct,
        }
        if with_table:
            out["table"] = {k: np.asarray(v).ravel().tolist() for k, v in self.table.items()}
        return out


def fit_eigenvalues(r: np.ndarray, lap: np.ndarray, eps: float):
    """Least-squares lambda_i with lap_i ~ lambda_i r_i, one per coordinate.

    Points with |r_i| <= eps are excluded from the fit; a coordinate with no
    admissible point gets lambda None. Residuals are RMS over all points.
    Sums run in a fixed (C) order so results are reproducible.
    """
    lams, res = [], []
    for i in range(r.shape[-1]):
        ri = r[..., i].ravel()
        li = lap[..., i].ravel()
        keep = np.abs(ri) > eps
        if not np.any(keep):
            lam = None
            resid = li
        else:
            lam = float(np.dot(li[keep], ri[keep]) / np.dot(ri[keep], ri[keep]))
            resid = li - lam * ri
        lams.append(lam)
        res.append(float(np.sqrt(np.mean(resid**2))))
    return lams, res


def classify(lams, residuals, tol: float = TOL_EIGEN):
    holds = [res <= tol * (1.0 + abs(lam or 0.0)) for lam, res in zip(lams, residuals)]
    # a coordinate that is identically zero and harmonic is compatible with any
    # eigenvalue; it does not constrain the type
    vals = [lam for lam in lams if lam is not None]
    if not all(holds):
        return "not-finite-type", holds, 0
    if all(abs(lam) <= tol for lam in vals):
        return "minimal", holds, 0
    distinct: list[float] = []
    for lam in vals:
        if not any(abs(lam - d) <= tol * (1.0 + abs(d)) for d in distinct):
            distinct.append(lam)
    if len(distinct) == 1:
        return "one-type", holds, 1
    return "multi-eigenvalue", holds, len(distinct)


def finite_type_fit(ch: Chart, grid: GridSpec, tol_eigen: float = TOL_EIGEN) -> FiniteTypeReport:
    grid.check_inside(ch)
    U, V = grid.mesh()
    r = ch.point(U, V)
    lap = beltrami_coords(ch, U, V, grid.step)
    eps = 1e-6 * (1.0 + grid.diameter)
    lams, res = fit_eigenvalues(r, lap, eps)
    cls, holds, k = classify(lams, res, tol_eigen)
    table = {"u": U, "v": V}
    for i in range(3):
        table[f"r{i + 1}"] = r[..., i]
        table[f"lap_r{i + 1}"] = lap[..., i]
    return FiniteTypeReport(lams, res, cls, holds, k, table)
