"""Ambient geometry of the Heisenberg group H3.

Points and vectors are plain array-likes whose last axis has length 3, so
every function here works on a single point or on a whole grid at once.
Frame components are always taken at an explicitly supplied base point.

Metric: ds^2 = dx^2 + dy^2 + omega^2 with omega = dz + (y dx - x dy)/2.
Orthonormal frame: e1 = dx - (y/2) dz, e2 = dy + (x/2) dz, e3 = dz.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

# Default tolerances; see tests/test_acceptance.py for where they are pinned.
ASSOC_TOL = 1e-12
ISOMETRY_TOL = 1e-10
GEODESIC_DEVIATION_TOL = 1e-10


class CoordPoint(NamedTuple):
    x: float
    y: float
    z: float


class CoordVector(NamedTuple):
    vx: float
    vy: float
    vz: float


class FrameVector(NamedTuple):
    a1: float
    a2: float
    a3: float


class GeodesicVerdict(NamedTuple):
    is_geodesic: bool
    accel_norm: float


def _split(p):
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError(f"expected last axis of length 3, got shape {p.shape}")
    return p[..., 0], p[..., 1], p[..., 2]


def group_mul(p, q) -> np.ndarray:
    """Group product (x,y,z)*(x',y',z') = (x+x', y+y', z+z'+(x'y - xy')/2)."""
    x, y, z = _split(p)
    xq, yq, zq = _split(q)
    return np.stack([x + xq, y + yq, z + zq + 0.5 * (xq * y - x * yq)], axis=-1)


def group_inv(p) -> np.ndarray:
    return -np.asarray(p, dtype=float)


def darboux_omega(p, v) -> np.ndarray:
    x, y, _ = _split(p)
    vx, vy, vz = _split(v)
    return vz + 0.5 * (y * vx - x * vy)


def coord_to_frame(p, v) -> np.ndarray:
    """Components of a coordinate vector in the frame (e1, e2, e3) at p."""
    vx, vy, _ = _split(v)
    return np.stack([vx, vy, darboux_omega(p, v)], axis=-1)


def frame_to_coord(p, a) -> np.ndarray:
    x, y, _ = _split(p)
    a1, a2, a3 = _split(a)
    return np.stack([a1, a2, a3 - 0.5 * y * a1 + 0.5 * x * a2], axis=-1)


def frame_dot(a, b) -> np.ndarray:
    return np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=-1)


def metric_dot(p, u, v) -> np.ndarray:
    return frame_dot(coord_to_frame(p, u), coord_to_frame(p, v))


def frame_cross(a, b) -> np.ndarray:
    return np.cross(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def connection(X, Y) -> np.ndarray:
    """Levi-Civita derivative of left-invariant fields, in frame components.

    Bilinear extension of
        D_e1 e2 =  e3/2,  D_e1 e3 = -e2/2,
        D_e2 e1 = -e3/2,  D_e2 e3 =  e1/2,
        D_e3 e1 = -e2/2,  D_e3 e2 =  e1/2,
    with all D_ei ei = 0.
    """
    x1, x2, x3 = _split(X)
    y1, y2, y3 = _split(Y)
    return np.stack(
        [
            0.5 * (x2 * y3 + x3 * y2),
            -0.5 * (x1 * y3 + x3 * y1),
            0.5 * (x1 * y2 - x2 * y1),
        ],
        axis=-1,
    )


class Isometry(NamedTuple):
    """Element (theta, a, b, c) of the identity component of Isom(H3).

    Acts by rotating (x, y) about the z-axis, then translating by (a, b, c)
    with the shear z += A x + B y that keeps omega invariant.
    """

    theta: float = 0.0
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        ct, st = math.cos(self.theta), math.sin(self.theta)
        A = 0.5 * (self.a * st - self.b * ct)
        B = 0.5 * (self.a * ct + self.b * st)
        m = np.array([[ct, -st, 0.0], [st, ct, 0.0], [A, B, 1.0]])
        return m, np.array([self.a, self.b, self.c])

    def compose(self, other: "Isometry") -> "Isometry":
        """Return self o other (apply ``other`` first)."""
        # Rotations are group automorphisms, so the translation part of the
        # composite is rot(self.theta) applied to other's translation, then
        # multiplied on the right by self's translation.
        t_other = isometry_apply(Isometry(self.theta), [other.a, other.b, other.c])
        t = group_mul(t_other, [self.a, self.b, self.c])
        return Isometry(self.theta + other.theta, float(t[0]), float(t[1]), float(t[2]))

    def inverse(self) -> "Isometry":
        rot_back = Isometry(-self.theta)
        t = isometry_apply(rot_back, group_inv([self.a, self.b, self.c]))
        return Isometry(-self.theta, float(t[0]), float(t[1]), float(t[2]))


def isometry_apply(g: Isometry, p) -> np.ndarray:
    m, t = g.matrix()
    return np.asarray(p, dtype=float) @ m.T + t


def isometry_push(g: Isometry, v) -> np.ndarray:
    """Differential of the (affine) isometry acting on coordinate vectors."""
    m, _ = g.matrix()
    return np.asarray(v, dtype=float) @ m.T


def translation(p) -> Isometry:
    """The isometry q -> q * p, i.e. Isometry(0, *p).

    With the product written as above, multiplication by a fixed element on
    the right is what preserves the metric.
    """
    x, y, z = (float(c) for c in np.asarray(p, dtype=float))
    return Isometry(0.0, x, y, z)


def line_is_geodesic(p, v) -> GeodesicVerdict:
    """Decide whether s -> p + s v is a geodesic of H3.

    Along the line the frame components of v are constant (omega(v) does not
    depend on s), so the covariant acceleration is connection(v, v) =
    w (vy e1 - vx e2) with w = omega_p(v). Its frame norm is |w| sqrt(vx^2+vy^2).
    """
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise ValueError("direction vector must be nonzero")
    w = float(darboux_omega(p, v))
    horiz = math.hypot(v[0], v[1])
    accel = abs(w) * horiz
    return GeodesicVerdict(accel == 0.0, accel)


def geodesic_rhs(state: np.ndarray) -> np.ndarray:
    """Geodesic ODE in (position, frame velocity) form."""
    p, a = state[:3], state[3:]
    dp = frame_to_coord(p, a)
    da = -connection(a, a)
    return np.concatenate([dp, da])


def geodesic_integrate(p, v, s_max: float, n: int) -> np.ndarray:
    """Integrate the geodesic from p with initial coordinate velocity v.

    Classical RK4 with n steps of size s_max/n; returns an (n+1, 3) array of
    coordinate points.
    """
    if n < 2:
        raise ValueError("need at least 2 steps")
    p = np.asarray(p, dtype=float)
    state = np.concatenate([p, coord_to_frame(p, v)])
    ds = s_max / n
    out = np.empty((n + 1, 3))
    out[0] = p
    for i in range(n):
        k1 = geodesic_rhs(state)
        k2 = geodesic_rhs(state + 0.5 * ds * k1)
        k3 = geodesic_rhs(state + 0.5 * ds * k2)
        k4 = geodesic_rhs(state + ds * k3)
        state = state + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(state)):
            raise FloatingPointError(f"geodesic integration diverged at step {i + 1}")
        out[i + 1] = state[:3]
    return out


def line_deviation(points: np.ndarray, p, v) -> float:
    """Maximum Euclidean distance of sampled points from the line p + s v."""
    p = np.asarray(p, dtype=float)
    d = np.asarray(v, dtype=float)
    d = d / np.linalg.norm(d)
    rel = np.asarray(points) - p
    perp = rel - np.outer(rel @ d, d)
    return float(np.max(np.linalg.norm(perp, axis=1)))
