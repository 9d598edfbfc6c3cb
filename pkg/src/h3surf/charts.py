"""Immersions (u, v) -> H3 that expose second-order jets of their coordinates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .core import Isometry
from .expr import Expr, eval_jet2, parse, to_text
from .jet import Jet2

Rect = tuple[tuple[float, float], tuple[float, float]]


def _seeds(u, v) -> tuple[Jet2, Jet2]:
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    return Jet2.seed(u, 0, 2), Jet2.seed(v, 1, 2)


def _as_expr(e) -> Expr:
    return parse(e) if isinstance(e, str) else e


class Chart:
    """Base class. Subclasses implement :meth:`coords`."""

    kind = "chart"
    param_names = ("u", "v")
    domain: Optional[Rect] = None

    def coords(self, u, v) -> tuple[Jet2, Jet2, Jet2]:
        raise NotImplementedError

    def point(self, u, v) -> np.ndarray:
        X, Y, Z = self.coords(u, v)
        return np.stack([X.value, Y.value, Z.value], axis=-1)

    @property
    def is_graph(self) -> bool:
        return False

    def describe(self) -> dict:
        return {"kind": self.kind}


@dataclass(frozen=True)
class GraphChart(Chart):
    """z = f(x, y) with parameters (x, y)."""

    f: Expr
    constants: Mapping[str, float] = field(default_factory=dict)
    domain: Optional[Rect] = None

    kind = "graph"
    param_names = ("x", "y")

    def __post_init__(self):
        object.__setattr__(self, "f", _as_expr(self.f))

    @property
    def is_graph(self) -> bool:
        return True

    def height(self, x, y) -> Jet2:
        X, Y = _seeds(x, y)
        return eval_jet2(self.f, {"x": X, "y": Y, **self.constants}, nparams=2)

    def coords(self, u, v):
        X, Y = _seeds(u, v)
        Z = eval_jet2(self.f, {"x": X, "y": Y, **self.constants}, nparams=2)
        return X, Y, Z

    def describe(self) -> dict:
        return {"kind": self.kind, "f": to_text(self.f), "constants": dict(self.constants)}


@dataclass(frozen=True)
class ParametricChart(Chart):
    """(t, s) -> (x(t,s), y(t,s), z(t,s))."""

    x: Expr
    y: Expr
    z: Expr
    constants: Mapping[str, float] = field(default_factory=dict)
    domain: Optional[Rect] = None

    kind = "parametric"
    param_names = ("t", "s")

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, _as_expr(getattr(self, name)))

    def coords(self, u, v):
        T, S = _seeds(u, v)
        env = {"t": T, "s": S, **self.constants}
        return tuple(eval_jet2(e, env, nparams=2) for e in (self.x, self.y, self.z))

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "x": to_text(self.x),
            "y": to_text(self.y),
            "z": to_text(self.z),
            "constants": dict(self.constants),
        }


@dataclass(frozen=True)
class S1Chart(Chart):
    """Vertical rulings over a planar curve: r(t, s) = (t, a(t), s)."""

    a: Expr
    constants: Mapping[str, float] = field(default_factory=dict)
    domain: Optional[Rect] = None

    kind = "s1"
    param_names = ("t", "s")

    def __post_init__(self):
        object.__setattr__(self, "a", _as_expr(self.a))

    def coords(self, u, v):
        T, S = _seeds(u, v)
        A = eval_jet2(self.a, {"t": T, **self.constants}, nparams=2)
        return T, A, S

    def describe(self) -> dict:
        return {"kind": self.kind, "a": to_text(self.a), "constants": dict(self.constants)}


@dataclass(frozen=True)
class S2Chart(Chart):
    """Horizontal (ker omega) rulings: r(t, s) = (t, 0, a(t)) + s (u(t), 1, t/2)."""

    a: Expr
    u: Expr
    constants: Mapping[str, float] = field(default_factory=dict)
    domain: Optional[Rect] = None

    kind = "s2"
    param_names = ("t", "s")

    def __post_init__(self):
        object.__setattr__(self, "a", _as_expr(self.a))
        object.__setattr__(self, "u", _as_expr(self.u))

    def coords(self, u, v):
        T, S = _seeds(u, v)
        env = {"t": T, **self.constants}
        A = eval_jet2(self.a, env, nparams=2)
        U = eval_jet2(self.u, env, nparams=2)
        return T + S * U, S, A + T * S * 0.5

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "a": to_text(self.a),
            "u": to_text(self.u),
            "constants": dict(self.constants),
        }


@dataclass(frozen=True)
class TransformedChart(Chart):
    """The image of ``base`` under an isometry of H3."""

    base: Chart
    g: Isometry

    kind = "transformed"

    @property
    def param_names(self):
        return self.base.param_names

    @property
    def domain(self):
        return self.base.domain

    def coords(self, u, v):
        X, Y, Z = self.base.coords(u, v)
        m, t = self.g.matrix()
        return (
            X * m[0, 0] + Y * m[0, 1] + t[0],
            X * m[1, 0] + Y * m[1, 1] + t[1],
            X * m[2, 0] + Y * m[2, 1] + Z + t[2],
        )

    def describe(self) -> dict:
        return {"kind": self.kind, "base": self.base.describe(), "isometry": list(self.g)}


def cylinder(c: float, sign: float = 1.0) -> S1Chart:
    """The vertical circular cylinder x^2 + y^2 = c as an S1 chart."""
    src = "sqrt(c - t^2)" if sign > 0 else "-sqrt(c - t^2)"
    r = float(np.sqrt(c))
    return S1Chart(parse(src), {"c": float(c)}, domain=((-r, r), (-np.inf, np.inf)))
