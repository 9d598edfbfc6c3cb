"""Second-order forward-mode jets.

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to ``n`` declared parameters. Values may be arrays: the parameter
axes are always the trailing ones, so a jet over a grid has
``value.shape == S``, ``grad.shape == S + (n,)`` and
``hess.shape == S + (n, n)``.

Every Hessian update is built from symmetric pieces (``outer(g, g)`` or
``outer(a, b) + outer(b, a)``), so stored Hessians are exactly symmetric.
"""

from __future__ import annotations

import numpy as np


class JetDomainError(ArithmeticError):
    """Raised when a jet operation leaves its domain (sqrt/log of a
    negative number, division by zero, non-finite derivatives)."""


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _sym_outer(a, b):
    return _outer(a, b) + _outer(b, a)


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = np.asarray(value, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def nparams(self) -> int:
        return self.grad.shape[-1]

    @classmethod
    def constant(cls, c, n: int) -> "Jet2":
        c = np.asarray(c, dtype=float)
        return cls(c, np.zeros(c.shape + (n,)), np.zeros(c.shape + (n, n)))

    @classmethod
    def seed(cls, value, index: int, n: int) -> "Jet2":
        value = np.asarray(value, dtype=float)
        grad = np.zeros(value.shape + (n,))
        grad[..., index] = 1.0
        return cls(value, grad, np.zeros(value.shape + (n, n)))

    def _lift(self, other) -> "Jet2":
        if isinstance(other, Jet2):
            return other
        return Jet2.constant(other, self.nparams)

    def d(self, i: int) -> np.ndarray:
        return self.grad[..., i]

    def dd(self, i: int, j: int) -> np.ndarray:
        return self.hess[..., i, j]

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    # arithmetic -------------------------------------------------------

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __add__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            return Jet2(self.value + other, self.grad, self.hess)
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __sub__(self, other) -> "Jet2":
        return self + (-self._lift(other))

    def __rsub__(self, other) -> "Jet2":
        return (-self) + other

    def __mul__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            return Jet2(self.value * c, self.grad * c[..., None], self.hess * c[..., None, None])
        a, b = self, other
        va, vb = a.value[..., None], b.value[..., None]
        return Jet2(
            a.value * b.value,
            a.grad * vb + b.grad * va,
            a.hess * vb[..., None] + b.hess * va[..., None] + _sym_outer(a.grad, b.grad),
        )

    __rmul__ = __mul__

    def reciprocal(self) -> "Jet2":
        if np.any(self.value == 0.0):
            raise JetDomainError("division by zero")
        inv = 1.0 / self.value
        return self.apply(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other) -> "Jet2":
        if not isinstance(other, Jet2):
            c = np.asarray(other, dtype=float)
            if np.any(c == 0.0):
                raise JetDomainError("division by zero")
            return self * (1.0 / c)
        return self * other.reciprocal()

    def __rtruediv__(self, other) -> "Jet2":
        return self.reciprocal() * other

    def ipow(self, n: int) -> "Jet2":
        """Integer power by repeated multiplication."""
        if n == 0:
            return Jet2.constant(np.ones_like(self.value), self.nparams)
        base = self if n > 0 else self.reciprocal()
        out = base
        for _ in range(abs(n) - 1):
            out = out * base
        return out

    def apply(self, f0, f1, f2) -> "Jet2":
        """Compose with a scalar function given its value and first two
        derivatives evaluated at ``self.value``."""
        f1 = np.asarray(f1, dtype=float)
        f2 = np.asarray(f2, dtype=float)
        return Jet2(
            f0,
            self.grad * f1[..., None],
            self.hess * f1[..., None, None] + _outer(self.grad, self.grad) * f2[..., None, None],
        )

    def compose(self, inner: "list[Jet2]") -> "Jet2":
        """Chain rule: ``self`` is a jet in k parameters, ``inner`` gives those
        k parameters as jets in some other n parameters."""
        k = self.nparams
        if len(inner) != k:
            raise ValueError(f"need {k} inner jets, got {len(inner)}")
        J = np.stack([j.grad for j in inner], axis=-2)  # S + (k, n)
        grad = np.einsum("...k,...kn->...n", self.grad, J)
        hess = np.einsum("...kn,...kl,...lm->...nm", J, self.hess, J)
        for c in range(k):
            hess = hess + self.grad[..., c, None, None] * inner[c].hess
        hess = 0.5 * (hess + np.swapaxes(hess, -1, -2))
        return Jet2(self.value, grad, hess)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.value))
            and np.all(np.isfinite(self.grad))
            and np.all(np.isfinite(self.hess))
        )


def sqrt(j: Jet2) -> Jet2:
    if np.any(j.value <= 0.0):
        raise JetDomainError("sqrt of non-positive value")
    r = np.sqrt(j.value)
    return j.apply(r, 0.5 / r, -0.25 / (r * j.value))


def exp(j: Jet2) -> Jet2:
    e = np.exp(j.value)
    return j.apply(e, e, e)


def log(j: Jet2) -> Jet2:
    if np.any(j.value <= 0.0):
        raise JetDomainError("log of non-positive value")
    inv = 1.0 / j.value
    return j.apply(np.log(j.value), inv, -inv * inv)


def sin(j: Jet2) -> Jet2:
    s, c = np.sin(j.value), np.cos(j.value)
    return j.apply(s, c, -s)


def cos(j: Jet2) -> Jet2:
    s, c = np.sin(j.value), np.cos(j.value)
    return j.apply(c, -s, -c)


def tan(j: Jet2) -> Jet2:
    c = np.cos(j.value)
    if np.any(c == 0.0):
        raise JetDomainError("tan at a pole")
    t = np.tan(j.value)
    sec2 = 1.0 + t * t
    return j.apply(t, sec2, 2.0 * t * sec2)


def atan(j: Jet2) -> Jet2:
    q = 1.0 / (1.0 + j.value * j.value)
    return j.apply(np.arctan(j.value), q, -2.0 * j.value * q * q)


def absolute(j: Jet2) -> Jet2:
    return j.apply(np.abs(j.value), np.sign(j.value), np.zeros_like(j.value))


def rpow(j: Jet2, p: float) -> Jet2:
    """Real power j**p for a positive base."""
    if np.any(j.value <= 0.0):
        raise JetDomainError("non-integer power of non-positive base")
    v = j.value
    return j.apply(v**p, p * v ** (p - 1.0), p * (p - 1.0) * v ** (p - 2.0))


FUNCTIONS = {
    "sqrt": sqrt,
    "sin": sin,
    "cos": cos,
    "tan": tan,
    "exp": exp,
    "log": log,
    "atan": atan,
    "abs": absolute,
}
