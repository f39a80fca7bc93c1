"""Forward-mode scalar differentiation with dual numbers, plus an
independent central-finite-difference checker.

The objective protocol used by grad_of and finite_diff_check is duck-typed so
plain functions work unchanged:

  f(xs)            xs: list of floats -> float.  Fresh evaluation; free to
                   re-derive any discrete structure (clipping topology).
  f.freeze(xs)     optional.  Called once by grad_of before the dual passes;
                   records whatever discrete structure must stay fixed.
  f.dual(xs)       optional (default: f itself).  xs: floats and Duals ->
                   Dual.  Must follow the structure frozen by the last freeze.
  f.signature(xs)  optional.  Hashable topology descriptor; finite_diff_check
                   flags a coordinate when the signatures at x+h and x-h
                   differ, and excludes it from the verdict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Union

import numpy as np

__all__ = ["Dual", "GradReport", "FdReport", "grad_of", "finite_diff_check",
           "cos", "sin", "sqrt", "hypot"]

Scalar = Union[float, "Dual"]


@dataclass(frozen=True)
class Dual:
    """Value plus derivative with respect to a single seed coordinate."""

    a: float
    b: float = 0.0

    def __add__(self, other):
        o = _coerce(other)
        return Dual(self.a + o.a, self.b + o.b)

    __radd__ = __add__

    def __sub__(self, other):
        o = _coerce(other)
        return Dual(self.a - o.a, self.b - o.b)

    def __rsub__(self, other):
        o = _coerce(other)
        return Dual(o.a - self.a, o.b - self.b)

    def __mul__(self, other):
        o = _coerce(other)
        return Dual(self.a * o.a, self.a * o.b + self.b * o.a)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = _coerce(other)
        return Dual(self.a / o.a, (self.b * o.a - self.a * o.b) / (o.a * o.a))

    def __rtruediv__(self, other):
        return _coerce(other).__truediv__(self)

    def __neg__(self):
        return Dual(-self.a, -self.b)

    def __abs__(self):
        # subgradient 0 at the kink
        if self.a > 0.0:
            return self
        if self.a < 0.0:
            return -self
        return Dual(0.0, 0.0)

    def __pow__(self, k):
        if not isinstance(k, (int, float)):
            return NotImplemented
        return Dual(self.a ** k, k * self.a ** (k - 1) * self.b)

    # branching in replayed code compares primal values
    def __lt__(self, other):
        return self.a < _value(other)

    def __le__(self, other):
        return self.a <= _value(other)

    def __gt__(self, other):
        return self.a > _value(other)

    def __ge__(self, other):
        return self.a >= _value(other)

    def __float__(self):
        return self.a


def _coerce(x) -> Dual:
    return x if isinstance(x, Dual) else Dual(float(x), 0.0)


def _value(x) -> float:
    return x.a if isinstance(x, Dual) else float(x)


def cos(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.cos(x.a), -math.sin(x.a) * x.b)
    return math.cos(x)


def sin(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        return Dual(math.sin(x.a), math.cos(x.a) * x.b)
    return math.sin(x)


def sqrt(x: Scalar) -> Scalar:
    if isinstance(x, Dual):
        r = math.sqrt(x.a)
        return Dual(r, 0.0 if r == 0.0 else 0.5 * x.b / r)
    return math.sqrt(x)


def hypot(x: Scalar, y: Scalar) -> Scalar:
    return sqrt(x * x + y * y)


@dataclass
class GradReport:
    """Loss value and its gradient in the coordinate layout of the input."""

    value: float
    grad: np.ndarray

    def __post_init__(self):
        self.grad = np.asarray(self.grad, dtype=np.float64)


@dataclass
class FdReport:
    """Per-coordinate comparison of analytic and central-difference gradients."""

    value: float
    grad: np.ndarray
    fd_grad: np.ndarray
    rel_err: np.ndarray
    flagged: np.ndarray
    rtol: float

    @property
    def n_flagged(self) -> int:
        return int(self.flagged.sum())

    @property
    def max_rel_err(self) -> float:
        """Largest relative error over non-flagged coordinates (0 if all flagged)."""
        keep = ~self.flagged
        return float(self.rel_err[keep].max()) if keep.any() else 0.0

    @property
    def passed(self) -> bool:
        return self.max_rel_err <= self.rtol


ObjectiveFn = Callable[[Sequence[Scalar]], Scalar]


def _coords_of(code_or_coords) -> List[float]:
    coords = getattr(code_or_coords, "coords", code_or_coords)
    return [float(c) for c in coords]


def grad_of(f: ObjectiveFn, code) -> GradReport:
    """Gradient of a scalar objective over a code's coordinates.

    One forward pass per coordinate, all sharing the discrete structure frozen
    at the primal point.  Deterministic: repeated calls on equal inputs give
    bit-identical reports.
    """
    xs = _coords_of(code)
    n = len(xs)
    freeze = getattr(f, "freeze", None)
    if freeze is not None:
        freeze(xs)
    primal = _value(f(xs))
    dual_f = getattr(f, "dual", f)
    grad = np.zeros(n)
    for i in range(n):
        seeded = [Dual(x, 1.0 if j == i else 0.0) for j, x in enumerate(xs)]
        out = dual_f(seeded)
        grad[i] = out.b if isinstance(out, Dual) else 0.0
    return GradReport(primal, grad)


def finite_diff_check(f: ObjectiveFn, code, h: float = 1e-6, rtol: float = 1e-4) -> FdReport:
    """Compare grad_of against central differences (f(x+h) - f(x-h)) / 2h.

    Probe evaluations are fresh (topology re-derived), so a coordinate whose
    probes land on different branches is meaningless to compare; when f
    exposes a signature, such coordinates are flagged and excluded from the
    pass verdict.
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    xs = _coords_of(code)
    n = len(xs)
    report = grad_of(f, code)
    signature = getattr(f, "signature", None)
    fd = np.zeros(n)
    flagged = np.zeros(n, dtype=bool)
    for i in range(n):
        xp = list(xs)
        xm = list(xs)
        xp[i] += h
        xm[i] -= h
        fd[i] = (_value(f(xp)) - _value(f(xm))) / (2.0 * h)
        if signature is not None:
            flagged[i] = signature(xp) != signature(xm)
    denom = np.maximum(np.abs(report.grad), np.abs(fd))
    rel = np.where(denom < 1e-7, 0.0, np.abs(report.grad - fd) / np.maximum(denom, 1e-300))
    return FdReport(report.value, report.grad, fd, rel, flagged, rtol)
