"""Smooth coordinate maps and finite-difference differentiation helpers.

Every derivative in the engine goes through one of two routes: an analytic
callback attached to the object being differentiated, or central finite
differences.  The default step is H_FD = 1e-5 with a second-order stencil;
a fourth-order stencil is available where accumulated truncation error
matters (trajectory-grade derivatives).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

H_FD = 1e-5


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def partial_diff(f: Callable, x: np.ndarray, i: int, h: float = H_FD, order: int = 2):
    """Central finite difference of f along coordinate i at x.

    f may return a scalar or an ndarray; the result has the same shape.
    """
    x = _as_array(x)
    e = np.zeros_like(x)
    e[i] = 1.0
    if order == 2:
        return (_as_array(f(x + h * e)) - _as_array(f(x - h * e))) / (2.0 * h)
    if order == 4:
        return (
            _as_array(f(x - 2 * h * e))
            - 8.0 * _as_array(f(x - h * e))
            + 8.0 * _as_array(f(x + h * e))
            - _as_array(f(x + 2 * h * e))
        ) / (12.0 * h)
    raise ValueError(f"unsupported stencil order {order}")


def directional_diff(f: Callable, x: np.ndarray, w: np.ndarray,
                     h: float = H_FD, order: int = 2):
    """Derivative of f at x along the fixed direction vector w."""
    x = _as_array(x)
    w = _as_array(w)
    scale = np.max(np.abs(w))
    if scale == 0.0:
        probe = _as_array(f(x))
        return np.zeros_like(probe)
    # Step relative to the direction's magnitude keeps roundoff balanced.
    hh = h / scale
    if order == 2:
        return (_as_array(f(x + hh * w)) - _as_array(f(x - hh * w))) / (2.0 * hh)
    if order == 4:
        return (
            _as_array(f(x - 2 * hh * w))
            - 8.0 * _as_array(f(x - hh * w))
            + 8.0 * _as_array(f(x + hh * w))
            - _as_array(f(x + 2 * hh * w))
        ) / (12.0 * hh)
    raise ValueError(f"unsupported stencil order {order}")


def jacobian_fd(f: Callable, x: np.ndarray, h: float = H_FD, order: int = 2) -> np.ndarray:
    """Jacobian d f^k / d x^i, shape (out, in)."""
    x = _as_array(x)
    n = x.size
    if n == 0:
        out = _as_array(f(x))
        return np.zeros(out.shape + (0,))
    cols = [partial_diff(f, x, i, h=h, order=order) for i in range(n)]
    return np.stack([_as_array(c) for c in cols], axis=-1)


def second_partial_diff(f: Callable, x: np.ndarray, i: int, j: int,
                        h: float = 1e-4) -> np.ndarray:
    """Mixed second central difference d^2 f / dx^i dx^j."""
    x = _as_array(x)
    ei = np.zeros_like(x)
    ej = np.zeros_like(x)
    ei[i] = 1.0
    ej[j] = 1.0
    if i == j:
        return (_as_array(f(x + h * ei)) - 2.0 * _as_array(f(x))
                + _as_array(f(x - h * ei))) / (h * h)
    return (
        _as_array(f(x + h * ei + h * ej))
        - _as_array(f(x + h * ei - h * ej))
        - _as_array(f(x - h * ei + h * ej))
        + _as_array(f(x - h * ei - h * ej))
    ) / (4.0 * h * h)


@dataclass(frozen=True)
class SmoothMap:
    """A smooth coordinate map R^n -> R^k with an optional analytic Jacobian."""

    fn: Callable[[np.ndarray], np.ndarray]
    jac: Optional[Callable[[np.ndarray], np.ndarray]] = None
    h: float = H_FD

    def __call__(self, x) -> np.ndarray:
        return _as_array(self.fn(_as_array(x)))

    def jacobian(self, x) -> np.ndarray:
        x = _as_array(x)
        if self.jac is not None:
            return _as_array(self.jac(x))
        return jacobian_fd(self.__call__, x, h=self.h)

    @staticmethod
    def identity(n: int) -> "SmoothMap":
        eye = np.eye(n)
        return SmoothMap(fn=lambda x: _as_array(x), jac=lambda x: eye)


@dataclass(frozen=True)
class InvertibleMap(SmoothMap):
    """SmoothMap together with an explicit inverse (used by chart changes)."""

    inv: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def inverse(self, x) -> np.ndarray:
        if self.inv is None:
            raise ValueError("map carries no inverse")
        return _as_array(self.inv(_as_array(x)))

    @staticmethod
    def identity(n: int) -> "InvertibleMap":
        eye = np.eye(n)
        return InvertibleMap(fn=lambda x: _as_array(x), jac=lambda x: eye,
                             inv=lambda x: _as_array(x))


def check_finite(arr: np.ndarray, what: str):
    """Raise if arr has non-finite entries, naming the offending slot."""
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))
        raise EvaluationError(f"non-finite value in {what} at index {tuple(bad[0])}")
    return arr


class EvaluationError(RuntimeError):
    """A coefficient function produced a non-finite value."""


class DegeneracyError(RuntimeError):
    """A matrix that must be invertible is numerically singular."""

    def __init__(self, msg: str, point=None, cond: float | None = None):
        super().__init__(msg)
        self.point = point
        self.cond = cond
