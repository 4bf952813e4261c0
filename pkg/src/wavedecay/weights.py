"""Space-time weights psi(t, x) and phi(t) with closed-form derivatives.

    psi = 1 + |x| - s            for |x| >= s
    psi = 1 / (1 + s - |x|)      for |x| <  s,      s = sqrt(k0) t

phi(t) is psi evaluated on the circle |x| = r0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

__all__ = ["WeightParams", "PsiValue", "psi", "eikonal_residual", "phi"]


@dataclass(frozen=True)
class WeightParams:
    k0: float
    r0: float

    def __post_init__(self) -> None:
        if not self.k0 > 0:
            raise ValueError(f"k0 must be positive, got {self.k0}")
        if not self.r0 > 0:
            raise ValueError(f"r0 must be positive, got {self.r0}")

    @property
    def speed(self) -> float:
        return math.sqrt(self.k0)


class PsiValue(NamedTuple):
    value: NDArray[np.float64]
    dt: NDArray[np.float64]
    grad: NDArray[np.float64]  # shape (..., 2)


def _check_t(t) -> NDArray[np.float64]:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    return t


def psi(t: ArrayLike, x: ArrayLike, params: WeightParams) -> PsiValue:
    """Weight value, time derivative and spatial gradient; ``x`` has trailing axis 2.

    The gradient at the origin is returned as the zero vector.
    """
    t = _check_t(t)
    x = np.asarray(x, dtype=np.float64)
    r = np.hypot(x[..., 0], x[..., 1])
    c = params.speed
    s = c * t
    outer = r >= s
    q = 1.0 / (1.0 + np.abs(s - r))  # inner-branch value; equals 1 on the interface
    value = np.where(outer, 1.0 + r - s, q)
    radial = np.where(outer, 1.0, q * q)  # d psi / d|x|
    dt = -c * radial
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, x / r[..., None], 0.0)
    grad = radial[..., None] * unit
    return PsiValue(value, dt, grad)


def eikonal_residual(t: ArrayLike, x: ArrayLike, params: WeightParams) -> NDArray[np.float64]:
    """k0 |grad psi|^2 - (psi_t)^2 from the analytic derivatives."""
    p = psi(t, x, params)
    return params.k0 * np.sum(p.grad * p.grad, axis=-1) - p.dt * p.dt


def phi(t: ArrayLike, params: WeightParams) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """(phi(t), phi'(t))."""
    t = _check_t(t)
    c = params.speed
    s = c * t
    outer = params.r0 >= s
    q = 1.0 / (1.0 + np.abs(s - params.r0))
    value = np.where(outer, 1.0 + params.r0 - s, q)
    deriv = np.where(outer, -c, -c * q * q)
    return value, deriv
