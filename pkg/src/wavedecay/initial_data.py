"""Compactly supported initial data (u0, u1) and the norms the estimates use."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import bump
from .field import Grid2D, Region, ScalarField, integrate, integrate_array

__all__ = ["InitialData", "DataError", "PRESETS", "make_bump", "moment", "make_dataset"]

PRESETS = ("bump-velocity", "bump-displacement", "dipole-velocity", "zero")


class DataError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class InitialData:
    u0: ScalarField
    u1: ScalarField
    L: float
    norm_u0_l2: float
    norm_u1_l2: float
    norm_u1_l1: float
    norm_u1_linf: float
    moment: float
    preset: str = "custom"

    @classmethod
    def from_fields(cls, u0: ScalarField, u1: ScalarField, L: float, preset: str = "custom") -> "InitialData":
        if u0.grid != u1.grid:
            raise DataError("u0 and u1 live on different grids")
        r = u0.grid.radius()
        outside = r > L
        if np.any(u0.values[outside] != 0) or np.any(u1.values[outside] != 0):
            raise DataError(f"initial data not supported in the disc of radius L = {L}")
        g = u0.grid
        return cls(
            u0=u0, u1=u1, L=float(L),
            norm_u0_l2=math.sqrt(integrate_array(u0.values ** 2, g, Region.full())),
            norm_u1_l2=math.sqrt(integrate_array(u1.values ** 2, g, Region.full())),
            norm_u1_l1=integrate_array(np.abs(u1.values), g, Region.full()),
            norm_u1_linf=float(np.max(np.abs(u1.values))),
            moment=moment(u1),
            preset=preset,
        )

    @property
    def grid(self) -> Grid2D:
        return self.u0.grid


def make_bump(center, radius: float, amplitude: float, grid: Grid2D) -> ScalarField:
    """amplitude * exp(1 - 1/(1 - s^2)) with s = |x - center| / radius; zero for s >= 1."""
    if not radius > 0:
        raise DataError(f"bump radius must be positive, got {radius}")
    x1, x2 = grid.coordinates()
    s = np.hypot(x1 - center[0], x2 - center[1]) / radius
    return ScalarField(grid, amplitude * bump(s))


def moment(u1: ScalarField) -> float:
    """Zeroth moment M = integral of u1 over the whole grid."""
    return integrate(u1, Region.full())


def make_dataset(preset: str, grid: Grid2D, L: float = 1.0, amplitude: float = 1.0) -> InitialData:
    """Named initial-data presets supported in the disc of radius ``L``.

    ``bump-velocity``      u0 = 0, u1 a centred bump of radius L (nonzero moment).
    ``bump-displacement``  u0 a centred bump of radius L, u1 = 0.
    ``dipole-velocity``    u0 = 0, u1 two opposite-sign bumps of radius L/2 at
                           (+-L/2, 0); odd in x1 so the moment vanishes.
    ``zero``               both fields identically zero.
    """
    if not L > 0:
        raise DataError(f"L must be positive, got {L}")
    if L > grid.half_width:
        raise DataError(f"support radius L = {L} exceeds the grid half width {grid.half_width}")
    zero = grid.zeros()
    if preset == "bump-velocity":
        u0, u1 = zero, make_bump((0.0, 0.0), L, amplitude, grid)
    elif preset == "bump-displacement":
        u0, u1 = make_bump((0.0, 0.0), L, amplitude, grid), zero
    elif preset == "dipole-velocity":
        left = make_bump((-0.5 * L, 0.0), 0.5 * L, amplitude, grid).values
        # mirror the left lobe so the pair is exactly odd on the grid
        u1 = ScalarField(grid, left - left[::-1, :])
        u0 = zero
    elif preset == "zero":
        u0, u1 = zero, zero
    else:
        raise DataError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    return InitialData.from_fields(u0, u1, L, preset)
