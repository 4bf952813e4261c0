"""Uniform square grids, scalar fields and the discrete operators acting on them.

The grid is the square [-X, X]^2 sampled on an odd number of nodes per side so
that the origin is a node.  Arrays are indexed ``values[i, j]`` with
``x1 = (i - m) * dx`` and ``x2 = (j - m) * dx`` where ``m = (N - 1) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.typing import NDArray

__all__ = [
    "Grid2D",
    "ScalarField",
    "Region",
    "GridError",
    "gradient",
    "div_K_grad",
    "laplacian5",
    "integrate",
    "region_weights",
    "face_coefficients",
]

# Sub-samples per cell edge used for partial-cell quadrature weights.
SUBSAMPLES = 4


class GridError(ValueError):
    """Raised for malformed grids or fields living on different grids."""


@dataclass(frozen=True)
class Grid2D:
    nodes_per_side: int
    spacing: float

    def __post_init__(self) -> None:
        if self.nodes_per_side < 3 or self.nodes_per_side % 2 == 0:
            raise GridError(f"nodes_per_side must be odd and >= 3, got {self.nodes_per_side}")
        if not self.spacing > 0:
            raise GridError(f"spacing must be positive, got {self.spacing}")

    @classmethod
    def covering(cls, half_width: float, spacing: float) -> "Grid2D":
        """Smallest grid with the given spacing whose half width is >= ``half_width``."""
        if half_width < 0:
            raise GridError("half_width must be non-negative")
        m = max(1, int(math.ceil(half_width / spacing - 1e-9)))
        return cls(2 * m + 1, spacing)

    @property
    def center_index(self) -> int:
        return (self.nodes_per_side - 1) // 2

    @property
    def half_width(self) -> float:
        return self.center_index * self.spacing

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nodes_per_side, self.nodes_per_side)

    @property
    def cell_area(self) -> float:
        return self.spacing * self.spacing

    def axis(self) -> NDArray[np.float64]:
        m = self.center_index
        return np.arange(-m, m + 1, dtype=np.float64) * self.spacing

    def coordinates(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        x = self.axis()
        return np.meshgrid(x, x, indexing="ij")

    def radius(self) -> NDArray[np.float64]:
        x1, x2 = self.coordinates()
        return np.hypot(x1, x2)

    def box(self, rho: float) -> slice:
        """Index slice (same for both axes) covering the closed disc of radius ``rho``."""
        m = self.center_index
        w = min(m, int(math.ceil(rho / self.spacing)) + 1)
        return slice(m - w, m + w + 1)

    def zeros(self) -> "ScalarField":
        return ScalarField(self, np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid2D
    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != self.grid.shape:
            raise GridError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise GridError("field contains non-finite values")
        if values.flags.writeable:
            values = values.copy()
            values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: Grid2D, func) -> "ScalarField":
        x1, x2 = grid.coordinates()
        return cls(grid, np.broadcast_to(func(x1, x2), grid.shape).astype(np.float64))

    def __add__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        _same_grid(self, other)
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


def _same_grid(*fields: ScalarField) -> Grid2D:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridError("fields live on different grids")
    return grid


def gradient(f: ScalarField) -> tuple[ScalarField, ScalarField]:
    """Second-order central differences, one-sided second order on the boundary ring."""
    g1, g2 = np.gradient(f.values, f.grid.spacing, edge_order=2)
    return ScalarField(f.grid, g1), ScalarField(f.grid, g2)


def face_coefficients(k: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Arithmetic-mean face values of a nodal coefficient.

    Returns ``kx`` of shape (N+1, N) for faces normal to x1 and ``ky`` of shape
    (N, N+1) for faces normal to x2.  Faces on the outer boundary take the value
    of their single interior neighbour.
    """
    n = k.shape[0]
    kx = np.empty((n + 1, n))
    kx[1:-1] = 0.5 * (k[1:] + k[:-1])
    kx[0] = k[0]
    kx[-1] = k[-1]
    ky = np.empty((n, n + 1))
    ky[:, 1:-1] = 0.5 * (k[:, 1:] + k[:, :-1])
    ky[:, 0] = k[:, 0]
    ky[:, -1] = k[:, -1]
    return kx, ky


def _flux_divergence(kx, ky, u: NDArray[np.float64], dx: float) -> NDArray[np.float64]:
    n = u.shape[0]
    dux = np.empty((n + 1, n))
    dux[1:-1] = u[1:] - u[:-1]
    dux[0] = u[0]
    dux[-1] = -u[-1]
    duy = np.empty((n, n + 1))
    duy[:, 1:-1] = u[:, 1:] - u[:, :-1]
    duy[:, 0] = u[:, 0]
    duy[:, -1] = -u[:, -1]
    fx = kx * dux
    fy = ky * duy
    return (fx[1:] - fx[:-1] + fy[:, 1:] - fy[:, :-1]) / (dx * dx)


def div_K_grad(K, u: ScalarField) -> ScalarField:
    """Conservative five-point discretisation of div(K grad u) with zero exterior values.

    ``K`` may be a :class:`~wavedecay.coefficients.CoefficientField` or a plain
    :class:`ScalarField` of nodal coefficient samples.
    """
    samples = getattr(K, "samples", K)
    grid = _same_grid(samples, u)
    kx, ky = face_coefficients(samples.values)
    return ScalarField(grid, _flux_divergence(kx, ky, u.values, grid.spacing))


def laplacian5(u: ScalarField) -> ScalarField:
    """Plain five-point Laplacian with zero exterior values."""
    v = u.values
    p = np.pad(v, 1)
    lap = p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * v
    return ScalarField(u.grid, lap / u.grid.cell_area)


@dataclass(frozen=True)
class Region:
    """Integration region: the full domain, a closed disc, or an annulus ``a < |x| <= b``."""

    kind: str
    inner: float = 0.0
    outer: float = math.inf

    def __post_init__(self) -> None:
        if self.kind not in ("full", "disc", "annulus", "exterior"):
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.inner < 0 or self.outer < 0:
            raise ValueError("region radii must be non-negative")
        if self.inner > self.outer:
            raise ValueError("annulus inner radius exceeds outer radius")

    @classmethod
    def full(cls) -> "Region":
        return cls("full")

    @classmethod
    def disc(cls, radius: float) -> "Region":
        return cls("disc", 0.0, radius)

    @classmethod
    def annulus(cls, inner: float, outer: float) -> "Region":
        return cls("annulus", inner, outer)

    @classmethod
    def exterior(cls, radius: float) -> "Region":
        """Complement of the closed disc of radius ``radius``."""
        return cls("exterior", radius, math.inf)


@lru_cache(maxsize=64)
def _disc_fractions(grid: Grid2D, rho: float) -> tuple[slice, NDArray[np.float64]]:
    sl = grid.box(rho)
    x = grid.axis()[sl]
    h = grid.spacing
    offsets = (np.arange(SUBSAMPLES) + 0.5) / SUBSAMPLES * h - 0.5 * h
    frac = np.zeros((x.size, x.size))
    for a in offsets:
        xa = (x + a)[:, None]
        for b in offsets:
            xb = (x + b)[None, :]
            frac += (xa * xa + xb * xb) <= rho * rho
    frac /= SUBSAMPLES * SUBSAMPLES
    frac.flags.writeable = False
    return sl, frac


def region_weights(grid: Grid2D, region: Region) -> tuple[slice, NDArray[np.float64], bool]:
    """Partial-cell fractions for ``region``.

    Returns ``(box, fractions, complement)``: the region's weight is
    ``fractions`` on ``box`` (or one minus that, everywhere, when ``complement``).
    """
    if region.kind == "full":
        return slice(None), np.ones(grid.shape), False
    if region.kind in ("disc", "annulus") and region.outer > grid.half_width + 1e-12:
        raise GridError(f"radius {region.outer} exceeds grid half width {grid.half_width}")
    if region.kind == "disc":
        return (*_disc_fractions(grid, float(region.outer)), False)
    if region.kind == "exterior":
        sl, frac = _disc_fractions(grid, float(region.inner))
        return sl, frac, True
    sl_out, frac_out = _disc_fractions(grid, float(region.outer))
    sl_in, frac_in = _disc_fractions(grid, float(region.inner))
    frac = frac_out.copy()
    off = sl_in.start - sl_out.start
    n_in = frac_in.shape[0]
    frac[off:off + n_in, off:off + n_in] -= frac_in
    return sl_out, frac, False


def integrate_array(values: NDArray[np.float64], grid: Grid2D, region: Region) -> float:
    sl, frac, complement = region_weights(grid, region)
    area = grid.cell_area
    if region.kind == "full":
        return float(np.sum(values) * area)
    inside = float(np.sum(values[sl, sl] * frac) * area)
    if complement:
        return float(np.sum(values) * area) - inside
    return inside


def integrate(f: ScalarField, region: Region | None = None) -> float:
    """Cell-weighted quadrature of ``f`` over ``region`` (default: the full grid)."""
    return integrate_array(f.values, f.grid, region or Region.full())
