"""Energy densities, localized energy and the running terms of the Morawetz identity.

Energies are evaluated at half steps.  With ``u`` at t_n and ``up`` at t_{n-1}
the density is

    e = 0.5 ((u - up)/dt)^2 + 0.25/dx^2 * sum over the four faces of K_f (D u)(D up)

whose integral is exactly conserved by the leapfrog scheme.  At t = 0 the
same formula is used with u = up = u0 and the velocity replaced by u1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import NDArray

from ..field import Grid2D, Region, ScalarField, face_coefficients, gradient, integrate, region_weights

__all__ = [
    "EnergyRecord",
    "MorawetzLedger",
    "DiagnosticsError",
    "energy_density",
    "initial_energy_density",
    "energy",
    "local_energy",
    "compute_J0",
    "k_term_rate",
    "morawetz_residual",
]


class DiagnosticsError(ValueError):
    pass


@dataclass(frozen=True)
class EnergyRecord:
    t: float
    E_total: float
    E_loc: float
    E_ext: float
    l2_norm: float
    weighted_ext: float
    support_radius: float
    step: int = 0


@dataclass(frozen=True)
class MorawetzLedger:
    """Snapshot of the Morawetz identity terms at time ``t``.

    ``K_integral`` is the trapezoid-in-time accumulation of ``k_rate``, the
    instantaneous value of 0.5 * integral of (x . grad K)|grad u|^2.
    """

    t: float
    J0: float
    E0: float
    K_integral: float
    cross_ut_u: float
    cross_ut_xgradu: float
    k_rate: float

    @classmethod
    def start(cls, J0: float, E0: float, k_rate: float, cross_ut_u: float, cross_ut_xgradu: float) -> "MorawetzLedger":
        return cls(0.0, J0, E0, 0.0, cross_ut_u, cross_ut_xgradu, k_rate)

    def advance(self, t: float, k_rate: float, cross_ut_u: float, cross_ut_xgradu: float) -> "MorawetzLedger":
        if t < self.t:
            raise DiagnosticsError("ledger time must be nondecreasing")
        acc = self.K_integral + 0.5 * (t - self.t) * (self.k_rate + k_rate)
        return replace(self, t=t, K_integral=acc, cross_ut_u=cross_ut_u,
                       cross_ut_xgradu=cross_ut_xgradu, k_rate=k_rate)


def _padded_box(a: NDArray[np.float64], lo: int, hi: int) -> NDArray[np.float64]:
    """Rows/cols lo-1 .. hi of ``a`` (inclusive), zero where outside the grid."""
    n = a.shape[0]
    out = np.zeros((hi - lo + 2, hi - lo + 2))
    s0, s1 = max(lo - 1, 0), min(hi + 1, n)
    out[s0 - lo + 1:s1 - lo + 1, s0 - lo + 1:s1 - lo + 1] = a[s0:s1, s0:s1]
    return out


def _bounds(n: int, box: slice | None) -> tuple[int, int]:
    if box is None:
        return 0, n
    lo, hi, _ = box.indices(n)
    return lo, hi


def _potential_density(u, up, kx, ky, dx, lo, hi):
    pu = _padded_box(u, lo, hi)
    pp = _padded_box(up, lo, hi)
    dxn = np.diff(pu, axis=0)[:, 1:-1]
    dxp = np.diff(pp, axis=0)[:, 1:-1]
    dyn = np.diff(pu, axis=1)[1:-1, :]
    dyp = np.diff(pp, axis=1)[1:-1, :]
    fx = kx[lo:hi + 1, lo:hi] * dxn * dxp
    fy = ky[lo:hi, lo:hi + 1] * dyn * dyp
    return 0.25 * (fx[1:] + fx[:-1] + fy[:, 1:] + fy[:, :-1]) / (dx * dx)


def energy_density(u, up, kx, ky, dx: float, dt: float, box: slice | None = None) -> NDArray[np.float64]:
    """Half-step energy density on ``box`` (both axes), from raw arrays."""
    lo, hi = _bounds(u.shape[0], box)
    vel = (u[lo:hi, lo:hi] - up[lo:hi, lo:hi]) / dt
    return 0.5 * vel * vel + _potential_density(u, up, kx, ky, dx, lo, hi)


def initial_energy_density(data, K) -> ScalarField:
    """e(0, x) = 0.5 u1^2 + 0.5 K |grad u0|^2 in the face form used throughout."""
    u0 = data.u0.values
    kx, ky = face_coefficients(K.samples.values)
    n = u0.shape[0]
    pot = _potential_density(u0, u0, kx, ky, data.grid.spacing, 0, n)
    return ScalarField(data.grid, 0.5 * data.u1.values ** 2 + pot)


def _state_dt(state) -> float:
    if state.step <= 0:
        raise DiagnosticsError("state carries no time step; pass dt explicitly")
    return state.t / state.step


def energy(state, K, dt: float | None = None) -> tuple[float, ScalarField]:
    """Total energy at the half step before ``state.t`` and its nodal density."""
    dt = _state_dt(state) if dt is None else dt
    kx, ky = face_coefficients(K.samples.values)
    grid = state.u_curr.grid
    e = energy_density(state.u_curr.values, state.u_prev.values, kx, ky, grid.spacing, dt)
    field = ScalarField(grid, e)
    return integrate(field), field


def local_energy(state, K, R: float, dt: float | None = None) -> float:
    """Energy in the closed disc of radius ``R`` (requires R > r0)."""
    if not R > K.r0:
        raise DiagnosticsError(f"R = {R} must exceed r0 = {K.r0}")
    _, e = energy(state, K, dt)
    return integrate(e, Region.disc(R))


def disc_integral_of_box(values: NDArray[np.float64], grid: Grid2D, rho: float) -> float:
    """Integral over the disc of radius ``rho`` of a density sampled on ``grid.box(rho)``."""
    sl, frac, _ = region_weights(grid, Region.disc(rho))
    return float(np.sum(values * frac) * grid.cell_area)


def compute_J0(data) -> float:
    """0.5 * int u1 u0 + int u1 (x . grad u0)."""
    g1, g2 = gradient(data.u0)
    x1, x2 = data.grid.coordinates()
    u1 = data.u1.values
    a = integrate(ScalarField(data.grid, 0.5 * u1 * data.u0.values))
    b = integrate(ScalarField(data.grid, u1 * (x1 * g1.values + x2 * g2.values)))
    return a + b


def k_term_rate(u, up, x_dot_grad, grid: Grid2D, r0: float) -> float:
    """0.5 * int (x . grad K) |grad ubar|^2 with ubar = (u + up)/2.

    ``x . grad K`` vanishes beyond r0, so only the r0 box is visited.
    """
    sl = grid.box(r0)
    lo, hi, _ = sl.indices(grid.nodes_per_side)
    ub = 0.5 * (_padded_box(u, lo, hi) + _padded_box(up, lo, hi))
    g1, g2 = np.gradient(ub, grid.spacing)
    g2sum = g1[1:-1, 1:-1] ** 2 + g2[1:-1, 1:-1] ** 2
    return 0.5 * float(np.sum(x_dot_grad[lo:hi, lo:hi] * g2sum) * grid.cell_area)


def morawetz_residual(ledger: MorawetzLedger, record: EnergyRecord) -> float:
    """(t E + 0.5 int u_t u + int u_t x.grad u - J0 - K_integral) / max(1, |J0| + t E(0))."""
    t = record.t
    lhs = t * record.E_total + ledger.cross_ut_u + ledger.cross_ut_xgradu
    rhs = ledger.J0 + ledger.K_integral
    return (lhs - rhs) / max(1.0, abs(ledger.J0) + t * ledger.E0)


def isclose_rel(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= tol * max(abs(a), abs(b), math.ulp(1.0))
