"""Logarithmic (Newtonian) potential of the initial velocity and its certified bounds.

    h(x) = -(1/2pi) int log|x - y| u1(y) dy,        -Laplace(h) = u1

Quadrature is the midpoint rule over the source cells.  When an evaluation
point is itself a source node, that cell uses the closed-form integral of
log|z| over a square of side dx for h and contributes zero to grad h (the
principal value vanishes by symmetry of the cell about its centre).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .audit import QUAD_SLACK, AuditEntry
from .field import Grid2D, Region, ScalarField, integrate_array

__all__ = [
    "PotentialError",
    "PotentialField",
    "newtonian_potential",
    "log_cell_integral",
    "far_field_points",
    "certify_far_field",
    "certify_energy_growth",
    "certify_near_field",
]

_CHUNK = 2_000_000  # point-source pairs per vectorized block
_RADIAL_NODES = 48
_ANGLES = 64


class PotentialError(ValueError):
    pass


def log_cell_integral(dx: float) -> float:
    """Integral of log|z| over the square [-dx/2, dx/2]^2."""
    a = 0.5 * dx
    return 4.0 * a * a * (math.log(a) + 0.5 * math.log(2.0) - 1.5 + 0.25 * math.pi)


@dataclass(frozen=True, eq=False)
class PotentialField:
    points: NDArray[np.float64]
    h: NDArray[np.float64]
    grad_h: NDArray[np.float64]
    I_h: float
    L: float
    grad_max_2L: float
    norm_l1: float
    norm_linf: float
    _sources: NDArray[np.float64] = field(repr=False)
    _weights: NDArray[np.float64] = field(repr=False)
    _spacing: float = field(repr=False)

    def evaluate(self, points: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """(h, grad h) at further points, same quadrature."""
        return _evaluate(np.asarray(points, dtype=np.float64).reshape(-1, 2), self._sources,
                         self._weights, self._spacing)

    def exterior_energy(self, rho: float) -> float:
        """Integral of |grad h|^2 over the annulus 2L <= |x| <= rho.

        Gauss-Legendre in s = log(|x|/2L) and the trapezoid rule in angle; the
        area element is |x|^2 ds dtheta.
        """
        r_in = 2.0 * self.L
        if rho <= r_in:
            return 0.0
        smax = math.log(rho / r_in)
        nodes, wts = np.polynomial.legendre.leggauss(_RADIAL_NODES)
        s = 0.5 * smax * (nodes + 1.0)
        ws = 0.5 * smax * wts
        theta = 2.0 * math.pi * np.arange(_ANGLES) / _ANGLES
        r = r_in * np.exp(s)
        pts = np.stack([np.outer(r, np.cos(theta)), np.outer(r, np.sin(theta))], axis=-1).reshape(-1, 2)
        _, g = self.evaluate(pts)
        g2 = np.sum(g * g, axis=1).reshape(r.size, theta.size)
        ring = g2.sum(axis=1) * (2.0 * math.pi / _ANGLES)
        return float(np.sum(ws * r * r * ring))

    def energy_curve(self, rho_max: float, degree: int = 64):
        """Vectorized rho -> disc_energy(rho) on [2L, rho_max].

        The ring integrand in s = log(|x|/2L) is interpolated at Chebyshev
        points and integrated exactly, so one batch of potential evaluations
        serves every radius.
        """
        r_in = 2.0 * self.L
        smax = math.log(max(rho_max, r_in) / r_in)
        if smax == 0:
            return lambda rho: np.full(np.shape(rho), self.I_h)
        theta = 2.0 * math.pi * np.arange(_ANGLES) / _ANGLES
        cheb = np.polynomial.chebyshev

        def integrand(y):
            r = r_in * np.exp(0.5 * smax * (y + 1.0))
            pts = np.stack([np.outer(r, np.cos(theta)), np.outer(r, np.sin(theta))], axis=-1).reshape(-1, 2)
            _, g = self.evaluate(pts)
            ring = np.sum(g * g, axis=1).reshape(r.size, theta.size).sum(axis=1) * (2.0 * math.pi / _ANGLES)
            return 0.5 * smax * r * r * ring

        anti = cheb.chebint(cheb.chebinterpolate(integrand, degree), lbnd=-1.0)

        def curve(rho):
            rho = np.asarray(rho, dtype=np.float64)
            if np.any(rho < r_in * (1 - 1e-12)) or np.any(rho > r_in * math.exp(smax) * (1 + 1e-12)):
                raise PotentialError("radius outside the interpolated range")
            y = 2.0 * np.log(np.maximum(rho, r_in) / r_in) / smax - 1.0
            return self.I_h + cheb.chebval(y, anti)

        return curve

    def disc_energy(self, rho: float) -> float:
        """Integral of |grad h|^2 over |x| <= rho, for rho >= 2L."""
        if rho < 2.0 * self.L:
            raise PotentialError(f"rho = {rho} is below 2L = {2 * self.L}")
        return self.I_h + self.exterior_energy(rho)


def _evaluate(points, ys, w, dx):
    m = points.shape[0]
    h = np.zeros(m)
    grad = np.zeros((m, 2))
    if ys.shape[0] == 0 or m == 0:
        return h, grad
    cell = log_cell_integral(dx)
    area = dx * dx
    tol2 = (1e-9 * dx) ** 2
    step = max(1, _CHUNK // ys.shape[0])
    for a in range(0, m, step):
        p = points[a:a + step]
        d1 = p[:, 0:1] - ys[None, :, 0]
        d2 = p[:, 1:2] - ys[None, :, 1]
        r2 = d1 * d1 + d2 * d2
        self_cell = r2 <= tol2
        safe = np.where(self_cell, 1.0, r2)
        logr = np.where(self_cell, 0.0, 0.5 * np.log(safe))
        inv = np.where(self_cell, 0.0, 1.0 / safe)
        h[a:a + step] = logr @ w + (self_cell * (cell / area)) @ w
        grad[a:a + step, 0] = (d1 * inv) @ w
        grad[a:a + step, 1] = (d2 * inv) @ w
    scale = -1.0 / (2.0 * math.pi)
    return scale * h, scale * grad


def newtonian_potential(u1: ScalarField, eval_points: ArrayLike, L: float) -> PotentialField:
    """h and grad h at ``eval_points`` plus I_h = int over |x| <= 2L of |grad h|^2.

    I_h is integrated on a dedicated node-aligned grid of the source spacing.
    """
    pts = np.asarray(eval_points, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        raise PotentialError("evaluation point set is empty")
    grid = u1.grid
    dx = grid.spacing
    r = grid.radius()
    vals = u1.values
    if np.any(vals[r > L] != 0):
        raise PotentialError(f"u1 is not supported in the disc of radius L = {L}")
    nz = np.nonzero(vals)
    x = grid.axis()
    ys = np.stack([x[nz[0]], x[nz[1]]], axis=1)
    w = vals[nz] * grid.cell_area
    h, g = _evaluate(pts, ys, w, dx)

    inner = Grid2D.covering(2.0 * L, dx)
    x1, x2 = inner.coordinates()
    _, gi = _evaluate(np.stack([x1.ravel(), x2.ravel()], axis=1), ys, w, dx)
    g2 = np.sum(gi * gi, axis=1).reshape(inner.shape)
    I_h = integrate_array(g2, inner, Region.disc(2.0 * L))
    in_disc = np.hypot(x1, x2) <= 2.0 * L
    grad_max = float(np.sqrt(np.max(g2[in_disc]))) if np.any(in_disc) else 0.0
    return PotentialField(
        points=pts, h=h, grad_h=g, I_h=max(0.0, I_h), L=float(L), grad_max_2L=grad_max,
        norm_l1=float(np.sum(np.abs(vals)) * grid.cell_area),
        norm_linf=float(np.max(np.abs(vals))),
        _sources=ys, _weights=w, _spacing=dx,
    )


def far_field_points(L: float, n_radii: int = 33, n_angles: int = 64, outer: float = 10.0) -> NDArray[np.float64]:
    """Polar sample of the annulus 2L <= |x| <= outer * L."""
    r = np.geomspace(2.0 * L, outer * L, n_radii)
    th = 2.0 * math.pi * (np.arange(n_angles) + 0.5) / n_angles
    return np.stack([np.outer(r, np.cos(th)), np.outer(r, np.sin(th))], axis=-1).reshape(-1, 2)


def certify_far_field(pf: PotentialField, u1: ScalarField | None = None, L: float | None = None) -> AuditEntry:
    """max over sampled |x| >= 2L of |x| |grad h|  <=  (1/pi) |u1|_1."""
    L = pf.L if L is None else L
    r = np.hypot(pf.points[:, 0], pf.points[:, 1])
    far = r >= 2.0 * L * (1 - 1e-12)
    if not np.any(far):
        raise PotentialError("no evaluation points with |x| >= 2L")
    lhs = float(np.max(r[far] * np.hypot(pf.grad_h[far, 0], pf.grad_h[far, 1])))
    rhs = pf.norm_l1 / math.pi
    return AuditEntry.check("potential_far_field", "far-field gradient bound of the log potential",
                            lhs, rhs, QUAD_SLACK, f"{int(far.sum())} points in 2L <= |x|")


def certify_energy_growth(pf: PotentialField, u1: ScalarField | None, L: float | None, k1: float,
                          t_list) -> AuditEntry:
    """int over |x| <= 2L + k1 t of |grad h|^2  <=  I_h + (2/pi) |u1|_1^2 log(2L + k1 t), worst t."""
    L = pf.L if L is None else L
    worst = None
    for t in t_list:
        rho = 2.0 * L + k1 * float(t)
        lhs = pf.disc_energy(rho)
        rhs = pf.I_h + (2.0 / math.pi) * pf.norm_l1 ** 2 * math.log(rho)
        entry = AuditEntry.check("potential_energy_growth", "logarithmic growth of the potential energy",
                                 lhs, rhs, QUAD_SLACK, f"t = {float(t):.6g}")
        key = (entry.passed, entry.margin)
        if worst is None or key < worst[0]:
            worst = (key, entry)
    if worst is None:
        raise PotentialError("t_list is empty")
    return worst[1]


def certify_near_field(pf: PotentialField, u1: ScalarField | None = None, L: float | None = None) -> AuditEntry:
    """max over B_2L of |grad h| <= 4L |u1|_inf and I_h <= 64 pi L^4 |u1|_inf^2, as one ratio <= 1."""
    L = pf.L if L is None else L
    linf = pf.norm_linf
    if linf == 0:
        ratio_g = ratio_i = 0.0
    else:
        ratio_g = pf.grad_max_2L / (4.0 * L * linf)
        ratio_i = pf.I_h / (64.0 * math.pi * L ** 4 * linf ** 2)
    return AuditEntry.check("potential_near_field", "near-field gradient bound of the log potential",
                            max(ratio_g, ratio_i), 1.0, QUAD_SLACK,
                            f"gradient ratio {ratio_g:.6g}, I_h ratio {ratio_i:.6g}")
