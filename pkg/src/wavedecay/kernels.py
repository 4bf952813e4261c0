"""Compiled stencil loops used by the time integrator and the per-sample diagnostics.

All loops run over a square index window ``[lo, hi)`` in both axes; values
outside the grid are treated as zero.  Reference numpy versions of the same
operations live in :mod:`wavedecay.field` and :mod:`wavedecay.diagnostics`.
"""

from __future__ import annotations

import math

import numba
import numpy as np

__all__ = ["leapfrog_window", "leapfrog_inplace", "energy_sums", "antiderivative_sums", "support_radius", "ring_max", "box_energy"]


@numba.njit(cache=True)
def leapfrog_window(u, up, kx, ky, c, out, lo, hi, v, half_dt, track_v):
    """out = 2u - up + c * flux_div(u); optionally v += half_dt * (u + out)."""
    n = u.shape[0]
    for i in range(lo, hi):
        for j in range(lo, hi):
            uc = u[i, j]
            un = u[i + 1, j] if i + 1 < n else 0.0
            us = u[i - 1, j] if i > 0 else 0.0
            ue = u[i, j + 1] if j + 1 < n else 0.0
            uw = u[i, j - 1] if j > 0 else 0.0
            flux = (kx[i + 1, j] * (un - uc) - kx[i, j] * (uc - us)
                    + ky[i, j + 1] * (ue - uc) - ky[i, j] * (uc - uw))
            nxt = 2.0 * uc - up[i, j] + c * flux
            out[i, j] = nxt
            if track_v:
                v[i, j] += half_dt * (uc + nxt)


@numba.njit(cache=True, inline="always")
def _update(u, up, kxn, kxs, kye, kyw, c, i, j, n, v, half_dt, track_v):
    # one node with the zero exterior; used on the grid edge only
    uc = u[i, j]
    un = u[i + 1, j] if i + 1 < n else 0.0
    us = u[i - 1, j] if i > 0 else 0.0
    ue = u[i, j + 1] if j + 1 < n else 0.0
    uw = u[i, j - 1] if j > 0 else 0.0
    flux = kxn * (un - uc) - kxs * (uc - us) + kye * (ue - uc) - kyw * (uc - uw)
    nxt = 2.0 * uc - up[i, j] + c * flux
    up[i, j] = nxt
    if track_v:
        v[i, j] += half_dt * (uc + nxt)


@numba.njit(cache=True, inline="always")
def _row_variable(u, up, kx, ky, c, i, ja, jb, v, half_dt, track_v):
    ui, un, us, pi = u[i], u[i + 1], u[i - 1], up[i]
    kn, ks, kr = kx[i + 1], kx[i], ky[i]
    for j in range(ja, jb):
        uc = ui[j]
        flux = kn[j] * (un[j] - uc) - ks[j] * (uc - us[j]) + kr[j + 1] * (ui[j + 1] - uc) - kr[j] * (uc - ui[j - 1])
        nxt = 2.0 * uc - pi[j] + c * flux
        pi[j] = nxt
        if track_v:
            v[i, j] += half_dt * (uc + nxt)


@numba.njit(cache=True, inline="always")
def _row_constant(u, up, ck0, i, ja, jb, v, half_dt, track_v):
    ui, un, us, pi = u[i], u[i + 1], u[i - 1], up[i]
    for j in range(ja, jb):
        uc = ui[j]
        nxt = 2.0 * uc - pi[j] + ck0 * (un[j] + us[j] + ui[j + 1] + ui[j - 1] - 4.0 * uc)
        pi[j] = nxt
        if track_v:
            v[i, j] += half_dt * (uc + nxt)


@numba.njit(cache=True)
def leapfrog_inplace(u, up, kx, ky, k0, blo, bhi, c, lo, hi, v, half_dt, track_v):
    """Same update as leapfrog_window (up to rounding), written over ``up``.

    Outside the index box [blo, bhi)^2 every face coefficient equals k0, so
    those nodes use the constant five-point stencil and skip the kx/ky loads.
    """
    n = u.shape[0]
    a = max(lo, 1)
    b = max(a, min(hi, n - 1))
    c1 = min(max(blo, a), b)
    c2 = min(max(bhi, c1), b)
    ck0 = c * k0
    for i in range(lo, hi):
        if i == 0 or i == n - 1:
            for j in range(lo, hi):
                _update(u, up, kx[i + 1, j], kx[i, j], ky[i, j + 1], ky[i, j], c, i, j, n, v, half_dt, track_v)
            continue
        for j in range(lo, a):
            _update(u, up, kx[i + 1, j], kx[i, j], ky[i, j + 1], ky[i, j], c, i, j, n, v, half_dt, track_v)
        if blo <= i < bhi:
            _row_variable(u, up, kx, ky, c, i, a, b, v, half_dt, track_v)
        else:
            _row_constant(u, up, ck0, i, a, c1, v, half_dt, track_v)
            _row_variable(u, up, kx, ky, c, i, c1, c2, v, half_dt, track_v)
            _row_constant(u, up, ck0, i, c2, b, v, half_dt, track_v)
        for j in range(b, hi):
            _update(u, up, kx[i + 1, j], kx[i, j], ky[i, j + 1], ky[i, j], c, i, j, n, v, half_dt, track_v)


@numba.njit(cache=True)
def _central(a, i, j, n, dx, axis):
    # np.gradient(edge_order=2) semantics along one axis
    if axis == 0:
        if i == 0:
            return (-3.0 * a[0, j] + 4.0 * a[1, j] - a[2, j]) / (2.0 * dx)
        if i == n - 1:
            return (3.0 * a[n - 1, j] - 4.0 * a[n - 2, j] + a[n - 3, j]) / (2.0 * dx)
        return (a[i + 1, j] - a[i - 1, j]) / (2.0 * dx)
    if j == 0:
        return (-3.0 * a[i, 0] + 4.0 * a[i, 1] - a[i, 2]) / (2.0 * dx)
    if j == n - 1:
        return (3.0 * a[i, n - 1] - 4.0 * a[i, n - 2] + a[i, n - 3]) / (2.0 * dx)
    return (a[i, j + 1] - a[i, j - 1]) / (2.0 * dx)


@numba.njit(cache=True)
def _face_product(u, up, k, i, j, n, di, dj):
    # K_face * (D u)(D up) across the face between (i, j) and (i+di, j+dj)
    i2 = i + di
    j2 = j + dj
    if 0 <= i2 < n and 0 <= j2 < n:
        a = u[i2, j2] - u[i, j]
        b = up[i2, j2] - up[i, j]
    else:
        a = -u[i, j]
        b = -up[i, j]
    return k * a * b


@numba.njit(cache=True, inline="always", fastmath={"reassoc", "contract", "nsz"})
def _psi(r, s):
    return 1.0 + r - s if r >= s else 1.0 / (1.0 + s - r)


@numba.njit(cache=True)
def _edge_node_sums(u, up, kx, ky, dx, dt, i, j, n, m, s):
    # energy, l2, cross_uu, cross_x, psi_e at one node, with the zero exterior
    x1 = (i - m) * dx
    x2 = (j - m) * dx
    uc = u[i, j]
    pc = up[i, j]
    vel = (uc - pc) / dt
    ub = 0.5 * (uc + pc)
    pot = 0.25 / (dx * dx) * (
        _face_product(u, up, kx[i + 1, j], i, j, n, 1, 0)
        + _face_product(u, up, kx[i, j], i, j, n, -1, 0)
        + _face_product(u, up, ky[i, j + 1], i, j, n, 0, 1)
        + _face_product(u, up, ky[i, j], i, j, n, 0, -1))
    g1 = 0.5 * (_central(u, i, j, n, dx, 0) + _central(up, i, j, n, dx, 0))
    g2 = 0.5 * (_central(u, i, j, n, dx, 1) + _central(up, i, j, n, dx, 1))
    e = 0.5 * vel * vel + pot
    return e, ub * ub, 0.5 * vel * ub, vel * (x1 * g1 + x2 * g2), _psi(math.sqrt(x1 * x1 + x2 * x2), s) * e


@numba.njit(cache=True, fastmath={"reassoc", "contract", "nsz"})
def energy_sums(u, up, kx, ky, dx, dt, lo, hi, m, sqrt_k0, t):
    """Window-wide reductions at the half step between ``up`` and ``u``.

    Returns (energy, l2_sq, half_int_ut_u, int_ut_xgradu, int_psi_e, max_abs_u)
    where the energy density is 0.5 v^2 plus the quarter-sum of face products
    K_f (D u)(D up), which is the exactly conserved leapfrog energy.
    """
    n = u.shape[0]
    q = 0.25 / (dx * dx)
    h = 0.25 / dx  # half of the central-difference factor, for ubar
    inv_dt = 1.0 / dt
    energy = 0.0
    l2 = 0.0
    cross_uu = 0.0
    cross_x = 0.0
    psi_e = 0.0
    umax = 0.0
    s = sqrt_k0 * t
    ja = max(lo, 1)
    jb = max(ja, min(hi, n - 1))
    for i in range(lo, hi):
        if i == 0 or i == n - 1:
            edge = range(lo, hi)
        else:
            edge = range(lo, ja)
        for j in edge:
            a0, a1, a2, a3, a4 = _edge_node_sums(u, up, kx, ky, dx, dt, i, j, n, m, s)
            energy += a0
            l2 += a1
            cross_uu += a2
            cross_x += a3
            psi_e += a4
            umax = max(umax, abs(u[i, j]))
        if i == 0 or i == n - 1:
            continue
        for j in range(jb, hi):
            a0, a1, a2, a3, a4 = _edge_node_sums(u, up, kx, ky, dx, dt, i, j, n, m, s)
            energy += a0
            l2 += a1
            cross_uu += a2
            cross_x += a3
            psi_e += a4
            umax = max(umax, abs(u[i, j]))
        x1 = (i - m) * dx
        ui, un, us, pi, pn, ps = u[i], u[i + 1], u[i - 1], up[i], up[i + 1], up[i - 1]
        kn, ks, kr = kx[i + 1], kx[i], ky[i]
        for j in range(ja, jb):
            x2 = (j - m) * dx
            uc = ui[j]
            pc = pi[j]
            vel = (uc - pc) * inv_dt
            ub = 0.5 * (uc + pc)
            pot = q * (kn[j] * ((un[j] - uc) * (pn[j] - pc)) + ks[j] * ((us[j] - uc) * (ps[j] - pc))
                       + kr[j + 1] * ((ui[j + 1] - uc) * (pi[j + 1] - pc)) + kr[j] * ((ui[j - 1] - uc) * (pi[j - 1] - pc)))
            g1 = h * ((un[j] - us[j]) + (pn[j] - ps[j]))
            g2 = h * ((ui[j + 1] - ui[j - 1]) + (pi[j + 1] - pi[j - 1]))
            e = 0.5 * vel * vel + pot
            energy += e
            l2 += ub * ub
            cross_uu += 0.5 * vel * ub
            cross_x += vel * (x1 * g1 + x2 * g2)
            psi_e += _psi(math.sqrt(x1 * x1 + x2 * x2), s) * e
            umax = max(umax, abs(uc))
    a = dx * dx
    return energy * a, l2 * a, cross_uu * a, cross_x * a, psi_e * a, umax


@numba.njit(cache=True)
def box_energy(u, up, kx, ky, dx, dt, lo, frac, m, s, weighted):
    """Sum over the box starting at ``lo`` of frac * e (times psi when ``weighted``), times dx^2."""
    n = u.shape[0]
    q = 0.25 / (dx * dx)
    total = 0.0
    for a in range(frac.shape[0]):
        i = lo + a
        for b in range(frac.shape[1]):
            w = frac[a, b]
            if w == 0.0:
                continue
            j = lo + b
            vel = (u[i, j] - up[i, j]) / dt
            e = 0.5 * vel * vel + q * (
                _face_product(u, up, kx[i + 1, j], i, j, n, 1, 0)
                + _face_product(u, up, kx[i, j], i, j, n, -1, 0)
                + _face_product(u, up, ky[i, j + 1], i, j, n, 0, 1)
                + _face_product(u, up, ky[i, j], i, j, n, 0, -1))
            if weighted:
                x1 = (i - m) * dx
                x2 = (j - m) * dx
                e *= _psi(math.sqrt(x1 * x1 + x2 * x2), s)
            total += w * e
    return total * dx * dx


@numba.njit(cache=True)
def antiderivative_sums(u, v, u1, kx, ky, dx, lo, hi):
    """(0.5 |u|^2, 0.5 <K grad v, grad v>, integral of u1 v) over the window."""
    n = u.shape[0]
    half_u2 = 0.0
    pot = 0.0
    src = 0.0
    for i in range(lo, hi):
        for j in range(lo, hi):
            half_u2 += 0.5 * u[i, j] * u[i, j]
            src += u1[i, j] * v[i, j]
            pot += 0.25 * (_face_product(v, v, kx[i + 1, j], i, j, n, 1, 0)
                           + _face_product(v, v, kx[i, j], i, j, n, -1, 0)
                           + _face_product(v, v, ky[i, j + 1], i, j, n, 0, 1)
                           + _face_product(v, v, ky[i, j], i, j, n, 0, -1))
    a = dx * dx
    return half_u2 * a, pot, src * a


@numba.njit(cache=True)
def support_radius(u, threshold, lo, hi, m, dx):
    """Largest |x| over nodes with |u| > threshold (0 when none)."""
    best = 0.0
    for i in range(lo, hi):
        x1 = (i - m) * dx
        for j in range(lo, hi):
            if abs(u[i, j]) > threshold:
                x2 = (j - m) * dx
                r = math.sqrt(x1 * x1 + x2 * x2)
                if r > best:
                    best = r
    return best


@numba.njit(cache=True)
def ring_max(u, lo, hi, width):
    """max |u| over the outer ``width`` rows and columns of the window."""
    best = 0.0
    for i in range(lo, hi):
        if i < lo + width or i >= hi - width:
            cols = range(lo, hi)
            for j in cols:
                best = max(best, abs(u[i, j]))
        else:
            for j in range(lo, lo + width):
                best = max(best, abs(u[i, j]))
            for j in range(hi - width, hi):
                best = max(best, abs(u[i, j]))
    return best


def count_outside(u: np.ndarray, threshold: float, radius: float, m: int, dx: float) -> int:
    x = (np.arange(u.shape[0]) - m) * dx
    r = np.hypot(x[:, None], x[None, :])
    return int(np.count_nonzero((np.abs(u) > threshold) & (r > radius)))
