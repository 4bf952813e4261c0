"""Certificates for the weighted-energy, antiderivative, growth and decay inequalities.

Every constant below is explicit:

    C_r0  = 1 + r0
    C1'   = max(1, 8 L^2 sqrt(2 pi / k_m))
    C2'   = (2 / sqrt(pi k_m)) * max over audited t of sqrt(log(2L + k1 t) / log t)
    C3    = sqrt(2) * max(C1', C2')
    A0(t) = J0 + C3 sqrt(E0) (|u0| + |u1|_inf + |u1|_1) sqrt(log t) + (C_r0 / sqrt(k_m)) int (1 + |x|) e(0)

The L^2 chain comes from splitting int u1 v with epsilon = k_m / 4 (so the
Cauchy-Schwarz constant is 1/k_m) and bounding the potential energy on B_2L
by 64 pi L^4 |u1|_inf^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..audit import SIM_SLACK, AuditEntry
from ..field import ScalarField, integrate
from .energy import DiagnosticsError, EnergyRecord, MorawetzLedger, initial_energy_density

__all__ = [
    "IDENTITY_TOL",
    "GrowthFit",
    "GronwallResult",
    "A0Terms",
    "c_r0",
    "weighted_initial_energy",
    "certify_weighted_energy",
    "antiderivative_audit",
    "l2_bound_audit",
    "growth_audit",
    "virial_audit",
    "a0_terms",
    "audited_times",
    "decay_inequality_audit",
    "gronwall_bound",
    "cumulative_trapezoid",
]

IDENTITY_TOL = 0.02
GROWTH_T_MIN = 10.0
GROWTH_MIN_SAMPLES = 8


def _worst(entries: Sequence[AuditEntry]) -> AuditEntry:
    """Least favourable entry: any failure first, then the smallest margin."""
    return min(entries, key=lambda e: (e.passed, e.margin))


def cumulative_trapezoid(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros_like(y, dtype=np.float64)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def c_r0(r0: float) -> float:
    return 1.0 + r0


def weighted_initial_energy(data, K, e0: ScalarField | None = None) -> float:
    """int (1 + |x|) e(0, x) dx."""
    e0 = initial_energy_density(data, K) if e0 is None else e0
    return integrate(ScalarField(e0.grid, (1.0 + e0.grid.radius()) * e0.values))


def certify_weighted_energy(records: Sequence[EnergyRecord], data, K, e0: ScalarField | None = None) -> AuditEntry:
    """sup_t int_{|x| >= r0} psi e  <=  (1 + r0) int (1 + |x|) e(0)."""
    rhs = c_r0(K.r0) * weighted_initial_energy(data, K, e0)
    idx = int(np.argmax([r.weighted_ext for r in records]))
    return AuditEntry.check("weighted_exterior_energy", "weighted exterior energy estimate",
                            records[idx].weighted_ext, rhs, SIM_SLACK, f"worst t = {records[idx].t:.6g}")


def antiderivative_audit(samples, data, K, t: float | None = None, tol: float = IDENTITY_TOL) -> AuditEntry:
    """|normalized residual| of the v-energy identity at the sample nearest ``t`` (worst sample if None)."""
    if not samples:
        raise DiagnosticsError("no antiderivative samples")
    if t is None:
        pick = max(samples, key=lambda s: abs(s.residual))
    else:
        pick = min(samples, key=lambda s: abs(s.t - t))
    return AuditEntry.check("antiderivative_identity", "antiderivative energy identity",
                            abs(pick.residual), tol, 0.0, f"t = {pick.t:.6g}")


def l2_bound_audit(samples, data, K, potential) -> AuditEntry:
    """|u(t)|^2 <= |u0|^2 + (2/k_m) int_{|x| <= 2L + k1 t} |grad h|^2 at every sample."""
    if not samples:
        raise DiagnosticsError("no antiderivative samples")
    L = data.L
    t = np.array([s.t for s in samples])
    curve = potential.energy_curve(2.0 * L + K.k1 * float(t.max()))
    disc = curve(2.0 * L + K.k1 * t)
    base = data.norm_u0_l2 ** 2
    entries = [
        AuditEntry.check("l2_potential_bound", "L2 bound through the potential", s.l2_sq,
                         base + (2.0 / K.k_m) * float(d), SIM_SLACK, f"t = {s.t:.6g}")
        for s, d in zip(samples, disc)
    ]
    return _worst(entries)


def _chain_rhs(data, K, t):
    L = data.L
    ih_bound = 64.0 * math.pi * L ** 4 * data.norm_u1_linf ** 2
    return data.norm_u0_l2 ** 2 + (2.0 / K.k_m) * (
        ih_bound + (2.0 / math.pi) * data.norm_u1_l1 ** 2 * np.log(2.0 * L + K.k1 * t))


@dataclass(frozen=True)
class GrowthFit:
    a: float
    b: float
    r2: float
    n: int


def growth_audit(records: Sequence[EnergyRecord], data, K, t_min: float = GROWTH_T_MIN) -> tuple[AuditEntry, GrowthFit]:
    """Explicit L2 growth chain at every sample t >= t_min, plus a fit |u|^2 ~ a + b log t."""
    sel = [r for r in records if r.t >= t_min]
    if len(sel) < GROWTH_MIN_SAMPLES:
        raise DiagnosticsError(f"need {GROWTH_MIN_SAMPLES} samples with t >= {t_min}, have {len(sel)}")
    t = np.array([r.t for r in sel])
    y = np.array([r.l2_norm for r in sel]) ** 2
    rhs = _chain_rhs(data, K, t)
    entry = _worst([AuditEntry.check("l2_growth_chain", "logarithmic L2 growth", yi, ri, SIM_SLACK, f"t = {ti:.6g}")
                    for ti, yi, ri in zip(t, y, rhs)])
    X = np.column_stack([np.ones_like(t), np.log(t)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    ss_res = float(np.sum((y - X @ coef) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else (1.0 if ss_res == 0 else 0.0)
    return entry, GrowthFit(float(coef[0]), float(coef[1]), r2, len(sel))


def virial_audit(records: Sequence[EnergyRecord], ledgers: Sequence[MorawetzLedger]) -> AuditEntry:
    """t E(t) <= J0 - 0.5 int u_t u - int u_t (x . grad u) at every sample."""
    entries = [
        AuditEntry.check("virial_inequality", "virial inequality for radially nonincreasing K",
                         rec.t * rec.E_total, led.J0 - led.cross_ut_u - led.cross_ut_xgradu, SIM_SLACK,
                         f"t = {rec.t:.6g}")
        for rec, led in zip(records, ledgers)
    ]
    return _worst(entries)


@dataclass(frozen=True)
class A0Terms:
    J0: float
    C3: float
    sqrt_E0: float
    data_norms: float
    C_r0: float
    k_m: float
    weighted_e0: float
    C1: float
    C2: float

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        return (self.J0 + self.C3 * self.sqrt_E0 * self.data_norms * np.sqrt(np.log(t))
                + self.C_r0 / math.sqrt(self.k_m) * self.weighted_e0)


def audited_times(t, R: float, k_m: float) -> np.ndarray:
    """Mask of times with t > max(R / sqrt(k_m), e), where log t > 1 and t - R/sqrt(k_m) > 0."""
    t = np.asarray(t, dtype=np.float64)
    return t > max(R / math.sqrt(k_m), math.e)


def a0_terms(data, K, E0: float, J0: float, L: float, t_audit, e0: ScalarField | None = None) -> A0Terms:
    t_audit = np.asarray(t_audit, dtype=np.float64)
    k_m = K.k_m
    c1 = max(1.0, 8.0 * L * L * math.sqrt(2.0 * math.pi / k_m))
    if t_audit.size:
        ratio = float(np.max(np.sqrt(np.log(2.0 * L + K.k1 * t_audit) / np.log(t_audit))))
    else:
        ratio = 1.0
    c2 = 2.0 / math.sqrt(math.pi * k_m) * ratio
    return A0Terms(
        J0=J0, C3=math.sqrt(2.0) * max(c1, c2), sqrt_E0=math.sqrt(max(E0, 0.0)),
        data_norms=data.norm_u0_l2 + data.norm_u1_linf + data.norm_u1_l1,
        C_r0=c_r0(K.r0), k_m=k_m, weighted_e0=weighted_initial_energy(data, K, e0), C1=c1, C2=c2,
    )


def decay_inequality_audit(records: Sequence[EnergyRecord], gamma: float, A0: Callable, R: float, k_m: float,
                           name: str = "decay_inequality", anchor: str = "local energy inequality with integral term"
                           ) -> AuditEntry:
    """(t - R/sqrt(k_m)) E_R(t) <= A0(t) + gamma int_0^t E_R at every audited sample."""
    t = np.array([r.t for r in records])
    e = np.array([r.E_loc for r in records])
    integral = cumulative_trapezoid(t, e)
    mask = audited_times(t, R, k_m)
    if not np.any(mask):
        return AuditEntry.check(name, anchor, 0.0, 0.0, SIM_SLACK, "no samples with t > max(R/sqrt(k_m), e)")
    a = R / math.sqrt(k_m)
    rhs = A0(t[mask]) + gamma * integral[mask]
    lhs = (t[mask] - a) * e[mask]
    return _worst([AuditEntry.check(name, anchor, li, ri, SIM_SLACK, f"t = {ti:.6g}")
                   for ti, li, ri in zip(t[mask], lhs, rhs)])


@dataclass(frozen=True)
class GronwallResult:
    C_star: float
    t0: float
    entry: AuditEntry
    failing_interval: tuple[float, float] | None


def gronwall_bound(records: Sequence[EnergyRecord], gamma0: float, R: float, k_m: float,
                   t0: float | None = None, A0: Callable | None = None) -> GronwallResult:
    """Audit w'(t) <= A0(t) (t - a)^(-gamma - 1) with w = (t - a)^(-gamma) int_0^t E_R, a = R/sqrt(k_m).

    Returns the smallest C* with E_R(t) <= C* t^(gamma - 1) sqrt(log t) on [t0, T] (NaN if no
    sample lies there).
    """
    t = np.array([r.t for r in records], dtype=np.float64)
    e = np.array([r.E_loc for r in records], dtype=np.float64)
    a = R / math.sqrt(k_m)
    if t0 is None:
        later = t[t >= 10.0 * a]
        t0 = float(later[0]) if later.size else math.inf
    sel = (t >= t0) & (t > 1.0)
    # no sample on [t0, T] leaves C* undetermined
    C_star = float(np.max(e[sel] / (t[sel] ** (gamma0 - 1.0) * np.sqrt(np.log(t[sel]))))) if np.any(sel) else math.nan
    C_star = max(C_star, 0.0) if np.any(sel) else C_star

    entry = AuditEntry.check("gronwall_derivative", "Gronwall step for the weighted time integral",
                             0.0, 0.0, SIM_SLACK, "no audited intervals")
    failing = None
    if A0 is not None:
        integral = cumulative_trapezoid(t, e)
        mask = audited_times(t, R, k_m)
        ts, Is = t[mask], integral[mask]
        if ts.size >= 2:
            w = (ts - a) ** (-gamma0) * Is
            bound = A0(ts) * (ts - a) ** (-gamma0 - 1.0)
            entries = []
            for i in range(ts.size - 1):
                dt = ts[i + 1] - ts[i]
                if dt <= 0:
                    continue
                entries.append(AuditEntry.check(
                    "gronwall_derivative", "Gronwall step for the weighted time integral",
                    (w[i + 1] - w[i]) / dt, 0.5 * (bound[i] + bound[i + 1]), SIM_SLACK,
                    f"interval [{ts[i]:.6g}, {ts[i + 1]:.6g}]"))
            if entries:
                entry = _worst(entries)
                if not entry.passed:
                    lo, hi = entry.detail[len("interval ["):-1].split(", ")
                    failing = (float(lo), float(hi))
    return GronwallResult(C_star, t0, entry, failing)
