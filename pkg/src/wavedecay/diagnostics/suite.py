"""The post-run audit suite: which checks apply to a run and in what order."""

from __future__ import annotations

import math

import numpy as np

from ..audit import AuditEntry, AuditReport
from ..potential import far_field_points, newtonian_potential
from .audits import (
    IDENTITY_TOL,
    a0_terms,
    antiderivative_audit,
    audited_times,
    certify_weighted_energy,
    gronwall_bound,
    growth_audit,
    virial_audit,
    decay_inequality_audit,
    l2_bound_audit,
)
from .energy import DiagnosticsError, morawetz_residual
from .fitting import decay_fit

__all__ = ["AUDITS", "DEFAULT_AUDITS", "ENERGY_DRIFT_TOL", "run_audits", "energy_drift", "support_excess"]

ENERGY_DRIFT_TOL = 1e-3
FIT_WINDOW_START = 20.0

# name -> anchor string, in report order
AUDITS = {
    "energy_conservation": "energy conservation",
    "finite_propagation": "finite propagation speed",
    "morawetz_identity": "Morawetz identity",
    "weighted_exterior_energy": "weighted exterior energy estimate",
    "antiderivative_identity": "antiderivative energy identity",
    "l2_potential_bound": "L2 bound through the potential",
    "l2_growth_chain": "logarithmic L2 growth",
    "virial_inequality": "virial inequality for radially nonincreasing K",
    "decay_inequality_gamma": "local energy inequality, elasticity bound",
    "decay_inequality_eta": "local energy inequality, Lipschitz bound",
    "gronwall_derivative": "Gronwall step for the weighted time integral",
}
# The support audit measures dispersive precursors of the scheme rather than a
# bound it can meet, so it runs only on request.
DEFAULT_AUDITS = tuple(k for k in AUDITS if k != "finite_propagation")


def energy_drift(records) -> float:
    E0 = records[0].E_total
    drift = max(abs(r.E_total - E0) for r in records)
    return drift / E0 if E0 > 0 else drift


def support_excess(records, L: float, k1: float, dx: float) -> float:
    """max over samples of support_radius - (L + k1 t + 8 dx)."""
    return max(r.support_radius - (L + k1 * r.t + 8.0 * dx) for r in records)


def _named(entry: AuditEntry, name: str) -> AuditEntry:
    return AuditEntry(name, AUDITS[name], entry.lhs, entry.rhs, entry.slack, entry.detail)


def run_audits(result, enabled=None, potential=None) -> AuditReport:
    """Evaluate every enabled audit that applies to ``result`` (a solver RunResult)."""
    enabled = DEFAULT_AUDITS if enabled is None else tuple(enabled)
    unknown = [e for e in enabled if e not in AUDITS]
    if unknown:
        raise DiagnosticsError(f"unknown audits: {', '.join(unknown)}")
    cfg, K, data = result.config, result.K, result.data
    recs, leds = result.records, result.ledgers
    R = cfg.radius
    report = AuditReport()
    hyp = K.hypotheses
    t_arr = np.array([r.t for r in recs])
    mask = audited_times(t_arr, R, K.k_m)
    a0 = a0_terms(data, K, result.E0, result.J0, data.L, t_arr[mask], result.initial_density)
    gronwall_rate = K.gamma0 if K.gamma0 is not None else (K.eta0 if K.eta0 is not None and K.eta0 < 1 else None)

    for name in AUDITS:
        if name not in enabled:
            continue
        try:
            if name == "energy_conservation":
                entry = AuditEntry.check(name, AUDITS[name], energy_drift(recs), ENERGY_DRIFT_TOL)
            elif name == "finite_propagation":
                entry = AuditEntry.check(name, AUDITS[name], support_excess(recs, data.L, K.k1, result.grid.spacing), 0.0)
            elif name == "morawetz_identity":
                res = [abs(morawetz_residual(led, rec)) for rec, led in zip(recs, leds)]
                i = int(np.argmax(res))
                entry = AuditEntry.check(name, AUDITS[name], res[i], IDENTITY_TOL, 0.0, f"t = {recs[i].t:.6g}")
            elif name == "weighted_exterior_energy":
                entry = certify_weighted_energy(recs, data, K, result.initial_density)
            elif name == "antiderivative_identity":
                if len(result.antiderivative) < 2:
                    report.skipped[name] = "antiderivative not tracked"
                    continue
                entry = antiderivative_audit(result.antiderivative, data, K)
            elif name == "l2_potential_bound":
                if len(result.antiderivative) < 2:
                    report.skipped[name] = "antiderivative not tracked"
                    continue
                if potential is None:
                    potential = newtonian_potential(data.u1, far_field_points(data.L), data.L)
                entry = l2_bound_audit(result.antiderivative, data, K, potential)
            elif name == "l2_growth_chain":
                entry, fit = growth_audit(recs, data, K)
                report.fits["growth"] = fit
            elif name == "virial_inequality":
                if "K2" not in hyp:
                    report.skipped[name] = "coefficient is not radially nonincreasing"
                    continue
                entry = virial_audit(recs, leds)
            elif name == "decay_inequality_gamma":
                if K.gamma0 is None:
                    report.skipped[name] = "no elasticity bound for this coefficient"
                    continue
                entry = decay_inequality_audit(recs, K.gamma0, a0, R, K.k_m)
            elif name == "decay_inequality_eta":
                if K.eta0 is None or K.eta0 >= 1:
                    report.skipped[name] = "eta0 unavailable or not below 1"
                    continue
                entry = decay_inequality_audit(recs, K.eta0, a0, R, K.k_m)
            else:
                if gronwall_rate is None:
                    report.skipped[name] = "no decay exponent available"
                    continue
                g = gronwall_bound(recs, gronwall_rate, R, K.k_m, A0=a0)
                report.fits["gronwall"] = g
                entry = g.entry
        except DiagnosticsError as exc:
            report.skipped[name] = str(exc)
            continue
        report.add(_named(entry, name))

    if cfg.T_max > FIT_WINDOW_START:
        try:
            report.fits["decay"] = decay_fit(recs, (FIT_WINDOW_START, cfg.T_max),
                                             gronwall_rate if gronwall_rate is not None else 0.0)
        except DiagnosticsError as exc:
            report.fits["decay_error"] = str(exc)
    report.fits["constants"] = a0
    return report
