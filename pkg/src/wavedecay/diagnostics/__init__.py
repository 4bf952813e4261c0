"""Energies, identity ledgers, inequality certificates and decay fits."""

from .audits import (
    A0Terms,
    GronwallResult,
    GrowthFit,
    a0_terms,
    antiderivative_audit,
    certify_weighted_energy,
    gronwall_bound,
    growth_audit,
    virial_audit,
    decay_inequality_audit,
    l2_bound_audit,
)
from .energy import (
    DiagnosticsError,
    EnergyRecord,
    MorawetzLedger,
    compute_J0,
    energy,
    local_energy,
    morawetz_residual,
)
from .fitting import DecayFit, decay_fit, windowed_ratio

__all__ = [
    "A0Terms",
    "DecayFit",
    "DiagnosticsError",
    "EnergyRecord",
    "GronwallResult",
    "GrowthFit",
    "MorawetzLedger",
    "a0_terms",
    "antiderivative_audit",
    "certify_weighted_energy",
    "compute_J0",
    "decay_fit",
    "energy",
    "gronwall_bound",
    "growth_audit",
    "virial_audit",
    "decay_inequality_audit",
    "l2_bound_audit",
    "local_energy",
    "morawetz_residual",
    "windowed_ratio",
]
