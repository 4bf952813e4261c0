import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from wavedecay.audit import SIM_SLACK, AuditEntry
from wavedecay.coefficients import CoefficientSpec, make_constant
from wavedecay.diagnostics import (
    DiagnosticsError,
    EnergyRecord,
    a0_terms,
    antiderivative_audit,
    certify_weighted_energy,
    compute_J0,
    decay_inequality_audit,
    energy,
    gronwall_bound,
    growth_audit,
    local_energy,
    morawetz_residual,
    virial_audit,
)
from wavedecay.diagnostics.suite import AUDITS, DEFAULT_AUDITS, energy_drift, run_audits, support_excess
from wavedecay.field import Grid2D, Region, ScalarField, gradient, integrate
from wavedecay.initial_data import InitialData, make_bump, make_dataset
from wavedecay.solver import SimulationConfig, WaveState, first_step, run, step


def _records(t, e):
    return [EnergyRecord(float(ti), float(ei), float(ei), 0.0, 0.0, 0.0, 0.0) for ti, ei in zip(t, e)]


@pytest.fixture(scope="module")
def free_run():
    return run(SimulationConfig(T_max=25.0, dx=0.1, sample_stride=5))


@pytest.fixture(scope="module")
def decreasing_run():
    return run(SimulationConfig(T_max=12.0, dx=0.1, sample_stride=5, coefficient=CoefficientSpec("radial_decreasing")))


@pytest.fixture(scope="module")
def zero_run():
    return run(SimulationConfig(T_max=12.0, dx=0.1, sample_stride=2, preset="zero"))


def test_energy_zero_state():
    grid = Grid2D(41, 0.1)
    K = make_constant(1.0, grid)
    s = WaveState(grid.zeros(), grid.zeros(), 0.1, 2)
    assert energy(s, K)[0] == 0.0
    assert local_energy(s, K, 1.5) == 0.0
    with pytest.raises(DiagnosticsError):
        energy(WaveState(grid.zeros(), grid.zeros(), 0.0, 0), K)
    with pytest.raises(DiagnosticsError):
        local_energy(s, K, 0.5)


def test_initial_energy_is_half_velocity_norm(free_run):
    rec = free_run.records[0]
    assert rec.E_total == pytest.approx(0.5 * free_run.data.norm_u1_l2 ** 2, rel=1e-12)


def test_local_energy_contains_support():
    grid = Grid2D.covering(4.0, 0.05)
    K = make_constant(1.0, grid)
    data = make_dataset("bump-velocity", grid)
    dt = 0.01
    s = first_step(data, K, dt)
    for _ in range(20):
        s = step(s, K, dt)
    E, e = energy(s, K, dt)
    assert local_energy(s, K, 3.5, dt) == pytest.approx(E, rel=1e-10)
    Rs = np.linspace(1.05, 3.0, 25)
    loc = [integrate(e, Region.disc(R)) for R in Rs]
    assert np.all(np.diff(loc) >= -1e-15)


def test_energy_conserved_and_leaves_disc(free_run):
    assert energy_drift(free_run.records) <= 1e-3
    rec = min(free_run.records, key=lambda r: abs(r.t - 20.0))
    # the localized disc is B_2 since r0 = 1
    assert free_run.config.radius == 2.0
    assert rec.E_loc / rec.E_total < 0.1


def test_J0_zero_cases():
    grid = Grid2D.covering(2.0, 0.05)
    assert compute_J0(make_dataset("bump-displacement", grid)) == 0.0
    assert compute_J0(make_dataset("bump-velocity", grid)) == 0.0


def test_J0_integration_by_parts_oracle():
    # u0 = u1 = b: int b (x . grad b) = -int b^2, so J0 = -|b|^2 / 2
    errs = []
    for dx in (0.05, 0.025, 0.0125):
        grid = Grid2D.covering(1.2, dx)
        b = make_bump((0.0, 0.0), 1.0, 1.0, grid)
        data = InitialData.from_fields(b, b, 1.0)
        errs.append(abs(compute_J0(data) / (-0.5 * data.norm_u0_l2 ** 2) - 1))
        g1, g2 = gradient(b)
        x1, x2 = grid.coordinates()
        direct = 0.5 * data.norm_u0_l2 ** 2 + integrate(ScalarField(grid, b.values * (x1 * g1.values + x2 * g2.values)))
        assert compute_J0(data) == pytest.approx(direct, rel=1e-12)
    assert errs[1] < 5e-3
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= 1.9)


def test_morawetz_start_and_small_residual(free_run):
    led0 = free_run.ledgers[0]
    assert morawetz_residual(led0, free_run.records[0]) == 0.0
    res = [abs(morawetz_residual(l, r)) for r, l in zip(free_run.records, free_run.ledgers)]
    assert max(res) < 0.02
    assert all(l.K_integral == 0.0 for l in free_run.ledgers)


def test_K_integral_nonpositive_for_decreasing(decreasing_run):
    k = [l.K_integral for l in decreasing_run.ledgers]
    assert all(v <= 0.0 for v in k)
    assert k[-1] < 0.0


def test_weighted_exterior_energy(free_run, zero_run):
    d = free_run
    first = certify_weighted_energy(d.records[:1], d.data, d.K, d.initial_density)
    assert first.passed and first.lhs <= first.rhs
    assert certify_weighted_energy(d.records, d.data, d.K, d.initial_density).passed
    z = certify_weighted_energy(zero_run.records, zero_run.data, zero_run.K)
    assert z.lhs == 0.0 and z.rhs == 0.0 and z.passed


def test_antiderivative_identity(free_run):
    s0 = free_run.antiderivative[0]
    assert s0.residual == 0.0
    e = antiderivative_audit(free_run.antiderivative, free_run.data, free_run.K, t=20.0)
    assert e.passed
    with pytest.raises(DiagnosticsError):
        antiderivative_audit([], free_run.data, free_run.K)


def test_growth_chain(free_run, zero_run):
    entry, fit = growth_audit(free_run.records, free_run.data, free_run.K)
    assert entry.passed and fit.b > 0
    z, _ = growth_audit(zero_run.records, zero_run.data, zero_run.K)
    assert z.passed and z.lhs == 0.0
    with pytest.raises(DiagnosticsError):
        growth_audit(free_run.records[:3], free_run.data, free_run.K)


def test_virial(free_run, zero_run, decreasing_run):
    z = virial_audit(zero_run.records, zero_run.ledgers)
    assert z.passed and z.lhs == 0.0
    assert virial_audit(free_run.records, free_run.ledgers).passed
    assert virial_audit(decreasing_run.records, decreasing_run.ledgers).passed


def test_decay_inequality_gamma_zero_is_plain_chain(free_run):
    d = free_run
    t = np.array([r.t for r in d.records])
    a0 = a0_terms(d.data, d.K, d.E0, d.J0, d.data.L, t[t > math.e], d.initial_density)
    assert a0.C_r0 == 2.0
    assert a0.C1 == pytest.approx(8 * math.sqrt(2 * math.pi))
    with_gamma = decay_inequality_audit(d.records, 0.0, a0, 2.0, 1.0)
    # with gamma = 0 the integral term drops out: recompute the chain by hand
    worst = min(((ti - 2.0) * r.E_loc, a0(ti)) for ti, r in zip(t, d.records) if ti > math.e)
    assert with_gamma.passed
    hand = max(((ti - 2.0) * r.E_loc / a0(ti)) for ti, r in zip(t, d.records) if ti > math.e)
    assert with_gamma.lhs / with_gamma.rhs == pytest.approx(hand, rel=1e-12)
    assert worst[0] <= worst[1]


def test_gronwall_zero_series():
    t = np.linspace(0.0, 100.0, 201)
    g = gronwall_bound(_records(t, np.zeros_like(t)), 0.5, 2.0, 1.0)
    assert g.C_star == 0.0


def test_gronwall_synthetic_rate():
    t = np.linspace(0.5, 200.0, 800)
    for gamma in (0.0, 0.25, 0.5):
        e = t ** (gamma - 1) * np.sqrt(np.log(np.maximum(t, 1.0 + 1e-12)))
        g = gronwall_bound(_records(t, e), gamma, 2.0, 1.0)
        assert g.C_star == pytest.approx(1.0, rel=1e-2)
        assert g.t0 >= 20.0


def test_gronwall_detects_violation():
    t = np.linspace(0.5, 50.0, 200)
    e = np.where(t > 30, 1e3, 1e-3)
    g = gronwall_bound(_records(t, e), 0.0, 2.0, 1.0, A0=lambda s: np.ones_like(s))
    assert not g.entry.passed
    assert g.failing_interval[0] >= 29.0


def test_support_excess(free_run):
    ex = support_excess(free_run.records, 1.0, 1.0, 0.1)
    assert ex == max(r.support_radius - (1.8 + r.t) for r in free_run.records)


def test_run_audits_zero_data(zero_run):
    rep = run_audits(zero_run, enabled=list(AUDITS))
    assert rep.passed
    names = [e.name for e in rep.entries] + list(rep.skipped)
    assert sorted(names) == sorted(AUDITS)


def test_run_audits_defaults_and_errors(free_run):
    rep = run_audits(free_run)
    assert "finite_propagation" not in [e.name for e in rep.entries]
    assert set(e.name for e in rep.entries) | set(rep.skipped) == set(DEFAULT_AUDITS)
    assert rep["energy_conservation"].passed
    with pytest.raises(DiagnosticsError):
        run_audits(free_run, enabled=["nonsense"])


@given(lhs=st.floats(-1e6, 1e6), rhs=st.floats(-1e6, 1e6), s=st.floats(0, 1), extra=st.floats(0, 1))
def test_audit_entry_pass_flag(lhs, rhs, s, extra):
    e = AuditEntry.check("x", "y", lhs, rhs, s)
    assert e.passed == (lhs <= rhs + s * abs(rhs))
    if e.passed:
        assert e.with_slack(s + extra).passed
        assert e.margin > 0 or e.margin == math.inf or rhs <= 0
    assert AuditEntry.check("x", "y", float("nan"), 1.0).passed is False


def test_audit_slack_constant():
    assert SIM_SLACK == 0.05
