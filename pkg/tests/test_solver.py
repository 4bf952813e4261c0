import math

import numpy as np
import pytest

from wavedecay import kernels
from wavedecay.coefficients import CoefficientField, CoefficientSpec, make_constant
from wavedecay.diagnostics.energy import disc_integral_of_box, energy, energy_density
from wavedecay.field import (Grid2D, Region, ScalarField, div_K_grad, face_coefficients, integrate, laplacian5,
                             region_weights)
from wavedecay.initial_data import InitialData, make_dataset
from wavedecay.solver import (
    InstabilityError,
    SimulationConfig,
    SolverError,
    WaveState,
    build_problem,
    cfl_timestep,
    domain_extent,
    first_step,
    run,
    step,
    velocity,
)

AMP = 0.5  # K = 1 + AMP exp(-|x|^2) for the manufactured solution


def _smooth_coefficient(grid):
    r2 = grid.radius() ** 2
    vals = 1.0 + AMP * np.exp(-r2)
    xg = -2.0 * AMP * r2 * np.exp(-r2)
    return CoefficientField(ScalarField(grid, vals), ScalarField(grid, xg), k_m=1.0, k0=1.0,
                            k1=math.sqrt(1.0 + AMP) + 1e-12, r0=100.0, gamma0=None, lip_grad_sup=math.inf, eta0=None)


def _manufactured(grid):
    """w = exp(-|x|^2) and div(K grad w) for the smooth coefficient, analytically."""
    r2 = grid.radius() ** 2
    w = np.exp(-r2)
    div = (1.0 + AMP * np.exp(-r2)) * (4 * r2 - 4) * w + 4 * AMP * r2 * np.exp(-r2) * w
    return w, div


def _march(data, K, dt, n, forcing=None):
    s = first_step(data, K, dt, forcing)
    for _ in range(n - 1):
        s = step(s, K, dt, forcing)
    return s


def test_domain_extent_examples():
    assert domain_extent(SimulationConfig(T_max=10, dx=0.1), 1.0) == pytest.approx(11.8)
    assert domain_extent(SimulationConfig(T_max=10, dx=0.1), 2.0) == pytest.approx(21.8)
    assert domain_extent(SimulationConfig(T_max=0, dx=0.1), 1.0) == pytest.approx(1.8)
    with pytest.raises(SolverError):
        domain_extent(SimulationConfig(T_max=1000, dx=0.01), 1.0)


def test_cfl_timestep_examples():
    assert cfl_timestep(0.1, 1.0, 0.5) == pytest.approx(0.035355339059327, rel=1e-12)
    assert cfl_timestep(0.1, 2.0, 0.5) == 0.5 * cfl_timestep(0.1, 1.0, 0.5)
    assert cfl_timestep(0.1, 1.0, 1.0) == pytest.approx(0.070710678118655, rel=1e-12)
    with pytest.raises(SolverError):
        cfl_timestep(0.1, 0.0, 0.5)


def test_config_validation():
    with pytest.raises(SolverError):
        SimulationConfig(cfl=1.0)
    with pytest.raises(SolverError):
        SimulationConfig(dx=0.0)
    with pytest.raises(SolverError):
        SimulationConfig(R=1.0, coefficient=CoefficientSpec(r0=2.0))
    assert SimulationConfig(coefficient=CoefficientSpec("power_bridge")).radius == 8.0


def test_first_step_zero_and_formula():
    grid = Grid2D.covering(2.0, 0.1)
    K = make_constant(1.0, grid)
    z = first_step(make_dataset("zero", grid), K, 0.03)
    assert np.all(z.u_curr.values == 0)
    data = make_dataset("bump-displacement", grid)
    dt = 0.03
    s = first_step(data, K, dt)
    expect = data.u0.values + 0.5 * dt * dt * laplacian5(data.u0).values
    assert np.allclose(s.u_curr.values, expect, rtol=0, atol=1e-15)
    assert s.t == dt and s.step == 1


def test_first_step_velocity_is_initial_velocity():
    grid = Grid2D.covering(2.0, 0.1)
    data = make_dataset("bump-velocity", grid)
    dt = 0.01
    s = first_step(data, make_constant(1.0, grid), dt)
    assert np.max(np.abs(velocity(s, dt).values - data.u1.values)) < 10 * dt


def test_zero_state_stays_zero():
    grid = Grid2D(11, 0.2)
    K = make_constant(1.0, grid)
    s = step(WaveState(grid.zeros(), grid.zeros(), 0.0, 0), K, 0.05)
    assert np.all(s.u_curr.values == 0)
    assert np.all(velocity(s, 0.05).values == 0)


def test_step_matches_operator():
    grid = Grid2D(31, 0.1)
    rng = np.random.default_rng(2)
    K = _smooth_coefficient(grid)
    u, up = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    dt = 0.02
    s = step(WaveState(ScalarField(grid, up), ScalarField(grid, u), 1.0, 5), K, dt)
    expect = 2 * u - up + dt * dt * div_K_grad(K.samples, ScalarField(grid, u)).values
    assert np.allclose(s.u_curr.values, expect, rtol=0, atol=1e-12)


def test_windowed_kernel_matches_full():
    n = 41
    rng = np.random.default_rng(4)
    u = np.zeros((n, n))
    up = np.zeros((n, n))
    u[12:29, 12:29] = rng.standard_normal((17, 17))
    up[12:29, 12:29] = rng.standard_normal((17, 17))
    k = 1.0 + rng.random((n, n))
    kx, ky = face_coefficients(k)
    full = np.empty_like(u)
    win = np.zeros_like(u)
    v = np.zeros_like(u)
    kernels.leapfrog_window(u, up, kx, ky, 0.1, full, 0, n, v, 0.0, False)
    kernels.leapfrog_window(u, up, kx, ky, 0.1, win, 10, 31, v, 0.5, True)
    assert np.array_equal(win[10:31, 10:31], full[10:31, 10:31])
    inside = np.zeros((n, n), dtype=bool)
    inside[10:31, 10:31] = True
    assert np.allclose(v[inside], 0.5 * (u + win)[inside], rtol=0, atol=1e-15)
    assert np.all(v[~inside] == 0)


@pytest.mark.parametrize("box, window", [((15, 26), (0, 41)), ((15, 26), (8, 33)), ((0, 0), (0, 41)),
                                         ((0, 41), (5, 20)), ((30, 41), (0, 41))])
def test_inplace_kernel_matches_window(box, window):
    n = 41
    rng = np.random.default_rng(6)
    u, up = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    k0 = 1.7
    k = np.full((n, n), k0)
    # variable nodes strictly inside the box, so every face outside it is k0
    if box[1] > box[0]:
        k[box[0] + 1:box[1] - 1, box[0] + 1:box[1] - 1] += rng.random((box[1] - box[0] - 2,) * 2)
    kx, ky = face_coefficients(k)
    lo, hi = window
    expect = up.copy()
    v_ref, v = np.zeros_like(u), np.zeros_like(u)
    kernels.leapfrog_window(u, up, kx, ky, 0.1, expect, lo, hi, v_ref, 0.5, True)
    got = up.copy()
    kernels.leapfrog_inplace(u, got, kx, ky, k0, box[0], box[1], 0.1, lo, hi, v, 0.5, True)
    # the constant-coefficient stencil differs from the face form by rounding only
    assert np.allclose(got, expect, rtol=0, atol=1e-13)
    assert np.allclose(v, v_ref, rtol=0, atol=1e-13)


def test_energy_kernel_matches_numpy():
    grid = Grid2D(41, 0.1)
    rng = np.random.default_rng(8)
    u = np.zeros(grid.shape)
    up = np.zeros(grid.shape)
    u[10:31, 10:31] = rng.standard_normal((21, 21))
    up[10:31, 10:31] = rng.standard_normal((21, 21))
    kx, ky = face_coefficients(1.0 + rng.random(grid.shape))
    dt = 0.03
    E = kernels.energy_sums(u, up, kx, ky, 0.1, dt, 8, 33, 20, 1.0, 0.5)[0]
    dens = energy_density(u, up, kx, ky, 0.1, dt)
    assert E == pytest.approx(float(np.sum(dens)) * 0.01, rel=1e-12)


def test_box_energy_kernel_matches_numpy():
    grid = Grid2D(61, 0.1)
    rng = np.random.default_rng(9)
    u, up = rng.standard_normal(grid.shape), rng.standard_normal(grid.shape)
    kx, ky = face_coefficients(1.0 + rng.random(grid.shape))
    dt, rho, s = 0.03, 2.05, 1.3
    box, frac, _ = region_weights(grid, Region.disc(rho))
    lo = box.indices(61)[0]
    dens = energy_density(u, up, kx, ky, 0.1, dt, box)
    plain = kernels.box_energy(u, up, kx, ky, 0.1, dt, lo, frac, 30, s, False)
    assert plain == pytest.approx(disc_integral_of_box(dens, grid, rho), rel=1e-12)
    x = grid.axis()[box]
    r = np.hypot(x[:, None], x[None, :])
    psi = np.where(r >= s, 1.0 + r - s, 1.0 / (1.0 + s - r))
    weighted = kernels.box_energy(u, up, kx, ky, 0.1, dt, lo, frac, 30, s, True)
    assert weighted == pytest.approx(disc_integral_of_box(psi * dens, grid, rho), rel=1e-12)


def test_manufactured_solution_second_order():
    errs, verrs = [], []
    for dx in (0.2, 0.1, 0.05):
        grid = Grid2D.covering(6.0, dx)
        K = _smooth_coefficient(grid)
        w, div = _manufactured(grid)
        data = InitialData.from_fields(ScalarField(grid, w), grid.zeros(), 9.0)

        def forcing(t, g, w=w, div=div):
            return -math.cos(t) * w - math.cos(t) * div

        dt = cfl_timestep(dx, K.k1, 0.5)
        n = int(round(2.0 / dt))
        s = _march(data, K, dt, n, forcing)
        errs.append(np.max(np.abs(s.u_curr.values - math.cos(s.t) * w)))
        verrs.append(np.max(np.abs(velocity(s, dt).values + math.sin(s.t - 0.5 * dt) * w)))
    for e in (errs, verrs):
        orders = np.log2(np.array(e[:-1]) / np.array(e[1:]))
        assert np.all(orders >= 1.9), orders


def test_taylor_start_keeps_second_order():
    grid = Grid2D.covering(4.0, 0.1)
    K = make_constant(1.0, grid)
    data = make_dataset("bump-displacement", grid)
    T = 1.0
    base = cfl_timestep(0.1, 1.0, 0.5)
    n0 = int(math.ceil(T / base))
    ref = _march(data, K, T / (16 * 4 * n0), 16 * 4 * n0).u_curr.values
    errs = []
    for m in (1, 2, 4):
        s = _march(data, K, T / (m * n0), m * n0)
        errs.append(np.max(np.abs(s.u_curr.values - ref)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders >= 1.9), orders


def test_time_reversible():
    grid = Grid2D.covering(4.0, 0.1)
    K = _smooth_coefficient(grid)
    data = make_dataset("bump-velocity", grid)
    dt = cfl_timestep(0.1, K.k1, 0.5)
    s = WaveState(data.u0, first_step(data, K, dt).u_curr, dt, 1)
    n = 200
    for _ in range(n):
        s = step(s, K, dt)
    back = WaveState(s.u_curr, s.u_prev, 0.0, 0)
    for _ in range(n):
        back = step(back, K, dt)
    # back now holds (u_{n+1-n}, u_{1-n}) = (u_1, u_0) in reversed order
    start = first_step(data, K, dt).u_curr.values
    scale = np.max(np.abs(start))
    assert np.max(np.abs(back.u_prev.values - start)) <= 1e-10 * scale
    assert np.max(np.abs(back.u_curr.values - data.u0.values)) <= 1e-10 * scale


def test_instability_detected():
    grid = Grid2D.covering(3.0, 0.1)
    K = make_constant(1.0, grid)
    data = make_dataset("bump-velocity", grid)
    dt = 2.0 * 0.1  # far beyond the stability limit
    s = first_step(data, K, dt)
    with pytest.raises(InstabilityError):
        for _ in range(2000):
            s = step(s, K, dt)


def test_run_zero_horizon():
    r = run(SimulationConfig(T_max=0.0, dx=0.1))
    assert len(r.records) == 1 and r.records[0].t == 0.0
    assert r.records[0].E_total == pytest.approx(0.5 * r.data.norm_u1_l2 ** 2, rel=1e-12)


def test_run_zero_data():
    r = run(SimulationConfig(T_max=3.0, dx=0.1, preset="zero"))
    assert len(r.records) > 2
    for rec in r.records:
        assert rec.E_total == rec.E_loc == rec.l2_norm == rec.weighted_ext == rec.support_radius == 0.0
    assert np.all(r.final_state.u_curr.values == 0)


def test_energy_conserved_constant_K():
    r = run(SimulationConfig(T_max=10.0, dx=0.05, cfl=0.5))
    E0 = r.records[0].E_total
    assert max(abs(rec.E_total - E0) for rec in r.records) / E0 <= 1e-3
    assert r.records[-1].t == pytest.approx(10.0, abs=r.dt)


def test_run_matches_stepping_and_reference_energy():
    cfg = SimulationConfig(T_max=2.0, dx=0.1, sample_stride=7, coefficient=CoefficientSpec("radial_decreasing"))
    grid, K, data, dt = build_problem(cfg)
    r = run(cfg, problem=(grid, K, data, dt))
    s = _march(data, K, dt, r.final_state.step)
    assert np.allclose(r.final_state.u_curr.values, s.u_curr.values, rtol=0, atol=1e-13)
    E, _ = energy(s, K, dt)
    assert r.records[-1].E_total == pytest.approx(E, rel=1e-12)
    steps = [rec.step for rec in r.records]
    assert steps[1:-1] == list(range(7, r.final_state.step, 7))


def test_support_radius_kernel():
    n, m, dx = 41, 20, 0.1
    u = np.zeros((n, n))
    u[m + 7, m] = 1.0
    u[m, m - 3] = 1e-13
    assert kernels.support_radius(u, 1e-12, 0, n, m, dx) == pytest.approx(0.7)
    assert kernels.count_outside(u, 1e-12, 0.65, m, dx) == 1
    assert kernels.count_outside(u, 1e-12, 0.75, m, dx) == 0


def test_run_is_deterministic():
    cfg = SimulationConfig(T_max=2.0, dx=0.1, coefficient=CoefficientSpec("power_bridge", gamma0=0.5))
    a, b = run(cfg), run(cfg)
    assert [r.E_loc for r in a.records] == [r.E_loc for r in b.records]
    assert np.array_equal(a.final_state.u_curr.values, b.final_state.u_curr.values)
