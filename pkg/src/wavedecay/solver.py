"""Leapfrog integration of u_tt = div(K grad u) with domain sizing from finite propagation speed.

The public single-step functions (:func:`first_step`, :func:`step`) are pure and
operate on immutable :class:`WaveState` values.  :func:`run` drives a mutable
three-buffer loop restricted to an active window that grows with the
numerical support, and records diagnostics every ``sample_stride`` steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .coefficients import CoefficientField, CoefficientSpec
from .diagnostics.energy import (
    EnergyRecord,
    MorawetzLedger,
    compute_J0,
    initial_energy_density,
    k_term_rate,
)
from .field import (Grid2D, GridError, Region, ScalarField, _flux_divergence, face_coefficients, gradient, integrate,
                    region_weights)
from .initial_data import InitialData, make_dataset

__all__ = [
    "SimulationConfig",
    "WaveState",
    "AntiderivativeSample",
    "RunResult",
    "SolverError",
    "InstabilityError",
    "domain_extent",
    "cfl_timestep",
    "first_step",
    "step",
    "velocity",
    "run",
]

log = logging.getLogger(__name__)

DEFAULT_MAX_NODES = 30_000_000
# Window growth: expand when the outer ring carries more than this fraction of max |u|.
WINDOW_TOL = 1e-18
WINDOW_RING = 2
WINDOW_GROW = 16
SUPPORT_THRESHOLD = 1e-12

Forcing = Callable[[float, Grid2D], np.ndarray]


class SolverError(ValueError):
    pass


class InstabilityError(RuntimeError):
    def __init__(self, step_index: int):
        super().__init__(f"non-finite value at step {step_index}")
        self.step_index = step_index


@dataclass(frozen=True)
class SimulationConfig:
    L: float = 1.0
    R: float | None = None
    T_max: float = 10.0
    dx: float = 0.05
    cfl: float = 0.5
    coefficient: CoefficientSpec = field(default_factory=CoefficientSpec)
    preset: str = "bump-velocity"
    amplitude: float = 1.0
    sample_stride: int = 10
    max_nodes: int = DEFAULT_MAX_NODES
    track_antiderivative: bool = True

    def __post_init__(self) -> None:
        if not self.L > 0:
            raise SolverError(f"L must be positive, got {self.L}")
        if not self.T_max >= 0:
            raise SolverError(f"T_max must be non-negative, got {self.T_max}")
        if not self.dx > 0:
            raise SolverError(f"dx must be positive, got {self.dx}")
        if not 0 < self.cfl < 1:
            raise SolverError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.sample_stride < 1:
            raise SolverError("sample_stride must be at least 1")
        if not self.radius > self.coefficient.radius:
            raise SolverError(f"R = {self.radius} must exceed r0 = {self.coefficient.radius}")

    @property
    def radius(self) -> float:
        """Localized-energy radius; defaults to 2 r0."""
        return float(self.R) if self.R is not None else 2.0 * self.coefficient.radius


@dataclass(frozen=True, eq=False)
class WaveState:
    u_prev: ScalarField
    u_curr: ScalarField
    t: float
    step: int

    def __post_init__(self) -> None:
        if self.u_prev.grid != self.u_curr.grid:
            raise GridError("u_prev and u_curr live on different grids")

    @property
    def grid(self) -> Grid2D:
        return self.u_curr.grid


@dataclass(frozen=True)
class AntiderivativeSample:
    """Terms of the v-identity at an integer time level t_n = n dt."""

    t: float
    half_ut_sq: float  # 0.5 |v_t|^2 = 0.5 |u(t)|^2
    half_grad_v_sq: float  # 0.5 <K grad v, grad v>
    source: float  # int u1 v
    half_u0_sq: float

    @property
    def l2_sq(self) -> float:
        return 2.0 * self.half_ut_sq

    @property
    def residual(self) -> float:
        lhs = self.half_ut_sq + self.half_grad_v_sq
        rhs = self.half_u0_sq + self.source
        scale = self.half_u0_sq + abs(self.source)
        if scale == 0:
            return 0.0 if lhs == rhs else math.inf
        return (lhs - rhs) / scale


@dataclass(eq=False)
class RunResult:
    config: SimulationConfig
    grid: Grid2D
    K: CoefficientField
    data: InitialData
    dt: float
    records: list[EnergyRecord]
    ledgers: list[MorawetzLedger]
    antiderivative: list[AntiderivativeSample]
    final_state: WaveState
    initial_density: ScalarField

    @property
    def E0(self) -> float:
        return self.records[0].E_total

    @property
    def J0(self) -> float:
        return self.ledgers[0].J0


def domain_extent(config: SimulationConfig, k1: float) -> float:
    """L + k1 T_max + 8 dx rounded up to the node lattice; enforces the node cap."""
    raw = config.L + k1 * config.T_max + 8 * config.dx
    grid = Grid2D.covering(raw, config.dx)
    nodes = grid.nodes_per_side ** 2
    if nodes > config.max_nodes:
        raise SolverError(f"domain needs {nodes} nodes ({grid.nodes_per_side}^2), cap is {config.max_nodes}")
    return grid.half_width


def cfl_timestep(dx: float, k1: float, cfl: float) -> float:
    if not (dx > 0 and k1 > 0 and cfl > 0):
        raise SolverError("dx, k1 and cfl must all be positive")
    return cfl * dx / (k1 * math.sqrt(2.0))


def _operator(K: CoefficientField):
    kx, ky = face_coefficients(K.samples.values)
    return kx, ky


def first_step(data: InitialData, K: CoefficientField, dt: float, forcing: Forcing | None = None) -> WaveState:
    """Second-order Taylor start: u(dt) = u0 + dt u1 + dt^2/2 (div K grad u0 + f(0))."""
    if data.grid != K.grid:
        raise GridError("initial data and coefficient live on different grids")
    kx, ky = _operator(K)
    u0 = data.u0.values
    acc = _flux_divergence(kx, ky, u0, data.grid.spacing)
    if forcing is not None:
        acc = acc + forcing(0.0, data.grid)
    u1 = u0 + dt * data.u1.values + 0.5 * dt * dt * acc
    if not np.all(np.isfinite(u1)):
        raise InstabilityError(1)
    return WaveState(data.u0, ScalarField(data.grid, u1), dt, 1)


def step(state: WaveState, K: CoefficientField, dt: float, forcing: Forcing | None = None) -> WaveState:
    """One leapfrog step: u_next = 2 u - u_prev + dt^2 (div K grad u + f(t))."""
    if state.grid != K.grid:
        raise GridError("state and coefficient live on different grids")
    kx, ky = _operator(K)
    u = np.ascontiguousarray(state.u_curr.values)
    up = np.ascontiguousarray(state.u_prev.values)
    out = np.empty_like(u)
    c = dt * dt / state.grid.cell_area
    kernels.leapfrog_window(u, up, kx, ky, c, out, 0, u.shape[0], out, 0.0, False)
    if forcing is not None:
        out += dt * dt * forcing(state.t, state.grid)
    if not np.all(np.isfinite(out)):
        raise InstabilityError(state.step + 1)
    return WaveState(state.u_curr, ScalarField(state.grid, out), state.t + dt, state.step + 1)


def velocity(state: WaveState, dt: float) -> ScalarField:
    """Centred velocity (u_curr - u_prev)/dt, an approximation of u_t at t - dt/2."""
    return ScalarField(state.grid, (state.u_curr.values - state.u_prev.values) / dt)


class _Window:
    """Square index window [lo, hi) containing every nonzero node."""

    def __init__(self, n: int, lo: int, hi: int):
        self.n = n
        self.lo = max(0, lo)
        self.hi = min(n, hi)

    def maybe_grow(self, u: np.ndarray, scale: float) -> None:
        if self.lo == 0 and self.hi == self.n:
            return
        if kernels.ring_max(u, self.lo, self.hi, WINDOW_RING) > WINDOW_TOL * scale:
            self.lo = max(0, self.lo - WINDOW_GROW)
            self.hi = min(self.n, self.hi + WINDOW_GROW)


def _variable_box(K: CoefficientField) -> tuple[int, int]:
    """Index range [blo, bhi) outside which every face coefficient equals k0."""
    idx = np.nonzero(K.samples.values != K.k0)
    if idx[0].size == 0:
        return 0, 0
    lo = int(min(idx[0].min(), idx[1].min())) - 1
    hi = int(max(idx[0].max(), idx[1].max())) + 2
    return max(lo, 0), min(hi, K.grid.nodes_per_side)


def _initial_window(data: InitialData, grid: Grid2D) -> tuple[int, int]:
    nz = np.nonzero((data.u0.values != 0) | (data.u1.values != 0))
    m = grid.center_index
    if nz[0].size == 0:
        return m - WINDOW_GROW, m + WINDOW_GROW + 1
    w = int(max(np.max(np.abs(nz[0] - m)), np.max(np.abs(nz[1] - m)))) + WINDOW_GROW
    return m - w, m + w + 1


def build_problem(config: SimulationConfig) -> tuple[Grid2D, CoefficientField, InitialData, float]:
    spec = config.coefficient
    k1 = spec.k1()
    half = domain_extent(config, k1)
    # keep the localized-energy disc and the coefficient support inside the grid
    half = max(half, config.radius + 2 * config.dx, spec.radius + 2 * config.dx)
    grid = Grid2D.covering(half, config.dx)
    if grid.nodes_per_side ** 2 > config.max_nodes:
        raise SolverError(f"domain needs {grid.nodes_per_side ** 2} nodes, cap is {config.max_nodes}")
    K = spec.build(grid)
    data = make_dataset(config.preset, grid, config.L, config.amplitude)
    dt = cfl_timestep(config.dx, K.k1, config.cfl)
    return grid, K, data, dt


def _x_dot_gradient(u0: ScalarField) -> np.ndarray:
    grid = u0.grid
    g1, g2 = gradient(u0)
    x1, x2 = grid.coordinates()
    return x1 * g1.values + x2 * g2.values


def run(config: SimulationConfig, sink: Callable[[EnergyRecord, MorawetzLedger], None] | None = None,
        problem: tuple | None = None) -> RunResult:
    """Integrate to T_max, recording diagnostics every ``sample_stride`` steps.

    Record 0 is built from the initial data at t = 0; later records sit at the
    half steps t_n - dt/2 where the leapfrog energy is exactly conserved.
    """
    grid, K, data, dt = problem if problem is not None else build_problem(config)
    n = grid.nodes_per_side
    m = grid.center_index
    dx = grid.spacing
    R = config.radius
    r0 = K.r0
    kx, ky = _operator(K)
    xg = np.ascontiguousarray(K.x_dot_grad.values)
    sqrt_k0 = math.sqrt(K.k0)
    n_steps = int(math.ceil(config.T_max / dt - 1e-12)) if config.T_max > 0 else 0

    # record 0 from the data
    e0 = initial_energy_density(data, K)
    E0 = integrate(e0)
    u0 = np.ascontiguousarray(data.u0.values)
    u1 = np.ascontiguousarray(data.u1.values)
    radius_field = grid.radius()
    xgrad0 = _x_dot_gradient(data.u0)
    J0 = compute_J0(data)
    umax0 = float(np.max(np.abs(u0))) if u0.size else 0.0
    support0 = float(np.max(radius_field[np.abs(u0) > SUPPORT_THRESHOLD * umax0])) if umax0 > 0 else 0.0
    rec0 = EnergyRecord(
        t=0.0, E_total=E0, E_loc=integrate(e0, Region.disc(R)), E_ext=0.0,
        l2_norm=data.norm_u0_l2,
        weighted_ext=integrate(ScalarField(grid, (1.0 + radius_field) * e0.values), Region.exterior(r0)),
        support_radius=support0, step=0,
    )
    rec0 = _with_ext(rec0)
    del radius_field
    ledger = MorawetzLedger.start(
        J0, E0, k_term_rate(u0, u0, xg, grid, r0),
        integrate(ScalarField(grid, 0.5 * u1 * u0)),
        integrate(ScalarField(grid, u1 * xgrad0)),
    )
    del xgrad0
    half_u0 = 0.5 * data.norm_u0_l2 ** 2
    records = [rec0]
    ledgers = [ledger]
    anti = [AntiderivativeSample(0.0, half_u0, 0.0, 0.0, half_u0)]
    if sink is not None:
        sink(rec0, ledger)

    if n_steps == 0:
        state = WaveState(data.u0, data.u0, 0.0, 0)
        return RunResult(config, grid, K, data, dt, records, ledgers, anti, state, e0)

    first = first_step(data, K, dt)
    up = np.array(u0, copy=True)
    u = np.array(first.u_curr.values, copy=True)
    v = np.zeros_like(u) if config.track_antiderivative else np.zeros((1, 1))
    if config.track_antiderivative:
        v += 0.5 * dt * (up + u)
    lo, hi = _initial_window(data, grid)
    win = _Window(n, lo, hi)
    scale = max(umax0, float(np.max(np.abs(u))))
    c = dt * dt / (dx * dx)
    blo, bhi = _variable_box(K)
    box_R, frac_R, _ = region_weights(grid, Region.disc(R))
    box_r0, frac_r0, _ = region_weights(grid, Region.disc(r0))
    lo_R, lo_r0 = box_R.indices(n)[0], box_r0.indices(n)[0]

    def sample(k: int) -> None:
        nonlocal ledger, scale
        t_half = (k - 0.5) * dt
        E, l2sq, cuu, cux, psi_e, umax = kernels.energy_sums(
            u, up, kx, ky, dx, dt, win.lo, win.hi, m, sqrt_k0, t_half)
        # a non-finite node anywhere in the window makes the energy sum non-finite
        if not math.isfinite(E):
            raise InstabilityError(k)
        scale = max(scale, umax)
        E_loc = kernels.box_energy(u, up, kx, ky, dx, dt, lo_R, frac_R, m, 0.0, False)
        inner = kernels.box_energy(u, up, kx, ky, dx, dt, lo_r0, frac_r0, m, sqrt_k0 * t_half, True)
        weighted_ext = psi_e - inner
        support = kernels.support_radius(u, SUPPORT_THRESHOLD * umax, win.lo, win.hi, m, dx) if umax > 0 else 0.0
        rec = _with_ext(EnergyRecord(t_half, E, E_loc, 0.0, math.sqrt(l2sq), weighted_ext, support, k))
        ledger = ledger.advance(t_half, k_term_rate(u, up, xg, grid, r0), cuu, cux)
        records.append(rec)
        ledgers.append(ledger)
        if config.track_antiderivative:
            hu, hv, src = kernels.antiderivative_sums(u, v, u1, kx, ky, dx, win.lo, win.hi)
            anti.append(AntiderivativeSample(k * dt, hu, hv, src, half_u0))
        if sink is not None:
            sink(rec, ledger)

    track = bool(config.track_antiderivative)
    half_dt = 0.5 * dt
    for k in range(1, n_steps + 1):
        if k > 1:
            win.maybe_grow(u, scale)
            kernels.leapfrog_inplace(u, up, kx, ky, K.k0, blo, bhi, c, win.lo, win.hi, v, half_dt, track)
            up, u = u, up
        if k % config.sample_stride == 0 or k == n_steps:
            sample(k)
    state = WaveState(ScalarField(grid, up), ScalarField(grid, u), n_steps * dt, n_steps)
    return RunResult(config, grid, K, data, dt, records, ledgers, anti, state, e0)


def _with_ext(rec: EnergyRecord) -> EnergyRecord:
    return EnergyRecord(rec.t, rec.E_total, rec.E_loc, rec.E_total - rec.E_loc, rec.l2_norm,
                        rec.weighted_ext, rec.support_radius, rec.step)
