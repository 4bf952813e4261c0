"""Radial bulk-modulus fields K(x) and numerical checks of the hypotheses (K-1)-(K-5).

Every coefficient here is radial, K(x) = g(|x|), and constant beyond a radius
r0.  A :class:`RadialProfile` knows g and g' analytically; a
:class:`CoefficientField` is a profile sampled on a grid together with the
constants the decay estimates consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .field import Grid2D, ScalarField, gradient

__all__ = [
    "CoefficientError",
    "RadialProfile",
    "ConstantProfile",
    "PowerBridgeProfile",
    "BumpProfile",
    "WiggleProfile",
    "CoefficientField",
    "ConditionReport",
    "CoefficientSpec",
    "FAMILIES",
    "bump",
    "bump_derivative",
    "make_constant",
    "make_power_bridge",
    "make_radial_decreasing",
    "make_lipschitz_perturbation",
    "wiggle_amplitude_for_lip",
    "validate_conditions",
]

SIGN_TOL = 1e-8
LIP_TOL = 1e-6
ALL_CONDITIONS = ("K1", "K2", "K3", "K4", "K5")


class CoefficientError(ValueError):
    """A coefficient family was asked for parameters outside its hypothesis set."""


def bump(s):
    """Standard bump exp(1 - 1/(1 - s^2)) on |s| < 1, zero elsewhere; equals 1 at s = 0."""
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


def bump_derivative(s):
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    q = 1.0 - si * si
    out[inside] = np.exp(1.0 - 1.0 / q) * (-2.0 * si / (q * q))
    return out


def _smoothstep(x):
    return x * x * (3.0 - 2.0 * x)


def _smoothstep_integral(x):
    return x ** 3 - 0.5 * x ** 4


class RadialProfile:
    """Radial profile g(r) with far-field value ``k0`` for r >= ``r0``."""

    k0: float
    r0: float

    def value(self, r):
        raise NotImplementedError

    def derivative(self, r):
        raise NotImplementedError

    def radial_grad(self, r):
        """r * g'(r), which equals x . grad K at |x| = r."""
        r = np.asarray(r, dtype=np.float64)
        return r * self.derivative(r)

    def _dense(self, n: int = 200_001):
        r = np.linspace(0.0, self.r0, n)
        return r

    def _extremum(self, func, sign: float) -> float:
        # Dense scan followed by a bounded local polish around the best sample.
        r = self._dense()
        vals = sign * func(r)
        i = int(np.argmax(vals))
        best = float(vals[i])
        h = r[1] - r[0]
        lo, hi = max(0.0, r[i] - h), min(self.r0, r[i] + h)
        if hi > lo:
            res = minimize_scalar(lambda x: -sign * float(func(np.array([x]))[0]),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            best = max(best, -float(res.fun))
        return sign * best

    def k_min(self) -> float:
        return min(self._extremum(self.value, -1.0), self.k0)

    def k_max(self) -> float:
        return max(self._extremum(self.value, 1.0), self.k0)

    def lip(self) -> float:
        return abs(self._extremum(lambda r: np.abs(self.derivative(r)), 1.0))

    def max_elasticity(self) -> float:
        """max over r of r g'(r) / g(r)."""
        return max(0.0, self._extremum(lambda r: self.radial_grad(r) / self.value(r), 1.0))

    def max_radial_grad(self) -> float:
        return self._extremum(self.radial_grad, 1.0)


@dataclass(frozen=True)
class ConstantProfile(RadialProfile):
    k0: float
    r0: float = 1.0

    def value(self, r):
        return np.full_like(np.asarray(r, dtype=np.float64), self.k0)

    def derivative(self, r):
        return np.zeros_like(np.asarray(r, dtype=np.float64))


@dataclass(frozen=True)
class PowerBridgeProfile(RadialProfile):
    """(1 + r^2)^(gamma0/2) up to r0/2, constant (1 + r0^2)^(gamma0/2) from r0 on.

    On [r0/2, r0] the profile is bridged in log-log coordinates: its elasticity
    r g'/g is ramped with smoothsteps through a plateau strictly below gamma0
    and down to zero at r0, so the bridge is C^1 (indeed C^2), monotone and
    satisfies r g' <= gamma0 g with a margin.
    """

    gamma0: float
    r0: float
    _bridge: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        g = self.gamma0
        r1 = 0.5 * self.r0
        l1 = 0.5 * g * math.log1p(r1 * r1)
        l2 = 0.5 * g * math.log1p(self.r0 * self.r0)
        e1 = g * r1 * r1 / (1.0 + r1 * r1)
        span = math.log(2.0)
        if g == 0.0:
            bridge = (l1, e1, 0.0, 0.5, span)
        else:
            mean = (l2 - l1) / span
            cap = 0.5 * (mean + g)
            lam = min(0.5, (cap - mean) / (cap - 0.5 * e1))
            top = (mean - 0.5 * lam * e1) / (1.0 - lam)
            bridge = (l1, e1, top, lam, span)
        object.__setattr__(self, "_bridge", bridge)

    @property
    def k0(self) -> float:
        return (1.0 + self.r0 * self.r0) ** (0.5 * self.gamma0)

    @property
    def plateau_elasticity(self) -> float:
        return self._bridge[2]

    def _bridge_elasticity(self, tau):
        _, e1, top, lam, _ = self._bridge
        e = np.full_like(tau, top)
        a = tau < lam
        e[a] = e1 + (top - e1) * _smoothstep(tau[a] / lam)
        b = tau > 1.0 - lam
        e[b] = top * (1.0 - _smoothstep((tau[b] - 1.0 + lam) / lam))
        return e

    def _bridge_log(self, tau):
        l1, e1, top, lam, span = self._bridge
        out = np.empty_like(tau)
        a = tau <= lam
        out[a] = e1 * tau[a] + (top - e1) * lam * _smoothstep_integral(tau[a] / lam)
        i1 = e1 * lam + 0.5 * (top - e1) * lam
        b = (tau > lam) & (tau <= 1.0 - lam)
        out[b] = i1 + top * (tau[b] - lam)
        i2 = i1 + top * (1.0 - 2.0 * lam)
        c = tau > 1.0 - lam
        x = (tau[c] - 1.0 + lam) / lam
        out[c] = i2 + top * lam * x - top * lam * _smoothstep_integral(x)
        return l1 + span * out

    def _pieces(self, r):
        r = np.asarray(r, dtype=np.float64)
        inner = r <= 0.5 * self.r0
        outer = r >= self.r0
        mid = ~inner & ~outer
        tau = np.log(r[mid] / (0.5 * self.r0)) / math.log(2.0)
        return r, inner, outer, mid, tau

    def value(self, r):
        r, inner, outer, mid, tau = self._pieces(r)
        out = np.empty_like(r)
        out[inner] = (1.0 + r[inner] ** 2) ** (0.5 * self.gamma0)
        out[outer] = self.k0
        out[mid] = np.exp(self._bridge_log(tau))
        return out

    def elasticity(self, r):
        r, inner, outer, mid, tau = self._pieces(r)
        out = np.zeros_like(r)
        ri = r[inner]
        out[inner] = self.gamma0 * ri * ri / (1.0 + ri * ri)
        out[mid] = self._bridge_elasticity(tau)
        return out

    def radial_grad(self, r):
        return self.elasticity(r) * self.value(r)

    def derivative(self, r):
        r = np.asarray(r, dtype=np.float64)
        rg = self.radial_grad(r)
        out = np.zeros_like(r)
        nz = r > 0
        out[nz] = rg[nz] / r[nz]
        return out


@dataclass(frozen=True)
class BumpProfile(RadialProfile):
    """k0 + (k_peak - k0) * B(r / r0): radially nonincreasing when k_peak >= k0."""

    k_peak: float
    k0: float
    r0: float

    def value(self, r):
        return self.k0 + (self.k_peak - self.k0) * bump(np.asarray(r) / self.r0)

    def derivative(self, r):
        return (self.k_peak - self.k0) * bump_derivative(np.asarray(r) / self.r0) / self.r0


@dataclass(frozen=True)
class WiggleProfile(RadialProfile):
    """k0 + amplitude * B(r / r0) * cos(2 r): Lipschitz but not monotone."""

    k0: float
    amplitude: float
    r0: float

    def value(self, r):
        r = np.asarray(r, dtype=np.float64)
        return self.k0 + self.amplitude * bump(r / self.r0) * np.cos(2.0 * r)

    def derivative(self, r):
        r = np.asarray(r, dtype=np.float64)
        s = r / self.r0
        return self.amplitude * (bump_derivative(s) / self.r0 * np.cos(2.0 * r)
                                 - 2.0 * bump(s) * np.sin(2.0 * r))


@dataclass(frozen=True, eq=False)
class CoefficientField:
    samples: ScalarField
    x_dot_grad: ScalarField
    k_m: float
    k0: float
    k1: float
    r0: float
    gamma0: float | None
    lip_grad_sup: float
    eta0: float | None
    family: str = "custom"
    hypotheses: frozenset = frozenset()
    profile: RadialProfile | None = None

    def __post_init__(self) -> None:
        k = self.samples.values
        if not self.k_m > 0:
            raise CoefficientError(f"k_m must be positive, got {self.k_m}")
        if k.min() < self.k_m:
            raise CoefficientError(f"sample {k.min()} below k_m = {self.k_m} (K-1)")
        far = self.samples.grid.radius() > self.r0
        if np.any(k[far] != self.k0):
            raise CoefficientError("samples beyond r0 differ from k0 (K-3)")
        if self.k1 * self.k1 < k.max() or self.k0 < self.k_m:
            raise CoefficientError("k1^2 must dominate every sample and k0 >= k_m")
        if self.eta0 is not None and not math.isclose(
                self.eta0, self.r0 * self.lip_grad_sup / self.k_m, rel_tol=1e-12, abs_tol=1e-15):
            raise CoefficientError("eta0 inconsistent with r0 * lip_grad_sup / k_m")

    @property
    def grid(self) -> Grid2D:
        return self.samples.grid

    @property
    def values(self):
        return self.samples.values


@dataclass(frozen=True)
class ConditionReport:
    passed: dict
    worst_violation: dict
    measured_gamma0: float
    measured_lip: float
    max_radial_grad: float

    @property
    def pass_set(self) -> frozenset:
        return frozenset(k for k, ok in self.passed.items() if ok)


def _sample(profile: RadialProfile, grid: Grid2D, family: str, hypotheses,
            gamma0: float | None, k_min: float, k_max: float, lip: float) -> CoefficientField:
    r = grid.radius()
    vals = np.where(r > profile.r0, profile.k0, profile.value(r))
    xg = np.where(r > profile.r0, 0.0, profile.radial_grad(r))
    k_m = min(k_min, float(vals.min()))
    top = max(k_max, float(vals.max()))
    k1 = math.sqrt(top)
    if k1 * k1 < top:  # rounding must not break k1^2 >= max K
        k1 = math.nextafter(k1, math.inf)
    eta0 = profile.r0 * lip / k_m
    return CoefficientField(
        samples=ScalarField(grid, vals),
        x_dot_grad=ScalarField(grid, xg),
        k_m=k_m, k0=profile.k0, k1=k1, r0=profile.r0,
        gamma0=gamma0, lip_grad_sup=lip, eta0=eta0,
        family=family, hypotheses=frozenset(hypotheses), profile=profile,
    )


def make_constant(k0: float, grid: Grid2D, r0: float = 1.0) -> CoefficientField:
    if not k0 > 0:
        raise CoefficientError(f"k0 must be positive, got {k0}")
    prof = ConstantProfile(float(k0), float(r0))
    return _sample(prof, grid, "constant", ALL_CONDITIONS, 0.0, k0, k0, 0.0)


def make_power_bridge(gamma0: float, r0: float, grid: Grid2D) -> CoefficientField:
    if not 0.0 <= gamma0 < 1.0:
        raise CoefficientError(f"gamma0 must lie in [0, 1), got {gamma0}")
    if r0 < 4 * grid.spacing:
        raise CoefficientError(f"r0 = {r0} must be at least 4 grid spacings")
    prof = PowerBridgeProfile(float(gamma0), float(r0))
    hyp = {"K1", "K3", "K4", "K5"} | ({"K2"} if gamma0 == 0 else set())
    field_ = _sample(prof, grid, "power_bridge", hyp, float(gamma0), 1.0, prof.k0, prof.lip())
    report = validate_conditions(field_)
    if not report.passed["K4"]:
        r = grid.radius()
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = _measured_radial_grad(field_) / field_.values
        idx = np.unravel_index(int(np.nanargmax(ratio)), ratio.shape)
        raise CoefficientError(
            f"bridge violates (K-4): x.gradK/K = {ratio[idx]:.6g} > {gamma0} at node {idx} (|x| = {r[idx]:.4g})")
    return field_


def make_radial_decreasing(k_peak: float, k0: float, r0: float, grid: Grid2D) -> CoefficientField:
    if not k0 > 0:
        raise CoefficientError(f"k0 must be positive, got {k0}")
    if k_peak < k0:
        raise CoefficientError(f"k_peak = {k_peak} < k0 = {k0} would violate (K-2)")
    prof = BumpProfile(float(k_peak), float(k0), float(r0))
    return _sample(prof, grid, "radial_decreasing", ALL_CONDITIONS, 0.0, k0, k_peak, prof.lip())


def wiggle_amplitude_for_lip(lip: float, r0: float) -> float:
    """Amplitude giving ``WiggleProfile`` the Lipschitz constant ``lip``."""
    return lip / WiggleProfile(1.0, 1.0, r0).lip()


def make_lipschitz_perturbation(k0: float, amplitude: float, r0: float, grid: Grid2D) -> CoefficientField:
    if amplitude == 0:
        return _sample(ConstantProfile(float(k0), float(r0)), grid, "lipschitz",
                       ALL_CONDITIONS, 0.0, k0, k0, 0.0)
    prof = WiggleProfile(float(k0), float(amplitude), float(r0))
    k_min = prof.k_min()
    if k_min <= 0:
        raise CoefficientError(f"min K = {k_min:.6g} is not positive")
    lip = prof.lip()
    eta0 = r0 * lip / k_min
    if eta0 >= 1:
        raise CoefficientError(f"eta0 = r0 * |grad K|_inf / k_m = {eta0:.6g} must be < 1")
    return _sample(prof, grid, "lipschitz", {"K1", "K3", "K5"}, None, k_min, prof.k_max(), lip)


def _measured_radial_grad(K: CoefficientField):
    g1, g2 = gradient(K.samples)
    x1, x2 = K.grid.coordinates()
    return x1 * g1.values + x2 * g2.values


def validate_conditions(K: CoefficientField) -> ConditionReport:
    """Grid-node checks of (K-1)-(K-5) using the discrete gradient."""
    k = K.values
    g1, g2 = gradient(K.samples)
    xg = _measured_radial_grad(K)
    r = K.grid.radius()
    lip_measured = float(np.max(np.hypot(g1.values, g2.values)))
    gamma_measured = float(np.max(xg / k))
    max_xg = float(np.max(xg))
    far = r > K.r0
    k3 = float(np.max(np.abs(k[far] - K.k0))) if np.any(far) else 0.0

    worst = {
        "K1": max(0.0, K.k_m - float(k.min())),
        "K2": max(0.0, max_xg),
        "K3": k3,
        "K4": max(0.0, gamma_measured - (K.gamma0 if K.gamma0 is not None else 0.0)),
        "K5": max(0.0, lip_measured - K.lip_grad_sup),
    }
    passed = {
        "K1": worst["K1"] == 0.0 and K.k_m > 0,
        "K2": max_xg <= SIGN_TOL,
        "K3": k3 == 0.0,
        "K4": K.gamma0 is not None and K.gamma0 < 1 and gamma_measured <= K.gamma0 + SIGN_TOL,
        "K5": math.isfinite(K.lip_grad_sup) and lip_measured <= K.lip_grad_sup + LIP_TOL,
    }
    return ConditionReport(passed, worst, gamma_measured, lip_measured, max_xg)


FAMILIES = ("constant", "power_bridge", "radial_decreasing", "lipschitz")


@dataclass(frozen=True)
class CoefficientSpec:
    """Family name plus parameters; grid-independent."""

    family: str = "constant"
    k0: float = 1.0
    r0: float | None = None
    gamma0: float = 0.0
    k_peak: float = 2.0
    amplitude: float = 0.0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise CoefficientError(f"unknown coefficient family {self.family!r}")

    @property
    def radius(self) -> float:
        if self.r0 is not None:
            return float(self.r0)
        return 4.0 if self.family == "power_bridge" else (2.0 if self.family == "lipschitz" else
                                                         (3.0 if self.family == "radial_decreasing" else 1.0))

    def profile(self) -> RadialProfile:
        if self.family == "constant":
            return ConstantProfile(self.k0, self.radius)
        if self.family == "power_bridge":
            return PowerBridgeProfile(self.gamma0, self.radius)
        if self.family == "radial_decreasing":
            return BumpProfile(self.k_peak, self.k0, self.radius)
        if self.amplitude == 0:
            return ConstantProfile(self.k0, self.radius)
        return WiggleProfile(self.k0, self.amplitude, self.radius)

    def k1(self) -> float:
        return math.sqrt(self.profile().k_max())

    def build(self, grid: Grid2D) -> CoefficientField:
        if self.family == "constant":
            return make_constant(self.k0, grid, self.radius)
        if self.family == "power_bridge":
            return make_power_bridge(self.gamma0, self.radius, grid)
        if self.family == "radial_decreasing":
            return make_radial_decreasing(self.k_peak, self.k0, self.radius, grid)
        return make_lipschitz_perturbation(self.k0, self.amplitude, self.radius, grid)
