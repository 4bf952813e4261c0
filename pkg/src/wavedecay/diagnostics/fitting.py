"""Least-squares fits of localized-energy decay on a time window."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import DiagnosticsError

__all__ = ["DecayFit", "decay_fit", "windowed_ratio", "MIN_SAMPLES", "MAX_EXCLUDED"]

MIN_SAMPLES = 12
MAX_EXCLUDED = 0.30


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    prefactor: float  # C in E ~ C t^-1 sqrt(log t)
    residuals: dict = field(default_factory=dict)  # RMS log-residual per model
    best_model: str = ""
    n_used: int = 0
    n_excluded: int = 0


def _series(records_or_arrays):
    if isinstance(records_or_arrays, tuple) and len(records_or_arrays) == 2:
        t, e = records_or_arrays
        return np.asarray(t, dtype=np.float64), np.asarray(e, dtype=np.float64)
    return (np.array([r.t for r in records_or_arrays], dtype=np.float64),
            np.array([r.E_loc for r in records_or_arrays], dtype=np.float64))


def _window(t, e, window):
    ta, tb = window
    if not (ta > 1.0 and tb > ta):
        raise DiagnosticsError(f"window must satisfy 1 < t_a < t_b, got {window}")
    sel = (t >= ta) & (t <= tb)
    t, e = t[sel], e[sel]
    keep = e > 0
    n_bad = int(np.count_nonzero(~keep))
    if t.size and n_bad > MAX_EXCLUDED * t.size:
        raise DiagnosticsError(f"{n_bad} of {t.size} samples have nonpositive E_loc")
    t, e = t[keep], e[keep]
    if t.size < MIN_SAMPLES:
        raise DiagnosticsError(f"need at least {MIN_SAMPLES} positive samples in the window, have {t.size}")
    return t, e, n_bad


def decay_fit(records, window: tuple[float, float], gamma: float = 0.0) -> DecayFit:
    """Fit log E_loc against log t and against the three rate models.

    ``records`` is a sequence of EnergyRecord or a ``(t, E)`` pair.  Models
    t^-1, t^-1 sqrt(log t) and t^(gamma-1) sqrt(log t) each get a fitted
    prefactor; their RMS log-residuals decide the best model.
    """
    t, e, n_bad = _window(*_series(records), window)
    lt, le = np.log(t), np.log(e)
    slope, intercept = np.polyfit(lt, le, 1)
    models = {
        "t^-1": -lt,
        "t^-1 sqrt(log t)": -lt + 0.5 * np.log(lt),
        "t^(gamma-1) sqrt(log t)": (gamma - 1.0) * lt + 0.5 * np.log(lt),
    }
    res = {}
    pref = {}
    for name, shape in models.items():
        c = float(np.mean(le - shape))
        pref[name] = math.exp(c)
        res[name] = float(np.sqrt(np.mean((le - shape - c) ** 2)))
    best = min(res, key=lambda k: (res[k], list(models).index(k)))
    return DecayFit(float(slope), float(intercept), pref["t^-1 sqrt(log t)"], res, best, int(t.size), n_bad)


def windowed_ratio(records, window: tuple[float, float], gamma: float = 0.0) -> float:
    """max / min over the window of E_loc(t) t^(1 - gamma) / sqrt(log t)."""
    t, e, _ = _window(*_series(records), window)
    q = e * t ** (1.0 - gamma) / np.sqrt(np.log(t))
    return float(q.max() / q.min())
