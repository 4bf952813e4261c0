import numpy as np
import pytest

from wavedecay.diagnostics import DiagnosticsError, decay_fit, windowed_ratio

T = np.linspace(1.5, 250.0, 600)


def test_pure_power_law():
    fit = decay_fit((T, 3.0 / T), (20.0, 200.0))
    assert fit.slope == pytest.approx(-1.0, abs=0.01)
    assert fit.best_model == "t^-1"
    assert fit.residuals["t^-1"] < 1e-12


def test_log_factor_lifts_slope():
    e = 3.0 / T * np.sqrt(np.log(T))
    fit = decay_fit((T, e), (20.0, 200.0))
    # the local slope -1 + 1/(2 log t) spans [-0.906, -0.833] on the window
    lo, hi = -1 + 0.5 / np.log(200.0), -1 + 0.5 / np.log(20.0)
    assert lo < fit.slope < hi
    assert fit.best_model == "t^-1 sqrt(log t)"
    assert fit.prefactor == pytest.approx(3.0, rel=1e-12)


def test_gamma_model_selected():
    e = 0.7 * T ** (0.5 - 1.0) * np.sqrt(np.log(T))
    fit = decay_fit((T, e), (20.0, 200.0), gamma=0.5)
    assert fit.best_model == "t^(gamma-1) sqrt(log t)"


def test_windowed_ratio():
    e = 3.0 / T * np.sqrt(np.log(T))
    assert windowed_ratio((T, e), (20.0, 200.0)) == pytest.approx(1.0, rel=1e-12)
    e2 = T ** -2.0
    expect = (20.0 ** -1 / np.sqrt(np.log(20.0))) / (200.0 ** -1 / np.sqrt(np.log(200.0)))
    t = np.linspace(20.0, 200.0, 181)
    assert windowed_ratio((t, t ** -2.0), (20.0, 200.0)) == pytest.approx(expect, rel=1e-12)
    assert e2.size == T.size


def test_nonpositive_samples():
    e = 3.0 / T
    e[::10] = 0.0
    fit = decay_fit((T, e), (20.0, 200.0))
    assert fit.n_excluded > 0 and fit.slope == pytest.approx(-1.0, abs=0.01)
    e[::2] = -1.0
    with pytest.raises(DiagnosticsError):
        decay_fit((T, e), (20.0, 200.0))


def test_bad_windows():
    with pytest.raises(DiagnosticsError):
        decay_fit((T, 1 / T), (0.5, 20.0))
    with pytest.raises(DiagnosticsError):
        decay_fit((T, 1 / T), (20.0, 20.0))
    with pytest.raises(DiagnosticsError):
        decay_fit((T, 1 / T), (20.0, 22.0))
