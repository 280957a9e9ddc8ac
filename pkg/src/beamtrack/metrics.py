"""Performance measures and coherence-interval / delay arithmetic.

dB conversions happen only at reporting boundaries; everything internal is
linear. SINR follows the conditional-expectation convention: per fast-time
interval, |signal|^2 and |residual|^2 are averaged separately and then ratioed;
ratios from different intervals are averaged arithmetically.
"""

from __future__ import annotations

import numpy as np

SPEED_OF_LIGHT = 3.0e8  # rounded convention used by the CPI tables
SINR_CAP_DB = 200.0

__all__ = [
    "nmse_analytic",
    "nmse_empirical",
    "angular_rmse",
    "sinr_empirical",
    "cpi_calculator",
    "delay_difference",
    "to_db",
    "from_db",
]


def to_db(x: float | np.ndarray) -> float | np.ndarray:
    return 10.0 * np.log10(x)


def from_db(x: float | np.ndarray) -> float | np.ndarray:
    return 10.0 ** (np.asarray(x) / 10.0)


def nmse_analytic(
    psi_tilde: np.ndarray,
    r_tilde: np.ndarray,
    power: float,
    n_f: int,
) -> float:
    """Closed-form channel-estimation NMSE tr(Psi - E R) / (E N_F tr(R))."""
    tr_r = float(np.trace(r_tilde).real)
    if tr_r <= 0:
        raise ValueError("tr(r_tilde) must be > 0")
    num = float(np.trace(psi_tilde).real) - power * tr_r
    return num / (power * n_f * tr_r)


def nmse_empirical(
    estimates: list[np.ndarray] | np.ndarray,
    truths: list[np.ndarray] | np.ndarray,
) -> float:
    """Accumulated-ratio NMSE: sum ||h_hat - h||^2 / sum ||h||^2."""
    if len(estimates) != len(truths) or len(estimates) == 0:
        raise ValueError("estimates and truths must be nonempty and matched")
    num = 0.0
    den = 0.0
    for e, t in zip(estimates, truths):
        num += float(np.sum(np.abs(np.asarray(e) - np.asarray(t)) ** 2))
        den += float(np.sum(np.abs(np.asarray(t)) ** 2))
    if den == 0.0:
        raise ValueError("zero truth energy")
    return num / den


def angular_rmse(estimates: np.ndarray, truths: np.ndarray) -> float:
    """Root mean squared angular error between matched estimate/truth lists."""
    estimates = np.asarray(estimates, dtype=float)
    truths = np.asarray(truths, dtype=float)
    if estimates.shape != truths.shape or estimates.size < 1:
        raise ValueError("estimates and truths must be nonempty and matched")
    return float(np.sqrt(np.mean((estimates - truths) ** 2)))


def sinr_empirical(
    symbol_outputs: np.ndarray,
    signal_coeffs: np.ndarray,
) -> float:
    """Linear SINR of one fast-time interval's symbol stream.

    ``signal_coeffs`` carries the detector-known signal term sqrt(E)
    (h_hat^H h_hat) s per symbol; the residual is everything else in the
    matched-filter output. A zero-residual stream reports the +200 dB cap.
    """
    s = np.asarray(signal_coeffs)
    n = np.asarray(symbol_outputs) - s
    if s.size < 1:
        raise ValueError("need at least one symbol")
    sig = float(np.mean(np.abs(s) ** 2))
    res = float(np.mean(np.abs(n) ** 2))
    cap = float(from_db(SINR_CAP_DB))
    if res == 0.0:
        return cap
    return min(sig / res, cap)


def cpi_calculator(
    fc_over_w: float,
    speed: float,
    d_over_lambda: float,
    n_antennas: int,
) -> tuple[float, float]:
    """Coherence-interval budget: (symbols per FT-CPI, FT-CPIs per ST-CPI).

    Symbols per gain-coherence interval: c / (10 v fc/W) with c = 3e8 m/s;
    angle-coherence intervals per beamwidth: 20 (d/lambda) / N.
    """
    if fc_over_w <= 0 or speed <= 0 or d_over_lambda <= 0 or n_antennas <= 0:
        raise ValueError("all CPI inputs must be positive")
    symbols = SPEED_OF_LIGHT / (10.0 * speed * fc_over_w)
    ftcpis = 20.0 * d_over_lambda / n_antennas
    return symbols, ftcpis


def delay_difference(path_diff: float, bandwidth: float) -> float:
    """Discrete delay difference (in symbols) for a path-length difference in meters."""
    if path_diff < 0 or bandwidth <= 0:
        raise ValueError("path_diff must be >= 0 and bandwidth > 0")
    return path_diff * bandwidth / SPEED_OF_LIGHT
