"""Closed-form performance limits: aperture bound and joint Cramer-Rao bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scene import SPEED_OF_LIGHT
from .waveforms import WaveformSpec, inst_freq


def max_aperture_m(sample_rate_hz: float, duration_s: float, bandwidth_hz: float) -> float:
    """Maximum unambiguous macroscopic aperture c * fs * T / (2B).

    Beyond this separation the per-sample phase-difference increment of a
    full-band sweep exceeds pi and unwrapping collapses.
    """
    if sample_rate_hz <= 0 or duration_s <= 0 or bandwidth_hz <= 0:
        raise ValueError("all parameters must be positive")
    return SPEED_OF_LIGHT * sample_rate_hz * duration_s / (2.0 * bandwidth_hz)


def phase_noise_variance(snr_db: float, subarray_elems: int = 1, window: int = 1) -> float:
    """Per-sample variance of the differenced two-node phase measurement.

    High-SNR small-angle regime: each node contributes
    1 / (2 * SNR * M_sub * L) after coherent integration, and the two
    independent contributions add.  Note this is the marginal per-sample
    variance; sliding-window integration reuses samples, so only the
    window-free value enters the K-snapshot Cramer-Rao bounds.
    """
    if subarray_elems < 1 or window < 1:
        raise ValueError("subarray_elems and window must be >= 1")
    if math.isinf(snr_db):
        return 0.0
    snr_lin = 10.0 ** (snr_db / 10.0)
    return 1.0 / (snr_lin * subarray_elems * window)


@dataclass
class CrbResult:
    """Joint clock/phase bound together with the frequency moments behind it."""

    crb_clock_s2: float
    crb_gen_intercept_rad2: float
    mean_omega_rad_s: float
    var_omega_rad2_s2: float
    snapshots: int
    phase_noise_var_rad2: float


def crb(spec: WaveformSpec, timestamps: np.ndarray, phase_noise_var: float) -> CrbResult:
    """Cramer-Rao bounds of the slope/intercept model over a snapshot grid.

    Empirical frequency moments over the actual grid are used (masked
    snapshots respected), giving

        CRB(dT)    = sigma^2 / (K * Var(omega))
        CRB(Gamma~) = sigma^2 / K * (1 + mean(omega)^2 / Var(omega))

    A constant-frequency grid has Var(omega) = 0 and returns infinite
    bounds: the dynamic-observability failure, not an error.
    """
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < 2:
        raise ValueError("need at least two snapshots")
    omega = inst_freq(spec, ts, 0)
    w_mean = float(np.mean(omega))
    w_var = float(np.mean((omega - w_mean) ** 2))
    k = ts.size
    if w_var <= (1e-15 * abs(w_mean)) ** 2:
        return CrbResult(math.inf, math.inf, w_mean, 0.0, k, phase_noise_var)
    clock = phase_noise_var / (k * w_var)
    intercept = phase_noise_var / k * (1.0 + w_mean**2 / w_var)
    return CrbResult(clock, intercept, w_mean, w_var, k, phase_noise_var)
