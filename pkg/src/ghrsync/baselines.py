"""Comparison methods: cross-correlation delay estimation and a TWME clock model.

These are the conventional two-step baselines: estimate the time delay
first (physical-layer correlation peak, or MAC-layer two-way message
exchange), then compensate the waveform phase with that estimate and read
the residual rotation as the RF phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import AmbiguousPeakError, ConfigurationError
from .featext import wrap_to_pi
from .waveforms import WaveformSpec, total_phase


def gcc_delay(node_seq: np.ndarray, ref_seq: np.ndarray, sample_rate_hz: float) -> float:
    """Generalized cross-correlation delay with parabolic sub-sample refinement.

    Positive result means the node lags the reference.  The full linear
    cross-correlation is computed via zero-padded FFTs (identical to direct
    summation up to rounding); the magnitude peak is refined by a parabola
    through the peak and its two neighbors.
    """
    x = np.asarray(node_seq)
    y = np.asarray(ref_seq)
    if x.size != y.size or x.size < 16:
        raise ValueError("sequences must have equal length >= 16")
    n = x.size
    nfft = 1 << int(math.ceil(math.log2(2 * n - 1)))
    spec = np.fft.fft(x, nfft) * np.conj(np.fft.fft(y, nfft))
    cc = np.fft.ifft(spec)
    # lags -(n-1) .. n-1; cc[l % nfft] corresponds to x shifted by +l
    lags = np.concatenate([np.arange(0, n), np.arange(-(n - 1), 0)])
    mag = np.abs(np.concatenate([cc[: n], cc[nfft - (n - 1) :]]))
    peak = int(np.argmax(mag))
    order = np.argsort(lags)
    mag_sorted = mag[order]
    lag_sorted = lags[order]
    pos = int(np.searchsorted(lag_sorted, lags[peak]))
    if pos == 0 or pos == lag_sorted.size - 1:
        raise AmbiguousPeakError("correlation peak at the lag-range boundary")
    m_minus, m0, m_plus = mag_sorted[pos - 1], mag_sorted[pos], mag_sorted[pos + 1]
    denom = m_minus - 2.0 * m0 + m_plus
    frac = 0.0 if denom == 0.0 else 0.5 * (m_minus - m_plus) / denom
    return (lag_sorted[pos] + frac) / sample_rate_hz


def two_step_phase(
    node_seq: np.ndarray,
    ref_seq: np.ndarray,
    delay_est_s: float,
    spec: WaveformSpec,
    timestamps_s: np.ndarray | None = None,
) -> float:
    """Conventional second-step phase calibration given a delay estimate.

    Compensates the node phase by Phi(t) - Phi(t - delay) from the known
    waveform law, then takes the circular mean of the residual inter-node
    rotation.  A wrong delay leaves a time-varying residual omega(t)*dTau
    that sweeps the resultant toward zero.
    """
    x = np.asarray(node_seq)
    y = np.asarray(ref_seq)
    if x.size != y.size or x.size < 2:
        raise ValueError("sequences must have equal length >= 2")
    if timestamps_s is None:
        timestamps_s = np.arange(x.size) / spec.sample_rate_hz
    comp = total_phase(spec, timestamps_s, extrapolate=True) - total_phase(
        spec, timestamps_s - delay_est_s, extrapolate=True
    )
    resultant = np.mean(x * np.conj(y) * np.exp(1j * comp))
    return float(wrap_to_pi(np.angle(resultant)))


@dataclass(frozen=True)
class TwmeModel:
    """Two-way message-exchange protocol model with queuing jitter.

    Per-direction delay = deterministic propagation + exponential random
    queuing with mean ``queue_jitter_mean_s``; the asymmetry parameter
    scales the forward mean by (1 + a) and the return mean by (1 - a).
    Defaults land the clock error at the nanosecond level while the
    carrier-scale delay scatter scrambles any two-step phase estimate.
    """

    exchanges: int = 10
    queue_jitter_mean_s: float = 2e-9
    asymmetry: float = 0.5
    seed: int = 0
    prop_delay_s: float = 1e-7

    def __post_init__(self):
        if self.exchanges < 2:
            raise ConfigurationError("need at least 2 exchanges")
        if self.queue_jitter_mean_s < 0:
            raise ConfigurationError("queue jitter mean must be >= 0")
        if not 0.0 <= self.asymmetry <= 1.0:
            raise ConfigurationError("asymmetry must lie in [0, 1]")


def twme_ols(true_offset_s: float, model: TwmeModel) -> float:
    """Simulate N two-way exchanges and fit the clock offset by least squares.

    Timestamp bookkeeping per exchange i (skew constrained to zero):

        t1: master send     t2 = t1 + d_fwd + offset
        t3: slave send      t4 = t3 + d_ret - offset

    so each exchange yields offset_i = ((t2-t1) - (t4-t3)) / 2 and the OLS
    fit over exchanges reduces to their mean.  Queuing asymmetry biases the
    estimate by (mean_fwd - mean_ret)/2; zero jitter recovers the offset
    exactly.
    """
    rng = np.random.default_rng(model.seed)
    n = model.exchanges
    mean_f = model.queue_jitter_mean_s * (1.0 + model.asymmetry)
    mean_r = model.queue_jitter_mean_s * (1.0 - model.asymmetry)
    d_fwd = model.prop_delay_s + (rng.exponential(mean_f, n) if mean_f > 0 else 0.0)
    d_ret = model.prop_delay_s + (rng.exponential(mean_r, n) if mean_r > 0 else 0.0)
    t1 = np.arange(n) * 1e-3
    t2 = t1 + d_fwd + true_offset_s
    t3 = t2 + 5e-6  # slave turnaround
    t4 = t3 + d_ret - true_offset_s
    per_exchange = 0.5 * ((t2 - t1) - (t4 - t3))
    return float(np.mean(per_exchange))
