"""Closed-form calibration waveforms and their instantaneous-phase derivatives.

All four source kinds share the analytic-signal convention s(t) = exp(j*Phi(t))
with Phi(0) = 0.  Frequency laws:

    lfm:  f(t) = f0 + (B/T)*t                 (upward sweep from f0)
    sfm:  f(t) = f0 + (B/2)*sin(2*pi*fm*t)    (peak-to-peak deviation B)
    qfm:  f(t) = f0 + B*(t/T)^2               (monotone quadratic sweep)
    fsk2: f(t) = f0 +/- B/2                   (continuous-phase, seeded symbols)
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError, UndefinedDerivativeError

TWO_PI = 2.0 * math.pi


class WaveformKind(str, enum.Enum):
    LFM = "lfm"
    SFM = "sfm"
    QFM = "qfm"
    FSK2 = "fsk2"


@dataclass(frozen=True)
class WaveformSpec:
    """Parametric description of the cooperative calibration source.

    Parameters
    ----------
    kind : WaveformKind or str
        Frequency-modulation law.
    carrier_hz : float
        Center/start frequency f0 (Hz).
    bandwidth_hz : float
        Swept (or peak-to-peak, or tone-separation) bandwidth B (Hz).
    duration_s : float
        Pulse width T (s).
    sample_rate_hz : float
        Complex sampling rate fs (Hz).
    sfm_mod_rate_hz : float, optional
        Sinusoidal modulation rate (SFM only).
    fsk_symbol_rate_baud : float, optional
        Symbol rate (FSK2 only).
    fsk_pattern_seed : int, optional
        Seed of the pseudo-random symbol sequence (FSK2 only).
    passband_faithful : bool
        When True require fs > 2*(f0 + B/2); the default baseband-equivalent
        mode only requires fs > B.
    """

    kind: WaveformKind
    carrier_hz: float
    bandwidth_hz: float
    duration_s: float
    sample_rate_hz: float
    sfm_mod_rate_hz: float | None = None
    fsk_symbol_rate_baud: float | None = None
    fsk_pattern_seed: int | None = None
    passband_faithful: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveformKind(self.kind))
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth_hz must be positive")
        if self.duration_s <= 0:
            raise ConfigurationError("duration_s must be positive")
        if self.carrier_hz < 0:
            raise ConfigurationError("carrier_hz must be nonnegative")
        if self.passband_faithful:
            nyq = 2.0 * (self.carrier_hz + self.bandwidth_hz / 2.0)
            if self.sample_rate_hz <= nyq:
                raise ConfigurationError(
                    f"passband-faithful mode needs sample_rate_hz > {nyq:g} Hz"
                )
        elif self.sample_rate_hz <= self.bandwidth_hz:
            raise ConfigurationError("sample_rate_hz must exceed bandwidth_hz")
        if self.kind is WaveformKind.SFM:
            if not self.sfm_mod_rate_hz or self.sfm_mod_rate_hz <= 0:
                raise ConfigurationError("sfm requires a positive sfm_mod_rate_hz")
        elif self.sfm_mod_rate_hz is not None:
            raise ConfigurationError("sfm_mod_rate_hz is only valid for sfm")
        if self.kind is WaveformKind.FSK2:
            if not self.fsk_symbol_rate_baud or self.fsk_symbol_rate_baud <= 0:
                raise ConfigurationError("fsk2 requires a positive fsk_symbol_rate_baud")
            if self.fsk_pattern_seed is None:
                raise ConfigurationError("fsk2 requires fsk_pattern_seed")
        else:
            if self.fsk_symbol_rate_baud is not None or self.fsk_pattern_seed is not None:
                raise ConfigurationError("fsk fields are only valid for fsk2")

    @property
    def chirp_rate_hz_per_s(self) -> float:
        """Sweep rate mu = B/T (defined for the linear chirp)."""
        return self.bandwidth_hz / self.duration_s

    @property
    def num_samples(self) -> int:
        return int(math.floor(self.duration_s * self.sample_rate_hz))

    def fsk_symbol_signs(self) -> np.ndarray:
        """Per-symbol tone signs (+1 upper, -1 lower) of the FSK2 pattern."""
        if self.kind is not WaveformKind.FSK2:
            raise ConfigurationError("symbol pattern only exists for fsk2")
        n = int(math.ceil(self.duration_s * self.fsk_symbol_rate_baud))
        return _fsk_signs(self.fsk_pattern_seed, n)

    def fsk_hop_times(self) -> np.ndarray:
        """Instants of possible frequency hops (interior symbol boundaries)."""
        if self.kind is not WaveformKind.FSK2:
            return np.empty(0)
        n = int(math.ceil(self.duration_s * self.fsk_symbol_rate_baud))
        return np.arange(1, n) / self.fsk_symbol_rate_baud


@lru_cache(maxsize=64)
def _fsk_signs(seed: int, n_symbols: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    signs = 2.0 * rng.integers(0, 2, size=n_symbols) - 1.0
    signs.setflags(write=False)
    return signs


def _check_domain(spec: WaveformSpec, t: np.ndarray, extrapolate: bool):
    if extrapolate:
        if spec.kind is WaveformKind.FSK2:
            raise ConfigurationError("fsk2 law cannot be extrapolated beyond its support")
        return
    tol = 1e-9 * spec.duration_s
    if np.any(t < -tol) or np.any(t > spec.duration_s + tol):
        raise ValueError(
            f"t outside [0, {spec.duration_s:g}] s (got range "
            f"[{np.min(t):g}, {np.max(t):g}])"
        )


def _fsk_boundary_phases(spec: WaveformSpec) -> np.ndarray:
    signs = spec.fsk_symbol_signs()
    t_sym = 1.0 / spec.fsk_symbol_rate_baud
    inc = TWO_PI * (spec.carrier_hz + 0.5 * spec.bandwidth_hz * signs) * t_sym
    return np.concatenate(([0.0], np.cumsum(inc)))


def total_phase(spec: WaveformSpec, t, *, extrapolate: bool = False):
    """Total instantaneous phase Phi(t) in radians, Phi(0) = 0.

    Continuous in t for every kind (continuous-phase FSK at symbol
    boundaries).  With ``extrapolate`` the closed-form law is evaluated
    outside [0, T] as well (used by macroscopic-delay scenes).
    """
    t_arr = np.asarray(t, dtype=float)
    _check_domain(spec, t_arr, extrapolate)
    f0, b, dur = spec.carrier_hz, spec.bandwidth_hz, spec.duration_s
    if spec.kind is WaveformKind.LFM:
        mu = spec.chirp_rate_hz_per_s
        phi = TWO_PI * (f0 * t_arr + 0.5 * mu * t_arr**2)
    elif spec.kind is WaveformKind.QFM:
        phi = TWO_PI * (f0 * t_arr + b * t_arr**3 / (3.0 * dur**2))
    elif spec.kind is WaveformKind.SFM:
        fm = spec.sfm_mod_rate_hz
        phi = TWO_PI * f0 * t_arr + (b / (2.0 * fm)) * (1.0 - np.cos(TWO_PI * fm * t_arr))
    else:
        signs = spec.fsk_symbol_signs()
        cum = _fsk_boundary_phases(spec)
        rate = spec.fsk_symbol_rate_baud
        idx = np.clip(np.floor(t_arr * rate).astype(int), 0, len(signs) - 1)
        t_in = t_arr - idx / rate
        phi = cum[idx] + TWO_PI * (f0 + 0.5 * b * signs[idx]) * t_in
    return phi if np.ndim(t) else float(phi)


def inst_freq(spec: WaveformSpec, t, order: int = 0, *, extrapolate: bool = False):
    """Analytic omega^(order)(t) where omega = dPhi/dt, in rad/s^(order+1).

    order = 0 returns the instantaneous angular frequency itself; orders up
    to 3 are supported.  For FSK2 any order >= 1 at a hop instant raises
    UndefinedDerivativeError (callers must mask those snapshots).
    """
    if not 0 <= order <= 3:
        raise ValueError("derivative order must be in 0..3")
    t_arr = np.asarray(t, dtype=float)
    _check_domain(spec, t_arr, extrapolate)
    f0, b, dur = spec.carrier_hz, spec.bandwidth_hz, spec.duration_s
    if spec.kind is WaveformKind.LFM:
        mu = spec.chirp_rate_hz_per_s
        if order == 0:
            out = TWO_PI * (f0 + mu * t_arr)
        elif order == 1:
            out = np.full_like(t_arr, TWO_PI * mu)
        else:
            out = np.zeros_like(t_arr)
    elif spec.kind is WaveformKind.QFM:
        if order == 0:
            out = TWO_PI * (f0 + b * (t_arr / dur) ** 2)
        elif order == 1:
            out = 2.0 * TWO_PI * b * t_arr / dur**2
        elif order == 2:
            out = np.full_like(t_arr, 2.0 * TWO_PI * b / dur**2)
        else:
            out = np.zeros_like(t_arr)
    elif spec.kind is WaveformKind.SFM:
        fm = spec.sfm_mod_rate_hz
        x = TWO_PI * fm * t_arr
        # d^n/dt^n sin(x) cycles through sin, cos, -sin, -cos
        trig = (np.sin(x), np.cos(x), -np.sin(x), -np.cos(x))[order]
        out = math.pi * b * (TWO_PI * fm) ** order * trig
        if order == 0:
            out = TWO_PI * f0 + out
    else:
        signs = spec.fsk_symbol_signs()
        rate = spec.fsk_symbol_rate_baud
        if order >= 1:
            hops = spec.fsk_hop_times()
            if hops.size and np.any(
                np.abs(t_arr[..., None] - hops) < 1e-9 / rate
            ):
                raise UndefinedDerivativeError(
                    "frequency derivative undefined at an fsk2 hop instant"
                )
            out = np.zeros_like(t_arr)
        else:
            idx = np.clip(np.floor(t_arr * rate).astype(int), 0, len(signs) - 1)
            out = TWO_PI * (f0 + 0.5 * b * signs[idx])
    return out if np.ndim(t) else float(out)


def synthesize(spec: WaveformSpec) -> np.ndarray:
    """Unit-modulus analytic samples s[k] = exp(j*Phi(k/fs)), k < floor(T*fs)."""
    t = np.arange(spec.num_samples) / spec.sample_rate_hz
    return np.exp(1j * total_phase(spec, t))
