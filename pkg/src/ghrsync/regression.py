"""Hyper-plane regression: dynamic basis, multivariate least squares, decoupling.

The feature trajectories of all uncalibrated nodes obey the generalized
linear model

    Psi = D @ Q + 1 @ Gamma + noise

where column j of the dynamic basis D holds ((-1)^j / j!) * omega^(j-1)(t_k).
Centering both sides removes the intercepts, an orthogonal-factorization
least-squares solve recovers Q, and the intercepts come back as column
means of the de-trended trajectories.  Row 1 of Q carries the total
macroscopic delays, from which known propagation geometry is subtracted to
expose the clock offsets; the physical RF phases follow after removing the
constant Taylor tail of the delayed phase law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DegenerateBasisError
from .featext import wrap_to_pi
from .waveforms import WaveformKind, WaveformSpec, inst_freq

_COND_LIMIT_NORMAL_EQ = 1e12  # on D.T @ D, i.e. cond(D)^2
_CONSTANT_COLUMN_REL = 1e-9

_DEFAULT_ORDER = {
    WaveformKind.LFM: 1,
    WaveformKind.QFM: 2,
    WaveformKind.SFM: 3,
    WaveformKind.FSK2: 1,
}


def default_order(kind: WaveformKind | str) -> int:
    """Dynamic order implied by the waveform kind (the source is cooperative)."""
    return _DEFAULT_ORDER[WaveformKind(kind)]


@dataclass
class DynamicBasis:
    """Stacked dynamic basis vectors, one row per snapshot."""

    matrix: np.ndarray  # (K, d)
    order: int
    timestamps_s: np.ndarray


@dataclass
class GeomEstimate:
    """Regression output: geometric parameter matrix and intercepts."""

    q_hat: np.ndarray  # (d, M-1); row 1 = total delays
    gamma_hat: np.ndarray  # (M-1,) generalized intercepts
    residual_rms_rad: float

    @property
    def tau_tot_s(self) -> np.ndarray:
        return self.q_hat[0]


@dataclass
class CalibrationResult:
    """Decoupled per-node clock offsets and principal-branch RF phases."""

    clock_offset_est_s: np.ndarray
    rf_phase_est_rad: np.ndarray
    tau_tot_est_s: np.ndarray

    def to_csv(self, path: str, scene=None):
        """node, dT_true, dT_est, gamma_true, gamma_est, residual placeholder."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("node,dT_true_s,dT_est_s,gamma_true_rad,gamma_est_rad\n")
            for i in range(self.clock_offset_est_s.size):
                truth = scene.nodes[i + 1] if scene is not None else None
                dt_t = truth.clock_offset_s if truth else float("nan")
                g_t = truth.rf_phase_rad if truth else float("nan")
                fh.write(
                    f"{i + 2},{dt_t!r},{self.clock_offset_est_s[i]!r},"
                    f"{g_t!r},{self.rf_phase_est_rad[i]!r}\n"
                )


def build_basis(
    spec: WaveformSpec, timestamps: np.ndarray, order: int | None = None
) -> DynamicBasis:
    """Evaluate the signed, scaled frequency derivatives at the snapshots.

    Column j (1-based) equals ((-1)^j / j!) * omega^(j-1)(t_k), computed from
    the analytic frequency law; no numerical differentiation is involved.
    """
    if order is None:
        order = default_order(spec.kind)
    if order < 1:
        raise ConfigurationError("basis order must be >= 1")
    ts = np.asarray(timestamps, dtype=float)
    cols = []
    for j in range(1, order + 1):
        sign = -1.0 if j % 2 else 1.0
        cols.append(sign / math.factorial(j) * inst_freq(spec, ts, j - 1))
    return DynamicBasis(np.column_stack(cols), order, ts)


def center(matrix: np.ndarray) -> np.ndarray:
    """Apply the centering projector I - (1/K) 1 1^T to every column.

    A 1-D input is treated as a single column.
    """
    m = np.asarray(matrix, dtype=float)
    if m.shape[0] < 2:
        raise ValueError("centering needs at least two rows")
    return m - m.mean(axis=0, keepdims=(m.ndim > 1))


def ghr_regress(psi: np.ndarray, basis: DynamicBasis) -> GeomEstimate:
    """Multivariate least squares on centered trajectories and basis.

    Solves via SVD of the column-scaled centered basis rather than by
    forming (D.T D)^-1 explicitly; with omega spanning ~1e10 rad/s the
    normal equations would otherwise be hopeless.  Raises
    DegenerateBasisError naming the offending column when the centered
    basis loses rank (e.g. a monochromatic tone, or a chirp-rate column
    that is constant and therefore collinear with the intercept).
    """
    psi2 = np.asarray(psi, dtype=float)
    if psi2.ndim == 1:
        psi2 = psi2[:, None]
    d_mat = basis.matrix
    k, d = d_mat.shape
    if psi2.shape[0] != k:
        raise ValueError("trajectory and basis snapshot counts differ")
    if k <= d + 1:
        raise ValueError("need more snapshots than basis order + 1")

    d_c = d_mat - d_mat.mean(axis=0, keepdims=True)
    psi_c = psi2 - psi2.mean(axis=0, keepdims=True)

    raw_rms = np.sqrt(np.mean(d_mat**2, axis=0))
    cen_rms = np.sqrt(np.mean(d_c**2, axis=0))
    flat = cen_rms <= _CONSTANT_COLUMN_REL * np.maximum(raw_rms, 1e-300)
    if np.any(flat):
        j = int(np.argmax(flat))
        raise DegenerateBasisError(
            f"basis column {j + 1} is constant over the snapshots (zero dynamic "
            "variance: collinear with the intercept after centering)",
            column=j + 1,
        )

    scaled = d_c / cen_rms
    u, sv, vt = np.linalg.svd(scaled, full_matrices=False)
    if (sv[0] / sv[-1]) ** 2 > _COND_LIMIT_NORMAL_EQ:
        j = int(np.argmax(np.abs(vt[-1])))
        raise DegenerateBasisError(
            f"centered basis is ill-conditioned (cond(D'D) > {_COND_LIMIT_NORMAL_EQ:g}); "
            f"column {j + 1} dominates the null direction",
            column=j + 1,
        )
    q_scaled = vt.T @ ((u.T @ psi_c) / sv[:, None])
    q_hat = q_scaled / cen_rms[:, None]

    detrended = psi2 - d_mat @ q_hat
    gamma_hat = detrended.mean(axis=0)
    residual = detrended - gamma_hat
    return GeomEstimate(q_hat, gamma_hat, float(np.sqrt(np.mean(residual**2))))


def ghr_lfm_fast(psi: np.ndarray, omega: np.ndarray) -> GeomEstimate:
    """Linear-time slope/intercept extraction for the chirp hyper-line.

    Scalar covariance formulas replace the d x d solve, so the operation
    count is O(K M): one pass for the frequency moments, one matrix-vector
    product for the per-node covariances.
    """
    psi2 = np.asarray(psi, dtype=float)
    if psi2.ndim == 1:
        psi2 = psi2[:, None]
    w = np.asarray(omega, dtype=float)
    if w.size != psi2.shape[0]:
        raise ValueError("omega and trajectories must share the snapshot count")
    if w.size < 3:
        raise ValueError("need at least 3 snapshots")
    w_mean = w.mean()
    w_c = w - w_mean
    var_w = float(w_c @ w_c)
    if var_w <= (1e-12 * np.sqrt(np.mean(w**2))) ** 2 * w.size:
        raise DegenerateBasisError(
            "instantaneous frequency is constant (Var(omega) = 0); "
            "the hyper-line collapses to a point",
            column=1,
        )
    psi_mean = psi2.mean(axis=0)
    slope = (w_c @ psi2) / var_w
    q_hat = -slope[None, :]
    gamma_hat = psi_mean - slope * w_mean
    residual = psi2 - np.outer(w, slope) - gamma_hat
    return GeomEstimate(q_hat, gamma_hat, float(np.sqrt(np.mean(residual**2))))


def constant_tail_phase(spec: WaveformSpec, order_used: int, tau_tot_s) -> np.ndarray:
    """Constant part of the Taylor tail sum_{j>d} ((-tau)^j / j!) omega^(j-1).

    Only derivative orders that are constant in time contribute a
    recoverable intercept shift: the chirp-rate term of the linear chirp
    (j = 2) and the quadratic sweep's constant second derivative (j = 3).
    Timefvarying tail terms are truncation error, not a constant, and are
    not corrected here.
    """
    tau = np.asarray(tau_tot_s, dtype=float)
    corr = np.zeros_like(tau)
    if spec.kind is WaveformKind.LFM and order_used < 2:
        mu = spec.chirp_rate_hz_per_s
        corr = corr + math.pi * mu * tau**2
    elif spec.kind is WaveformKind.QFM and order_used < 3:
        omega_ddot = 2.0 * 2.0 * math.pi * spec.bandwidth_hz / spec.duration_s**2
        corr = corr - tau**3 * omega_ddot / 6.0
    return corr


def decouple(
    est: GeomEstimate,
    known_delays_s,
    spec: WaveformSpec | None = None,
    chirp_rate_hz_per_s: float | None = None,
) -> CalibrationResult:
    """Split the regression output into clock offsets and physical RF phases.

    The total-delay row gives dT = tau_tot - tau(theta) directly.  The
    generalized intercept carries the physical phase plus the constant
    Taylor tail of the delayed phase law; pass the waveform spec to remove
    it for any supported kind, or just the chirp rate for the order-1
    linear-chirp path (Gamma = Gamma_tilde - pi*mu*tau^2).
    """
    tau_tot = est.q_hat[0].copy()
    known = np.asarray(known_delays_s, dtype=float)
    if known.size != tau_tot.size:
        raise ValueError("known delay count must match estimated node count")
    d = est.q_hat.shape[0]
    if spec is not None:
        corr = constant_tail_phase(spec, d, tau_tot)
    elif chirp_rate_hz_per_s is not None:
        if d != 1:
            raise ConfigurationError("chirp_rate decoupling applies to order-1 estimates")
        corr = math.pi * chirp_rate_hz_per_s * tau_tot**2
    elif d == 1:
        raise ConfigurationError(
            "order-1 decoupling needs the chirp rate (or the waveform spec)"
        )
    else:
        corr = np.zeros_like(tau_tot)
    gamma = wrap_to_pi(est.gamma_hat - corr)
    return CalibrationResult(tau_tot - known, np.atleast_1d(gamma), tau_tot)
