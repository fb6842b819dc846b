"""Local node processing: coherent integration, tangent vectors, phase features.

The output of this stage is the one-dimensional feature vector each node
ships to the fusion center: the unwrapped inter-node phase-difference
trajectory sampled on the common snapshot grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .scene import Observation
from .waveforms import WaveformKind, WaveformSpec

TWO_PI = 2.0 * math.pi

CYCLE_SLIP_THRESHOLD_RAD = math.pi / 2.0


@dataclass
class PhaseTrajectory:
    """Unwrapped phase differences over the snapshot grid with validity mask."""

    values_rad: np.ndarray
    timestamps_s: np.ndarray
    valid_mask: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.timestamps_s) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def valid_values(self) -> np.ndarray:
        return self.values_rad[self.valid_mask]

    def valid_timestamps(self) -> np.ndarray:
        return self.timestamps_s[self.valid_mask]

    def has_cycle_slip(self, threshold_rad: float = CYCLE_SLIP_THRESHOLD_RAD) -> bool:
        """Diagnostic: any |second difference| above threshold on a valid run.

        Cycle slips are reported, never auto-repaired, so estimator failure
        modes stay observable.
        """
        idx = np.flatnonzero(self.valid_mask)
        if idx.size < 3:
            return False
        # split into contiguous runs; a second difference only makes sense
        # within one run
        breaks = np.flatnonzero(np.diff(idx) != 1)
        for run in np.split(idx, breaks + 1):
            if run.size >= 3:
                d2 = np.diff(self.values_rad[run], n=2)
                if np.any(np.abs(d2) > threshold_rad):
                    return True
        return False

    def to_csv(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,psi,valid\n")
            for t, v, ok in zip(self.timestamps_s, self.values_rad, self.valid_mask):
                fh.write(f"{t!r},{v!r},{int(ok)}\n")


def wrap_to_pi(angle):
    """Map angles into the principal branch [-pi, pi)."""
    a = np.asarray(angle, dtype=float)
    out = a - TWO_PI * np.floor((a + math.pi) / TWO_PI)
    return out if np.ndim(angle) else float(out)


def unwrap(wrapped) -> np.ndarray:
    """1-D phase unwrapping: successive increments mapped into (-pi, pi]."""
    w = np.asarray(wrapped, dtype=float)
    if w.size == 0:
        raise ValueError("cannot unwrap an empty sequence")
    d = np.diff(w)
    d_principal = d - TWO_PI * np.ceil((d - math.pi) / TWO_PI)
    out = np.empty_like(w)
    out[0] = w[0]
    np.cumsum(d_principal, out=out[1:])
    out[1:] += w[0]
    return out


def tangent_vector(samples: np.ndarray, sample_rate_hz: float) -> np.ndarray:
    """Central-difference estimate of the trajectory derivative.

    Returns v[k] = (x[k+1] - x[k-1]) * fs / 2 over interior indices, so the
    output aligns with timestamps[1:-1].
    """
    x = np.asarray(samples)
    if x.size < 3:
        raise ValueError("need at least 3 samples for a central difference")
    return (x[2:] - x[:-2]) * (sample_rate_hz / 2.0)


def subarray_integrate(
    element_matrix: np.ndarray, window: int, detrend_drift: bool = False
) -> np.ndarray:
    """Rank-1 coherent integration over a sliding M_sub-by-L slab.

    For every snapshot the dominant spatial signature of the slab (edge
    clamped) is estimated by SVD, the elements are combined along it, and
    the projected window is averaged coherently after compensating its
    data-estimated snapshot-to-snapshot rotation.  The output keeps the
    phase of the temporal signal component at the window center, at unit
    nominal amplitude; per-window phase ambiguity is aligned against the
    trajectory-global dominant signature (a first-order noise-free anchor)
    so trajectories never fragment.

    ``detrend_drift`` additionally removes the smooth phase-center drift of
    the projection (fitted on the anchored signature's reference-element
    component), pinning the output to element 0 even when the spatial
    pattern rotates during the sweep.  The fit injects a little
    reference-element noise, so callers enable it only for waveforms whose
    drift does not cancel in inter-node differences.
    """
    x = np.atleast_2d(np.asarray(element_matrix))
    m_sub, k = x.shape
    if window % 2 == 0 or window < 1:
        raise ValueError("window length must be odd and positive")
    if window > k:
        raise ValueError("window longer than the snapshot sequence")
    if m_sub == 1 and window == 1:
        return x[0].copy()

    half = window // 2
    starts = np.clip(np.arange(k) - half, 0, k - window)
    centers = np.arange(k) - starts
    sw = np.lib.stride_tricks.sliding_window_view(x, window, axis=1)  # (M, K-L+1, L)
    slabs = sw[:, starts, :].transpose(1, 0, 2)  # (K, M, L)

    if m_sub == 1:
        proj = slabs[:, 0, :]
    else:
        gram = slabs @ slabs.conj().transpose(0, 2, 1)
        _, vecs = np.linalg.eigh(gram)
        u = vecs[:, :, -1]  # dominant spatial signature per window
        # Anchor every window's signature against the trajectory-global
        # dominant signature: eigenvector perturbations are orthogonal to
        # the unperturbed vector, so this alignment adds no first-order
        # noise, unlike anchoring on any single element's component.
        _, g_vecs = np.linalg.eigh(x @ x.conj().T)
        u_global = g_vecs[:, -1]
        # reference the global signature to element 0 so the one remaining
        # constant is tied to the node's reference element, not to an
        # arbitrary eigensolver phase
        ref = u_global[0]
        if abs(ref) < 1e-12:
            ref = u_global[np.argmax(np.abs(u_global))]
        u_global = u_global * (ref.conj() / abs(ref))
        align = np.einsum("km,m->k", u.conj(), u_global)
        u = u * np.exp(1j * np.angle(align))[:, None]
        proj = np.einsum("km,kml->kl", u.conj(), slabs)
        if detrend_drift:
            # the anchored signature's element-0 component exposes the slow
            # phase-center drift of the projection (the true pattern rotates
            # as the instantaneous frequency sweeps)
            drift = np.angle(u[:, 0])
            if np.min(np.abs(u[:, 0])) * math.sqrt(m_sub) > 0.2:
                tt = np.linspace(-1.0, 1.0, k)
                vand = np.polynomial.polynomial.polyvander(tt, 3)
                coef, *_ = np.linalg.lstsq(vand, drift, rcond=None)
                proj = proj * np.exp(1j * (vand @ coef))[:, None]

    if window == 1:
        return proj[:, 0] / math.sqrt(m_sub)

    lag = np.sum(proj[:, 1:] * proj[:, :-1].conj(), axis=1)
    rot = np.where(np.abs(lag) > 0.0, np.angle(lag), 0.0)
    offsets = np.arange(window)[None, :] - centers[:, None]
    comp = np.exp(-1j * rot[:, None] * offsets)
    out = np.mean(proj * comp, axis=1) / math.sqrt(m_sub)
    # re-reference the whole trajectory to the raw reference element with a
    # single circular-mean constant; this pins the phase origin to element 0
    # (noise on the constant averages down over all K snapshots)
    resultant = np.sum(x[0] * out.conj())
    if np.abs(resultant) > 0.0:
        out = out * (resultant / np.abs(resultant))
    return out


def phase_difference_trajectory(
    node_seq: np.ndarray, ref_seq: np.ndarray, timestamps: np.ndarray
) -> PhaseTrajectory:
    """Wrapped inter-node phase difference, unwrapped into a trajectory."""
    node_seq = np.asarray(node_seq)
    ref_seq = np.asarray(ref_seq)
    if node_seq.shape != ref_seq.shape or node_seq.size < 2:
        raise ValueError("sequences must have equal length >= 2")
    wrapped = np.angle(node_seq * ref_seq.conj())
    values = unwrap(wrapped)
    return PhaseTrajectory(values, np.asarray(timestamps, dtype=float), np.ones(values.size, dtype=bool))


def hop_guard_mask(
    spec: WaveformSpec, timestamps: np.ndarray, guard_s: float | None = None
) -> np.ndarray:
    """Validity mask that blanks snapshots near FSK2 frequency hops."""
    mask = np.ones(timestamps.size, dtype=bool)
    if spec.kind is not WaveformKind.FSK2:
        return mask
    if guard_s is None:
        guard_s = 2.0 / spec.sample_rate_hz
    for hop in spec.fsk_hop_times():
        mask &= np.abs(timestamps - hop) > guard_s
    return mask


def feature_trajectories(
    obs: Observation,
    spec: WaveformSpec,
    window: int = 9,
    use_tangent: bool = False,
    hop_guard_s: float | None = None,
) -> list[PhaseTrajectory]:
    """Full local-processing chain: integrate, (optionally) differentiate,
    difference against the reference node, unwrap.

    Returns one trajectory per uncalibrated node (2..M), all sharing the
    same timestamps and validity mask.  Window-clamped edges (and the
    extra central-difference sample when tangent vectors are used) are
    marked invalid.
    """
    if len(obs.signals) < 2:
        raise ConfigurationError("need a reference node and at least one other node")
    fs = obs.sample_rate_hz
    # the phase-center drift of a linear chirp (or a piecewise-constant
    # tone pair) is common-mode across nodes and cancels in the
    # differences; only curvature-rate laws need the per-node detrend
    detrend = spec.kind in (WaveformKind.QFM, WaveformKind.SFM)
    seqs = [subarray_integrate(sig, window, detrend_drift=detrend) for sig in obs.signals]
    ts = obs.timestamps_s
    if use_tangent:
        seqs = [tangent_vector(s, fs) for s in seqs]
        ts = ts[1:-1]

    mask = hop_guard_mask(spec, ts, hop_guard_s)
    edge = window // 2
    if edge:
        mask[:edge] = False
        mask[ts.size - edge :] = False

    out = []
    for seq in seqs[1:]:
        traj = phase_difference_trajectory(seq, seqs[0], ts)
        traj.valid_mask &= mask
        out.append(traj)
    return out
