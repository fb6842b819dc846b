"""Experiment orchestration: single trials, Monte Carlo sweeps, geometry reports.

Every trial is a pure function of (scene, method, options); per-trial seeds
are derived from (base_seed, sweep index, trial index), so a sweep is a
pure function of its config regardless of worker count or scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import TwmeModel, gcc_delay, twme_ols, two_step_phase
from .bounds import crb, max_aperture_m, phase_noise_variance
from .errors import AmbiguousPeakError, ConfigurationError, DegenerateBasisError
from .featext import feature_trajectories, hop_guard_mask, wrap_to_pi
from .regression import build_basis, decouple, default_order, ghr_lfm_fast, ghr_regress
from .scene import SPEED_OF_LIGHT, Scene, common_window, synthesize_observations
from .waveforms import WaveformKind, inst_freq

METHODS = ("ghr", "ghr_fast", "gcc", "twme")
SWEEP_AXES = ("snr_db", "aperture_m", "sample_rate_hz", "duration_s", "bandwidth_hz")


@dataclass(frozen=True)
class FeatureOptions:
    """Local-processing knobs shared by every trial of an experiment."""

    window: int = 9
    use_tangent: bool = False
    order: int | None = None
    hop_guard_s: float | None = None
    max_snapshots: int = 5000


@dataclass(frozen=True)
class ExperimentConfig:
    scene: Scene
    sweep_axis: str
    sweep_values: tuple[float, ...]
    methods: tuple[str, ...] = ("ghr",)
    trials: int = 100
    base_seed: int = 0
    output_dir: str | None = None
    features: FeatureOptions = field(default_factory=FeatureOptions)
    twme: TwmeModel = field(default_factory=TwmeModel)
    boundary_probe: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigurationError("trials must be >= 1")
        if self.sweep_axis not in SWEEP_AXES:
            raise ConfigurationError(f"unknown sweep axis {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ConfigurationError("sweep needs at least one value")
        bad = set(self.methods) - set(METHODS)
        if bad or not self.methods:
            raise ConfigurationError(f"methods must be a nonempty subset of {METHODS}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")


@dataclass
class TrialRecord:
    """Per-trial truths and estimates for every uncalibrated node."""

    method: str
    sweep_value: float
    trial_index: int
    node_ids: tuple[int, ...]
    dt_true_s: tuple[float, ...]
    dt_est_s: tuple[float, ...]
    gamma_true_rad: tuple[float, ...]
    gamma_est_rad: tuple[float, ...]
    cycle_slip: bool = False
    failed: bool = False
    error: str = ""


@dataclass
class SweepPoint:
    """Aggregated statistics of one (sweep value, method) cell.

    The crb fields hold the square root of the bound, in the native units
    of the corresponding RMSE column; rmse fields are None when every
    trial at this point failed.
    """

    sweep_value: float
    method: str
    trials_ok: int
    trials_failed: int
    rmse_clock_s: float | None
    rmse_phase_rad: float | None
    crb_clock_s: float
    crb_phase_rad: float
    cycle_slip_rate: float = 0.0


@dataclass
class SweepResult:
    axis: str
    points: list[SweepPoint]
    records: list[TrialRecord]


def trial_seed(base_seed: int, value_index: int, trial_index: int) -> int:
    """Deterministic per-trial scene seed (order and worker independent)."""
    ss = np.random.SeedSequence((base_seed, value_index, trial_index))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def apply_sweep_value(scene: Scene, axis: str, value: float) -> Scene:
    """Derive the scene of one sweep point from the template scene."""
    if axis == "snr_db":
        return replace(scene, snr_db=float(value))
    if axis == "aperture_m":
        # aperture expressed as extra propagation delay on node 2
        nodes = list(scene.nodes)
        nodes[1] = replace(nodes[1], prop_delay_s=float(value) / SPEED_OF_LIGHT)
        return replace(scene, nodes=tuple(nodes))
    wf = scene.waveform
    if axis == "sample_rate_hz":
        wf = replace(wf, sample_rate_hz=float(value))
    elif axis == "duration_s":
        wf = replace(wf, duration_s=float(value))
    elif axis == "bandwidth_hz":
        wf = replace(wf, bandwidth_hz=float(value))
    else:
        raise ConfigurationError(f"unknown sweep axis {axis!r}")
    return replace(scene, waveform=wf)


def check_aperture(scene: Scene):
    wf = scene.waveform
    bound = max_aperture_m(wf.sample_rate_hz, wf.duration_s, wf.bandwidth_hz)
    worst = max(abs(n.prop_delay_s + n.clock_offset_s) for n in scene.nodes) * SPEED_OF_LIGHT
    if worst > bound:
        raise ConfigurationError(
            f"scene aperture {worst:.1f} m exceeds the unambiguous bound {bound:.1f} m; "
            "set boundary_probe to sweep past it deliberately"
        )


def regression_grid(scene: Scene, features: FeatureOptions) -> tuple[np.ndarray, np.ndarray]:
    """Valid snapshot selector and timestamps used by the regression stage.

    Mirrors the feature-extraction masking (tangent trim, window edges,
    hop guards) and the uniform decimation cap, so Cramer-Rao overlays are
    evaluated on exactly the snapshots the estimator consumes.
    """
    ts = common_window(scene)
    if features.use_tangent:
        ts = ts[1:-1]
    mask = hop_guard_mask(scene.waveform, ts, features.hop_guard_s)
    edge = features.window // 2
    if edge:
        mask[:edge] = False
        mask[ts.size - edge :] = False
    valid = np.flatnonzero(mask)
    stride = max(1, int(math.ceil(valid.size / features.max_snapshots)))
    sel = valid[::stride]
    return sel, ts[sel]


def _estimate_ghr(obs, scene, features: FeatureOptions, fast: bool):
    spec = scene.waveform
    trajs = feature_trajectories(
        obs, spec, window=features.window, use_tangent=features.use_tangent,
        hop_guard_s=features.hop_guard_s,
    )
    sel, ts = regression_grid(scene, features)
    psi = np.column_stack([tr.values_rad[sel] for tr in trajs])
    known = np.array([n.prop_delay_s for n in scene.uncalibrated()])
    if fast:
        if features.order not in (None, 1) or default_order(spec.kind) != 1:
            raise ConfigurationError("ghr_fast applies to dynamic-order-1 waveforms")
        est = ghr_lfm_fast(psi, inst_freq(spec, ts, 0))
    else:
        est = ghr_regress(psi, build_basis(spec, ts, features.order))
    cal = decouple(est, known, spec=spec)
    slip = any(tr.has_cycle_slip() for tr in trajs)
    return cal, slip


def run_point(
    scene: Scene,
    methods: tuple[str, ...],
    features: FeatureOptions | None = None,
    twme: TwmeModel | None = None,
    boundary_probe: bool = False,
    sweep_value: float = math.nan,
    trial_index: int = 0,
) -> list[TrialRecord]:
    """Run all requested methods once on one synthesized scene realization."""
    features = features or FeatureOptions()
    twme = twme or TwmeModel()
    if not boundary_probe:
        check_aperture(scene)
    uncal = scene.uncalibrated()
    node_ids = tuple(range(2, scene.num_nodes + 1))
    dt_true = tuple(n.clock_offset_s for n in uncal)
    g_true = tuple(n.rf_phase_rad for n in uncal)
    nan = tuple(math.nan for _ in uncal)
    spec = scene.waveform
    obs = synthesize_observations(scene)

    records = []
    for method in methods:
        rec = TrialRecord(method, sweep_value, trial_index, node_ids, dt_true, nan, g_true, nan)
        try:
            if method in ("ghr", "ghr_fast"):
                cal, slip = _estimate_ghr(obs, scene, features, fast=(method == "ghr_fast"))
                rec.dt_est_s = tuple(cal.clock_offset_est_s)
                rec.gamma_est_rad = tuple(cal.rf_phase_est_rad)
                rec.cycle_slip = slip
            elif method == "gcc":
                ref = obs.signals[0][0]
                dts, gammas = [], []
                for i, node in enumerate(uncal):
                    seq = obs.signals[i + 1][0]
                    tau_hat = gcc_delay(seq, ref, spec.sample_rate_hz)
                    dts.append(tau_hat - node.prop_delay_s)
                    gammas.append(two_step_phase(seq, ref, tau_hat, spec, obs.timestamps_s))
                rec.dt_est_s = tuple(dts)
                rec.gamma_est_rad = tuple(gammas)
            elif method == "twme":
                ref = obs.signals[0][0]
                dts, gammas = [], []
                for i, node in enumerate(uncal):
                    seed = int(
                        np.random.SeedSequence((scene.seed, 0x7E, i)).generate_state(
                            1, dtype=np.uint64
                        )[0]
                    )
                    model = replace(twme, seed=seed)
                    dt_hat = twme_ols(node.clock_offset_s, model)
                    dts.append(dt_hat)
                    tau_hat = node.prop_delay_s + dt_hat
                    seq = obs.signals[i + 1][0]
                    gammas.append(two_step_phase(seq, ref, tau_hat, spec, obs.timestamps_s))
                rec.dt_est_s = tuple(dts)
                rec.gamma_est_rad = tuple(gammas)
            else:
                raise ConfigurationError(f"unknown method {method!r}")
        except (DegenerateBasisError, AmbiguousPeakError) as exc:
            rec.failed = True
            rec.error = str(exc)
        records.append(rec)
    return records


def run_trial(
    scene: Scene,
    method: str,
    features: FeatureOptions | None = None,
    twme: TwmeModel | None = None,
    boundary_probe: bool = False,
) -> TrialRecord:
    """Single-method convenience wrapper around :func:`run_point`."""
    return run_point(scene, (method,), features, twme, boundary_probe)[0]


def _point_task(args):
    scene, methods, features, twme, boundary_probe, value, vi, ti, base_seed = args
    sc = scene.with_seed(trial_seed(base_seed, vi, ti))
    return vi, ti, run_point(
        sc, methods, features, twme, boundary_probe, sweep_value=value, trial_index=ti
    )


def circular_rmse(errors_rad) -> float:
    """Root mean square of principal-branch angular errors."""
    wrapped = wrap_to_pi(np.asarray(errors_rad, dtype=float))
    return float(np.sqrt(np.mean(wrapped**2)))


def _crb_for_point(scene: Scene, features: FeatureOptions) -> tuple[float, float]:
    """Square-root bounds on the estimation grid of one sweep point.

    The phase-noise variance counts each raw snapshot once (window = 1):
    sliding-window integration reuses samples and so does not multiply
    into the K-snapshot bound.
    """
    sub = min(n.subarray_elems for n in scene.nodes)
    sigma2 = phase_noise_variance(scene.snr_db, sub, 1)
    _, ts = regression_grid(scene, features)
    result = crb(scene.waveform, ts, sigma2)
    return math.sqrt(result.crb_clock_s2), math.sqrt(result.crb_gen_intercept_rad2)


def monte_carlo(config: ExperimentConfig) -> SweepResult:
    """Run the configured sweep; deterministic in config regardless of workers."""
    tasks = []
    scenes = []
    for vi, value in enumerate(config.sweep_values):
        scene_v = apply_sweep_value(config.scene, config.sweep_axis, value)
        scenes.append(scene_v)
        for ti in range(config.trials):
            tasks.append(
                (
                    scene_v,
                    config.methods,
                    config.features,
                    config.twme,
                    config.boundary_probe,
                    value,
                    vi,
                    ti,
                    config.base_seed,
                )
            )
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            raw = list(pool.map(_point_task, tasks, chunksize=8))
    else:
        raw = [_point_task(t) for t in tasks]
    raw.sort(key=lambda item: (item[0], item[1]))

    by_point: dict[tuple[int, str], list[TrialRecord]] = {}
    records: list[TrialRecord] = []
    for vi, _ti, recs in raw:
        for rec in recs:
            records.append(rec)
            by_point.setdefault((vi, rec.method), []).append(rec)

    points = []
    for vi, value in enumerate(config.sweep_values):
        crb_clock, crb_phase = _crb_for_point(scenes[vi], config.features)
        for method in config.methods:
            recs = by_point.get((vi, method), [])
            ok = [r for r in recs if not r.failed]
            dt_err, g_err = [], []
            for r in ok:
                dt_err.extend(e - t for e, t in zip(r.dt_est_s, r.dt_true_s))
                g_err.extend(e - t for e, t in zip(r.gamma_est_rad, r.gamma_true_rad))
            points.append(
                SweepPoint(
                    sweep_value=value,
                    method=method,
                    trials_ok=len(ok),
                    trials_failed=len(recs) - len(ok),
                    rmse_clock_s=float(np.sqrt(np.mean(np.square(dt_err)))) if ok else None,
                    rmse_phase_rad=circular_rmse(g_err) if ok else None,
                    crb_clock_s=crb_clock,
                    crb_phase_rad=crb_phase,
                    cycle_slip_rate=(sum(r.cycle_slip for r in ok) / len(ok)) if ok else 0.0,
                )
            )
    return SweepResult(config.sweep_axis, points, records)


@dataclass
class GeometryReport:
    """Frequency/phase projection dataset plus shape diagnostics."""

    timestamps_s: np.ndarray
    omega_rad_s: np.ndarray
    omega_dot_rad_s2: np.ndarray
    psi_rad: np.ndarray
    r2_line: float
    rms_line_rad: float
    rms_plane_rad: float | None
    cluster_count: int | None

    def to_csv(self, path: str):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,omega_rad_s,omega_dot_rad_s2,psi_rad\n")
            for row in zip(self.timestamps_s, self.omega_rad_s, self.omega_dot_rad_s2, self.psi_rad):
                fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _scaled_fit_residual(columns, y) -> np.ndarray:
    a = np.column_stack(columns)
    scale = np.sqrt(np.mean(a**2, axis=0))
    scale[scale == 0] = 1.0
    coef, *_ = np.linalg.lstsq(a / scale, y, rcond=None)
    return y - a @ (coef / scale)


def geometry_report(scene: Scene, features: FeatureOptions | None = None) -> GeometryReport:
    """Project the first uncalibrated node's trajectory onto the frequency axes.

    Emits the (omega, omega_dot, psi) point cloud together with line/plane
    fit quality: a linear chirp stays a line (R^2 ~ 1), a quadratic sweep
    leaves the 2-D plane but flattens in 3-D, a two-tone signal splits
    into distinct frequency clusters.
    """
    features = features or FeatureOptions()
    spec = scene.waveform
    obs = synthesize_observations(scene)
    traj = feature_trajectories(
        obs, spec, window=features.window, use_tangent=features.use_tangent,
        hop_guard_s=features.hop_guard_s,
    )[0]
    psi, ts = traj.valid_values(), traj.valid_timestamps()
    omega = inst_freq(spec, ts, 0)
    if spec.kind is WaveformKind.FSK2:
        omega_dot = np.zeros_like(omega)
    else:
        omega_dot = inst_freq(spec, ts, 1)

    res_line = _scaled_fit_residual([np.ones_like(omega), omega], psi)
    ss_tot = float(np.sum((psi - psi.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res_line**2)) / ss_tot if ss_tot > 0 else 1.0
    rms_line = float(np.sqrt(np.mean(res_line**2)))

    rms_plane = None
    if np.std(omega_dot) > 1e-9 * max(1.0, float(np.max(np.abs(omega_dot)))):
        res_plane = _scaled_fit_residual([np.ones_like(omega), omega, omega_dot], psi)
        rms_plane = float(np.sqrt(np.mean(res_plane**2)))

    clusters = None
    if spec.kind is WaveformKind.FSK2:
        clusters = int(np.unique(np.round(omega)).size)

    return GeometryReport(ts, omega, omega_dot, psi, r2, rms_line, rms_plane, clusters)
