import math
from dataclasses import replace

import numpy as np
import pytest

from ghrsync.cli import main
from ghrsync.config import dump_config, load_config
from ghrsync.errors import ConfigurationError
from ghrsync.harness import (
    ExperimentConfig,
    FeatureOptions,
    apply_sweep_value,
    circular_rmse,
    geometry_report,
    monte_carlo,
    run_trial,
    trial_seed,
)
from ghrsync.report import emit_report, read_sweep_csv, write_sweep_csv
from ghrsync.scene import SPEED_OF_LIGHT, NodeConfig, Scene
from ghrsync.waveforms import WaveformSpec

LFM = WaveformSpec("lfm", 2e9, 500e6, 1e-6, 5e9)
QFM = WaveformSpec("qfm", 2e9, 500e6, 1e-6, 5e9)


def scene_va(spec=LFM, snr_db=50.0, seed=0, m_sub=4, tau2=100e-9, **kw):
    nodes = (
        NodeConfig(subarray_elems=m_sub),
        NodeConfig(tau2, 3.45e-9, 1.234, subarray_elems=m_sub),
    )
    return Scene(spec, math.pi / 6, nodes, snr_db, seed, **kw)


class TestRunTrial:
    def test_quadratic_sweep_scene_at_50db(self):
        rec = run_trial(scene_va(spec=QFM, seed=3, extend_support=True), "ghr")
        assert not rec.failed
        assert abs(rec.dt_est_s[0] - 3.45e-9) <= 5e-12

    def test_zero_error_scene_all_methods(self):
        nodes = (NodeConfig(subarray_elems=4), NodeConfig(10e-9, 0.0, 0.0, subarray_elems=4))
        scene = Scene(LFM, 0.0, nodes, 40.0, 1)
        for method, tol_dt, tol_g in (
            ("ghr", 1e-11, 1e-2),
            ("ghr_fast", 1e-11, 1e-2),
            ("gcc", 5e-11, 0.5),
            ("twme", 5e-9, math.pi),
        ):
            rec = run_trial(scene, method)
            assert not rec.failed
            assert abs(rec.dt_est_s[0]) <= tol_dt
            assert abs(rec.gamma_est_rad[0]) <= tol_g

    def test_beyond_aperture_flags_cycle_slips(self):
        d_max = 1499.0
        tau = d_max * 1.02 / SPEED_OF_LIGHT
        flags = 0
        for trial in range(20):
            scene = scene_va(snr_db=30.0, seed=100 + trial, m_sub=1, tau2=tau, extend_support=True)
            rec = run_trial(scene, "ghr", FeatureOptions(window=1), boundary_probe=True)
            flags += rec.cycle_slip
        assert flags >= 18

    def test_aperture_guard_without_probe_flag(self):
        tau = 2000.0 / SPEED_OF_LIGHT
        scene = scene_va(snr_db=30.0, tau2=tau, extend_support=True)
        with pytest.raises(ConfigurationError):
            run_trial(scene, "ghr")

    def test_degenerate_basis_becomes_failed_record(self):
        # an order-2 basis on a linear chirp is collinear with the intercept
        scene = scene_va(seed=2, extend_support=True)
        rec = run_trial(scene, "ghr", FeatureOptions(order=2))
        assert rec.failed
        assert "column 2" in rec.error
        assert math.isnan(rec.dt_est_s[0])


class TestSweep:
    def config(self, trials=2, workers=1, methods=("ghr",), values=(20.0, 30.0)):
        return ExperimentConfig(
            scene=scene_va(seed=0, tau2=10e-9),
            sweep_axis="snr_db",
            sweep_values=values,
            methods=methods,
            trials=trials,
            base_seed=77,
            workers=workers,
        )

    def test_single_trial_equals_sweep_cell(self):
        config = self.config(trials=1, values=(20.0,))
        result = monte_carlo(config)
        scene = apply_sweep_value(config.scene, "snr_db", 20.0).with_seed(trial_seed(77, 0, 0))
        rec = run_trial(scene, "ghr")
        point = result.points[0]
        assert point.trials_ok == 1
        err = rec.dt_est_s[0] - rec.dt_true_s[0]
        assert point.rmse_clock_s == pytest.approx(abs(err), rel=1e-12)

    def test_sweep_value_application(self):
        scene = self.config().scene
        assert apply_sweep_value(scene, "snr_db", 5.0).snr_db == 5.0
        moved = apply_sweep_value(scene, "aperture_m", 300.0)
        assert moved.nodes[1].prop_delay_s == pytest.approx(300.0 / SPEED_OF_LIGHT)
        assert apply_sweep_value(scene, "bandwidth_hz", 2e8).waveform.bandwidth_hz == 2e8
        assert apply_sweep_value(scene, "duration_s", 2e-6).waveform.duration_s == 2e-6
        assert apply_sweep_value(scene, "sample_rate_hz", 2e9).waveform.sample_rate_hz == 2e9

    def test_failure_accounting(self):
        config = replace(self.config(trials=3), features=FeatureOptions(order=2))
        result = monte_carlo(config)
        for point in result.points:
            assert point.trials_ok + point.trials_failed == 3
            assert point.trials_ok == 0
            assert point.rmse_clock_s is None

    def test_deterministic_and_parallel_identical(self, tmp_path):
        serial = monte_carlo(self.config(trials=3, workers=1, methods=("ghr", "gcc")))
        parallel = monte_carlo(self.config(trials=3, workers=3, methods=("ghr", "gcc")))
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        write_sweep_csv(serial, a)
        write_sweep_csv(parallel, b)
        assert a.read_bytes() == b.read_bytes()

    def test_circular_rmse_of_uniform_phase(self):
        rng = np.random.default_rng(5)
        errs = rng.uniform(-math.pi, math.pi, 600)
        rmse = circular_rmse(errs)
        assert rmse == pytest.approx(math.pi / math.sqrt(3.0), abs=math.radians(3.0))


class TestGeometry:
    def test_lfm_line(self):
        report = geometry_report(scene_va(seed=42, extend_support=True))
        assert report.r2_line >= 1.0 - 1e-6
        assert report.rms_plane_rad is None
        assert report.cluster_count is None

    def test_qfm_plane_flattening(self):
        report = geometry_report(scene_va(spec=QFM, seed=42, extend_support=True))
        assert report.rms_plane_rad is not None
        assert report.rms_plane_rad <= 1e-3 * report.rms_line_rad

    def test_fsk_two_clusters(self):
        spec = WaveformSpec(
            "fsk2", 2e9, 500e6, 1e-6, 5e9, fsk_symbol_rate_baud=10e6, fsk_pattern_seed=3
        )
        report = geometry_report(scene_va(spec=spec, seed=42, tau2=50e-9))
        assert report.cluster_count == 2

    def test_dataset_csv(self, tmp_path):
        report = geometry_report(scene_va(seed=42, extend_support=True))
        path = tmp_path / "geom.csv"
        report.to_csv(str(path))
        header = path.read_text().splitlines()[0]
        assert header == "t,omega_rad_s,omega_dot_rad_s2,psi_rad"


class TestReports:
    def test_empty_result_header_only(self, tmp_path):
        from ghrsync.harness import SweepResult

        empty = SweepResult("snr_db", [], [])
        csv_path, svg_path = emit_report(empty, tmp_path)
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("sweep_value,method,")
        assert svg_path.read_text().startswith("<svg")

    def test_reemit_byte_identical(self, tmp_path):
        config = TestSweep().config(trials=2, methods=("ghr", "gcc", "twme"))
        result = monte_carlo(config)
        emit_report(result, tmp_path / "one")
        emit_report(result, tmp_path / "two")
        for name in ("sweep.csv", "sweep.svg"):
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()

    def test_csv_schema_and_round_trip(self, tmp_path):
        config = TestSweep().config(trials=2, methods=("ghr", "ghr_fast", "gcc", "twme"))
        result = monte_carlo(config)
        csv_path, _ = emit_report(result, tmp_path)
        header = csv_path.read_text().splitlines()[0]
        assert header == (
            "sweep_value,method,trials_ok,trials_failed,"
            "rmse_clock_ns,rmse_phase_deg,crb_clock_ns,crb_phase_deg"
        )
        parsed = read_sweep_csv(csv_path)
        assert len(parsed.points) == len(result.points)
        for a, b in zip(parsed.points, result.points):
            assert a.method == b.method
            assert a.rmse_clock_s == pytest.approx(b.rmse_clock_s, rel=1e-6)


INI_TEXT = """
[waveform]
kind = lfm
carrier_hz = 2e9
bandwidth_hz = 500e6
duration_s = 1e-6
sample_rate_hz = 5e9

[scene]
doa_rad = 0.5235987755982988
snr_db = 20
seed = 11

[node.1]
subarray_elems = 4

[node.2]
prop_delay_s = 1e-8
clock_offset_s = 3.45e-9
rf_phase_rad = 1.234
subarray_elems = 4

[featext]
window = 9
trajectory = x

[sweep]
axis = snr_db
values = 10, 20
methods = ghr, gcc
trials = 2
base_seed = 5

[twme]
exchanges = 10
queue_jitter_mean_s = 2e-9
asymmetry = 0.5
"""

JSON_TEXT = """
{
  "waveform": {"kind": "lfm", "carrier_hz": 2e9, "bandwidth_hz": 500e6,
               "duration_s": 1e-6, "sample_rate_hz": 5e9},
  "scene": {"doa_rad": 0.5235987755982988, "snr_db": 20, "seed": 11,
            "nodes": [
              {"subarray_elems": 4},
              {"prop_delay_s": 1e-8, "clock_offset_s": 3.45e-9,
               "rf_phase_rad": 1.234, "subarray_elems": 4}
            ]},
  "featext": {"window": 9},
  "sweep": {"axis": "snr_db", "values": [10, 20], "methods": ["ghr", "gcc"],
            "trials": 2, "base_seed": 5},
  "twme": {"exchanges": 10, "queue_jitter_mean_s": 2e-9, "asymmetry": 0.5}
}
"""


class TestConfigFiles:
    def test_ini_and_json_mirror_agree(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(INI_TEXT)
        js = tmp_path / "exp.json"
        js.write_text(JSON_TEXT)
        a = load_config(ini)
        b = load_config(js)
        assert a == b
        assert a.scene.waveform.carrier_hz == 2e9
        assert a.methods == ("ghr", "gcc")
        assert a.twme.exchanges == 10

    def test_dump_round_trip(self, tmp_path):
        ini = tmp_path / "exp.ini"
        ini.write_text(INI_TEXT)
        config = load_config(ini)
        (tmp_path / "copy.ini").write_text(dump_config(config))
        again = load_config(tmp_path / "copy.ini")
        assert again == config

    def test_bad_axis_rejected(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text(INI_TEXT.replace("axis = snr_db", "axis = nonsense"))
        with pytest.raises(ConfigurationError):
            load_config(bad)


class TestCli:
    @pytest.fixture()
    def ini(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(INI_TEXT)
        return path

    def test_calibrate(self, ini, capsys):
        assert main(["calibrate", "--config", str(ini)]) == 0
        out = capsys.readouterr().out
        assert "gamma_est_mod_pi" in out

    def test_sweep_and_report(self, ini, tmp_path, capsys):
        out_dir = tmp_path / "out"
        assert main(["sweep", "--config", str(ini), "--out", str(out_dir)]) == 0
        assert (out_dir / "sweep.csv").exists()
        # regeneration from the CSV is itself deterministic
        assert main(["report", "--in", str(out_dir)]) == 0
        first = (out_dir / "sweep.svg").read_bytes()
        assert main(["report", "--in", str(out_dir)]) == 0
        assert (out_dir / "sweep.svg").read_bytes() == first
        assert first.startswith(b"<svg")

    def test_crb_table(self, ini, capsys):
        assert main(["crb", "--config", str(ini)]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "snr_db,crb_clock_ns,crb_phase_deg"
        assert len(lines) == 3

    def test_simulate_and_geometry(self, ini, tmp_path):
        sim = tmp_path / "sim"
        assert main(["simulate", "--config", str(ini), "--out", str(sim)]) == 0
        assert (sim / "observation.c64").exists()
        assert (sim / "trajectory_node2.csv").exists()
        geo = tmp_path / "geo"
        assert main(["geometry", "--config", str(ini), "--out", str(geo)]) == 0
        assert (geo / "geometry_diagnostics.txt").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.ini"
        bad.write_text(INI_TEXT.replace("bandwidth_hz = 500e6", "bandwidth_hz = -1"))
        assert main(["calibrate", "--config", str(bad)]) == 2

    def test_all_failed_exit_code(self, tmp_path):
        # order-2 basis on a linear chirp fails every trial
        text = INI_TEXT.replace("window = 9", "window = 9\norder = 2")
        text = text.replace("methods = ghr, gcc", "methods = ghr")
        path = tmp_path / "fail.ini"
        path.write_text(text)
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(path), "--out", str(out)]) == 3
