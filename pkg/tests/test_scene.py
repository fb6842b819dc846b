import math

import numpy as np
import pytest

from ghrsync.errors import ConfigurationError
from ghrsync.scene import (
    NodeConfig,
    Scene,
    common_window,
    element_delay,
    synthesize_observations,
)
from ghrsync.waveforms import WaveformSpec, total_phase

SPEC = WaveformSpec("lfm", 2e9, 500e6, 1e-6, 5e9)


def two_node_scene(snr_db=np.inf, seed=0, tau2=50e-9, dt2=3.45e-9, g2=1.234, m_sub=1, **kw):
    nodes = (
        NodeConfig(subarray_elems=m_sub),
        NodeConfig(
            prop_delay_s=tau2, clock_offset_s=dt2, rf_phase_rad=g2, subarray_elems=m_sub
        ),
    )
    return Scene(SPEC, math.pi / 6, nodes, snr_db, seed, **kw)


class TestConfigs:
    def test_reference_node_must_be_clean(self):
        nodes = (NodeConfig(prop_delay_s=1e-9), NodeConfig())
        with pytest.raises(ConfigurationError):
            Scene(SPEC, 0.0, nodes, 10.0, 0)

    def test_needs_two_nodes(self):
        with pytest.raises(ConfigurationError):
            Scene(SPEC, 0.0, (NodeConfig(),), 10.0, 0)

    def test_rf_phase_principal_branch(self):
        with pytest.raises(ConfigurationError):
            NodeConfig(rf_phase_rad=3.5)


class TestElementDelay:
    def test_reference_element(self):
        node = NodeConfig(prop_delay_s=7e-9, subarray_elems=4)
        assert element_delay(node, 0.7, 0, 2e9) == pytest.approx(7e-9, rel=1e-15)

    def test_broadside_has_no_differential_delay(self):
        node = NodeConfig(prop_delay_s=7e-9, subarray_elems=4)
        for p in range(4):
            assert element_delay(node, 0.0, p, 2e9) == pytest.approx(7e-9, rel=1e-15)

    def test_half_wavelength_at_30_degrees(self):
        # 0.5 lambda spacing at 2 GHz, 30 deg: extra delay = 0.5*0.5/f0 = 125 ps
        node = NodeConfig(prop_delay_s=7e-9, subarray_elems=4)
        extra = element_delay(node, math.pi / 6, 1, 2e9) - 7e-9
        assert extra == pytest.approx(1.25e-10, rel=1e-9)

    def test_index_out_of_range(self):
        with pytest.raises(ValueError):
            element_delay(NodeConfig(subarray_elems=2), 0.0, 2, 2e9)


class TestSynthesis:
    def test_degenerate_scene_gives_identical_nodes(self):
        scene = Scene(SPEC, 0.3, (NodeConfig(), NodeConfig()), np.inf, 0)
        obs = synthesize_observations(scene)
        np.testing.assert_array_equal(obs.signals[0], obs.signals[1])

    def test_noiseless_unit_modulus(self):
        obs = synthesize_observations(two_node_scene(m_sub=3))
        for sig in obs.signals:
            assert np.max(np.abs(np.abs(sig) - 1.0)) <= 1e-12

    def test_paper_error_injection_appears_in_phase_difference(self):
        # tau = 100 ns, dT = 3.45 ns, Gamma = 1.234: the inter-node phase at
        # every snapshot must equal Phi(t - 103.45 ns) - Phi(t) + 1.234
        scene = two_node_scene(tau2=100e-9, extend_support=True)
        obs = synthesize_observations(scene)
        t = obs.timestamps_s
        got = np.angle(obs.signals[1][0] * np.conj(obs.signals[0][0]))
        expect = (
            total_phase(SPEC, t - 103.45e-9, extrapolate=True)
            - total_phase(SPEC, t, extrapolate=True)
            + 1.234
        )
        err = np.angle(np.exp(1j * (got - expect)))
        assert np.max(np.abs(err)) <= 1e-6

    def test_delay_too_large_without_extension(self):
        with pytest.raises(ConfigurationError):
            common_window(two_node_scene(tau2=200e-9))
        # the same geometry is allowed when the law is extended
        obs = synthesize_observations(two_node_scene(tau2=200e-9, extend_support=True))
        assert obs.num_snapshots == SPEC.num_samples - 4

    def test_noise_variance_at_0db(self):
        spec = WaveformSpec("lfm", 2e9, 500e6, 4e-6, 5e9)
        nodes = (NodeConfig(), NodeConfig(prop_delay_s=10e-9))
        noisy = synthesize_observations(Scene(spec, 0.0, nodes, 0.0, 3))
        clean = synthesize_observations(Scene(spec, 0.0, nodes, np.inf, 3))
        resid = noisy.signals[1][0] - clean.signals[1][0]
        assert resid.size >= 1e4
        assert np.mean(np.abs(resid) ** 2) == pytest.approx(1.0, rel=0.05)

    def test_determinism_bit_identical(self):
        a = synthesize_observations(two_node_scene(snr_db=5.0, seed=42))
        b = synthesize_observations(two_node_scene(snr_db=5.0, seed=42))
        for x, y in zip(a.signals, b.signals):
            np.testing.assert_array_equal(x, y)

    def test_noise_streams_uncorrelated_across_nodes_and_elements(self):
        scene = two_node_scene(snr_db=0.0, seed=9, m_sub=2)
        clean = two_node_scene(snr_db=np.inf, m_sub=2)
        n = [
            (a - b)
            for sa, sb in zip(
                synthesize_observations(scene).signals,
                synthesize_observations(clean).signals,
            )
            for a, b in zip(sa, sb)
        ]
        k = n[0].size
        limit = 3.0 / math.sqrt(k)
        for i in range(len(n)):
            for j in range(i + 1, len(n)):
                rho = np.abs(np.vdot(n[i], n[j])) / (
                    np.linalg.norm(n[i]) * np.linalg.norm(n[j])
                )
                assert rho <= limit

    def test_observation_round_trip(self, tmp_path):
        obs = synthesize_observations(two_node_scene(snr_db=20.0, seed=5, m_sub=2))
        bin_path, hdr_path = obs.save(str(tmp_path / "obs"))
        raw = np.fromfile(bin_path, dtype=np.complex64)
        total = sum(s.size for s in obs.signals)
        assert raw.size == total
        header = (tmp_path / "obs.hdr").read_text()
        assert "nodes = 2" in header
        assert f"snapshots = {obs.num_snapshots}" in header
