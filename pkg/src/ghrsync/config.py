"""Experiment configuration: flat-sectioned key=value files with a JSON mirror.

The INI form has one section per module plus one ``[node.N]`` section per
network node:

    [waveform]
    kind = lfm
    carrier_hz = 2e9
    ...

    [scene]
    doa_rad = 0.5235987755982988
    snr_db = 20
    seed = 1

    [node.1]
    subarray_elems = 4

    [node.2]
    prop_delay_s = 1e-8
    clock_offset_s = 3.45e-9
    rf_phase_rad = 1.234
    subarray_elems = 4

    [featext]
    window = 9

    [sweep]
    axis = snr_db
    values = 0, 5, 10, 15, 20
    methods = ghr, gcc
    trials = 100
    base_seed = 7

The JSON mirror nests the same keys: {"waveform": {...}, "scene": {...,
"nodes": [...]}, "featext": {...}, "sweep": {...}, "twme": {...}}.
"""

from __future__ import annotations

import configparser
import json
import math
from pathlib import Path

from .baselines import TwmeModel
from .errors import ConfigurationError
from .harness import SWEEP_AXES, ExperimentConfig, FeatureOptions
from .scene import NodeConfig, Scene
from .waveforms import WaveformSpec

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(value):
    if not isinstance(value, str):
        return value
    s = value.strip()
    low = s.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def _coerce_mapping(section) -> dict:
    return {k: _coerce(v) for k, v in section.items()}


def _as_tuple(value) -> tuple:
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(_coerce(part) for part in str(value).split(",") if part.strip())


def load_config(path: str | Path) -> ExperimentConfig:
    """Parse an experiment config file (INI-like or JSON)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if path.suffix == ".json" or text.lstrip().startswith("{"):
        data = json.loads(text)
        nodes = data.get("scene", {}).pop("nodes", data.pop("nodes", []))
    else:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(text)
        data = {}
        node_sections = []
        for name in parser.sections():
            if name.startswith("node."):
                node_sections.append((int(name.split(".", 1)[1]), _coerce_mapping(parser[name])))
            else:
                data[name] = _coerce_mapping(parser[name])
        node_sections.sort(key=lambda item: item[0])
        nodes = [mapping for _, mapping in node_sections]
    return build_config(data, nodes)


def build_config(data: dict, nodes: list[dict]) -> ExperimentConfig:
    try:
        waveform = WaveformSpec(**data.get("waveform", {}))
    except TypeError as exc:
        raise ConfigurationError(f"bad [waveform] section: {exc}") from exc
    if not nodes:
        raise ConfigurationError("config defines no [node.N] sections")
    try:
        node_cfgs = tuple(NodeConfig(**mapping) for mapping in nodes)
    except TypeError as exc:
        raise ConfigurationError(f"bad [node.N] section: {exc}") from exc

    scene_map = dict(data.get("scene", {}))
    try:
        scene = Scene(
            waveform=waveform,
            doa_rad=float(scene_map.pop("doa_rad", 0.0)),
            nodes=node_cfgs,
            snr_db=float(scene_map.pop("snr_db", math.inf)),
            seed=int(scene_map.pop("seed", 0)),
            extend_support=bool(scene_map.pop("extend_support", False)),
        )
    except TypeError as exc:
        raise ConfigurationError(f"bad [scene] section: {exc}") from exc
    if scene_map:
        raise ConfigurationError(f"unknown [scene] keys: {sorted(scene_map)}")

    feat_map = dict(data.get("featext", {}))
    trajectory = str(feat_map.pop("trajectory", "x")).lower()
    if trajectory not in ("x", "v"):
        raise ConfigurationError("featext.trajectory must be 'x' or 'v'")
    try:
        features = FeatureOptions(use_tangent=(trajectory == "v"), **feat_map)
    except TypeError as exc:
        raise ConfigurationError(f"bad [featext] section: {exc}") from exc

    twme_map = dict(data.get("twme", {}))
    try:
        twme = TwmeModel(**twme_map)
    except TypeError as exc:
        raise ConfigurationError(f"bad [twme] section: {exc}") from exc

    sweep = dict(data.get("sweep", {}))
    axis = sweep.pop("axis", "snr_db")
    if axis not in SWEEP_AXES:
        raise ConfigurationError(f"unknown sweep axis {axis!r}; pick one of {sorted(SWEEP_AXES)}")
    values = _as_tuple(sweep.pop("values", (scene.snr_db,) if axis == "snr_db" else ()))
    if not values:
        raise ConfigurationError("sweep.values is empty")
    methods = tuple(str(m).strip() for m in _as_tuple(sweep.pop("methods", ("ghr",))))
    kwargs = {
        "trials": int(sweep.pop("trials", 1)),
        "base_seed": int(sweep.pop("base_seed", 0)),
        "boundary_probe": bool(sweep.pop("boundary_probe", False)),
        "workers": int(sweep.pop("workers", 1)),
        "output_dir": sweep.pop("output_dir", None),
    }
    if sweep:
        raise ConfigurationError(f"unknown [sweep] keys: {sorted(sweep)}")
    return ExperimentConfig(
        scene=scene,
        sweep_axis=axis,
        sweep_values=tuple(float(v) for v in values),
        methods=methods,
        features=features,
        twme=twme,
        **kwargs,
    )


def dump_config(config: ExperimentConfig) -> str:
    """Serialize a config back to the INI form (provenance copies)."""
    lines = []

    def section(name, mapping):
        lines.append(f"[{name}]")
        for key, val in mapping.items():
            if val is None:
                continue
            lines.append(f"{key} = {val!r}" if isinstance(val, float) else f"{key} = {val}")
        lines.append("")

    wf = config.scene.waveform
    section(
        "waveform",
        {
            "kind": wf.kind.value,
            "carrier_hz": wf.carrier_hz,
            "bandwidth_hz": wf.bandwidth_hz,
            "duration_s": wf.duration_s,
            "sample_rate_hz": wf.sample_rate_hz,
            "sfm_mod_rate_hz": wf.sfm_mod_rate_hz,
            "fsk_symbol_rate_baud": wf.fsk_symbol_rate_baud,
            "fsk_pattern_seed": wf.fsk_pattern_seed,
            "passband_faithful": wf.passband_faithful,
        },
    )
    section(
        "scene",
        {
            "doa_rad": config.scene.doa_rad,
            "snr_db": config.scene.snr_db,
            "seed": config.scene.seed,
            "extend_support": config.scene.extend_support,
        },
    )
    for i, node in enumerate(config.scene.nodes, start=1):
        section(
            f"node.{i}",
            {
                "prop_delay_s": node.prop_delay_s,
                "clock_offset_s": node.clock_offset_s,
                "rf_phase_rad": node.rf_phase_rad,
                "subarray_elems": node.subarray_elems,
                "elem_spacing_wavelengths": node.elem_spacing_wavelengths,
            },
        )
    section(
        "featext",
        {
            "window": config.features.window,
            "trajectory": "v" if config.features.use_tangent else "x",
            "order": config.features.order,
            "hop_guard_s": config.features.hop_guard_s,
            "max_snapshots": config.features.max_snapshots,
        },
    )
    section(
        "sweep",
        {
            "axis": config.sweep_axis,
            "values": ", ".join(f"{v!r}" for v in config.sweep_values),
            "methods": ", ".join(config.methods),
            "trials": config.trials,
            "base_seed": config.base_seed,
            "boundary_probe": config.boundary_probe,
            "workers": config.workers,
        },
    )
    section(
        "twme",
        {
            "exchanges": config.twme.exchanges,
            "queue_jitter_mean_s": config.twme.queue_jitter_mean_s,
            "asymmetry": config.twme.asymmetry,
        },
    )
    return "\n".join(lines)
