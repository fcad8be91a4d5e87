"""TOML configuration for the processing pipeline.

Four sections map onto PipelineConfig: ``[quality]`` (gate thresholds),
``[segmentation]`` (weights path, empty string selects the built-in demo
weights), ``[encoding]`` (filter wavelengths), and ``[matching]``
(decision threshold, overlap floor, shift budget).  Every key is
optional; omitted keys keep their defaults.
"""

from __future__ import annotations

from dataclasses import fields
from typing import Optional

import tomli

from .errors import ConfigError
from .matching import DecisionThreshold
from .pipeline import PipelineConfig
from .quality import QualityThresholds


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ConfigError(f"cannot render {type(v).__name__} as TOML")


def config_to_toml(cfg: PipelineConfig) -> str:
    """Render a config as TOML text that load_config_text reads back."""
    lines = ["[quality]"]
    for f in fields(QualityThresholds):
        lines.append(f"{f.name} = {_toml_value(getattr(cfg.thresholds, f.name))}")
    lines += [
        "",
        "[segmentation]",
        f"weights = {_toml_value(cfg.weights_path or '')}",
        "",
        "[encoding]",
        f"wavelengths = {_toml_value(list(cfg.wavelengths))}",
        "",
        "[matching]",
        f"hd_threshold = {_toml_value(cfg.decision.hd_threshold)}",
        f"min_overlap_bits = {_toml_value(cfg.decision.min_overlap_bits)}",
        f"max_shift = {_toml_value(cfg.max_shift)}",
    ]
    return "\n".join(lines) + "\n"


def _section(data: dict, name: str) -> dict:
    sec = data.pop(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def config_from_mapping(data: dict, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    base = base or PipelineConfig()
    data = dict(data)
    quality = _section(data, "quality")
    segmentation = _section(data, "segmentation")
    encoding = _section(data, "encoding")
    matching = _section(data, "matching")
    if data:
        raise ConfigError(f"unknown config sections: {sorted(data)}")

    try:
        base_thr = {f.name: getattr(base.thresholds, f.name)
                    for f in fields(QualityThresholds)}
        thresholds = QualityThresholds.from_mapping({**base_thr, **quality})
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[quality]: {e}") from None

    weights = segmentation.pop("weights", base.weights_path or "")
    if segmentation:
        raise ConfigError(f"unknown [segmentation] keys: {sorted(segmentation)}")
    if not isinstance(weights, str):
        raise ConfigError("[segmentation] weights must be a string path")

    raw_waves = encoding.pop("wavelengths", list(base.wavelengths))
    if encoding:
        raise ConfigError(f"unknown [encoding] keys: {sorted(encoding)}")
    if not isinstance(raw_waves, list) or not raw_waves:
        raise ConfigError("[encoding] wavelengths must be a non-empty list")

    hd = matching.pop("hd_threshold", base.decision.hd_threshold)
    overlap = matching.pop("min_overlap_bits", base.decision.min_overlap_bits)
    max_shift = matching.pop("max_shift", base.max_shift)
    if matching:
        raise ConfigError(f"unknown [matching] keys: {sorted(matching)}")
    try:
        decision = DecisionThreshold(float(hd), int(overlap))
        max_shift = int(max_shift)
        if max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        wavelengths = tuple(float(w) for w in raw_waves)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"[matching]/[encoding]: {e}") from None

    return PipelineConfig(
        thresholds=thresholds,
        weights_path=weights or None,
        wavelengths=wavelengths,
        decision=decision,
        max_shift=max_shift,
    )


def load_config_text(text: str, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML: {e}") from None
    return config_from_mapping(data, base)


def load_config(path, base: Optional[PipelineConfig] = None) -> PipelineConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return load_config_text(text, base)


def load_thresholds(path) -> QualityThresholds:
    """Standalone thresholds file: a bare [quality] table or top-level keys."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = tomli.loads(f.read())
    except OSError as e:
        raise ConfigError(f"cannot read thresholds {path}: {e}") from None
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"invalid TOML in {path}: {e}") from None
    table = data.get("quality", data)
    if not isinstance(table, dict):
        raise ConfigError(f"{path}: expected a table of threshold keys")
    try:
        return QualityThresholds.from_mapping(table)
    except (ValueError, TypeError) as e:
        raise ConfigError(f"{path}: {e}") from None
