"""Segmentation network: ops, topology, weight files, and preset builders."""

from .gauw import read_records, read_weights, weights_to_records, write_weights
from .model import (
    AttentionGateParams,
    BatchNormParams,
    DEFAULT_ENCODER_CHANNELS,
    GhostModuleParams,
    NetworkWeights,
    SegmentationOutput,
    attention_forward,
    forward,
    ghost_forward,
    param_count,
    run_network,
    topology_summary,
)
from .presets import demo_weights, random_weights

__all__ = [
    "AttentionGateParams",
    "BatchNormParams",
    "DEFAULT_ENCODER_CHANNELS",
    "GhostModuleParams",
    "NetworkWeights",
    "SegmentationOutput",
    "attention_forward",
    "demo_weights",
    "forward",
    "ghost_forward",
    "param_count",
    "random_weights",
    "read_records",
    "read_weights",
    "run_network",
    "topology_summary",
    "weights_to_records",
    "write_weights",
]
