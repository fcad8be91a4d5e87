"""Ghost-module attention U-Net: parameter containers and the forward pass.

The network is encoder/decoder shaped.  Each encoder stage applies two
ghost modules then halves the spatial extents with max pooling; the single
bottleneck ghost module sits underneath; each decoder stage upsamples,
gates the matching skip connection with an attention block, concatenates,
and applies two ghost modules.  A final 1x1 convolution plus sigmoid
produces the iris probability map.

A ghost module spends a regular convolution on half its output channels
and synthesizes the other half with a cheap depthwise convolution over the
first half, which is where the parameter savings come from.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import ShapeError, WeightFormatError
from ..imaging import EYE_HEIGHT, EYE_WIDTH, EyeImage, MaskImage
from . import ops

DEFAULT_ENCODER_CHANNELS = (64, 128, 256, 512)
MASK_THRESHOLD = 0.5


def _as_f32(a) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(a, dtype=np.float32))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray

    def __post_init__(self):
        for name in ("gamma", "beta", "mean", "var"):
            object.__setattr__(self, name, _as_f32(getattr(self, name)))
        c = self.gamma.shape
        if len(c) != 1:
            raise WeightFormatError(f"batchnorm params must be rank-1, got {c}")
        for name in ("beta", "mean", "var"):
            if getattr(self, name).shape != c:
                raise WeightFormatError("batchnorm parameter shapes disagree")
        if not np.all(self.var >= 0):
            raise WeightFormatError("batchnorm running variance must be >= 0")

    @property
    def channels(self) -> int:
        return self.gamma.shape[0]

    def learnable_count(self) -> int:
        # gamma and beta train; running statistics do not
        return 2 * self.channels


@dataclass(frozen=True)
class GhostModuleParams:
    """One ghost module: primary conv to C/2, depthwise ghost path to C."""

    primary_weight: np.ndarray  # (3, 3, in_ch, C/2)
    primary_bias: np.ndarray
    primary_bn: BatchNormParams
    ghost_weight: np.ndarray  # (3, 3, C/2) depthwise
    ghost_bias: np.ndarray
    ghost_bn: BatchNormParams

    def __post_init__(self):
        for name in ("primary_weight", "primary_bias", "ghost_weight", "ghost_bias"):
            object.__setattr__(self, name, _as_f32(getattr(self, name)))
        pw = self.primary_weight
        if pw.ndim != 4 or pw.shape[:2] != (3, 3):
            raise WeightFormatError(
                f"primary kernel must be (3, 3, in, half), got {pw.shape}"
            )
        half = pw.shape[3]
        if self.primary_bias.shape != (half,):
            raise WeightFormatError("primary bias length mismatch")
        if self.ghost_weight.shape != (3, 3, half):
            raise WeightFormatError(
                f"ghost kernel must be (3, 3, {half}), got {self.ghost_weight.shape}"
            )
        if self.ghost_bias.shape != (half,):
            raise WeightFormatError("ghost bias length mismatch")
        if self.primary_bn.channels != half or self.ghost_bn.channels != half:
            raise WeightFormatError("batchnorm channel counts mismatch ghost module")

    @property
    def in_channels(self) -> int:
        return self.primary_weight.shape[2]

    @property
    def out_channels(self) -> int:
        return 2 * self.primary_weight.shape[3]

    def learnable_count(self) -> int:
        return (
            self.primary_weight.size + self.primary_bias.size
            + self.ghost_weight.size + self.ghost_bias.size
            + self.primary_bn.learnable_count() + self.ghost_bn.learnable_count()
        )


@dataclass(frozen=True)
class AttentionGateParams:
    """Additive attention over a skip connection, gated by the deeper feature."""

    wx_weight: np.ndarray  # (1, 1, skip_ch, inter)
    wx_bias: np.ndarray
    wg_weight: np.ndarray  # (1, 1, gate_ch, inter)
    wg_bias: np.ndarray
    psi_weight: np.ndarray  # (1, 1, inter, 1)
    psi_bias: np.ndarray

    def __post_init__(self):
        for name in ("wx_weight", "wx_bias", "wg_weight", "wg_bias",
                     "psi_weight", "psi_bias"):
            object.__setattr__(self, name, _as_f32(getattr(self, name)))
        if self.wx_weight.ndim != 4 or self.wx_weight.shape[:2] != (1, 1):
            raise WeightFormatError(f"wx kernel must be 1x1, got {self.wx_weight.shape}")
        inter = self.wx_weight.shape[3]
        if self.wg_weight.shape[:2] != (1, 1) or self.wg_weight.shape[3] != inter:
            raise WeightFormatError("wg kernel shape mismatch")
        if self.psi_weight.shape != (1, 1, inter, 1):
            raise WeightFormatError(
                f"psi kernel must be (1, 1, {inter}, 1), got {self.psi_weight.shape}"
            )
        if (self.wx_bias.shape != (inter,) or self.wg_bias.shape != (inter,)
                or self.psi_bias.shape != (1,)):
            raise WeightFormatError("attention bias length mismatch")

    @property
    def skip_channels(self) -> int:
        return self.wx_weight.shape[2]

    @property
    def gate_channels(self) -> int:
        return self.wg_weight.shape[2]

    def learnable_count(self) -> int:
        return (
            self.wx_weight.size + self.wx_bias.size
            + self.wg_weight.size + self.wg_bias.size
            + self.psi_weight.size + self.psi_bias.size
        )


@dataclass(frozen=True)
class NetworkWeights:
    """Full parameter set, validated for a consistent channel chain."""

    encoder: Tuple[Tuple[GhostModuleParams, GhostModuleParams], ...]
    bottleneck: GhostModuleParams
    decoder: Tuple[Tuple[AttentionGateParams, GhostModuleParams, GhostModuleParams], ...]
    final_weight: np.ndarray  # (1, 1, C_top, 1)
    final_bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "encoder", tuple(tuple(s) for s in self.encoder))
        object.__setattr__(self, "decoder", tuple(tuple(s) for s in self.decoder))
        object.__setattr__(self, "final_weight", _as_f32(self.final_weight))
        object.__setattr__(self, "final_bias", _as_f32(self.final_bias))
        if not self.encoder:
            raise WeightFormatError("encoder has no stages")
        if len(self.decoder) != len(self.encoder):
            raise WeightFormatError(
                f"{len(self.encoder)} encoder stages but {len(self.decoder)} decoder stages"
            )
        ch = self.encoder[0][0].in_channels
        skip_channels = []
        for i, (g1, g2) in enumerate(self.encoder, start=1):
            if g1.in_channels != ch:
                raise WeightFormatError(
                    f"enc{i}.ghost1 expects {g1.in_channels} input channels, chain has {ch}"
                )
            if g2.in_channels != g1.out_channels or g2.out_channels != g1.out_channels:
                raise WeightFormatError(f"enc{i}.ghost2 channel mismatch")
            ch = g2.out_channels
            skip_channels.append(ch)
        if self.bottleneck.in_channels != ch:
            raise WeightFormatError(
                f"bottleneck expects {self.bottleneck.in_channels} channels, chain has {ch}"
            )
        ch = self.bottleneck.out_channels
        for j, (att, g1, g2) in enumerate(self.decoder):
            stage = len(self.decoder) - j  # named dec4..dec1 for a 4-stage net
            skip = skip_channels[-1 - j]
            if att.skip_channels != skip:
                raise WeightFormatError(
                    f"dec{stage}.att skip channels {att.skip_channels} != {skip}"
                )
            if att.gate_channels != ch:
                raise WeightFormatError(
                    f"dec{stage}.att gate channels {att.gate_channels} != {ch}"
                )
            if g1.in_channels != ch + skip:
                raise WeightFormatError(
                    f"dec{stage}.ghost1 expects {g1.in_channels} channels, "
                    f"concat provides {ch + skip}"
                )
            if g2.in_channels != g1.out_channels or g2.out_channels != g1.out_channels:
                raise WeightFormatError(f"dec{stage}.ghost2 channel mismatch")
            ch = g2.out_channels
        if self.final_weight.shape != (1, 1, ch, 1):
            raise WeightFormatError(
                f"final conv must be (1, 1, {ch}, 1), got {self.final_weight.shape}"
            )
        if self.final_bias.shape != (1,):
            raise WeightFormatError("final bias must have length 1")

    @property
    def stage_count(self) -> int:
        return len(self.encoder)

    @property
    def in_channels(self) -> int:
        return self.encoder[0][0].in_channels

    @property
    def encoder_channels(self) -> Tuple[int, ...]:
        return tuple(g2.out_channels for _, g2 in self.encoder)


def ghost_forward(x: np.ndarray, p: GhostModuleParams) -> np.ndarray:
    """conv3x3 -> BN -> ReLU for the primary half, depthwise ghost half, concat."""
    primary = ops.relu(
        ops.batchnorm(
            ops.conv2d_same(x, p.primary_weight, p.primary_bias),
            p.primary_bn.gamma, p.primary_bn.beta, p.primary_bn.mean, p.primary_bn.var,
        )
    )
    ghost = ops.relu(
        ops.batchnorm(
            ops.depthwise3_same(primary, p.ghost_weight, p.ghost_bias),
            p.ghost_bn.gamma, p.ghost_bn.beta, p.ghost_bn.mean, p.ghost_bn.var,
        )
    )
    return ops.concat_channels(primary, ghost)


def attention_forward(skip: np.ndarray, gate: np.ndarray,
                      p: AttentionGateParams) -> np.ndarray:
    """Scale the skip tensor by a sigmoid attention map in (0, 1)."""
    if skip.shape[:2] != gate.shape[:2]:
        raise ShapeError(
            f"attention spatial mismatch: skip {skip.shape[:2]} vs gate {gate.shape[:2]}"
        )
    mixed = ops.relu(
        ops.conv2d_same(skip, p.wx_weight, p.wx_bias)
        + ops.conv2d_same(gate, p.wg_weight, p.wg_bias)
    )
    alpha = ops.sigmoid(ops.conv2d_same(mixed, p.psi_weight, p.psi_bias))
    return skip * alpha


def run_network(x: np.ndarray, w: NetworkWeights) -> np.ndarray:
    """Probability map for an (h, w, in_ch) float tensor already scaled to [0,1].

    Spatial extents must survive one exact halving per encoder stage.
    """
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 3 or x.shape[2] != w.in_channels:
        raise ShapeError(
            f"network input must be (h, w, {w.in_channels}), got {x.shape}"
        )
    h0, w0 = x.shape[:2]
    divisor = 1 << w.stage_count
    if h0 % divisor or w0 % divisor:
        raise ShapeError(
            f"input {w0}x{h0} not divisible by 2^{w.stage_count} for pooling"
        )
    skips = []
    for g1, g2 in w.encoder:
        x = ghost_forward(ghost_forward(x, g1), g2)
        skips.append(x)
        x = ops.maxpool2(x)
    x = ghost_forward(x, w.bottleneck)
    for (att, g1, g2), skip in zip(w.decoder, reversed(skips)):
        x = ops.upsample2_nearest(x)
        gated = attention_forward(skip, x, att)
        x = ops.concat_channels(x, gated)
        x = ghost_forward(ghost_forward(x, g1), g2)
    logits = ops.conv2d_same(x, w.final_weight, w.final_bias)
    return ops.sigmoid(logits)[:, :, 0]


@dataclass(frozen=True)
class SegmentationOutput:
    probabilities: np.ndarray  # (480, 640) float32 in [0, 1]
    mask: MaskImage

    def __post_init__(self):
        p = np.asarray(self.probabilities)
        if p.shape != (EYE_HEIGHT, EYE_WIDTH):
            raise ShapeError(f"probability map must be 640x480, got {p.shape}")


def forward(eye: EyeImage, w: NetworkWeights) -> SegmentationOutput:
    """Segment a 640x480 eye image into an iris probability map and mask.

    Pixels are scaled to [0, 1]; mask bits are on where probability
    exceeds 0.5.
    """
    x = (eye.pixels.astype(np.float32) / np.float32(255.0))[:, :, None]
    prob = run_network(x, w)
    return SegmentationOutput(prob, MaskImage(prob > MASK_THRESHOLD))


def param_count(w: NetworkWeights) -> int:
    """Learnable parameter total: weights, biases, and batch-norm scale/shift."""
    total = 0
    for g1, g2 in w.encoder:
        total += g1.learnable_count() + g2.learnable_count()
    total += w.bottleneck.learnable_count()
    for att, g1, g2 in w.decoder:
        total += att.learnable_count() + g1.learnable_count() + g2.learnable_count()
    total += w.final_weight.size + w.final_bias.size
    return int(total)


def topology_summary(w: NetworkWeights) -> str:
    """Human-readable stage table used by the netinfo command."""
    lines = []
    n = w.stage_count
    for i, (g1, g2) in enumerate(w.encoder, start=1):
        lines.append(
            f"enc{i}: ghost {g1.in_channels}->{g1.out_channels}, "
            f"ghost {g2.in_channels}->{g2.out_channels}, maxpool /2"
        )
    b = w.bottleneck
    lines.append(f"bottleneck: ghost {b.in_channels}->{b.out_channels}")
    for j, (att, g1, g2) in enumerate(w.decoder):
        lines.append(
            f"dec{n - j}: upsample x2, attention(skip {att.skip_channels}, "
            f"gate {att.gate_channels}), ghost {g1.in_channels}->{g1.out_channels}, "
            f"ghost {g2.in_channels}->{g2.out_channels}"
        )
    lines.append(f"final: conv1x1 {w.final_weight.shape[2]}->1, sigmoid")
    lines.append(f"parameters: {param_count(w)}")
    return "\n".join(lines)
