"""Weight-set builders: random-but-valid parameters and a demo classifier.

``random_weights`` fills a topology with small random values, which is all
the shape/contract tests need.  ``demo_weights`` wires the network by hand
into an intensity band-pass detector: passthrough taps carry the input
gray level to the last decoder stage, where two ReLU hinges and the final
1x1 convolution turn it into "mid-gray pixels on, dark and bright pixels
off".  On rendered eye images that band is the iris annulus, so the demo
file exercises the whole pipeline without trained weights.
"""

from __future__ import annotations

import numpy as np

from .model import (
    AttentionGateParams,
    BatchNormParams,
    DEFAULT_ENCODER_CHANNELS,
    GhostModuleParams,
    NetworkWeights,
)
from .ops import BN_EPS

# Demo band edges in normalized intensity.  With hinge offsets LO and HI the
# detector turns on inside (LO + MARGIN, 2 HI - LO - MARGIN), which for the
# values below is gray levels 40..215 of 255.
DEMO_LO = 30.0 / 255.0
DEMO_HI = 127.5 / 255.0
DEMO_MARGIN = 10.0 / 255.0
DEMO_GAIN = 2000.0


def _identity_bn(channels: int) -> BatchNormParams:
    # running_var is picked so sqrt(var + eps) is exactly 1
    return BatchNormParams(
        gamma=np.ones(channels),
        beta=np.zeros(channels),
        mean=np.zeros(channels),
        var=np.full(channels, 1.0 - BN_EPS),
    )


def _ghost_copy_all(half: int) -> np.ndarray:
    w = np.zeros((3, 3, half))
    w[1, 1, :] = 1.0
    return w


def _passthrough_ghost(in_ch: int, out_ch: int, taps=None) -> GhostModuleParams:
    """Ghost module whose primary path copies selected input channels.

    ``taps`` maps primary output channel -> (input channel, bias); the
    default carries input channel 0 on output channel 0.  The ghost half
    duplicates the primary half through a center-tap depthwise kernel.
    """
    half = out_ch // 2
    pw = np.zeros((3, 3, in_ch, half))
    pb = np.zeros(half)
    for out_c, (in_c, bias) in (taps or {0: (0, 0.0)}).items():
        pw[1, 1, in_c, out_c] = 1.0
        pb[out_c] = bias
    return GhostModuleParams(
        primary_weight=pw,
        primary_bias=pb,
        primary_bn=_identity_bn(half),
        ghost_weight=_ghost_copy_all(half),
        ghost_bias=np.zeros(half),
        ghost_bn=_identity_bn(half),
    )


def _open_attention(skip_ch: int, gate_ch: int) -> AttentionGateParams:
    """Attention gate that is effectively transparent (alpha ~ 1)."""
    inter = max(1, skip_ch // 2)
    return AttentionGateParams(
        wx_weight=np.zeros((1, 1, skip_ch, inter)),
        wx_bias=np.zeros(inter),
        wg_weight=np.zeros((1, 1, gate_ch, inter)),
        wg_bias=np.zeros(inter),
        psi_weight=np.zeros((1, 1, inter, 1)),
        psi_bias=np.array([20.0]),
    )


def demo_weights(encoder_channels=DEFAULT_ENCODER_CHANNELS) -> NetworkWeights:
    """Hand-wired band-pass weights for the default topology."""
    chans = tuple(encoder_channels)
    encoder = []
    in_ch = 1
    for c in chans:
        encoder.append((_passthrough_ghost(in_ch, c), _passthrough_ghost(c, c)))
        in_ch = c
    bottleneck = _passthrough_ghost(chans[-1], chans[-1])

    decoder = []
    gate_ch = chans[-1]
    for idx in range(len(chans) - 1, -1, -1):
        skip_ch = chans[idx]
        out_ch = chans[idx]
        att = _open_attention(skip_ch, gate_ch)
        concat_ch = gate_ch + skip_ch
        if idx == 0:
            # full-resolution skip intensity arrives at channel gate_ch;
            # hinge it at the two band edges
            g1 = _passthrough_ghost(
                concat_ch, out_ch,
                taps={0: (gate_ch, -DEMO_LO), 1: (gate_ch, -DEMO_HI)},
            )
            g1 = GhostModuleParams(
                primary_weight=g1.primary_weight,
                primary_bias=g1.primary_bias,
                primary_bn=g1.primary_bn,
                ghost_weight=np.zeros((3, 3, out_ch // 2)),
                ghost_bias=np.zeros(out_ch // 2),
                ghost_bn=g1.ghost_bn,
            )
            g2 = _passthrough_ghost(out_ch, out_ch, taps={0: (0, 0.0), 1: (1, 0.0)})
        else:
            g1 = _passthrough_ghost(concat_ch, out_ch)
            g2 = _passthrough_ghost(out_ch, out_ch)
        decoder.append((att, g1, g2))
        gate_ch = out_ch

    final_w = np.zeros((1, 1, chans[0], 1))
    final_w[0, 0, 0, 0] = DEMO_GAIN
    final_w[0, 0, 1, 0] = -2.0 * DEMO_GAIN
    final_b = np.array([-DEMO_GAIN * DEMO_MARGIN])
    return NetworkWeights(tuple(encoder), bottleneck, tuple(decoder), final_w, final_b)


def random_weights(rng: np.random.Generator, in_channels: int = 1,
                   encoder_channels=DEFAULT_ENCODER_CHANNELS) -> NetworkWeights:
    """Random valid parameter set for a given topology."""

    def bn(c):
        return BatchNormParams(
            gamma=rng.uniform(0.8, 1.2, c),
            beta=rng.normal(0.0, 0.05, c),
            mean=rng.normal(0.0, 0.05, c),
            var=rng.uniform(0.5, 1.5, c),
        )

    def ghost(c_in, c_out):
        half = c_out // 2
        return GhostModuleParams(
            primary_weight=rng.normal(0.0, 0.08, (3, 3, c_in, half)),
            primary_bias=rng.normal(0.0, 0.05, half),
            primary_bn=bn(half),
            ghost_weight=rng.normal(0.0, 0.15, (3, 3, half)),
            ghost_bias=rng.normal(0.0, 0.05, half),
            ghost_bn=bn(half),
        )

    def attention(skip_ch, gate_ch):
        inter = max(1, skip_ch // 2)
        return AttentionGateParams(
            wx_weight=rng.normal(0.0, 0.1, (1, 1, skip_ch, inter)),
            wx_bias=rng.normal(0.0, 0.05, inter),
            wg_weight=rng.normal(0.0, 0.1, (1, 1, gate_ch, inter)),
            wg_bias=rng.normal(0.0, 0.05, inter),
            psi_weight=rng.normal(0.0, 0.2, (1, 1, inter, 1)),
            psi_bias=rng.normal(0.0, 0.5, 1),
        )

    chans = tuple(encoder_channels)
    encoder = []
    c_in = in_channels
    for c in chans:
        encoder.append((ghost(c_in, c), ghost(c, c)))
        c_in = c
    bottleneck = ghost(chans[-1], chans[-1])
    decoder = []
    gate_ch = chans[-1]
    for idx in range(len(chans) - 1, -1, -1):
        skip_ch = chans[idx]
        decoder.append((attention(skip_ch, gate_ch), ghost(gate_ch + skip_ch, chans[idx]),
                        ghost(chans[idx], chans[idx])))
        gate_ch = chans[idx]
    final_w = rng.normal(0.0, 0.2, (1, 1, chans[0], 1))
    final_b = rng.normal(0.0, 0.2, 1)
    return NetworkWeights(tuple(encoder), bottleneck, tuple(decoder), final_w, final_b)
