"""Low-level tensor ops for segmentation inference.

Tensors are numpy float32 arrays shaped (height, width, channels), C-order,
so a buffer is row-major with channels minor.  Everything here is
inference-only and deterministic.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ..errors import ShapeError

BN_EPS = 1e-5


def _require_hwC(x: np.ndarray, name: str) -> np.ndarray:
    if x.ndim != 3:
        raise ShapeError(f"{name} must be rank-3 (h, w, c), got shape {x.shape}")
    return x


def conv2d_same(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """2-D convolution with zero same-padding.

    ``weight`` is (kh, kw, in_ch, out_ch); odd kernel extents only.  The
    inner product for each tap is a (pixels x in_ch) @ (in_ch x out_ch)
    matmul, accumulated in float32.
    """
    _require_hwC(x, "conv input")
    kh, kw, c_in, c_out = weight.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError(f"kernel extents must be odd, got {kh}x{kw}")
    if x.shape[2] != c_in:
        raise ShapeError(
            f"conv input has {x.shape[2]} channels, kernel expects {c_in}"
        )
    if bias.shape != (c_out,):
        raise ShapeError(f"conv bias shape {bias.shape} != ({c_out},)")
    h, w = x.shape[:2]
    ph, pw = kh // 2, kw // 2
    padded = np.zeros((h + 2 * ph, w + 2 * pw, c_in), dtype=np.float32)
    padded[ph : ph + h, pw : pw + w, :] = x
    out = np.broadcast_to(bias.astype(np.float32), (h, w, c_out)).copy()
    for dy in range(kh):
        for dx in range(kw):
            tap = weight[dy, dx].astype(np.float32)  # (c_in, c_out)
            if not tap.any():
                continue
            window = padded[dy : dy + h, dx : dx + w, :]
            out += window.reshape(-1, c_in).dot(tap).reshape(h, w, c_out)
    return out


def depthwise3_same(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Per-channel 3x3 convolution with zero same-padding.

    ``weight`` is (3, 3, channels); channel i of the output sees only
    channel i of the input.
    """
    _require_hwC(x, "depthwise input")
    if weight.shape[:2] != (3, 3) or weight.ndim != 3:
        raise ShapeError(f"depthwise kernel must be (3, 3, c), got {weight.shape}")
    c = x.shape[2]
    if weight.shape[2] != c:
        raise ShapeError(
            f"depthwise kernel has {weight.shape[2]} channels, input has {c}"
        )
    if bias.shape != (c,):
        raise ShapeError(f"depthwise bias shape {bias.shape} != ({c},)")
    h, w = x.shape[:2]
    padded = np.zeros((h + 2, w + 2, c), dtype=np.float32)
    padded[1 : 1 + h, 1 : 1 + w, :] = x
    out = np.broadcast_to(bias.astype(np.float32), (h, w, c)).copy()
    for dy in range(3):
        for dx in range(3):
            tap = weight[dy, dx].astype(np.float32)  # (c,)
            if not tap.any():
                continue
            out += padded[dy : dy + h, dx : dx + w, :] * tap
    return out


def batchnorm(x: np.ndarray, gamma, beta, mean, var) -> np.ndarray:
    """Inference-mode batch normalization with fixed running statistics."""
    _require_hwC(x, "batchnorm input")
    c = x.shape[2]
    for name, v in (("gamma", gamma), ("beta", beta), ("mean", mean), ("var", var)):
        if np.asarray(v).shape != (c,):
            raise ShapeError(f"batchnorm {name} shape {np.asarray(v).shape} != ({c},)")
    scale = (gamma / np.sqrt(var + BN_EPS)).astype(np.float32)
    shift = (beta - mean * scale).astype(np.float32)
    return x * scale + shift


def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, np.float32(0.0))


def sigmoid(x: np.ndarray) -> np.ndarray:
    return expit(x).astype(np.float32)


def maxpool2(x: np.ndarray) -> np.ndarray:
    """2x2 max pooling with stride 2; spatial extents must be even."""
    _require_hwC(x, "pool input")
    h, w, c = x.shape
    if h % 2 or w % 2:
        raise ShapeError(f"pooling needs even extents, got {w}x{h}")
    return x.reshape(h // 2, 2, w // 2, 2, c).max(axis=(1, 3))


def upsample2_nearest(x: np.ndarray) -> np.ndarray:
    """Nearest-neighbour doubling of both spatial extents."""
    _require_hwC(x, "upsample input")
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1)


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _require_hwC(a, "concat input")
    _require_hwC(b, "concat input")
    if a.shape[:2] != b.shape[:2]:
        raise ShapeError(
            f"concat spatial mismatch: {a.shape[:2]} vs {b.shape[:2]}"
        )
    return np.concatenate([a, b], axis=2)
