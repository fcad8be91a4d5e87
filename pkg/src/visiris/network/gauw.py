"""Binary weight-file codec for the segmentation network.

Layout (little-endian):

    magic   4 bytes  "GAUW"
    version u32      1
    count   u32      number of named records
    record  repeated:
        name_len u16, name UTF-8,
        dtype    u8  (0 = float32),
        rank     u8,
        extents  u32 x rank,
        payload  float32 row-major

Record names mirror the topology: ``enc1.ghost1.primary.weight``,
``dec3.att.psi.bias``, ``bottleneck.ghost.weight``, ``final.bias`` and so
on.  The reader reassembles a validated NetworkWeights and fails with the
offending record name on any mismatch.
"""

from __future__ import annotations

import struct
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..errors import WeightFormatError
from .model import (
    AttentionGateParams,
    BatchNormParams,
    GhostModuleParams,
    NetworkWeights,
)

MAGIC = b"GAUW"
VERSION = 1
DTYPE_F32 = 0

def _ghost_records(prefix: str, g: GhostModuleParams) -> Iterator[Tuple[str, np.ndarray]]:
    yield f"{prefix}.primary.weight", g.primary_weight
    yield f"{prefix}.primary.bias", g.primary_bias
    yield f"{prefix}.primary_bn.gamma", g.primary_bn.gamma
    yield f"{prefix}.primary_bn.beta", g.primary_bn.beta
    yield f"{prefix}.primary_bn.mean", g.primary_bn.mean
    yield f"{prefix}.primary_bn.var", g.primary_bn.var
    yield f"{prefix}.ghost.weight", g.ghost_weight
    yield f"{prefix}.ghost.bias", g.ghost_bias
    yield f"{prefix}.ghost_bn.gamma", g.ghost_bn.gamma
    yield f"{prefix}.ghost_bn.beta", g.ghost_bn.beta
    yield f"{prefix}.ghost_bn.mean", g.ghost_bn.mean
    yield f"{prefix}.ghost_bn.var", g.ghost_bn.var


def weights_to_records(w: NetworkWeights) -> List[Tuple[str, np.ndarray]]:
    """Canonical (name, array) list covering every parameter exactly once."""
    out: List[Tuple[str, np.ndarray]] = []
    for i, (g1, g2) in enumerate(w.encoder, start=1):
        out.extend(_ghost_records(f"enc{i}.ghost1", g1))
        out.extend(_ghost_records(f"enc{i}.ghost2", g2))
    out.extend(_ghost_records("bottleneck", w.bottleneck))
    n = w.stage_count
    for j, (att, g1, g2) in enumerate(w.decoder):
        prefix = f"dec{n - j}"
        out.append((f"{prefix}.att.wx.weight", att.wx_weight))
        out.append((f"{prefix}.att.wx.bias", att.wx_bias))
        out.append((f"{prefix}.att.wg.weight", att.wg_weight))
        out.append((f"{prefix}.att.wg.bias", att.wg_bias))
        out.append((f"{prefix}.att.psi.weight", att.psi_weight))
        out.append((f"{prefix}.att.psi.bias", att.psi_bias))
        out.extend(_ghost_records(f"{prefix}.ghost1", g1))
        out.extend(_ghost_records(f"{prefix}.ghost2", g2))
    out.append(("final.weight", w.final_weight))
    out.append(("final.bias", w.final_bias))
    return out


def write_weights(w: NetworkWeights, path) -> None:
    records = weights_to_records(w)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(records)))
        for name, arr in records:
            encoded = name.encode("utf-8")
            a = np.ascontiguousarray(arr, dtype="<f4")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BB", DTYPE_F32, a.ndim))
            f.write(struct.pack(f"<{a.ndim}I", *a.shape))
            f.write(a.tobytes())


class _Reader:
    def __init__(self, blob: bytes, path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise WeightFormatError(f"{self.path}: truncated weight file")
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_records(path) -> Dict[str, np.ndarray]:
    """Parse a weight file into a name -> float32 array mapping."""
    with open(path, "rb") as f:
        blob = f.read()
    r = _Reader(blob, path)
    if r.take(4) != MAGIC:
        raise WeightFormatError(f"{path}: not a GAUW weight file (bad magic)")
    version, count = r.unpack("<II")
    if version != VERSION:
        raise WeightFormatError(f"{path}: unsupported version {version}")
    records: Dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        try:
            name = r.take(name_len).decode("utf-8")
        except UnicodeDecodeError:
            raise WeightFormatError(f"{path}: undecodable record name") from None
        dtype, rank = r.unpack("<BB")
        if dtype != DTYPE_F32:
            raise WeightFormatError(f"{path}: record {name!r} has unsupported dtype {dtype}")
        shape = r.unpack(f"<{rank}I") if rank else ()
        size = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = r.take(4 * size)
        arr = np.frombuffer(payload, dtype="<f4").reshape(shape)
        if name in records:
            raise WeightFormatError(f"{path}: duplicate record {name!r}")
        records[name] = arr
    if r.pos != len(blob):
        raise WeightFormatError(f"{path}: {len(blob) - r.pos} trailing bytes")
    return records


class _RecordSet:
    def __init__(self, records: Dict[str, np.ndarray], path):
        self.records = dict(records)
        self.path = path

    def pull(self, name: str) -> np.ndarray:
        try:
            return self.records.pop(name)
        except KeyError:
            raise WeightFormatError(f"{self.path}: missing layer record {name!r}") from None

    def ghost(self, prefix: str) -> GhostModuleParams:
        try:
            return GhostModuleParams(
                primary_weight=self.pull(f"{prefix}.primary.weight"),
                primary_bias=self.pull(f"{prefix}.primary.bias"),
                primary_bn=BatchNormParams(
                    self.pull(f"{prefix}.primary_bn.gamma"),
                    self.pull(f"{prefix}.primary_bn.beta"),
                    self.pull(f"{prefix}.primary_bn.mean"),
                    self.pull(f"{prefix}.primary_bn.var"),
                ),
                ghost_weight=self.pull(f"{prefix}.ghost.weight"),
                ghost_bias=self.pull(f"{prefix}.ghost.bias"),
                ghost_bn=BatchNormParams(
                    self.pull(f"{prefix}.ghost_bn.gamma"),
                    self.pull(f"{prefix}.ghost_bn.beta"),
                    self.pull(f"{prefix}.ghost_bn.mean"),
                    self.pull(f"{prefix}.ghost_bn.var"),
                ),
            )
        except WeightFormatError:
            raise
        except Exception as e:
            raise WeightFormatError(f"{self.path}: bad ghost module {prefix!r}: {e}") from None

    def attention(self, prefix: str) -> AttentionGateParams:
        try:
            return AttentionGateParams(
                wx_weight=self.pull(f"{prefix}.att.wx.weight"),
                wx_bias=self.pull(f"{prefix}.att.wx.bias"),
                wg_weight=self.pull(f"{prefix}.att.wg.weight"),
                wg_bias=self.pull(f"{prefix}.att.wg.bias"),
                psi_weight=self.pull(f"{prefix}.att.psi.weight"),
                psi_bias=self.pull(f"{prefix}.att.psi.bias"),
            )
        except WeightFormatError:
            raise
        except Exception as e:
            raise WeightFormatError(f"{self.path}: bad attention gate {prefix!r}: {e}") from None


def records_to_weights(records: Dict[str, np.ndarray], path="<records>") -> NetworkWeights:
    rs = _RecordSet(records, path)
    stages = 0
    while f"enc{stages + 1}.ghost1.primary.weight" in rs.records:
        stages += 1
    if stages == 0:
        raise WeightFormatError(f"{path}: no encoder stages found")
    encoder = tuple(
        (rs.ghost(f"enc{i}.ghost1"), rs.ghost(f"enc{i}.ghost2"))
        for i in range(1, stages + 1)
    )
    bottleneck = rs.ghost("bottleneck")
    decoder = tuple(
        (rs.attention(f"dec{k}"), rs.ghost(f"dec{k}.ghost1"), rs.ghost(f"dec{k}.ghost2"))
        for k in range(stages, 0, -1)
    )
    final_w = rs.pull("final.weight")
    final_b = rs.pull("final.bias")
    if rs.records:
        extra = ", ".join(sorted(rs.records)[:5])
        raise WeightFormatError(f"{path}: unexpected records: {extra}")
    try:
        return NetworkWeights(encoder, bottleneck, decoder, final_w, final_b)
    except WeightFormatError as e:
        raise WeightFormatError(f"{path}: {e}") from None


def read_weights(path) -> NetworkWeights:
    return records_to_weights(read_records(path), path)
