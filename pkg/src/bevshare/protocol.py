"""Sparse message packaging, byte-exact wire codec, bandwidth
accounting, and warping of received entries into the ego grid.

Wire layout (little-endian throughout)::

    magic "F2CM" | version u8 | sender u8 | round u8 | kind u8
    | channels u16 | entry count u32 | pose x,y,yaw f64*3
    | n entries of [row u16 | col u16 | channels * f32]

Header is exactly 38 bytes; each entry adds 4 + 4*channels bytes.
"""

from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass

import numpy as np

from .grid import FeatureMap, GridSpec, Pose2D
from .selection import SelectionMatrix

MAGIC = b"F2CM"
VERSION = 1
HEADER = struct.Struct("<4sBBBBHIddd")
HEADER_BYTES = HEADER.size  # 38


class MessageKind(enum.Enum):
    """What the payload features were selected by."""

    CONFIDENCE = 0x4D  # confidence-masked features
    PRIOR = 0x47  # box-prior features


def _entry_dtype(channels: int) -> np.dtype:
    return np.dtype(
        [("row", "<u2"), ("col", "<u2"), ("feat", "<f4", (channels,))]
    )


class DecodeError(ValueError):
    """Base class for malformed wire frames."""


class BadMagicError(DecodeError):
    pass


class BadVersionError(DecodeError):
    pass


class FrameLengthError(DecodeError):
    """Frame shorter or longer than the layout demands."""


class BadKindError(DecodeError):
    pass


class CellRangeError(DecodeError):
    """Entry index outside the receiver's grid."""


@dataclass(frozen=True)
class SparseFeatureMessage:
    """Selected feature cells plus the sender's declared pose.

    Entries are (row, col) sorted and unique; every feature vector has
    at least one nonzero float32 component.  Instances are immutable:
    fusion and warping never write back into a received message.
    """

    sender: int
    round_k: int
    kind: MessageKind
    channels: int
    pose: Pose2D
    rows: np.ndarray
    cols: np.ndarray
    features: np.ndarray
    spec: GridSpec

    def __post_init__(self) -> None:
        if not 0 <= self.sender <= 0xFF:
            raise ValueError("sender id must fit in one byte")
        if not 0 <= self.round_k <= 0xFF:
            raise ValueError("round must fit in one byte")
        if not 1 <= self.channels <= 0xFFFF:
            raise ValueError("channel count must fit in two bytes")
        rows = np.ascontiguousarray(self.rows, dtype=np.int64)
        cols = np.ascontiguousarray(self.cols, dtype=np.int64)
        feats = np.ascontiguousarray(self.features, dtype=np.float32)
        n = rows.shape[0]
        if cols.shape[0] != n or feats.shape != (n, self.channels):
            raise ValueError("entry arrays disagree on entry count or width")
        if n > 0:
            if rows.min() < 0 or rows.max() >= self.spec.rows:
                raise ValueError("entry row outside grid")
            if cols.min() < 0 or cols.max() >= self.spec.cols:
                raise ValueError("entry col outside grid")
            flat = rows * self.spec.cols + cols
            if np.unique(flat).size != n:
                raise ValueError("duplicate entry cell")
            if np.any(~np.any(feats != 0.0, axis=1)):
                raise ValueError("all-zero feature vector in entry")
        for arr in (rows, cols, feats):
            arr.flags.writeable = False
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "features", feats)

    @property
    def n_entries(self) -> int:
        return self.rows.shape[0]


def sparsify(
    features: FeatureMap,
    sel: SelectionMatrix,
    sender: int,
    round_k: int,
    kind: MessageKind,
    pose: Pose2D,
) -> SparseFeatureMessage:
    """Package selected cells as wire entries.

    Feature vectors are quantized to float32 here, at the sender, so
    codec round-trips are bit-exact.  Selected cells whose vector
    quantizes to all zeros are left out.
    """
    spec = features.spec
    if sel.binary.shape != (spec.rows, spec.cols):
        raise ValueError("selection grid does not match feature grid")
    rows, cols = np.nonzero(sel.binary)  # row-major: already (row, col) sorted
    feats = features.values[:, rows, cols].T.astype(np.float32)
    nonzero = np.any(feats != 0.0, axis=1)
    return SparseFeatureMessage(
        sender=sender,
        round_k=round_k,
        kind=kind,
        channels=features.channels,
        pose=pose,
        rows=rows[nonzero],
        cols=cols[nonzero],
        features=feats[nonzero],
        spec=spec,
    )


def encode_message(msg: SparseFeatureMessage) -> bytes:
    header = HEADER.pack(
        MAGIC,
        VERSION,
        msg.sender,
        msg.round_k,
        msg.kind.value,
        msg.channels,
        msg.n_entries,
        msg.pose.x,
        msg.pose.y,
        msg.pose.yaw,
    )
    entries = np.empty(msg.n_entries, dtype=_entry_dtype(msg.channels))
    entries["row"] = msg.rows
    entries["col"] = msg.cols
    entries["feat"] = msg.features
    return header + entries.tobytes()


def decode_message(frame: bytes, spec: GridSpec) -> SparseFeatureMessage:
    """Parse a wire frame destined for a receiver using ``spec``."""
    if len(frame) < HEADER_BYTES:
        raise FrameLengthError("frame shorter than header")
    fields = HEADER.unpack(frame[:HEADER_BYTES])
    magic, version, sender, round_k, kind_byte, channels, n = fields[:7]
    pose_vals = fields[7:]
    if magic != MAGIC:
        raise BadMagicError("bad magic %r" % (magic,))
    if version != VERSION:
        raise BadVersionError("unsupported version %d" % version)
    try:
        kind = MessageKind(kind_byte)
    except ValueError:
        raise BadKindError("unknown payload kind byte 0x%02X" % kind_byte) from None
    if channels < 1:
        raise DecodeError("channel count must be positive")
    expect = HEADER_BYTES + n * (4 + 4 * channels)
    if len(frame) != expect:
        raise FrameLengthError(
            "frame is %d bytes, layout demands %d" % (len(frame), expect)
        )
    entries = np.frombuffer(frame, dtype=_entry_dtype(channels), count=n,
                            offset=HEADER_BYTES)
    rows = entries["row"].astype(np.int64)
    cols = entries["col"].astype(np.int64)
    if n > 0 and (
        rows.max() >= spec.rows or cols.max() >= spec.cols
    ):
        raise CellRangeError("entry index outside receiver grid")
    return SparseFeatureMessage(
        sender=sender,
        round_k=round_k,
        kind=kind,
        channels=channels,
        pose=Pose2D(*pose_vals),
        rows=rows,
        cols=cols,
        features=entries["feat"].copy(),
        spec=spec,
    )


def message_bytes(msg: SparseFeatureMessage) -> int:
    """Exact frame length without encoding."""
    return HEADER_BYTES + msg.n_entries * (4 + 4 * msg.channels)


def comm_volume_log2(total_bytes: int) -> float:
    """Bandwidth figure on a base-2 log scale; zero traffic reports 0."""
    if total_bytes < 0:
        raise ValueError("byte count must be non-negative")
    if total_bytes == 0:
        return 0.0
    return math.log2(total_bytes)


@dataclass(frozen=True)
class WarpResult:
    """Received entries re-binned into the ego grid."""

    rows: np.ndarray
    cols: np.ndarray
    features: np.ndarray
    dropped: int
    spec: GridSpec

    def __post_init__(self) -> None:
        for name in ("rows", "cols", "features"):
            arr = np.ascontiguousarray(getattr(self, name))
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_entries(self) -> int:
        return self.rows.shape[0]


def warp_to_ego(
    msg: SparseFeatureMessage, ego_pose: Pose2D, spec: GridSpec
) -> WarpResult:
    """Map entry cell centers through ego_pose^-1 o sender pose and
    re-bin to the nearest ego cell.

    Entries landing outside the grid are dropped (counted); when two
    entries land in one cell the larger-L2-norm vector wins, first
    arrival on ties.
    """
    relative = ego_pose.inverse().compose(msg.pose)
    src_centers = np.stack(
        [
            msg.spec.x_min + (msg.rows + 0.5) * msg.spec.cell_x,
            msg.spec.y_min + (msg.cols + 0.5) * msg.spec.cell_y,
        ],
        axis=1,
    )
    ego_xy = relative.transform(src_centers)
    frac = spec.frac_index(ego_xy)
    rr = np.floor(frac[:, 0]).astype(np.int64)
    cc = np.floor(frac[:, 1]).astype(np.int64)
    ok = (rr >= 0) & (rr < spec.rows) & (cc >= 0) & (cc < spec.cols)
    dropped = int((~ok).sum())

    rr, cc = rr[ok], cc[ok]
    feats = msg.features[ok]
    norms = np.linalg.norm(feats.astype(np.float64), axis=1)
    best: dict[tuple[int, int], int] = {}
    for i in range(rr.shape[0]):
        key = (int(rr[i]), int(cc[i]))
        j = best.get(key)
        if j is None or norms[i] > norms[j]:
            best[key] = i
    order = sorted(best)
    idx = np.array([best[key] for key in order], dtype=np.int64)
    if idx.size == 0:
        return WarpResult(
            rows=np.zeros(0, dtype=np.int64),
            cols=np.zeros(0, dtype=np.int64),
            features=np.zeros((0, msg.channels), dtype=np.float32),
            dropped=dropped,
            spec=spec,
        )
    return WarpResult(
        rows=rr[idx], cols=cc[idx], features=feats[idx], dropped=dropped,
        spec=spec,
    )
