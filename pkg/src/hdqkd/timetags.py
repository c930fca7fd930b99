"""Time-to-digital conversion and the tag interchange file format.

The TDC applies a non-paralyzable (non-extending) recovery time per logical
channel; a paralyzable mode is available as an option.  With a demux fanout
of 2, incoming events alternate between two virtual channels, each with its
own recovery clock, halving the effective dead time.

Tag file format (little-endian):
  header, 16 bytes: magic "HTAG" | u16 version=1 | u16 channel count |
                    u32 resolution in ps (=1) | u32 reserved
  records, 9 bytes each: u8 channel | i64 time (ps)
Records are fixed width so files can be streamed or memory-mapped.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, OrderingError, TagFormatError

TAG_MAGIC = b"HTAG"
TAG_VERSION = 1
HEADER_STRUCT = struct.Struct("<4sHHII")
TAG_DTYPE = np.dtype([("channel", "u1"), ("time", "<i8")])


@dataclass(frozen=True)
class TdcConfig:
    recovery_ps: float
    demux_fanout: int = 1
    paralyzable: bool = False

    def __post_init__(self):
        if self.recovery_ps < 0:
            raise InvalidParameterError("recovery must be >= 0")
        if self.demux_fanout not in (1, 2):
            raise InvalidParameterError("demux_fanout must be 1 or 2")


def _deadtime_filter(times: np.ndarray, recovery: float, paralyzable: bool) -> np.ndarray:
    """Boolean keep-mask applying the recovery time to one virtual channel."""
    keep = np.zeros(times.size, dtype=bool)
    if times.size == 0:
        return keep
    if recovery <= 0:
        keep[:] = True
        return keep
    t = times
    if paralyzable:
        # any preceding event (recorded or not) within recovery blocks
        gaps = np.diff(t)
        keep[0] = True
        keep[1:] = gaps >= recovery
        return keep
    last = -np.inf
    for i in range(t.size):
        if t[i] - last >= recovery:
            keep[i] = True
            last = t[i]
    return keep


def record_tags(times, config: TdcConfig):
    """Filter a sorted event-time stream through the TDC.

    Returns (recorded times, drop count).  With fanout 2, events are routed
    to the two virtual channels by input-event parity and merged after each
    channel applies its own recovery clock.
    """
    times = np.asarray(times, dtype=np.int64)
    if times.size and np.any(np.diff(times) < 0):
        raise OrderingError("event times must be sorted")
    if config.demux_fanout == 1:
        keep = _deadtime_filter(times, config.recovery_ps, config.paralyzable)
    else:
        keep = np.zeros(times.size, dtype=bool)
        for parity in (0, 1):
            sel = np.arange(parity, times.size, 2)
            keep[sel] = _deadtime_filter(times[sel], config.recovery_ps,
                                         config.paralyzable)
    recorded = times[keep]
    return recorded, int(times.size - recorded.size)


def make_tags(times, channel: int) -> np.ndarray:
    """Pack a time array into TAG_DTYPE records for one channel."""
    times = np.asarray(times, dtype=np.int64)
    tags = np.empty(times.size, dtype=TAG_DTYPE)
    tags["channel"] = channel
    tags["time"] = times
    return tags


def merge_tags(*streams) -> np.ndarray:
    """Merge per-channel tag arrays into one time-sorted stream."""
    allt = np.concatenate([np.asarray(s, dtype=TAG_DTYPE) for s in streams])
    return allt[np.argsort(allt["time"], kind="stable")]


def _check_monotonic(tags: np.ndarray):
    for ch in np.unique(tags["channel"]):
        t = tags["time"][tags["channel"] == ch]
        bad = np.nonzero(np.diff(t) < 0)[0]
        if bad.size:
            # index of the first offending record in the full stream
            idx = np.nonzero(tags["channel"] == ch)[0][bad[0] + 1]
            raise TagFormatError(
                f"channel {ch} time goes backwards at record {idx}",
                record_index=int(idx))


def write_tag_file(tags, path):
    """Write tags (TAG_DTYPE array) to the binary interchange format."""
    tags = np.asarray(tags, dtype=TAG_DTYPE)
    _check_monotonic(tags)
    n_channels = int(tags["channel"].max()) + 1 if tags.size else 0
    header = HEADER_STRUCT.pack(TAG_MAGIC, TAG_VERSION, n_channels, 1, 0)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(tags.tobytes())


def read_tag_file(path) -> np.ndarray:
    """Read a tag file back; validates header, record size and monotonicity."""
    with open(path, "rb") as fh:
        header = fh.read(HEADER_STRUCT.size)
        if len(header) < HEADER_STRUCT.size:
            raise TagFormatError("truncated header")
        magic, version, _n_channels, resolution, _ = HEADER_STRUCT.unpack(header)
        if magic != TAG_MAGIC:
            raise TagFormatError(f"bad magic {magic!r}")
        if version != TAG_VERSION:
            raise TagFormatError(f"unsupported version {version}")
        if resolution != 1:
            raise TagFormatError(f"unsupported resolution {resolution} ps")
        body = fh.read()
    n_records, remainder = divmod(len(body), TAG_DTYPE.itemsize)
    if remainder:
        raise TagFormatError(
            f"truncated record at index {n_records}", record_index=n_records)
    tags = np.frombuffer(body, dtype=TAG_DTYPE).copy()
    _check_monotonic(tags)
    return tags
