"""Binary checkpoint format.

Layout: magic ``WIAE`` (4 bytes), format version as u32 little-endian, header
length as u64 little-endian, a UTF-8 JSON header (config, normalization stats,
tensor name/shape/offset table, metadata), then the raw float32 little-endian
tensor blobs, contiguous and in header order.  Offsets are relative to the
start of the blob section.  Round trips are bit-exact on parameters.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .nets import NetConfig, Networks, build_networks
from .series import NormStats

MAGIC = b"WIAE"
VERSION = 1


class CheckpointError(ValueError):
    """Raised for malformed, truncated, or unrecognized checkpoint files."""


@dataclass
class Checkpoint:
    """Trained parameters plus everything needed to run them on raw data."""

    config: NetConfig
    params: dict[str, np.ndarray]
    norm_stats: NormStats
    metadata: dict = field(default_factory=dict)

    def build(self) -> Networks:
        nets = build_networks(self.config, seed=0)
        nets.load_state_arrays(self.params)
        return nets


def save_checkpoint(ckpt: Checkpoint, sink) -> None:
    """Write to a binary file object or path."""
    if isinstance(sink, (str, Path)):
        with open(sink, "wb") as fh:
            save_checkpoint(ckpt, fh)
        return
    tensors = []
    offset = 0
    blobs = []
    for name, arr in ckpt.params.items():
        arr32 = np.ascontiguousarray(arr, dtype=np.float32)
        tensors.append({"name": name, "shape": list(arr32.shape), "offset": offset})
        blob = arr32.tobytes(order="C")
        if np.little_endian is False:
            blob = arr32.byteswap().tobytes(order="C")
        blobs.append(blob)
        offset += len(blob)
    header = {
        "config": ckpt.config.to_dict(),
        "norm_stats": {
            "mean": [float(x) for x in ckpt.norm_stats.mean],
            "scale": [float(x) for x in ckpt.norm_stats.scale],
        },
        "tensors": tensors,
        "metadata": ckpt.metadata,
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    sink.write(MAGIC)
    sink.write(struct.pack("<I", VERSION))
    sink.write(struct.pack("<Q", len(header_bytes)))
    sink.write(header_bytes)
    for blob in blobs:
        sink.write(blob)


def load_checkpoint(source) -> Checkpoint:
    """Read from a binary file object, path, or bytes."""
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return load_checkpoint(fh)
    if isinstance(source, (bytes, bytearray)):
        return load_checkpoint(io.BytesIO(source))

    magic = source.read(4)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    raw = source.read(4)
    if len(raw) < 4:
        raise CheckpointError("truncated file: missing version")
    (version,) = struct.unpack("<I", raw)
    if version != VERSION:
        raise CheckpointError(f"unknown format version {version}")
    raw = source.read(8)
    if len(raw) < 8:
        raise CheckpointError("truncated file: missing header length")
    (header_len,) = struct.unpack("<Q", raw)
    header_bytes = source.read(header_len)
    if len(header_bytes) < header_len:
        raise CheckpointError("truncated file: header shorter than declared")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}") from exc

    blob = source.read()
    params: dict[str, np.ndarray] = {}
    expected_end = 0
    for entry in header["tensors"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        start = int(entry["offset"])
        end = start + 4 * count
        if end > len(blob):
            raise CheckpointError(
                f"tensor {entry['name']!r} declared beyond end of file "
                f"(needs {end} bytes, blob has {len(blob)})"
            )
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=start).reshape(shape)
        if not np.isfinite(arr).all():
            raise CheckpointError(f"tensor {entry['name']!r} contains non-finite values")
        params[entry["name"]] = np.ascontiguousarray(arr, dtype=np.float32)
        expected_end = max(expected_end, end)
    if expected_end != len(blob):
        raise CheckpointError(
            f"blob length {len(blob)} does not match header total {expected_end}"
        )

    config = NetConfig.from_dict(header["config"])
    stats = NormStats(
        mean=np.array(header["norm_stats"]["mean"], dtype=np.float64),
        scale=np.array(header["norm_stats"]["scale"], dtype=np.float64),
    )
    ckpt = Checkpoint(
        config=config, params=params, norm_stats=stats, metadata=header.get("metadata", {})
    )
    ckpt.build()  # shape-check against the architecture before handing it out
    return ckpt
