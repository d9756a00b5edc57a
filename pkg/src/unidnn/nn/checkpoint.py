"""Binary network checkpoints.

Layout (all integers little-endian)::

    b"UNINET\\0\\0"             8-byte magic
    u32  version               currently 1
    u32  header length n
    n bytes UTF-8 JSON         {"input_shape", "loss", "layers": [...], "params": [[key, shape], ...]}
    float64 little-endian parameter blobs, in header order
"""

from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

from .network import Network

MAGIC = b"UNINET\0\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps(net: Network) -> bytes:
    params = net.get_params()
    header = {
        "input_shape": list(net.input_shape),
        "loss": net.loss,
        "layers": net.specs(),
        "params": [[k, list(v.shape)] for k, v in params.items()],
    }
    head = json.dumps(header, sort_keys=True).encode()
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", VERSION, len(head)))
    buf.write(head)
    for v in params.values():
        buf.write(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return buf.getvalue()


def loads(data: bytes) -> Network:
    if data[:8] != MAGIC:
        raise CheckpointError("not a network checkpoint (bad magic)")
    if len(data) < 16:
        raise CheckpointError("checkpoint is truncated inside its preamble")
    version, n = struct.unpack_from("<II", data, 8)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(data[16:16 + n])
    except ValueError as exc:
        raise CheckpointError(f"unreadable checkpoint header: {exc}") from exc
    net = Network.from_specs(header["layers"], header["input_shape"], header["loss"])
    offset = 16 + n
    values = {}
    for key, shape in header["params"]:
        count = int(np.prod(shape))
        if offset + 8 * count > len(data):
            raise CheckpointError(f"checkpoint is truncated inside parameter {key}")
        values[key] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape).astype(np.float64)
        offset += 8 * count
    if offset != len(data):
        raise CheckpointError(f"checkpoint has {len(data) - offset} trailing bytes")
    net.set_params(values)
    return net


def save(net: Network, path) -> None:
    Path(path).write_bytes(dumps(net))


def load(path) -> Network:
    return loads(Path(path).read_bytes())
