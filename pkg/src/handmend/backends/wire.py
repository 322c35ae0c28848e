"""Frame protocol for out-of-process inference engines.

Every frame is a 4-byte big-endian unsigned length followed by that many
payload bytes. A message is one UTF-8 JSON header frame followed by the
binary blob frames it announces in its ``blobs`` field (PNG rasters, in
request order). The same encoding is used in both directions.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO, Sequence

MAX_FRAME_BYTES = 64 * 1024 * 1024
_LENGTH = struct.Struct(">I")


class WireError(RuntimeError):
    """Malformed or truncated traffic on an engine connection."""


def write_frame(stream: BinaryIO, payload: bytes) -> None:
    if len(payload) > MAX_FRAME_BYTES:
        raise WireError(f"frame of {len(payload)} bytes exceeds limit {MAX_FRAME_BYTES}")
    stream.write(_LENGTH.pack(len(payload)))
    stream.write(payload)


def _read_exact(stream: BinaryIO, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = stream.read(remaining)
        if not chunk:
            raise WireError(f"connection closed mid-frame ({n - remaining}/{n} bytes read)")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def read_frame(stream: BinaryIO) -> bytes:
    (length,) = _LENGTH.unpack(_read_exact(stream, _LENGTH.size))
    if length > MAX_FRAME_BYTES:
        raise WireError(f"peer announced a {length}-byte frame, limit is {MAX_FRAME_BYTES}")
    return _read_exact(stream, length)


def write_message(stream: BinaryIO, header: dict, blobs: Sequence[bytes] = ()) -> None:
    """Send a JSON header frame plus its blob frames and flush."""

    payload = dict(header)
    payload["blobs"] = len(blobs)
    write_frame(stream, json.dumps(payload, sort_keys=True).encode("utf-8"))
    for blob in blobs:
        write_frame(stream, blob)
    stream.flush()


def read_message(stream: BinaryIO) -> tuple[dict, list[bytes]]:
    """Read one header frame and every blob frame it announces."""

    try:
        header = json.loads(read_frame(stream).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise WireError(f"header frame is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise WireError(f"header must be a JSON object, got {type(header).__name__}")
    count = header.get("blobs", 0)
    if not isinstance(count, int) or count < 0:
        raise WireError(f"invalid blob count {count!r}")
    blobs = [read_frame(stream) for _ in range(count)]
    return header, blobs
