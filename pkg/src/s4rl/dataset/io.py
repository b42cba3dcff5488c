"""S4RLDS1 binary dataset files.

Layout::

    magic      8 bytes   b"S4RLDS1\\0"
    hlen       u32 LE    length of the JSON header in bytes
    header     hlen      UTF-8 JSON (env spec, split, seeds, count, body sha256, ...)
    hcrc       u32 LE    crc32 of the header bytes
    body       N fixed-width little-endian records

Each record is ``state f8[d] | action f8[ad] | reward f8 | next_state f8[d] | done u1``.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path

import numpy as np

from ..envs import EnvSpec
from ..errors import ChecksumError, DatasetFormatError
from .core import OfflineDataset

MAGIC = b"S4RLDS1\x00"
VERSION = 1
_PREFIX = len(MAGIC) + 4


def record_dtype(spec: EnvSpec) -> np.dtype:
    d, ad = spec.state_dim, spec.action_dim
    return np.dtype([("state", "<f8", (d,)), ("action", "<f8", (ad,)), ("reward", "<f8"),
                     ("next_state", "<f8", (d,)), ("done", "u1")])


def _body(ds: OfflineDataset) -> bytes:
    rec = np.empty(len(ds), dtype=record_dtype(ds.spec))
    rec["state"], rec["action"], rec["reward"] = ds.states, ds.actions, ds.rewards
    rec["next_state"], rec["done"] = ds.next_states, ds.dones.astype(np.uint8)
    return rec.tobytes()


def encode(ds: OfflineDataset) -> bytes:
    body = _body(ds)
    header = {
        "format": "S4RLDS1", "version": VERSION, "env": ds.spec.name, "spec": ds.spec.to_dict(),
        "split": ds.split, "behavior": ds.behavior, "seed": int(ds.seed), "count": len(ds),
        "record_size": record_dtype(ds.spec).itemsize,
        "episode_starts": [int(x) for x in ds.episode_starts],
        "provenance": ds.provenance, "body_sha256": hashlib.sha256(body).hexdigest(),
    }
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(hb)) + hb + struct.pack("<I", zlib.crc32(hb)) + body


def decode(raw: bytes, source: str = "<bytes>") -> OfflineDataset:
    if len(raw) < _PREFIX or raw[:len(MAGIC)] != MAGIC:
        if raw[:6] == MAGIC[:6]:
            raise DatasetFormatError(f"{source}: unsupported dataset version {raw[:8]!r}")
        raise DatasetFormatError(f"{source}: not an S4RLDS1 file")
    (hlen,) = struct.unpack_from("<I", raw, len(MAGIC))
    if len(raw) < _PREFIX + hlen + 4:
        raise DatasetFormatError(f"{source}: truncated header")
    hb = raw[_PREFIX:_PREFIX + hlen]
    (crc,) = struct.unpack_from("<I", raw, _PREFIX + hlen)
    if zlib.crc32(hb) != crc:
        raise ChecksumError(f"{source}: header checksum mismatch")
    header = json.loads(hb.decode("utf-8"))
    if header.get("version") != VERSION:
        raise DatasetFormatError(f"{source}: unsupported dataset version {header.get('version')}")
    spec = EnvSpec.from_dict(header["spec"])
    dt = record_dtype(spec)
    body = raw[_PREFIX + hlen + 4:]
    n = header["count"]
    if len(body) != n * dt.itemsize:
        raise DatasetFormatError(f"{source}: body is {len(body)} bytes, expected {n * dt.itemsize} "
                                 f"(truncated or padded)")
    if hashlib.sha256(body).hexdigest() != header["body_sha256"]:
        raise ChecksumError(f"{source}: body checksum mismatch")
    rec = np.frombuffer(body, dtype=dt, count=n)
    return OfflineDataset(rec["state"].copy(), rec["action"].copy(), rec["reward"].copy(),
                          rec["next_state"].copy(), rec["done"].astype(np.float64), spec,
                          header["split"], header["behavior"], header["seed"],
                          np.asarray(header["episode_starts"], dtype=np.int64), header["provenance"])


def save(ds: OfflineDataset, path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(ds))
    tmp.replace(path)
    return path


def load(path) -> OfflineDataset:
    return decode(Path(path).read_bytes(), str(path))


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        pre = fh.read(_PREFIX)
        if len(pre) < _PREFIX or pre[:len(MAGIC)] != MAGIC:
            raise DatasetFormatError(f"{path}: not an S4RLDS1 file")
        (hlen,) = struct.unpack_from("<I", pre, len(MAGIC))
        hb = fh.read(hlen)
        crc = fh.read(4)
    if len(hb) != hlen or len(crc) != 4:
        raise DatasetFormatError(f"{path}: truncated header")
    if zlib.crc32(hb) != struct.unpack("<I", crc)[0]:
        raise ChecksumError(f"{path}: header checksum mismatch")
    return json.loads(hb.decode("utf-8"))
