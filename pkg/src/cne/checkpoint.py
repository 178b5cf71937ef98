"""Binary checkpoint format.

Layout (little-endian)::

    b"CNE1"  u32 version  u32 manifest_len  manifest(JSON, UTF-8)
    tensor data (row-major float32, in manifest order)
    u32 CRC32 of everything between the version field and the CRC

The manifest lists ``{"name", "shape", "offset"}`` per tensor (offset is
relative to the start of the tensor data) and a ``meta`` block with encoder
specs, routes, margin and the Adam step counter.
"""
import json
import os
import struct
import tempfile
import zlib

import numpy as np

from .encoders import EncoderSpec
from .trainer import ModelState

MAGIC = b"CNE1"
VERSION = 1
_DTYPE = np.dtype("<f4")


class CheckpointError(Exception):
    pass


class CheckpointFormatError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


class CheckpointChecksumError(CheckpointError):
    pass


def _tensors(state):
    out = [(f"param/{k}", v) for k, v in sorted(state.params.items())]
    out += [(f"adam_m/{k}", v) for k, v in sorted(state.m.items())]
    out += [(f"adam_v/{k}", v) for k, v in sorted(state.v.items())]
    return out


def dumps(state: ModelState, provenance=None) -> bytes:
    entries, blobs = [], []
    offset = 0
    for name, arr in _tensors(state):
        data = np.ascontiguousarray(arr, dtype=_DTYPE).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(data)
        offset += len(data)
    meta = {
        "specs": {nt: s.to_dict() for nt, s in sorted(state.specs.items())},
        "routes": [[et, side, nt, prefix] for (et, side, nt), prefix in sorted(state.routes.items())],
        "margin": state.margin,
        "step": state.step,
    }
    if provenance:
        meta["provenance"] = provenance  # informational; ignored on load
    manifest = json.dumps({"meta": meta, "tensors": entries}, sort_keys=True, separators=(",", ":")).encode()
    body = struct.pack("<I", len(manifest)) + manifest + b"".join(blobs)
    return MAGIC + struct.pack("<I", VERSION) + body + struct.pack("<I", zlib.crc32(body))


def loads(buf: bytes) -> ModelState:
    if len(buf) < 8:
        raise CheckpointTruncatedError("file shorter than the header")
    if buf[:4] != MAGIC:
        raise CheckpointFormatError(f"bad magic {buf[:4]!r}")
    (version,) = struct.unpack_from("<I", buf, 4)
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint format version {version}, this build reads {VERSION}")
    if len(buf) < 16:
        raise CheckpointTruncatedError("file ends inside the manifest header")
    (mlen,) = struct.unpack_from("<I", buf, 8)
    if len(buf) < 12 + mlen + 4:
        raise CheckpointTruncatedError("file ends inside the manifest")
    body = buf[8:-4]
    (crc,) = struct.unpack_from("<I", buf, len(buf) - 4)
    try:
        manifest = json.loads(buf[12:12 + mlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        manifest = None
    if manifest is not None:
        data_len = sum(int(np.prod(t["shape"], dtype=np.int64)) * _DTYPE.itemsize for t in manifest["tensors"])
        if len(buf) < 12 + mlen + data_len + 4:
            raise CheckpointTruncatedError(f"expected {data_len} bytes of tensor data")
    if zlib.crc32(body) != crc:
        raise CheckpointChecksumError("CRC32 mismatch")
    if manifest is None or len(buf) != 12 + mlen + data_len + 4:
        raise CheckpointFormatError("malformed manifest")

    data = buf[12 + mlen:-4]
    params, m, v = {}, {}, {}
    groups = {"param": params, "adam_m": m, "adam_v": v}
    for t in manifest["tensors"]:
        group, _, name = t["name"].partition("/")
        shape = tuple(t["shape"])
        count = int(np.prod(shape, dtype=np.int64))
        arr = np.frombuffer(data, dtype=_DTYPE, count=count, offset=t["offset"]).reshape(shape)
        groups[group][name] = arr.astype(np.float32)
    meta = manifest["meta"]
    specs = {nt: EncoderSpec.from_dict(s) for nt, s in meta["specs"].items()}
    routes = {(et, int(side), nt): prefix for et, side, nt, prefix in meta["routes"]}
    return ModelState(params, specs, routes, meta["margin"], meta["step"], m, v)


def save_checkpoint(state: ModelState, path, provenance=None):
    """Write atomically (temp file in the target directory, then rename)."""
    blob = dumps(state, provenance)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".ckpt-", dir=directory)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path) -> ModelState:
    with open(path, "rb") as fh:
        return loads(fh.read())
