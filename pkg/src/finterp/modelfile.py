"""Bit-exact model serialization.

Layout (all integers little-endian, documented byte-for-byte in
docs/model-format.md):

    bytes 0..3    magic "NLIM"
    bytes 4..7    format version, u32
    bytes 8..11   header length H, u32
    bytes 12..    header: H bytes of UTF-8 JSON (arch kind + dims, tag and
                  intent vocab tables, tensor index of name/shape/offset)
    ...           payload: float32 values, tensors concatenated in
                  lexicographic name order at the indexed offsets
    last 4        CRC-32 over everything between byte 8 and the CRC itself
                  (length prefix + header + payload)

Training runs in 64-bit; storage narrows to 32-bit, which halves the file and
leaves inference argmaxes unchanged on the probe set. Loading widens back to
64-bit, so save-load-save is byte-identical.
"""

from __future__ import annotations

import json
import struct
import zlib

import numpy as np

from .encoding import INTENT_NAMES, TAG_NAMES
from .models import ArchSpec, param_specs
from .nn import ParamStore

MAGIC = b"NLIM"
VERSION = 1


class BadMagic(ValueError):
    pass


class BadVersion(ValueError):
    pass


class ChecksumMismatch(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


class IncompleteModel(ValueError):
    pass


class IoFailure(OSError):
    pass


def _check_complete(params: ParamStore, arch: ArchSpec) -> list:
    specs = param_specs(arch)
    want = {s.name: s.shape for s in specs}
    have = {name: tuple(t.shape) for name, t in params.items()}
    if have != want:
        missing = sorted(set(want) - set(have))
        extra = sorted(set(have) - set(want))
        bad_shape = sorted(
            n for n in set(want) & set(have) if want[n] != have[n]
        )
        raise IncompleteModel(
            f"store does not match {arch.kind}: missing={missing} "
            f"extra={extra} wrong_shape={bad_shape}"
        )
    return sorted(want)


def dump_model(params: ParamStore, arch: ArchSpec) -> bytes:
    """Serialize to the documented byte layout; deterministic per input."""
    names = _check_complete(params, arch)
    tensors = []
    chunks = []
    offset = 0
    for name in names:
        data = np.ascontiguousarray(params[name], dtype="<f4").tobytes()
        tensors.append(
            {"name": name, "shape": list(params[name].shape), "offset": offset}
        )
        chunks.append(data)
        offset += len(data)
    header = json.dumps(
        {
            "kind": arch.kind,
            "hidden": arch.hidden,
            "char_dim": arch.char_dim,
            "tag_dim": arch.tag_dim,
            "intent_dim": arch.intent_dim,
            "tags": list(TAG_NAMES),
            "intents": list(INTENT_NAMES),
            "tensors": tensors,
        },
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    body = struct.pack("<I", len(header)) + header + b"".join(chunks)
    return MAGIC + struct.pack("<I", VERSION) + body + struct.pack("<I", zlib.crc32(body))


def save_model(params: ParamStore, arch: ArchSpec, path) -> int:
    data = dump_model(params, arch)
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return len(data)


def load_model_bytes(data: bytes) -> tuple[ParamStore, ArchSpec]:
    if len(data) < 16:
        raise ChecksumMismatch(f"file too short ({len(data)} bytes)")
    if data[:4] != MAGIC:
        raise BadMagic(f"bad magic {data[:4]!r}")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise BadVersion(f"version {version}, expected {VERSION}")
    body = data[8:-4]  # length prefix + header + payload
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(body) != stored_crc:
        raise ChecksumMismatch("CRC-32 check failed")

    (header_len,) = struct.unpack_from("<I", data, 8)
    if 12 + header_len > len(data) - 4:
        raise ChecksumMismatch("header length exceeds file")
    header = json.loads(data[12 : 12 + header_len].decode("utf-8"))
    payload = data[12 + header_len : -4]

    if header["tags"] != list(TAG_NAMES) or header["intents"] != list(INTENT_NAMES):
        raise VocabMismatch(
            f"file vocab ({len(header['tags'])} tags, {len(header['intents'])} "
            f"intents) differs from this build"
        )
    arch = ArchSpec(
        kind=header["kind"],
        hidden=header["hidden"],
        char_dim=header["char_dim"],
        tag_dim=header["tag_dim"],
        intent_dim=header["intent_dim"],
    )

    params: ParamStore = {}
    prev_end = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        if start < prev_end:
            raise ChecksumMismatch(f"tensor {entry['name']}: overlapping offset")
        end = start + 4 * count
        if end > len(payload):
            raise ChecksumMismatch(f"tensor {entry['name']}: payload overrun")
        flat = np.frombuffer(payload, dtype="<f4", count=count, offset=start)
        params[entry["name"]] = flat.reshape(shape).astype(np.float64)
        prev_end = end

    _check_complete(params, arch)
    return params, arch


def load_model(path) -> tuple[ParamStore, ArchSpec]:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return load_model_bytes(data)


def model_fingerprint(data: bytes) -> str:
    """Short stable identifier for a serialized model.

    Hashes the file minus its trailing CRC word: a CRC over a message that
    ends with its own CRC collapses to a constant residue, which would make
    every model fingerprint identical.
    """
    return f"{zlib.crc32(data[:-4]):08x}"
