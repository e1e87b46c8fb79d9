"""SAFZ little-endian binary containers.

Version 1 holds one feature tensor::

    b"SAFZ" | u16 version=1 | u32 4 | u32 T | u32 M | f32[4*T*M] row-major

Version 2 is a section-tagged bundle of named float32 arrays, used for
fusion parameter sets::

    b"SAFZ" | u16 version=2 | u32 n_sections
    per section: u16 name_len | utf-8 name | u32 ndim | u32[ndim] dims | f32 payload
"""

from __future__ import annotations

import csv
import io
import os
import struct

import numpy as np

from .errors import ContainerError
from .features import FeatureTensor

MAGIC = b"SAFZ"
TENSOR_VERSION = 1
BUNDLE_VERSION = 2
_F32 = np.dtype("<f4")


def encode_feature_tensor(features: FeatureTensor) -> bytes:
    data = np.ascontiguousarray(features.data, dtype=_F32)
    header = MAGIC + struct.pack("<H3I", TENSOR_VERSION, *data.shape)
    return header + data.tobytes(order="C")


def decode_feature_tensor(blob: bytes) -> FeatureTensor:
    version = _check_header(blob)
    if version != TENSOR_VERSION:
        raise ContainerError(f"expected tensor container version {TENSOR_VERSION}, got {version}")
    if len(blob) < 18:
        raise ContainerError("truncated header")
    dims = struct.unpack_from("<3I", blob, 6)
    if dims[0] != 4:
        raise ContainerError(f"channel dim must be 4, got {dims[0]}")
    payload = blob[18:]
    expected = 4 * dims[0] * dims[1] * dims[2]
    if len(payload) != expected:
        raise ContainerError(f"payload is {len(payload)} bytes, expected {expected}")
    return FeatureTensor(np.frombuffer(payload, dtype=_F32).reshape(dims).astype(np.float64))


def write_feature_tensor(path, features: FeatureTensor) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_feature_tensor(features))


def read_feature_tensor(path) -> FeatureTensor:
    with open(path, "rb") as fh:
        return decode_feature_tensor(fh.read())


def feature_tensor_csv(features: FeatureTensor) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["channel", "frame", "mel", "value"])
    for (c, t, m), v in np.ndenumerate(features.data):
        writer.writerow([c, t, m, repr(float(np.float32(v)))])
    return buf.getvalue()


def encode_bundle(arrays: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<HI", BUNDLE_VERSION, len(arrays))]
    for name, arr in arrays.items():
        arr = np.array(arr, dtype=_F32, order="C")  # keeps 0-d shapes
        raw_name = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw_name)) + raw_name)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(arr.tobytes(order="C"))
    return b"".join(parts)


def decode_bundle(blob: bytes) -> dict[str, np.ndarray]:
    version = _check_header(blob)
    if version != BUNDLE_VERSION:
        raise ContainerError(f"expected bundle container version {BUNDLE_VERSION}, got {version}")
    try:
        (count,) = struct.unpack_from("<I", blob, 6)
        pos = 10
        out = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos:pos + name_len].decode("utf-8")
            pos += name_len
            (ndim,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{ndim}I", blob, pos)
            pos += 4 * ndim
            nbytes = 4 * int(np.prod(dims, dtype=np.int64))
            if pos + nbytes > len(blob):
                raise ContainerError(f"section {name!r} truncated")
            out[name] = np.frombuffer(blob[pos:pos + nbytes], dtype=_F32).reshape(dims).copy()
            pos += nbytes
    except struct.error as exc:
        raise ContainerError(f"truncated bundle: {exc}") from exc
    if pos != len(blob):
        raise ContainerError(f"{len(blob) - pos} trailing bytes after last section")
    return out


def write_bundle(path: str | os.PathLike, arrays: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_bundle(arrays))


def read_bundle(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        return decode_bundle(fh.read())


def _check_header(blob: bytes) -> int:
    if len(blob) < 6 or blob[:4] != MAGIC:
        raise ContainerError("missing SAFZ magic bytes")
    return struct.unpack_from("<H", blob, 4)[0]
