"""Little-endian named-array container ("RPRI", version 1)."""

import os
import struct
import tempfile

import numpy as np

MAGIC = b"RPRI"
VERSION = 1
_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("u1")}
_CODES = {np.dtype("<f4"): 1, np.dtype("u1"): 2}


def encode(arrays):
    """Encodes an ordered mapping of name -> ndarray (float32 or uint8)."""
    out = bytearray(MAGIC)
    out += struct.pack("<II", VERSION, len(arrays))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if arr.dtype == np.float32:
            arr = arr.astype("<f4", copy=False)
        code = _CODES.get(arr.dtype)
        if code is None:
            raise ValueError(f"array {name!r}: unsupported dtype {arr.dtype}")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BB", code, arr.ndim)
        out += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        out += np.ascontiguousarray(arr).tobytes()
    return bytes(out)


def decode(data):
    if data[:4] != MAGIC:
        raise ValueError(f"bad magic {data[:4]!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    pos = 12
    arrays = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<H", data, pos)
        name = data[pos + 2 : pos + 2 + n].decode("utf-8")
        pos += 2 + n
        code, ndim = struct.unpack_from("<BB", data, pos)
        pos += 2
        dims = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        if code not in _DTYPES:
            raise ValueError(f"unknown dtype code {code}")
        if name in arrays:
            raise ValueError(f"duplicate array {name!r}")
        dtype = _DTYPES[code]
        nbytes = int(np.prod(dims, dtype=np.uint64)) * dtype.itemsize
        if pos + nbytes > len(data):
            raise ValueError(f"truncated payload for {name!r}")
        arrays[name] = np.frombuffer(data, dtype, nbytes // dtype.itemsize, pos).reshape(dims)
        pos += nbytes
    if pos != len(data):
        raise ValueError(f"{len(data) - pos} trailing bytes")
    return arrays


def write_container(path, arrays):
    data = encode(arrays)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    with os.fdopen(fd, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def read_container(path):
    with open(path, "rb") as f:
        return decode(f.read())


def image_arrays(features, mask):
    """Per-image layout: features [H,W,C] float32, mask [H,W] uint8."""
    features = np.asarray(features, dtype=np.float32)
    mask = np.asarray(mask, dtype=np.uint8)
    if features.shape[:2] != mask.shape:
        raise ValueError(f"mask {mask.shape} vs features {features.shape[:2]}")
    return {"features": features, "mask": mask}
