"""SEEDCKPT model files.

Layout (little-endian)::

    b"SEEDCKPT" | u32 version=1 | u32 D | u32 E | u32 n_blocks | u32 T
    | f64 beta_start | f64 beta_end | u8 standardize
    | f32 mean[D] | f32 scale[D]
    | f32 tensors in ModelParams.named_parameters() order

Tensors are written row-major; linear weights have shape ``(fan_in, fan_out)``.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import DataError
from .network import ModelParams, init_params
from .schedule import NoiseSchedule, make_scaled_linear_schedule

MAGIC = b"SEEDCKPT"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIIddB")


def save_checkpoint(path, m: ModelParams, s: NoiseSchedule) -> None:
    parts = [
        _HEADER.pack(MAGIC, VERSION, m.dim, m.temb_dim, m.n_blocks, s.T,
                     s.beta_start, s.beta_end, int(m.standardize)),
        np.asarray(m.mean, dtype="<f4").tobytes(),
        np.asarray(m.scale, dtype="<f4").tobytes(),
    ]
    parts += [np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in m.named_parameters()]
    Path(path).write_bytes(b"".join(parts))


def load_checkpoint(path) -> tuple[ModelParams, NoiseSchedule]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise DataError(f"{path}: truncated header: expected {_HEADER.size} bytes, got {len(data)}")
    magic, version, D, E, n_blocks, T, b0, b1, flag = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != VERSION:
        raise DataError(f"{path}: unsupported version {version} at offset 8")
    if D < 1 or E < 2 or E % 2 or n_blocks < 1 or T < 1 or flag > 1:
        raise DataError(f"{path}: invalid header values D={D} E={E} n_blocks={n_blocks} T={T}")
    m = init_params(D, E, n_blocks, seed=0)
    tensors = [m.mean, m.scale] + [a for _, a in m.named_parameters()]
    expected = _HEADER.size + 4 * sum(a.size for a in tensors)
    if len(data) != expected:
        raise DataError(f"{path}: payload size mismatch: expected {expected} bytes, got {len(data)}")
    pos = _HEADER.size
    for a in tensors:
        a[...] = np.frombuffer(data, dtype="<f4", count=a.size, offset=pos).reshape(a.shape)
        pos += 4 * a.size
    if np.any(m.scale <= 0) or not all(np.all(np.isfinite(a)) for a in tensors):
        raise DataError(f"{path}: non-finite parameters or non-positive scale")
    m.standardize = bool(flag)
    return m, make_scaled_linear_schedule(T, b0, b1)
