"""
CHFL 바이너리 스냅샷

    "CHFL" | u32 version | u32 dim | u32 N_i x dim | f64 L_i x dim | f64 t | f64 eps
    | n | c | u_0 .. u_{dim-1} (면 배치) | P          (모두 little-endian f64, C 순서)
    | u32 CRC-32(앞의 모든 바이트)
"""
import math
import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import ValidationError

from app.exceptions import ChecksumMismatchError, SnapshotFormatError, UnsupportedVersionError
from app.models.fields import ScalarField, SimState, VectorField
from app.models.params import Domain
from app.services.grid import field_shapes

MAGIC = b"CHFL"
FORMAT_VERSION = 1
_F64 = np.dtype("<f8")


def _header_size(dim: int) -> int:
    return 4 + 8 + 4 * dim + 8 * dim + 16


def encode_snapshot(state: SimState) -> bytes:
    domain = state.domain
    parts = [
        MAGIC,
        struct.pack("<II", FORMAT_VERSION, domain.dim),
        struct.pack(f"<{domain.dim}I", *domain.cells),
        struct.pack(f"<{domain.dim}d", *domain.lengths),
        struct.pack("<dd", state.t, state.eps),
    ]
    arrays = [state.n.values, state.c.values, *state.u.components, state.P.values]
    parts.extend(np.ascontiguousarray(a, dtype=_F64).tobytes() for a in arrays)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_snapshot(data: bytes) -> SimState:
    if len(data) < 4:
        raise ChecksumMismatchError("snapshot truncated before magic bytes")
    if data[:4] != MAGIC:
        raise SnapshotFormatError(f"bad magic bytes {data[:4]!r}")
    if len(data) < 12:
        raise ChecksumMismatchError("snapshot truncated inside header")
    version, dim = struct.unpack_from("<II", data, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"snapshot version {version} is not supported (expected {FORMAT_VERSION})")
    if dim not in (2, 3):
        raise SnapshotFormatError(f"bad dimension {dim}")
    header = _header_size(dim)
    if len(data) < header + 4:
        raise ChecksumMismatchError("snapshot truncated inside header")

    cells = struct.unpack_from(f"<{dim}I", data, 12)
    lengths = struct.unpack_from(f"<{dim}d", data, 12 + 4 * dim)
    t, eps = struct.unpack_from("<dd", data, 12 + 12 * dim)
    try:
        domain = Domain(dim=dim, lengths=lengths, cells=cells)
    except ValidationError as exc:
        raise SnapshotFormatError(f"bad domain in header: {exc}") from exc

    shapes = field_shapes(domain)
    expected = header + 8 * sum(math.prod(s) for s in shapes) + 4
    if len(data) != expected:
        raise ChecksumMismatchError(f"snapshot size {len(data)} != expected {expected} (truncated or padded)")
    (stored,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored:
        raise ChecksumMismatchError("snapshot CRC-32 mismatch")

    arrays = []
    offset = header
    for shape in shapes:
        count = math.prod(shape)
        arrays.append(np.frombuffer(data, dtype=_F64, count=count, offset=offset).reshape(shape))
        offset += 8 * count
    n, c, *velocity, P = arrays
    return SimState(
        n=ScalarField(domain, n),
        c=ScalarField(domain, c),
        u=VectorField(domain, tuple(velocity)),
        P=ScalarField(domain, P),
        t=t,
        eps=eps,
    )


def write_snapshot(state: SimState, path: Union[str, Path]) -> None:
    Path(path).write_bytes(encode_snapshot(state))


def read_snapshot(path: Union[str, Path]) -> SimState:
    return decode_snapshot(Path(path).read_bytes())
