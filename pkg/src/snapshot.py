"""
Binary snapshots of a solver state.

Layout: magic b'TGS1', then little-endian u32 dim, u32 cells_per_axis, f64 L_box, f64 gamma,
f64 t, the n values and the c1 values (row-major f64), and finally a u64 checksum. The checksum
is BLAKE2b with an 8-byte digest over every byte between the magic and the checksum itself.
"""
import hashlib
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .exceptions import (ChecksumMismatch, DimensionMismatch, FormatVersionMismatch, GridError,
                         SnapshotError)
from .field_core import Field, Grid
from .scheme import State

logger = logging.getLogger(__name__)

MAGIC = b'TGS1'
MAGIC_FAMILY = b'TGS'
HEADER = struct.Struct('<IIddd')
CHECKSUM = struct.Struct('<Q')
VALUE_DTYPE = np.dtype('<f8')


def payload_checksum(payload: bytes) -> int:
    return CHECKSUM.unpack(hashlib.blake2b(payload, digest_size=8).digest())[0]


def encode_snapshot(state: State) -> bytes:
    grid = state.grid
    payload = b''.join([
        HEADER.pack(grid.dim, grid.cells_per_axis, grid.half_width, state.gamma, state.t),
        np.ascontiguousarray(state.n.values, dtype=VALUE_DTYPE).tobytes(),
        np.ascontiguousarray(state.c1.values, dtype=VALUE_DTYPE).tobytes(),
    ])
    return MAGIC + payload + CHECKSUM.pack(payload_checksum(payload))


def decode_snapshot(data: bytes, grid: Optional[Grid] = None) -> State:
    """
    Decode snapshot bytes into a State.

    Args:
        data (bytes): Complete file contents
        grid (Optional[Grid]): Grid the caller expects; its boundary condition is kept

    Raises:
        FormatVersionMismatch: for a snapshot of another format version
        ChecksumMismatch: for truncated or corrupt files
        DimensionMismatch: if the snapshot dimension differs from grid.dim
        SnapshotError: for anything else that is not a readable snapshot
    """
    if data[:len(MAGIC)] != MAGIC:
        if data[:len(MAGIC_FAMILY)] == MAGIC_FAMILY:
            raise FormatVersionMismatch(f"unsupported snapshot version {data[:len(MAGIC)]!r}, expected {MAGIC!r}")
        raise SnapshotError("not a snapshot file (bad magic bytes)")
    if len(data) < len(MAGIC) + HEADER.size + CHECKSUM.size:
        raise ChecksumMismatch(f"snapshot truncated to {len(data)} bytes")

    payload = data[len(MAGIC):-CHECKSUM.size]
    (stored,) = CHECKSUM.unpack(data[-CHECKSUM.size:])
    if payload_checksum(payload) != stored:
        raise ChecksumMismatch("snapshot checksum does not match its payload (corrupt or truncated)")

    dim, cells, L_box, gamma, t = HEADER.unpack_from(payload)
    if grid is not None and grid.dim != dim:
        raise DimensionMismatch(f"snapshot is {dim}D but the configured grid is {grid.dim}D")
    count = cells ** dim
    if len(payload) != HEADER.size + 2 * count * VALUE_DTYPE.itemsize:
        raise SnapshotError(f"payload length {len(payload)} does not match {cells}^{dim} cells")
    if grid is not None and (grid.cells_per_axis != cells or grid.half_width != L_box):
        raise SnapshotError(
            f"snapshot grid ({cells} cells, L_box {L_box}) differs from the configured grid "
            f"({grid.cells_per_axis} cells, L_box {grid.half_width})"
        )
    try:
        snapshot_grid = grid if grid is not None else Grid(dim, L_box, cells)
    except GridError as err:
        raise SnapshotError(f"snapshot header describes an invalid grid: {err}") from err

    n = np.frombuffer(payload, dtype=VALUE_DTYPE, count=count, offset=HEADER.size)
    c1 = np.frombuffer(payload, dtype=VALUE_DTYPE, count=count, offset=HEADER.size + count * VALUE_DTYPE.itemsize)
    return State(Field(snapshot_grid, n), Field(snapshot_grid, c1), t, gamma)


def write_snapshot(state: State, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_snapshot(state))
    logger.debug("snapshot written: %s (t=%.6g)", path, state.t)
    return path


def read_snapshot(path: Union[str, Path], grid: Optional[Grid] = None) -> State:
    """Read a snapshot file; no partial State is ever returned."""
    return decode_snapshot(Path(path).read_bytes(), grid)
