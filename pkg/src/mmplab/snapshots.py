"""Binary snapshot files for spectral states.

Layout (all little-endian):

    bytes 0..15   magic b"MMPLAB-SNAP-v001"
    uint32        n (modes per axis)
    float64       box side length
    uint32        flags: bit0 solenoidal_u, bit1 solenoidal_b
    9 x n^3       complex64 coefficient blocks in component order
                  u0 u1 u2 w0 w1 w2 b0 b1 b2, C order over the FFT axes
                  (kx, ky, kz)

Coefficients are stored in single precision; snapshots are for restart and
inspection, not for bit-exact archival.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .fields import Grid, StateField

MAGIC = b"MMPLAB-SNAP-v001"
_HEADER = struct.Struct("<IdI")


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, state: StateField) -> None:
    path = Path(path)
    flags = (1 if state.solenoidal_u else 0) | (2 if state.solenoidal_b else 0)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(_HEADER.pack(state.grid.n, state.grid.length, flags))
        for comp in state.components():
            for axis in range(3):
                fh.write(np.ascontiguousarray(
                    comp[axis], dtype=np.complex64).tobytes())


def read_snapshot(path) -> StateField:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise SnapshotFormatError(f"{path} is not a snapshot file (bad magic)")
        n, length, flags = _HEADER.unpack(fh.read(_HEADER.size))
        grid = Grid(n=n, length=length)
        count = n ** 3
        comps = []
        for _ in range(3):
            block = np.empty((3, n, n, n), dtype=complex)
            for axis in range(3):
                raw = fh.read(count * 8)
                if len(raw) != count * 8:
                    raise SnapshotFormatError(f"{path} truncated")
                block[axis] = np.frombuffer(
                    raw, dtype=np.complex64).reshape(n, n, n)
            comps.append(block)
    return StateField(grid, *comps,
                      solenoidal_u=bool(flags & 1), solenoidal_b=bool(flags & 2))
