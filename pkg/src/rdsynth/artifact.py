"""Controller artifact: policy table plus successor table, little-endian.

Layout::

    "RCPL" u32 version u32 M u32 P u32 mode_count u32 k  f64[M] y_f
    u16[k][N] policy (stage 1 first)
    "RCNM" u32 version u32 M u32 P u32 mode_count
    u32[N][mode_count] successor ids
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ArtifactError
from .grid import Grid, NextMap
from .synth import Policy

POLICY_MAGIC = b"RCPL"
NEXT_MAGIC = b"RCNM"
VERSION = 1
_POLICY_HEAD = struct.Struct("<4s5I")
_NEXT_HEAD = struct.Struct("<4s4I")
_COPY_ROWS = 1 << 16


@dataclass
class Controller:
    grid: Grid
    y_f: np.ndarray
    policy: Policy
    next_map: NextMap

    @property
    def k(self) -> int:
        return self.policy.k


def write_controller(path, grid: Grid, policy: Policy, next_map: NextMap, y_f) -> None:
    y_f = np.asarray(y_f, dtype="<f8")
    m = next_map.mode_count
    with open(path, "wb") as fh:
        fh.write(_POLICY_HEAD.pack(POLICY_MAGIC, VERSION, grid.M, grid.P, m, policy.k))
        fh.write(y_f.tobytes())
        fh.write(np.ascontiguousarray(policy.best_mode, dtype="<u2").tobytes())
        fh.write(_NEXT_HEAD.pack(NEXT_MAGIC, VERSION, grid.M, grid.P, m))
        for s in range(0, grid.N, _COPY_ROWS):
            fh.write(np.ascontiguousarray(next_map.table[s:s + _COPY_ROWS], dtype="<u4").tobytes())


def read_controller(path, p: int = 1, mmap: bool = False) -> Controller:
    """Read and validate an artifact; ``p`` is recorded on the policy."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as fh:
        head = fh.read(_POLICY_HEAD.size)
        if len(head) < _POLICY_HEAD.size:
            raise ArtifactError("truncated controller header")
        magic, version, M, P, m, k = _POLICY_HEAD.unpack(head)
        if magic != POLICY_MAGIC:
            raise ArtifactError(f"bad magic {magic!r}, expected {POLICY_MAGIC!r}")
        if version != VERSION:
            raise ArtifactError(f"unsupported artifact version {version}")
        if M < 1 or P < 2:
            raise ArtifactError("corrupted grid dimensions in header")
        N = P ** M
        pol_off = _POLICY_HEAD.size + 8 * M
        nm_off = pol_off + 2 * k * N
        expected = nm_off + _NEXT_HEAD.size + 4 * N * m
        if size != expected:
            raise ArtifactError(f"artifact size {size} does not match header (expected {expected})")
        y_f = np.frombuffer(fh.read(8 * M), dtype="<f8").astype(float)
        fh.seek(nm_off)
        magic2, version2, M2, P2, m2 = _NEXT_HEAD.unpack(fh.read(_NEXT_HEAD.size))
        if magic2 != NEXT_MAGIC or version2 != VERSION or (M2, P2, m2) != (M, P, m):
            raise ArtifactError("successor-table section header is corrupted or inconsistent")
    if mmap:
        best = np.memmap(path, dtype="<u2", mode="r", offset=pol_off, shape=(k, N))
        table = np.memmap(path, dtype="<u4", mode="r", offset=nm_off + _NEXT_HEAD.size, shape=(N, m))
    else:
        raw = np.fromfile(path, dtype=np.uint8)
        best = raw[pol_off:nm_off].view("<u2").reshape(k, N).astype(np.uint16)
        table = raw[nm_off + _NEXT_HEAD.size:].view("<u4").reshape(N, m).astype(np.uint32)
    if table.size and int(table.max()) >= N:
        raise ArtifactError("successor table contains out-of-range node ids")
    if best.size and int(best.max()) >= m:
        raise ArtifactError("policy contains out-of-range mode indices")
    return Controller(Grid(M, P), y_f, Policy(best, p), NextMap(table, m, p))


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
