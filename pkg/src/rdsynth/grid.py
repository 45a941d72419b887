"""Lattice abstraction of the state box and the successor table."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import BlowUpError, CapacityError, ConfigError
from .integrate import substep_count
from .model import DiscreteSystem, boundary_term

DEFAULT_NODE_CAP = 1 << 24
NODE_CHUNK = 1 << 15


@dataclass(frozen=True)
class Grid:
    """Lattice ``{0, eta, ..., (P-1) eta}^M`` with ``eta = 1/(P-1)``.

    Node ids are mixed-radix integers with dimension 1 least significant.
    """

    M: int
    P: int

    @property
    def eta(self) -> float:
        return 1.0 / (self.P - 1)

    @property
    def N(self) -> int:
        return self.P ** self.M

    def index_digits(self, ids) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        digits = np.empty(ids.shape + (self.M,), dtype=np.int64)
        rest = ids.copy()
        for d in range(self.M):
            rest, digits[..., d] = np.divmod(rest, self.P)
        return digits

    def coords(self, ids) -> np.ndarray:
        """Lattice coordinates of node ids, shape ``ids.shape + (M,)``."""
        return self.index_digits(ids) / (self.P - 1)

    def encode(self, digits) -> np.ndarray:
        digits = np.asarray(digits, dtype=np.int64)
        weights = self.P ** np.arange(self.M, dtype=np.int64)
        return digits @ weights

    def representative(self, y) -> np.ndarray | int:
        """Nearest lattice node after clamping to ``[0, 1]``; exact halves
        round to the lower index."""
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.M:
            raise ValueError(f"state has shape {y.shape}, expected (..., {self.M})")
        x = np.clip(y, 0.0, 1.0) * (self.P - 1)
        digits = np.ceil(x - 0.5).astype(np.int64)
        np.clip(digits, 0, self.P - 1, out=digits)
        ids = self.encode(digits)
        return int(ids) if ids.ndim == 0 else ids


def build_grid(M: int, points_per_dim: int, cap: int = DEFAULT_NODE_CAP) -> Grid:
    if M < 1 or points_per_dim < 2:
        raise ConfigError("grid needs M >= 1 and at least 2 points per dimension")
    if points_per_dim ** M > cap:
        raise CapacityError(f"{points_per_dim}**{M} nodes exceeds cap {cap}")
    return Grid(int(M), int(points_per_dim))


def cell_radius(grid: Grid) -> float:
    """Worst-case distance from a state to its representative."""
    return math.sqrt(grid.M) * grid.eta / 2.0


@dataclass
class NextMap:
    """Successor table: ``table[z, u]`` is the representative of the Euler
    image of node ``z`` under (extended) mode ``u``."""

    table: np.ndarray
    mode_count: int
    p: int = 1

    def __getitem__(self, key):
        return self.table[key]


def _chunk_successors(grid, sys, ids, p, nsub, dt, bvecs, rargs, out):
    Y0 = grid.coords(ids)
    m = sys.m
    # depth-first over the prefix tree of extended modes; prefixes are shared
    stack = [(Y0, 0, 0)]
    while stack:
        Y, depth, code = stack.pop()
        if depth == p:
            if not np.all(np.isfinite(Y)):
                bad = int(np.nonzero(~np.all(np.isfinite(Y), axis=1))[0][0])
                raise BlowUpError(f"blow-up at node {int(ids[bad])}, mode {code}",
                                  node=int(ids[bad]), mode=code)
            out[:, code] = grid.representative(Y)
            continue
        for u in range(m - 1, -1, -1):
            Yn = _kernels.euler_rows(Y, nsub, dt, sys.sigma, sys.inv_h2, bvecs[u], *rargs)
            stack.append((Yn, depth + 1, code * m + u))


def build_next_map(grid: Grid, sys: DiscreteSystem, dt: float, p: int = 1,
                   workers: int = 1, mode_cap: int = 10**5, out: np.ndarray | None = None) -> NextMap:
    """Tabulate successors for every node and every base or extended mode.

    Work is split into fixed node chunks, so the table is identical for any
    ``workers``.  ``out`` may be a preallocated (e.g. memory-mapped) uint32
    array of shape ``(N, m**p)``.
    """
    if grid.M != sys.M:
        raise ConfigError(f"grid dimension {grid.M} != system dimension {sys.M}")
    count = sys.m ** p
    if count > mode_cap:
        raise CapacityError(f"{count} extended modes exceeds cap {mode_cap}")
    nsub = substep_count(sys.tau, dt)
    bvecs = [boundary_term(sys, md) for md in sys.modes]
    rargs = _kernels.reaction_args(sys.reaction)
    N = grid.N
    table = np.empty((N, count), dtype=np.uint32) if out is None else out

    def run(start):
        ids = np.arange(start, min(start + NODE_CHUNK, N), dtype=np.int64)
        buf = np.empty((ids.size, count), dtype=np.uint32)
        _chunk_successors(grid, sys, ids, p, nsub, dt, bvecs, rargs, buf)
        table[ids[0]:ids[-1] + 1] = buf

    starts = range(0, N, NODE_CHUNK)
    if workers <= 1:
        for s in starts:
            run(s)
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(run, starts))
    return NextMap(table, count, p)
