"""Dynamic programming over the successor graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError
from .grid import Grid, NextMap
from .integrate import Pattern

DP_CHUNK = 1 << 16
BRUTE_FORCE_BUDGET = 10**6


@dataclass
class ValueTable:
    values: np.ndarray  # float32, one per node
    stage: int


@dataclass
class Policy:
    """``best_mode[t-1, z]`` is the mode chosen at node ``z`` with ``t``
    stages to go, for ``t = 1..k``."""

    best_mode: np.ndarray  # uint16, shape (k, N)
    p: int = 1

    @property
    def k(self) -> int:
        return self.best_mode.shape[0]


def terminal_values(grid: Grid, y_f) -> np.ndarray:
    """Stage-0 cost ``|coords(z) - y_f|``, computed in float64, stored as float32."""
    y_f = np.asarray(y_f, dtype=float)
    out = np.empty(grid.N, dtype=np.float32)
    for s in range(0, grid.N, DP_CHUNK):
        ids = np.arange(s, min(s + DP_CHUNK, grid.N))
        out[s:s + ids.size] = np.linalg.norm(grid.coords(ids) - y_f, axis=1)
    return out


def bellman_stage(prev: np.ndarray, table: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One backward stage: ``v(z) = min_u prev[next^u(z)]``, lowest ``u`` on ties."""
    N, m = table.shape
    vals = np.empty(N, dtype=np.float32)
    best = np.empty(N, dtype=np.uint16)
    rows = max(256, DP_CHUNK * 64 // m)
    for s in range(0, N, rows):
        cand = prev[table[s:s + rows]]
        arg = np.argmin(cand, axis=1)
        best[s:s + arg.size] = arg
        vals[s:s + arg.size] = cand[np.arange(arg.size), arg]
    return vals, best


def value_iteration(grid: Grid, next_map: NextMap, y_f, k: int) -> tuple[ValueTable, Policy]:
    if k < 0:
        raise ValueError("k must be non-negative")
    if next_map.mode_count > np.iinfo(np.uint16).max + 1:
        raise CapacityError("policy indices are stored as uint16")
    v = terminal_values(grid, y_f)
    best = np.empty((k, grid.N), dtype=np.uint16)
    for t in range(1, k + 1):
        v, best[t - 1] = bellman_stage(v, next_map.table)
    return ValueTable(v, k), Policy(best, next_map.p)


def extract_pattern(policy: Policy, grid: Grid, next_map: NextMap, z0: int, k: int | None = None) -> Pattern:
    """Walk the policy from ``z0``; the result is in application order."""
    k = policy.k if k is None else k
    if k > policy.k:
        raise ValueError(f"policy has {policy.k} stages, asked for {k}")
    if not 0 <= z0 < grid.N:
        raise ValueError(f"node id {z0} out of range")
    z = int(z0)
    steps = []
    for t in range(k, 0, -1):
        u = int(policy.best_mode[t - 1, z])
        steps.append(u)
        z = int(next_map.table[z, u])
    return Pattern(tuple(steps), policy.p)


def pattern_endpoint(next_map: NextMap, z0: int, pattern: Pattern) -> int:
    """Grid node reached by walking ``pattern`` through the successor table."""
    z = int(z0)
    for u in pattern.steps:
        z = int(next_map.table[z, u])
    return z


def brute_force_optimal(grid: Grid, next_map: NextMap, z0: int, y_f, k: int,
                        budget: int = BRUTE_FORCE_BUDGET) -> tuple[Pattern, float]:
    """Enumerate every length-``k`` pattern from ``z0`` through the graph.

    Returns the lexicographically first minimiser and its value (the same
    float32 terminal cost the DP uses).
    """
    m = next_map.mode_count
    if m ** k > budget:
        raise CapacityError(f"{m}**{k} patterns exceeds budget {budget}")
    ends = np.array([z0], dtype=np.int64)
    for _ in range(k):
        # pattern index = prefix * m + u, i.e. lexicographic order
        ends = next_map.table[ends].astype(np.int64).reshape(-1)
    cost = np.linalg.norm(grid.coords(ends) - np.asarray(y_f, dtype=float), axis=1).astype(np.float32)
    best = int(np.argmin(cost))
    steps = []
    rest = best
    for _ in range(k):
        rest, u = divmod(rest, m)
        steps.append(u)
    return Pattern(tuple(reversed(steps)), next_map.p), float(cost[best])


def guarantee_bound(k: int, epsilon: float) -> float:
    """Worst-case gap ``(2k+1) eps`` between the synthesized and optimal cost."""
    if k < 0 or epsilon < 0:
        raise ValueError("k and epsilon must be non-negative")
    return (2 * k + 1) * epsilon
