"""End-to-end steps shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .artifact import Controller
from .bounds import HypothesisReport
from .config import RunConfig
from .errors import ConfigError
from .grid import Grid, NextMap, build_next_map, cell_radius
from .integrate import Pattern, Trace, simulate_pattern
from .model import DiscreteSystem
from .reduce import build_pair, cross_apply
from .synth import Policy, ValueTable, extract_pattern, guarantee_bound, value_iteration

log = logging.getLogger(__name__)

IN_MEMORY_TABLE_BYTES = 1 << 30


@dataclass
class Synthesis:
    config: RunConfig
    system: DiscreteSystem
    grid: Grid
    report: HypothesisReport
    next_map: NextMap
    values: ValueTable
    policy: Policy
    seconds: float

    def controller(self) -> Controller:
        return Controller(self.grid, self.config.target(), self.policy, self.next_map)


def synthesize(cfg: RunConfig, workers: int = 1, scratch_dir=None) -> Synthesis:
    """Check the hypothesis, tabulate successors and run value iteration.

    Successor tables larger than 1 GiB are memory-mapped under
    ``scratch_dir`` (required in that case).
    """
    t0 = time.perf_counter()
    report = cfg.hypothesis(strict=True)
    sys = cfg.system()
    grid = cfg.grid()
    count = sys.m ** cfg.extended_p
    out = None
    if grid.N * count * 4 > IN_MEMORY_TABLE_BYTES:
        if scratch_dir is None:
            raise ConfigError("successor table too large for memory; a scratch directory is needed")
        path = Path(scratch_dir) / "next_map.u32"
        out = np.lib.format.open_memmap(path, mode="w+", dtype=np.uint32, shape=(grid.N, count))
    nm = build_next_map(grid, sys, report.delta_t, p=cfg.extended_p, workers=workers, out=out)
    t1 = time.perf_counter()
    values, policy = value_iteration(grid, nm, cfg.target(), cfg.k)
    t2 = time.perf_counter()
    log.info("synthesized N=%d m=%d k=%d: successors %.1fs, DP %.1fs", grid.N, count, cfg.k,
             t1 - t0, t2 - t1)
    return Synthesis(cfg, sys, grid, report, nm, values, policy, t2 - t0)


@dataclass
class Simulation:
    pattern: Pattern
    trace: Trace
    z0: int
    final_distance: float
    grid_value: float
    epsilon: float
    guarantee: float

    def summary(self, sys: DiscreteSystem) -> dict:
        base = self.pattern.base_modes(sys.m)
        return {
            "final_distance": self.final_distance,
            "guarantee_bound": self.guarantee,
            "epsilon": self.epsilon,
            "grid_value": self.grid_value,
            "z0": self.z0,
            "pattern": list(self.pattern.steps),
            "extended_p": self.pattern.p,
            "base_modes": [[sys.modes[i].u0, sys.modes[i].uL] for i in base],
        }


def simulate_controller(cfg: RunConfig, controller: Controller, y0=None,
                        values: ValueTable | None = None) -> Simulation:
    """Extract the pattern at the initial state's representative and run the
    Euler simulation from that representative."""
    sys = cfg.system()
    grid = controller.grid
    if (grid.M, grid.P) != (cfg.M, cfg.points_per_dim):
        raise ConfigError(f"controller grid (M={grid.M}, P={grid.P}) does not match the config")
    if controller.next_map.mode_count != sys.m ** cfg.extended_p:
        raise ConfigError("controller mode count does not match modes**extended_p")
    report = cfg.hypothesis(strict=True)
    y0 = cfg.initial_state(sys) if y0 is None else np.asarray(y0, dtype=float)
    if y0.shape != (sys.M,):
        raise ConfigError(f"initial state has shape {y0.shape}, expected ({sys.M},)")
    z0 = int(grid.representative(y0))
    pattern = extract_pattern(controller.policy, grid, controller.next_map, z0)
    trace = simulate_pattern(sys, pattern, grid.coords(z0), report.delta_t, cfg.record_every)
    eps = cell_radius(grid)
    gv = float(values.values[z0]) if values is not None else math.nan
    return Simulation(pattern, trace, z0, float(np.linalg.norm(trace.final - controller.y_f)), gv,
                      eps, guarantee_bound(controller.k, eps))


def cross_application(full_cfg: RunConfig, reduced_cfg: RunConfig, controller: Controller):
    """Apply the reduced controller's pattern to the full system.

    Returns ``(report, pair, full_trace, reduced_trace)``.
    """
    full = full_cfg.system()
    reduced = reduced_cfg.system()
    if full.modes != reduced.modes or full.tau != reduced.tau:
        raise ConfigError("full and reduced configs need the same modes and tau")
    sim = simulate_controller(reduced_cfg, controller)
    lam = reduced_cfg.explicit_lambda
    pair = build_pair(full, reduced, lambda_h1=lam)
    dt = reduced_cfg.hypothesis(strict=True).delta_t
    rep, ftr, rtr = cross_apply(pair, sim.pattern, full_cfg.initial_state(full), reduced_cfg.target(),
                                dt, y1_0=reduced_cfg.initial_state(reduced), y2_f=full_cfg.target(),
                                traces=True)
    return rep, pair, sim, ftr


def heatmap_rows(sys: DiscreteSystem, trace: Trace):
    """Long-format ``(t, x, y)`` rows including the two boundary values."""
    x = np.concatenate([[0.0], sys.nodes(), [sys.L]])
    for t, y, md in zip(trace.times, trace.states, trace.row_modes):
        vals = np.concatenate([[md.u0], y, [md.uL]])
        for xi, vi in zip(x, vals):
            yield t, xi, vi


def write_heatmap(sys: DiscreteSystem, trace: Trace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,x,y\n")
        for t, x, v in heatmap_rows(sys, trace):
            fh.write(f"{t:.17g},{x:.17g},{v:.17g}\n")


PLOT_RECIPE = """\
heatmap of y(t, x) from {name}
  columns: t (time), x (position, boundary nodes included), y (state)
  pivot rows by t and columns by x, draw with a sequential colormap,
  t on the horizontal axis, x on the vertical axis, y in [0, 1].
"""
