"""Bundled reproduction runs for the two reference examples.

Each run synthesizes a controller on the 5-node system, simulates it, and
(for the second example) applies the same pattern to the 10-node system.
Achieved distances are compared against the published values.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


from .artifact import file_digest, write_controller
from .config import RunConfig
from .errors import ConfigError
from .pipeline import PLOT_RECIPE, cross_application, simulate_controller, synthesize, write_heatmap
from .integrate import write_trace_csv

log = logging.getLogger(__name__)

TOLERANCE = 0.10
HORIZON_STAGES = 20
LENGTHS = (1, 2, 4)
SHORT_GRID = 8

# Published final distances, indexed by sigma then extended-mode length.
PUBLISHED_REDUCED = {1.0: {1: 0.27642, 2: 0.44496, 4: 0.15294},
                     0.5: {1: 0.33869, 2: 0.39068, 4: 0.22024}}
PUBLISHED_FULL = {1.0: {1: 0.39904, 2: 0.50092, 4: 0.16738},
                  0.5: {1: 0.50251, 2: 0.58500, 4: 0.31440}}
PUBLISHED_PROJECTED = {1.0: {1: 0.67429, 2: 0.27501, 4: 0.31385},
                       0.5: {1: 0.77322, 2: 0.72322, 4: 0.21481}}
PUBLISHED_BOUND_PER_SIGMA = 17.9
BOUND_RTOL = 0.03

RUN_IDS = ("example1-p1", "example1-p2", "example1-p4", "example2-sigma1", "example2-sigma05")


def bundled_config(name: str) -> RunConfig:
    text = resources.files("rdsynth.configs").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return RunConfig.from_dict(json.loads(text))


def reduced_config(sigma: float = 1.0, p: int = 1, allow_long: bool = False) -> RunConfig:
    """Five-node config for a given sigma and extended-mode length.

    ``p = 4`` switches to the 8-point grid unless ``allow_long`` is set.
    """
    cfg = bundled_config("example1")
    pts = cfg.points_per_dim if (p < 4 or allow_long) else SHORT_GRID
    return cfg.replace(sigma=sigma, extended_p=p, k=HORIZON_STAGES // p, points_per_dim=pts)


def full_config(sigma: float = 1.0) -> RunConfig:
    return bundled_config("example2_full").replace(sigma=sigma)


def row(name: str, reference: float, ours: float, tol: float | None = TOLERANCE,
        upper: float | None = None) -> dict:
    """Comparison row; ``tol`` is an absolute band, ``upper`` a one-sided cap."""
    if upper is not None:
        ok = ours <= upper
        return {"name": name, "reference": reference, "ours": ours, "upper": upper, "pass": bool(ok)}
    ok = abs(ours - reference) <= tol
    return {"name": name, "reference": reference, "ours": ours, "tol": tol, "pass": bool(ok)}


@dataclass
class LengthRun:
    sigma: float
    p: int
    points_per_dim: int
    synthesis: object
    simulation: object
    cross: object = None
    pair: object = None
    full_trace: object = None


def run_length(sigma: float, p: int, allow_long: bool = False, workers: int = 1,
               with_full: bool = False, scratch_dir=None) -> LengthRun:
    cfg = reduced_config(sigma, p, allow_long)
    syn = synthesize(cfg, workers=workers, scratch_dir=scratch_dir)
    ctl = syn.controller()
    sim = simulate_controller(cfg, ctl, values=syn.values)
    run = LengthRun(sigma, p, cfg.points_per_dim, syn, sim)
    if with_full:
        rep, pair, _, ftr = cross_application(full_config(sigma), cfg, ctl)
        run.cross, run.pair, run.full_trace = rep, pair, ftr
    return run


def example1_rows(run: LengthRun) -> list[dict]:
    ref = PUBLISHED_REDUCED[run.sigma][run.p]
    tag = f"sigma={run.sigma:g} p={run.p} P={run.points_per_dim}"
    d = run.simulation.final_distance
    slack = 2 * run.synthesis.config.k * run.simulation.epsilon
    return [row(f"reduced final distance ({tag})", ref, d),
            row(f"reduced final distance <= reference + 2k eps ({tag})", ref, d, upper=ref + slack)]


def example2_rows(run: LengthRun) -> list[dict]:
    tag = f"sigma={run.sigma:g} p={run.p} P={run.points_per_dim}"
    rep = run.cross
    return [row(f"full final distance ({tag})", PUBLISHED_FULL[run.sigma][run.p], rep.full_distance),
            row(f"projected final distance ({tag})", PUBLISHED_PROJECTED[run.sigma][run.p],
                rep.projected_distance),
            row(f"projected distance within a-priori bound ({tag})", rep.a_priori_bound,
                rep.projected_distance, upper=rep.a_priori_bound)]


def bound_row(pair, sigma: float) -> dict:
    ref = PUBLISHED_BOUND_PER_SIGMA * sigma
    return row(f"reduction bound K2 sigma/|lambda| (sigma={sigma:g})", ref, pair.bound,
               tol=BOUND_RTOL * ref)


def reduction_report(pair, runs: list[LengthRun]) -> dict:
    return {
        "M1": pair.reduced.M,
        "M2": pair.full.M,
        "k2": pair.k2,
        "lambda_h1": pair.lambda_h1,
        "sigma": pair.full.sigma,
        "bound": pair.bound,
        "table1_row": {str(r.p): r.cross.full_distance for r in runs},
        "table2_row": {str(r.p): r.cross.projected_distance for r in runs},
        "reduced_row": {str(r.p): r.cross.reduced_distance for r in runs},
    }


def _write_run(run: LengthRun, out: Path, prefix: str) -> dict:
    syn, sim = run.synthesis, run.simulation
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{prefix}config.json").write_text(syn.config.to_json() + "\n", encoding="utf-8")
    (out / f"{prefix}bounds.json").write_text(syn.report.to_json() + "\n", encoding="utf-8")
    ctl_path = out / f"{prefix}controller.bin"
    write_controller(ctl_path, syn.grid, syn.policy, syn.next_map, syn.config.target())
    write_trace_csv(sim.trace, out / f"{prefix}trace.csv")
    write_heatmap(syn.system, sim.trace, out / f"{prefix}heatmap.csv")
    (out / f"{prefix}plot_recipe.txt").write_text(PLOT_RECIPE.format(name=f"{prefix}heatmap.csv"),
                                                 encoding="utf-8")
    files = {"controller": ctl_path.name, "controller_sha256": file_digest(ctl_path)}
    if run.full_trace is not None:
        write_trace_csv(run.full_trace, out / f"{prefix}full_trace.csv")
        write_heatmap(run.pair.full, run.full_trace, out / f"{prefix}full_heatmap.csv")
        (out / f"{prefix}full_plot_recipe.txt").write_text(
            PLOT_RECIPE.format(name=f"{prefix}full_heatmap.csv"), encoding="utf-8")
    summary = sim.summary(syn.system)
    summary.update(files)
    summary["synthesis_seconds"] = syn.seconds
    return summary


def reproduce(run_id: str, out_dir, allow_long: bool = False, workers: int = 1) -> dict:
    """Run one bundled reproduction and write its artifacts plus ``report.json``."""
    if run_id not in RUN_IDS:
        raise ConfigError(f"unknown reproduction id {run_id!r}; expected one of {RUN_IDS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scratch = out if allow_long else None
    report: dict = {"id": run_id, "rows": [], "runs": {}}
    if run_id.startswith("example1"):
        p = int(run_id[-1])
        run = run_length(1.0, p, allow_long, workers, scratch_dir=scratch)
        report["runs"][f"p{p}"] = _write_run(run, out, "")
        report["rows"] += example1_rows(run)
        if p == 4 and not allow_long:
            report["note"] = f"reduced-grid variant with {SHORT_GRID} points per dimension"
    else:
        sigma = 1.0 if run_id.endswith("sigma1") else 0.5
        runs = []
        for p in LENGTHS:
            run = run_length(sigma, p, allow_long, workers, with_full=True, scratch_dir=scratch)
            runs.append(run)
            report["runs"][f"p{p}"] = _write_run(run, out, f"p{p}_")
            report["rows"] += example1_rows(run) + example2_rows(run)
        report["rows"].append(bound_row(runs[0].pair, sigma))
        report["reduction"] = reduction_report(runs[0].pair, runs)
    report["all_pass"] = all(r["pass"] for r in report["rows"])
    (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    return report


def format_rows(rows: list[dict]) -> str:
    lines = []
    for r in rows:
        status = "PASS" if r["pass"] else "FAIL"
        limit = f"<= {r['upper']:.5f}" if "upper" in r else f"{r['reference']:.5f} +/- {r['tol']:.3g}"
        lines.append(f"{status}  {r['name']}: ours {r['ours']:.5f}, expected {limit}")
    return "\n".join(lines)
