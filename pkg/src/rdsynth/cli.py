"""Command-line entry point: analyze, synthesize, simulate, reduce, reproduce."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import reproduce as repro
from .artifact import file_digest, read_controller, write_controller
from .config import RunConfig
from .errors import ArtifactError, BlowUpError, ConfigError, HypothesisError
from .integrate import write_trace_csv
from .pipeline import PLOT_RECIPE, cross_application, simulate_controller, synthesize, write_heatmap

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3

log = logging.getLogger("rdsynth")


def _out_dir(args, cfg: RunConfig | None = None) -> Path:
    out = args.out or (cfg.output_dir if cfg is not None else None) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")


def _initial_state(args, cfg: RunConfig):
    if args.initial is None:
        return None
    text = args.initial
    try:
        vals = json.loads(Path(text).read_text(encoding="utf-8")) if Path(text).is_file() else json.loads(text)
    except (json.JSONDecodeError, OSError) as exc:
        raise ConfigError(f"--initial: cannot parse {text!r}: {exc}") from None
    y0 = np.asarray(vals, dtype=float)
    if y0.shape != (cfg.M,):
        raise ConfigError(f"--initial: expected {cfg.M} values")
    return y0


def cmd_analyze(args) -> int:
    cfg = RunConfig.load(args.config)
    report = cfg.hypothesis(strict=False)
    out = _out_dir(args, cfg)
    (out / "bounds.json").write_text(report.to_json() + "\n", encoding="utf-8")
    print(report.to_json())
    return EXIT_OK if report.satisfied else EXIT_FAIL


def cmd_synthesize(args) -> int:
    cfg = RunConfig.load(args.config)
    out = _out_dir(args, cfg)
    syn = synthesize(cfg, workers=args.workers, scratch_dir=out)
    path = out / "controller.bin"
    write_controller(path, syn.grid, syn.policy, syn.next_map, cfg.target())
    (out / "bounds.json").write_text(syn.report.to_json() + "\n", encoding="utf-8")
    info = {"controller": str(path), "sha256": file_digest(path), "N": syn.grid.N,
            "mode_count": syn.next_map.mode_count, "k": cfg.k, "seconds": syn.seconds}
    print(json.dumps(info, indent=2))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = RunConfig.load(args.config)
    out = _out_dir(args, cfg)
    ctl = read_controller(args.controller or out / "controller.bin", p=cfg.extended_p)
    sim = simulate_controller(cfg, ctl, y0=_initial_state(args, cfg))
    sys_ = cfg.system()
    write_trace_csv(sim.trace, out / "trace.csv")
    write_heatmap(sys_, sim.trace, out / "heatmap.csv")
    (out / "plot_recipe.txt").write_text(PLOT_RECIPE.format(name="heatmap.csv"), encoding="utf-8")
    summary = sim.summary(sys_)
    _write_json(out / "summary.json", summary)
    print(json.dumps(summary, indent=2))
    return EXIT_OK if sim.final_distance <= sim.guarantee else EXIT_FAIL


def cmd_reduce(args) -> int:
    full_cfg = RunConfig.load(args.config)
    if not args.reduced_config:
        raise ConfigError("reduce needs --reduced-config")
    red_cfg = RunConfig.load(args.reduced_config)
    out = _out_dir(args, full_cfg)
    ctl = read_controller(args.controller or out / "controller.bin", p=red_cfg.extended_p)
    rep, pair, sim, ftr = cross_application(full_cfg, red_cfg, ctl)
    p = str(red_cfg.extended_p)
    report = {"M1": pair.reduced.M, "M2": pair.full.M, "k2": pair.k2, "lambda_h1": pair.lambda_h1,
              "sigma": pair.full.sigma, "bound": pair.bound,
              "table1_row": {p: rep.full_distance}, "table2_row": {p: rep.projected_distance},
              "reduced_row": {p: rep.reduced_distance}, "a_priori_bound": rep.a_priori_bound,
              "within_bound": rep.within_bound}
    write_trace_csv(ftr, out / "full_trace.csv")
    write_heatmap(pair.full, ftr, out / "full_heatmap.csv")
    _write_json(out / "reduction.json", report)
    print(json.dumps(report, indent=2))
    return EXIT_OK if rep.within_bound else EXIT_FAIL


def cmd_reproduce(args) -> int:
    out = _out_dir(args)
    report = repro.reproduce(args.id, out, allow_long=args.allow_long, workers=args.workers)
    print(repro.format_rows(report["rows"]))
    return EXIT_OK if report["all_pass"] else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdsynth",
                                 description="Grid-based controller synthesis for switched "
                                             "reaction-diffusion systems.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run configuration (JSON)")
        p.add_argument("--out", help="output directory (default: config output.dir or .)")
        p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                       help="worker threads for successor tabulation")
        p.add_argument("--allow-long", action="store_true", help="permit runs of several hours")
        return p

    common(sub.add_parser("analyze", help="check the stability hypothesis and report bounds"))
    common(sub.add_parser("synthesize", help="build and write a controller artifact"))
    s = common(sub.add_parser("simulate", help="simulate the synthesized pattern"))
    s.add_argument("--controller", help="controller artifact (default: <out>/controller.bin)")
    s.add_argument("--initial", help="initial state as a JSON list or a file holding one")
    r = common(sub.add_parser("reduce", help="apply a reduced controller to the full system"))
    r.add_argument("--reduced-config", help="configuration of the reduced system")
    r.add_argument("--controller", help="controller synthesized on the reduced system")
    rp = common(sub.add_parser("reproduce", help="run a bundled reproduction"), config=False)
    rp.add_argument("id", choices=repro.RUN_IDS)
    return ap


COMMANDS = {"analyze": cmd_analyze, "synthesize": cmd_synthesize, "simulate": cmd_simulate,
            "reduce": cmd_reduce, "reproduce": cmd_reproduce}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except HypothesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if getattr(exc, "report", None) is not None:
            print(exc.report.to_json(), file=sys.stderr)
        return EXIT_FAIL
    except (ConfigError, ArtifactError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BlowUpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
