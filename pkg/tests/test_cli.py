import json
import struct
from importlib import resources

import numpy as np
import pytest

from rdsynth import cli
from rdsynth.artifact import file_digest, read_controller, write_controller
from rdsynth.config import RunConfig
from rdsynth.errors import ArtifactError, ConfigError
from rdsynth.pipeline import simulate_controller, synthesize
from rdsynth.reproduce import RUN_IDS, bundled_config, format_rows, reduced_config, row

BUNDLED = ("example1", "example2_full", "toy")


@pytest.mark.parametrize("name", BUNDLED)
def test_config_round_trip(name):
    cfg = bundled_config(name)
    again = RunConfig.from_dict(json.loads(cfg.to_json()))
    assert again == cfg
    assert RunConfig.from_dict(again.to_dict()).to_dict() == cfg.to_dict()


def base_dict():
    return json.loads(bundled_config("toy").to_json())


@pytest.mark.parametrize("section,key", [("model", "Lx"), ("control", "mode"), ("grid", "P"),
                                         ("bounds", "c"), ("output", "path")])
def test_unknown_keys_rejected_with_field(section, key):
    d = base_dict()
    d[section][key] = 1
    with pytest.raises(ConfigError, match=section):
        RunConfig.from_dict(d)


@pytest.mark.parametrize("mutate,field", [
    (lambda d: d["model"].__setitem__("M", 0), "model.M"),
    (lambda d: d["model"].__setitem__("sigma", -1), "model.sigma"),
    (lambda d: d["control"].__setitem__("modes", [[0.0, 1.5]]), "model/control"),
    (lambda d: d["control"].__setitem__("tau", "fast"), "control.tau"),
    (lambda d: d["objective"].__setitem__("y_f", [0.3, 0.3]), "objective.y_f"),
    (lambda d: d["bounds"].__setitem__("c_strategy", "explicit"), "bounds.explicit_c"),
    (lambda d: d["initial"].__setitem__("profile", [0.1]), "initial.profile"),
    (lambda d: d.pop("control"), "missing"),
])
def test_field_errors_are_named(mutate, field):
    d = base_dict()
    mutate(d)
    with pytest.raises(ConfigError, match=field.replace(".", r"\.")):
        RunConfig.from_dict(d)


def test_malformed_json_reports_position(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "model": {"L": 2,\n}\n')
    with pytest.raises(ConfigError, match="line 3"):
        RunConfig.load(p)


def test_reproduction_configs():
    cfg = reduced_config(1.0, 2)
    assert (cfg.k, cfg.extended_p, cfg.points_per_dim) == (10, 2, 16)
    assert reduced_config(0.5, 4).points_per_dim == 8
    assert reduced_config(0.5, 4, allow_long=True).points_per_dim == 16
    rep = cfg.hypothesis()
    assert rep.satisfied and rep.delta_t == 0.001


# --- artifacts ----------------------------------------------------------------


@pytest.fixture(scope="module")
def toy_synthesis():
    return synthesize(bundled_config("toy"))


def write_toy(tmp_path, syn):
    path = tmp_path / "c.bin"
    write_controller(path, syn.grid, syn.policy, syn.next_map, syn.config.target())
    return path


def test_artifact_round_trip(tmp_path, toy_synthesis):
    syn = toy_synthesis
    path = write_toy(tmp_path, syn)
    for mmap in (False, True):
        ctl = read_controller(path, mmap=mmap)
        np.testing.assert_array_equal(ctl.policy.best_mode, syn.policy.best_mode)
        np.testing.assert_array_equal(ctl.next_map.table, syn.next_map.table)
        np.testing.assert_array_equal(ctl.y_f, syn.config.target())
        assert (ctl.grid.M, ctl.grid.P, ctl.k) == (1, 4, 2)
    raw = path.read_bytes()
    assert raw[:4] == b"RCPL" and struct.unpack_from("<5I", raw, 4) == (1, 1, 4, 2, 2)


@pytest.mark.parametrize("offset,value,match", [
    (0, b"XXPL", "magic"), (4, struct.pack("<I", 9), "version"),
    (8, struct.pack("<I", 3), "size"), (-1, None, "size"),
])
def test_artifact_corruption_rejected(tmp_path, toy_synthesis, offset, value, match):
    path = write_toy(tmp_path, toy_synthesis)
    raw = bytearray(path.read_bytes())
    if value is None:
        raw = raw[:-3]
    else:
        raw[offset:offset + len(value)] = value
    path.write_bytes(bytes(raw))
    with pytest.raises(ArtifactError, match=match):
        read_controller(path)


def test_artifact_rejects_bad_section_and_ids(tmp_path, toy_synthesis):
    path = write_toy(tmp_path, toy_synthesis)
    raw = bytearray(path.read_bytes())
    sec = raw.index(b"RCNM")
    bad = bytearray(raw)
    bad[sec:sec + 4] = b"RCNX"
    path.write_bytes(bytes(bad))
    with pytest.raises(ArtifactError, match="section"):
        read_controller(path)
    bad = bytearray(raw)
    bad[-4:] = struct.pack("<I", 99)
    path.write_bytes(bytes(bad))
    with pytest.raises(ArtifactError, match="out-of-range"):
        read_controller(path)


def test_simulate_from_target_within_guarantee(toy_synthesis):
    syn = toy_synthesis
    cfg = syn.config.replace(initial_vector=(0.3,), initial_profile=None)
    sim = simulate_controller(cfg, syn.controller())
    assert sim.final_distance <= sim.guarantee


# --- command line ---------------------------------------------------------------


def toy_path(tmp_path, **changes):
    d = base_dict()
    for dotted, v in changes.items():
        sec, key = dotted.split("__")
        d[sec][key] = v
    p = tmp_path / f"cfg{len(list(tmp_path.iterdir()))}.json"
    p.write_text(json.dumps(d))
    return p


def test_cli_analyze_exit_codes(tmp_path, capsys):
    ex1 = str(resources.files("rdsynth.configs") / "example1.json")
    assert cli.main(["analyze", "--config", ex1, "--out", str(tmp_path / "a")]) == 0
    rep = json.loads((tmp_path / "a" / "bounds.json").read_text())
    assert rep["satisfied"] and rep["delta_t"] == 0.001 and rep["substeps"] == 100
    d = json.loads(bundled_config("example1").to_json())
    d["model"]["sigma"] = 0.01
    d["bounds"] = {"e0_mode": "cell_radius"}
    weak = tmp_path / "weak.json"
    weak.write_text(json.dumps(d))
    assert cli.main(["analyze", "--config", str(weak), "--out", str(tmp_path / "b")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    assert cli.main(["analyze", "--config", str(bad)]) == 2
    assert "line 1" in capsys.readouterr().err
    assert cli.main(["reproduce", "example3"]) == 2
    assert cli.main(["frobnicate"]) == 2
    assert set(RUN_IDS) == {"example1-p1", "example1-p2", "example1-p4", "example2-sigma1",
                            "example2-sigma05"}


def test_cli_synthesize_deterministic_across_runs_and_workers(tmp_path):
    cfg = toy_path(tmp_path)
    digests = []
    for i, w in enumerate((1, 1, 4)):
        out = tmp_path / f"o{i}"
        assert cli.main(["synthesize", "--config", str(cfg), "--out", str(out), "--workers", str(w)]) == 0
        digests.append(file_digest(out / "controller.bin"))
    assert len(set(digests)) == 1


def test_cli_simulate_and_dimension_mismatch(tmp_path, capsys):
    cfg = toy_path(tmp_path)
    out = tmp_path / "o"
    assert cli.main(["synthesize", "--config", str(cfg), "--out", str(out)]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert {"final_distance", "guarantee_bound", "pattern"} <= set(summary)
    assert len(summary["pattern"]) == 2
    assert (out / "trace.csv").read_text().startswith("t,y1,u0,uL\n")
    assert (out / "heatmap.csv").read_text().startswith("t,x,y\n")
    assert cli.main(["simulate", "--config", str(cfg), "--out", str(out), "--initial", "[0.3]"]) == 0
    other = toy_path(tmp_path, grid__points_per_dim=5)
    capsys.readouterr()
    assert cli.main(["simulate", "--config", str(other), "--controller", str(out / "controller.bin"),
                     "--out", str(tmp_path / "p")]) == 2
    assert "does not match" in capsys.readouterr().err


def test_cli_reduce(tmp_path):
    red = toy_path(tmp_path)
    d = base_dict()
    d["model"]["M"] = 2
    full = tmp_path / "full.json"
    full.write_text(json.dumps(d))
    out = tmp_path / "o"
    assert cli.main(["synthesize", "--config", str(red), "--out", str(out)]) == 0
    assert cli.main(["reduce", "--config", str(full), "--reduced-config", str(red), "--out", str(out)]) == 0
    rep = json.loads((out / "reduction.json").read_text())
    assert {"M1", "M2", "k2", "lambda_h1", "sigma", "bound", "table1_row", "table2_row"} <= set(rep)
    assert rep["M1"] == 1 and rep["M2"] == 2
    assert rep["table2_row"]["1"] <= rep["a_priori_bound"]
    d["model"]["M"] = 3
    full.write_text(json.dumps(d))
    assert cli.main(["reduce", "--config", str(full), "--reduced-config", str(red), "--out", str(out)]) == 2


def test_report_rows():
    ok = row("x", 0.3, 0.35)
    assert ok["pass"] and ok["tol"] == 0.1
    assert not row("x", 0.3, 0.41)["pass"]
    assert row("y", 1.0, 0.9, upper=1.0)["pass"]
    text = format_rows([ok, row("y", 1.0, 1.2, upper=1.0)])
    assert text.splitlines()[0].startswith("PASS") and text.splitlines()[1].startswith("FAIL")
