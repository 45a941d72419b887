"""Run configuration: JSON parsing with strict key checking."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

import numpy as np

from .bounds import C_STRATEGIES, HypothesisReport, check_hypothesis, initial_error
from .errors import ConfigError
from .grid import Grid, build_grid
from .model import DiscreteSystem, ReactionSpec, build_system, sample_profile

E0_MODES = ("cell_radius", "half_spacing", "explicit")


def _take(section: str, data: Any, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{section}: expected an object")
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{section}: unknown key(s) {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ConfigError(f"{section}: missing key(s) {sorted(missing)}")
    return data


def _num(section: str, key: str, v, positive=False, integer=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(f"{section}.{key}: expected an integer, got {v!r}")
    if not np.isfinite(v):
        raise ConfigError(f"{section}.{key}: must be finite")
    if positive and not v > 0:
        raise ConfigError(f"{section}.{key}: must be positive, got {v!r}")
    return int(v) if integer else float(v)


@dataclass(frozen=True)
class RunConfig:
    L: float
    M: int
    sigma: float
    reaction: ReactionSpec
    modes: tuple[tuple[float, float], ...]
    tau: float
    k: int
    extended_p: int = 1
    points_per_dim: int = 16
    e0_mode: str = "cell_radius"
    e0: float | None = None
    c_strategy: str = "definition-literal"
    explicit_c: tuple[float, ...] | None = None
    explicit_lambda: float | None = None
    substeps: int | None = None
    y_f: float | tuple[float, ...] = 0.3
    initial_profile: tuple[float, float] | None = (0.8, 0.1)
    initial_vector: tuple[float, ...] | None = None
    output_dir: str | None = None
    record_every: int | None = None

    # --- construction -------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        top = _take("config", data, {"model", "control", "grid", "bounds", "objective",
                                     "initial", "output"}, {"model", "control"})
        mdl = _take("model", top["model"], {"L", "M", "sigma", "reaction"}, {"L", "M"})
        ctl = _take("control", top["control"], {"modes", "tau", "k", "extended_p"},
                    {"modes", "tau", "k"})
        grd = _take("grid", top.get("grid", {}), {"points_per_dim"})
        bnd = _take("bounds", top.get("bounds", {}), {"e0_mode", "e0", "c_strategy", "explicit_c",
                                                       "explicit_lambda", "substeps"})
        obj = _take("objective", top.get("objective", {}), {"y_f"})
        ini = _take("initial", top.get("initial", {"profile": [0.8, 0.1]}), {"profile", "vector"})
        out = _take("output", top.get("output", {}), {"dir", "record_every"})

        reaction = mdl.get("reaction", {"kind": "bistable-cubic", "theta": 0.3})
        _take("model.reaction", reaction, {"kind", "theta", "coeffs"})
        kind = reaction.get("kind", "bistable-cubic")
        try:
            if kind == "bistable-cubic":
                rspec = ReactionSpec(kind, theta=_num("model.reaction", "theta", reaction.get("theta", 0.3)))
            else:
                rspec = ReactionSpec(kind, coeffs=tuple(reaction.get("coeffs", ())))
        except ConfigError as exc:
            raise ConfigError(f"model.reaction: {exc}") from None

        modes = ctl["modes"]
        if not isinstance(modes, list) or not modes:
            raise ConfigError("control.modes: expected a non-empty list of [u0, uL] pairs")
        parsed_modes = []
        for i, md in enumerate(modes):
            if not isinstance(md, (list, tuple)) or len(md) != 2:
                raise ConfigError(f"control.modes[{i}]: expected [u0, uL]")
            parsed_modes.append((_num(f"control.modes[{i}]", "u0", md[0]),
                                 _num(f"control.modes[{i}]", "uL", md[1])))

        y_f = obj.get("y_f", 0.3)
        y_f = (tuple(_num("objective", "y_f", v) for v in y_f) if isinstance(y_f, list)
               else _num("objective", "y_f", y_f))

        if "profile" in ini and "vector" in ini:
            raise ConfigError("initial: give either 'profile' or 'vector', not both")
        profile = vector = None
        if "vector" in ini:
            vector = tuple(_num("initial", "vector", v) for v in ini["vector"])
        else:
            pr = ini.get("profile")
            if not isinstance(pr, list) or len(pr) != 2:
                raise ConfigError("initial.profile: expected [a, b] for a*x/L + b*(1-x/L)")
            profile = (_num("initial", "profile", pr[0]), _num("initial", "profile", pr[1]))

        ec = bnd.get("explicit_c")
        if ec is not None:
            ec = tuple(_num("bounds", "explicit_c", v, positive=True) for v in
                       (ec if isinstance(ec, list) else [ec]))

        cfg = cls(
            L=_num("model", "L", mdl["L"], positive=True),
            M=_num("model", "M", mdl["M"], positive=True, integer=True),
            sigma=_num("model", "sigma", mdl.get("sigma", 1.0), positive=True),
            reaction=rspec,
            modes=tuple(parsed_modes),
            tau=_num("control", "tau", ctl["tau"], positive=True),
            k=_num("control", "k", ctl["k"], integer=True),
            extended_p=_num("control", "extended_p", ctl.get("extended_p", 1), positive=True, integer=True),
            points_per_dim=_num("grid", "points_per_dim", grd.get("points_per_dim", 16), integer=True),
            e0_mode=bnd.get("e0_mode", "cell_radius"),
            e0=_num("bounds", "e0", bnd.get("e0"), positive=True, allow_none=True),
            c_strategy=bnd.get("c_strategy", "definition-literal"),
            explicit_c=ec,
            explicit_lambda=_num("bounds", "explicit_lambda", bnd.get("explicit_lambda"), allow_none=True),
            substeps=_num("bounds", "substeps", bnd.get("substeps"), positive=True, integer=True,
                          allow_none=True),
            y_f=y_f,
            initial_profile=profile,
            initial_vector=vector,
            output_dir=out.get("dir"),
            record_every=_num("output", "record_every", out.get("record_every"), positive=True,
                              integer=True, allow_none=True),
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.k < 0:
            raise ConfigError("control.k: must be >= 0")
        if self.points_per_dim < 2:
            raise ConfigError("grid.points_per_dim: must be >= 2")
        if self.e0_mode not in E0_MODES:
            raise ConfigError(f"bounds.e0_mode: expected one of {E0_MODES}")
        if self.e0_mode == "explicit" and self.e0 is None:
            raise ConfigError("bounds.e0: required when e0_mode is 'explicit'")
        if self.c_strategy not in C_STRATEGIES:
            raise ConfigError(f"bounds.c_strategy: expected one of {C_STRATEGIES}")
        if self.c_strategy == "explicit":
            if self.explicit_c is None:
                raise ConfigError("bounds.explicit_c: required when c_strategy is 'explicit'")
            if len(self.explicit_c) not in (1, len(self.modes)):
                raise ConfigError(f"bounds.explicit_c: need 1 or {len(self.modes)} values")
        yf = np.atleast_1d(np.asarray(self.y_f, dtype=float))
        if yf.size not in (1, self.M):
            raise ConfigError(f"objective.y_f: expected a scalar or {self.M} values")
        if np.any(yf < 0) or np.any(yf > 1):
            raise ConfigError("objective.y_f: must lie in [0, 1]")
        if self.initial_vector is not None and len(self.initial_vector) != self.M:
            raise ConfigError(f"initial.vector: expected {self.M} values")
        try:
            self.system()
        except ConfigError as exc:
            raise ConfigError(f"model/control: {exc}") from None

    @classmethod
    def load(cls, path) -> "RunConfig":
        text = Path(path).read_text(encoding="utf-8")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        bounds = {"e0_mode": self.e0_mode, "c_strategy": self.c_strategy}
        if self.e0 is not None:
            bounds["e0"] = self.e0
        if self.explicit_c is not None:
            bounds["explicit_c"] = list(self.explicit_c)
        if self.explicit_lambda is not None:
            bounds["explicit_lambda"] = self.explicit_lambda
        if self.substeps is not None:
            bounds["substeps"] = self.substeps
        out = {}
        if self.output_dir is not None:
            out["dir"] = self.output_dir
        if self.record_every is not None:
            out["record_every"] = self.record_every
        return {
            "model": {"L": self.L, "M": self.M, "sigma": self.sigma, "reaction": self.reaction.to_dict()},
            "control": {"modes": [list(m) for m in self.modes], "tau": self.tau, "k": self.k,
                        "extended_p": self.extended_p},
            "grid": {"points_per_dim": self.points_per_dim},
            "bounds": bounds,
            "objective": {"y_f": list(self.y_f) if isinstance(self.y_f, tuple) else self.y_f},
            "initial": ({"vector": list(self.initial_vector)} if self.initial_vector is not None
                        else {"profile": list(self.initial_profile)}),
            "output": out,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def replace(self, **changes) -> "RunConfig":
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        cfg = RunConfig(**kw)
        cfg.validate()
        return cfg

    # --- derived objects ------------------------------------------------------

    def system(self) -> DiscreteSystem:
        return build_system(M=self.M, L=self.L, sigma=self.sigma, reaction=self.reaction,
                            modes=self.modes, tau=self.tau)

    def grid(self) -> Grid:
        return build_grid(self.M, self.points_per_dim)

    def target(self) -> np.ndarray:
        yf = np.atleast_1d(np.asarray(self.y_f, dtype=float))
        return np.full(self.M, yf[0]) if yf.size == 1 else yf

    def initial_state(self, sys: DiscreteSystem | None = None) -> np.ndarray:
        if self.initial_vector is not None:
            return np.array(self.initial_vector, dtype=float)
        a, b = self.initial_profile
        return sample_profile(sys or self.system(), a, b)

    def initial_error(self) -> float:
        return initial_error(self.e0_mode, self.M, 1.0 / (self.points_per_dim - 1), self.e0)

    def hypothesis(self, strict: bool = True) -> HypothesisReport:
        ec = self.explicit_c
        if ec is not None and len(ec) == 1:
            ec = ec * len(self.modes)
        return check_hypothesis(self.system(), self.initial_error(), self.c_strategy, explicit_c=ec,
                                explicit_lambda=self.explicit_lambda, substeps=self.substeps,
                                strict=strict)
