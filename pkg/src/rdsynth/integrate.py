"""Explicit Euler integration, pattern simulation and a reference RK4 flow."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import BlowUpError, ConvergenceError
from .model import DiscreteSystem, Mode, boundary_term, decode_extended, vector_field

TILING_RTOL = 1e-9
REFERENCE_RTOL = 1e-9
DEFAULT_CHUNK = 1 << 15


@dataclass(frozen=True)
class Pattern:
    """Mode sequence in application order.

    ``steps`` index base modes when ``p == 1`` and extended modes (blocks of
    ``p`` base modes, see :func:`rdsynth.model.extend_modes`) otherwise.
    """

    steps: tuple[int, ...]
    p: int = 1

    def base_modes(self, m: int) -> list[int]:
        out = []
        for s in self.steps:
            out.extend(decode_extended(int(s), m, self.p))
        return out

    def __len__(self):
        return len(self.steps)


@dataclass
class Trace:
    times: np.ndarray
    states: np.ndarray
    mode_log: list[Mode]
    row_modes: list[Mode] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def substep_count(horizon: float, dt: float) -> int:
    """Number of ``dt`` steps tiling ``horizon``; rejects non-integer tilings."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    n = round(horizon / dt)
    if n < 1 or abs(n * dt - horizon) > TILING_RTOL * max(horizon, dt):
        raise ValueError(f"horizon {horizon!r} is not an integer multiple of dt {dt!r}")
    return int(n)


def _flow(sys: DiscreteSystem, mode: Mode, Y: np.ndarray, nsteps: int, dt: float) -> np.ndarray:
    kind, theta, coeffs = _kernels.reaction_args(sys.reaction)
    b = boundary_term(sys, mode)
    return _kernels.euler_rows(np.ascontiguousarray(Y, dtype=np.float64), nsteps, dt, sys.sigma,
                               sys.inv_h2, b, kind, theta, coeffs)


def euler_batch(sys: DiscreteSystem, mode: Mode, Y, nsteps: int, dt: float,
                workers: int = 1, chunk: int = DEFAULT_CHUNK) -> np.ndarray:
    """``nsteps`` Euler steps applied to each row of ``Y``.

    Rows are independent, so the result does not depend on ``workers`` or
    ``chunk``.  Non-finite results are left in place; callers check.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if workers <= 1 or Y.shape[0] <= chunk:
        return _flow(sys, mode, Y, nsteps, dt)
    out = np.empty_like(Y)
    bounds = [(s, min(s + chunk, Y.shape[0])) for s in range(0, Y.shape[0], chunk)]

    def run(se):
        s, e = se
        out[s:e] = _flow(sys, mode, Y[s:e], nsteps, dt)

    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(run, bounds))
    return out


def euler_step(sys: DiscreteSystem, mode: Mode, y, dt: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    y = np.asarray(y, dtype=float)
    out = y + dt * vector_field(sys, mode, y)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("Euler step produced a non-finite state", step=0)
    return out


def integrate_mode(sys: DiscreteSystem, mode: Mode, y, horizon: float, dt: float) -> np.ndarray:
    """Compose ``horizon/dt`` Euler steps under a fixed mode.

    ``y`` may be one state ``(M,)`` or a batch ``(n, M)``.
    """
    n = substep_count(horizon, dt)
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != sys.M:
        raise ValueError(f"state has shape {y.shape}, expected (..., {sys.M})")
    out = _flow(sys, mode, np.atleast_2d(y), n, dt)
    if not np.all(np.isfinite(out)):
        raise BlowUpError("Euler integration produced a non-finite state")
    return out.reshape(y.shape)


def simulate_pattern(sys: DiscreteSystem, pattern: Pattern, y0, dt: float,
                     record_every: int | None = None) -> Trace:
    """Euler simulation of ``pattern`` from ``y0``.

    Each base mode is held for one switching period ``tau`` (extended modes
    therefore run ``p*tau`` with no intermediate rounding).  A state is
    recorded every ``record_every`` substeps and at the end; the default is
    every substep for ``M <= 16`` and every switching period otherwise.
    """
    y = np.asarray(y0, dtype=float).reshape(1, -1)
    if y.shape[1] != sys.M or not np.all(np.isfinite(y)):
        raise ValueError("y0 must be a finite state of dimension M")
    n = substep_count(sys.tau, dt)
    if record_every is None:
        record_every = 1 if sys.M <= 16 else n
    if record_every < 1:
        raise ValueError("record_every must be >= 1")

    seq = [sys.modes[i] for i in pattern.base_modes(sys.m)]
    times, states, row_modes = [0.0], [y[0].copy()], [seq[0] if seq else None]
    step = 0
    for period, mode in enumerate(seq):
        done = 0
        while done < n:
            todo = min(record_every - step % record_every, n - done)
            y_new = _flow(sys, mode, y, todo, dt)
            if not np.all(np.isfinite(y_new)):
                for j in range(todo):
                    y = _flow(sys, mode, y, 1, dt)
                    if not np.all(np.isfinite(y)):
                        raise BlowUpError(f"blow-up at substep {step + j}", step=step + j)
            y = y_new
            done += todo
            step += todo
            if step % record_every == 0 or (period == len(seq) - 1 and done == n):
                times.append(step * dt)
                states.append(y[0].copy())
                nxt = period if done < n else min(period + 1, len(seq) - 1)
                row_modes.append(seq[nxt])
    return Trace(np.array(times), np.array(states), seq, row_modes)


def simulate_batch(sys: DiscreteSystem, pattern: Pattern, Y0, dt: float) -> np.ndarray:
    """Final states of ``pattern`` applied to every row of ``Y0``."""
    n = substep_count(sys.tau, dt)
    Y = np.atleast_2d(np.asarray(Y0, dtype=float))
    for i in pattern.base_modes(sys.m):
        Y = _flow(sys, sys.modes[i], Y, n, dt)
    if not np.all(np.isfinite(Y)):
        raise BlowUpError("Euler simulation produced a non-finite state")
    return Y


def _rk4(sys, mode, y, nsteps, h):
    kind, theta, coeffs = _kernels.reaction_args(sys.reaction)
    Y = np.ascontiguousarray(np.atleast_2d(y), dtype=np.float64)
    out = _kernels.rk4_rows(Y, nsteps, h, sys.sigma, sys.inv_h2, boundary_term(sys, mode),
                            kind, theta, coeffs)
    return out.reshape(np.shape(y))


def reference_step(sys: DiscreteSystem, dt: float | None = None) -> float:
    """Largest step the reference integrator may use: ``min(dt/20, 1e-4 tau)``."""
    cap = 1e-4 * sys.tau
    return cap if dt is None else min(dt / 20.0, cap)


def reference_integrate(sys: DiscreteSystem, mode: Mode, y, horizon: float,
                        dt: float | None = None, check: bool = True) -> np.ndarray:
    """High-accuracy stand-in for the exact flow (classical RK4, fixed step).

    The step is at most :func:`reference_step`.  With ``check`` the step is
    halved once and the two results must agree to ``1e-9`` relative, else
    :class:`ConvergenceError`.
    """
    y = np.asarray(y, dtype=float)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if horizon == 0:
        return y.copy()
    hmax = reference_step(sys, dt)
    n = max(1, math.ceil(horizon / hmax))
    out = _rk4(sys, mode, y, n, horizon / n)
    if check:
        fine = _rk4(sys, mode, y, 2 * n, horizon / (2 * n))
        scale = max(float(np.max(np.abs(fine))), 1e-300)
        if float(np.max(np.abs(fine - out))) > REFERENCE_RTOL * scale:
            raise ConvergenceError("reference integrator failed the step-halving check")
        out = fine
    if not np.all(np.isfinite(out)):
        raise BlowUpError("reference integration produced a non-finite state")
    return out


def reference_pattern(sys: DiscreteSystem, pattern: Pattern, y, dt: float | None = None,
                      check: bool = False, samples_per_period: int = 1):
    """Reference flow under a pattern; returns ``(times, states)`` sampled
    ``samples_per_period`` times per switching period (plus ``t = 0``)."""
    y = np.asarray(y, dtype=float)
    times, states = [0.0], [y.copy()]
    t = 0.0
    sub = sys.tau / samples_per_period
    for i in pattern.base_modes(sys.m):
        for _ in range(samples_per_period):
            y = reference_integrate(sys, sys.modes[i], y, sub, dt=dt, check=check)
            t += sub
            times.append(t)
            states.append(y.copy())
    return np.array(times), np.array(states)


def write_trace_csv(trace: Trace, path) -> None:
    """Write ``t,y1..yM,u0,uL`` rows with 17 significant digits."""
    M = trace.states.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y{i}" for i in range(1, M + 1)] + ["u0", "uL"])
        for t, y, md in zip(trace.times, trace.states, trace.row_modes):
            u = (md.u0, md.uL) if md is not None else (math.nan, math.nan)
            w.writerow([f"{v:.17g}" for v in (t, *y, *u)])


def read_trace_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:-2], data[:, -2:]
