"""Two-to-one spatial model reduction by pair-summing projection.

A full system on ``M2 = 2 M1`` nodes is compared with the reduced system on
``M1`` nodes through ``Pi`` (rows ``(1, 1)/sqrt(2)`` on consecutive node
pairs).  The projected full trajectory stays within ``K2 sigma / |lambda|``
of the reduced one when both run the same modes, where ``K2`` bounds
``|(Pi Lap_h2 - Lap_h1 Pi) w|`` over the unit box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import osl_constant
from .errors import CapacityError, ConfigError
from .integrate import Pattern, simulate_pattern
from .model import DiscreteSystem

VERTEX_CAP = 24
_VERTEX_BLOCK = 1 << 16


def build_projection(M1: int) -> np.ndarray:
    if M1 < 1:
        raise ConfigError("M1 must be >= 1")
    Pi = np.zeros((M1, 2 * M1))
    r = np.arange(M1)
    Pi[r, 2 * r] = Pi[r, 2 * r + 1] = 1.0 / math.sqrt(2.0)
    return Pi


def project_state(w) -> np.ndarray:
    """``Pi w`` for a state (or batch of states) of even dimension."""
    w = np.asarray(w, dtype=float)
    if w.shape[-1] % 2:
        raise ValueError("full-system dimension must be even")
    return (w[..., 0::2] + w[..., 1::2]) / math.sqrt(2.0)


def _laplacian_matrix(M: int, h: float) -> np.ndarray:
    A = -2.0 * np.eye(M) + np.eye(M, k=1) + np.eye(M, k=-1)
    return A / (h * h)


def commutation_defect(full: DiscreteSystem, reduced: DiscreteSystem):
    """``D = Pi Lap_h2 - Lap_h1 Pi`` and a per-row list of its non-zeros.

    The matrices involved are tiny (``M1 x M2``), so they are formed densely
    here and only here.
    """
    _check_pair(full, reduced)
    Pi = build_projection(reduced.M)
    D = Pi @ _laplacian_matrix(full.M, full.h) - _laplacian_matrix(reduced.M, reduced.h) @ Pi
    rows = []
    for i, row in enumerate(D):
        cols = np.nonzero(row)[0]
        rows.append({"row": i, "cols": cols.tolist(), "values": row[cols].tolist()})
    return D, rows


def k2_constant(D, method: str = "vertex-enumeration") -> float:
    """``sup_{w in [0,1]^M2} |D w|``.

    ``vertex-enumeration`` is exact (a convex function peaks at a vertex);
    ``interval-bound`` takes per-row interval maxima and is an upper bound.
    """
    D = np.asarray(D, dtype=float)
    M2 = D.shape[1]
    if method == "interval-bound":
        pos = np.where(D > 0, D, 0.0).sum(axis=1)
        neg = np.where(D < 0, D, 0.0).sum(axis=1)
        return float(np.linalg.norm(np.maximum(pos, -neg)))
    if method != "vertex-enumeration":
        raise ConfigError(f"unknown K2 method {method!r}")
    if M2 > VERTEX_CAP:
        raise CapacityError(f"vertex enumeration capped at dimension {VERTEX_CAP}")
    best = 0.0
    bits = np.arange(M2)
    for s in range(0, 1 << M2, _VERTEX_BLOCK):
        idx = np.arange(s, min(s + _VERTEX_BLOCK, 1 << M2))
        W = ((idx[:, None] >> bits) & 1).astype(float)
        best = max(best, float(np.sqrt(((W @ D.T) ** 2).sum(axis=1)).max()))
    return best


def reduction_error_bound(k2: float, sigma: float, lambda_h1: float) -> float:
    if not lambda_h1 < 0:
        raise ValueError(f"reduction bound needs a negative OSL constant, got {lambda_h1!r}")
    return k2 * sigma / abs(lambda_h1)


def _check_pair(full: DiscreteSystem, reduced: DiscreteSystem):
    if full.M != 2 * reduced.M:
        raise ConfigError(f"full dimension {full.M} must be twice the reduced {reduced.M}")
    same = (full.L == reduced.L and full.sigma == reduced.sigma and full.tau == reduced.tau
            and full.modes == reduced.modes and full.reaction == reduced.reaction)
    if not same:
        raise ConfigError("full and reduced systems must share L, sigma, reaction, modes and tau")


@dataclass
class ReductionPair:
    full: DiscreteSystem
    reduced: DiscreteSystem
    defect: np.ndarray
    k2: float
    lambda_h1: float
    bound: float

    @property
    def projection(self) -> np.ndarray:
        return build_projection(self.reduced.M)


def build_pair(full: DiscreteSystem, reduced: DiscreteSystem | None = None,
               lambda_h1: float | None = None, k2_method: str | None = None) -> ReductionPair:
    """Assemble the pair; ``lambda_h1`` defaults to the reduced system's OSL constant."""
    if reduced is None:
        if full.M % 2:
            raise ConfigError("full-system dimension must be even")
        reduced = full.replace(M=full.M // 2)
    D, _ = commutation_defect(full, reduced)
    if k2_method is None:
        k2_method = "vertex-enumeration" if full.M <= VERTEX_CAP else "interval-bound"
    k2 = k2_constant(D, k2_method)
    lam = osl_constant(reduced) if lambda_h1 is None else float(lambda_h1)
    return ReductionPair(full, reduced, D, k2, lam, reduction_error_bound(k2, full.sigma, lam))


@dataclass
class CrossReport:
    full_distance: float        # |y2(T) - y2_f|
    projected_distance: float   # |Pi y2(T) - y1_f|
    reduced_distance: float     # |y1(T) - y1_f|
    a_priori_bound: float       # reduced_distance + K2 sigma / |lambda_h1|
    full_final: np.ndarray
    reduced_final: np.ndarray

    @property
    def within_bound(self) -> bool:
        return self.projected_distance <= self.a_priori_bound

    def to_dict(self) -> dict:
        return {"full_distance": self.full_distance, "projected_distance": self.projected_distance,
                "reduced_distance": self.reduced_distance, "a_priori_bound": self.a_priori_bound,
                "within_bound": self.within_bound}


def cross_apply(pair: ReductionPair, pattern: Pattern, w0, y1_f, dt: float, y1_0=None,
                y2_f=None, traces: bool = False):
    """Run a pattern synthesized on the reduced system on the full system.

    ``y1_0`` is the reduced initial state (the continuous profile sampled on
    the reduced nodes, never ``Pi w0``); ``y2_f`` defaults to ``y1_f``'s
    constant broadcast when ``y1_f`` is constant.
    """
    y1_f = np.asarray(y1_f, dtype=float)
    if y2_f is None:
        if not np.all(y1_f == y1_f[0]):
            raise ConfigError("y2_f must be given when y1_f is not constant")
        y2_f = np.full(pair.full.M, y1_f[0])
    y2_f = np.asarray(y2_f, dtype=float)
    full_tr = simulate_pattern(pair.full, pattern, w0, dt, record_every=None)
    y2T = full_tr.final
    red_d = math.nan
    red_tr = None
    if y1_0 is not None:
        red_tr = simulate_pattern(pair.reduced, pattern, y1_0, dt)
        red_d = float(np.linalg.norm(red_tr.final - y1_f))
        red_final = red_tr.final
    else:
        red_final = np.full(pair.reduced.M, math.nan)
    report = CrossReport(
        full_distance=float(np.linalg.norm(y2T - y2_f)),
        projected_distance=float(np.linalg.norm(project_state(y2T) - y1_f)),
        reduced_distance=red_d,
        a_priori_bound=red_d + pair.bound,
        full_final=y2T,
        reduced_final=red_final,
    )
    if traces:
        return report, full_tr, red_tr
    return report
