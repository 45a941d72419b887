"""Certified per-mode constants and the Euler error ball.

Everything here is a closed-form evaluation or an interval bound over the
unit box ``S = [0, 1]^M``.  The error ball ``delta(t)`` bounds the distance
between the exact flow started at ``y0`` and one explicit Euler step of
length ``t`` started at ``z0`` with ``|y0 - z0| <= mu``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, HypothesisError
from .model import DiscreteSystem, Mode, ReactionSpec, jacobian_apply, vector_field

ZERO_LAMBDA = 1e-12
NEGATIVE_GUARD = 1e-12
CURVATURE_SAFETY = 1.2
_SAMPLES_1D = 4097

C_STRATEGIES = ("definition-literal", "sampled-curvature", "explicit")


# --- reaction term on [0, 1] -------------------------------------------------

def _poly_abs_sum_derivative(coeffs: np.ndarray) -> float:
    """Upper bound of ``|g'|`` on ``[0, 1]`` for ``g`` with ascending coeffs."""
    return float(sum(j * abs(a) for j, a in enumerate(coeffs)))


def _sampled_max(coeffs: np.ndarray, absolute: bool) -> float:
    ys = np.linspace(0.0, 1.0, _SAMPLES_1D)
    vals = np.polynomial.polynomial.polyval(ys, coeffs)
    if absolute:
        vals = np.abs(vals)
    pad = _poly_abs_sum_derivative(coeffs) * 0.5 / (_SAMPLES_1D - 1)
    return float(vals.max() + pad)


def _cubic_critical(theta: float) -> np.ndarray:
    # roots of f'(y) = -3y^2 + 2(1+theta)y - theta inside [0, 1]
    disc = 4.0 * (1.0 + theta) ** 2 - 12.0 * theta
    if disc < 0:
        return np.empty(0)
    r = math.sqrt(disc)
    roots = np.array([(2.0 * (1.0 + theta) - r) / 6.0, (2.0 * (1.0 + theta) + r) / 6.0])
    return roots[(roots >= 0.0) & (roots <= 1.0)]


def reaction_osl(spec: ReactionSpec) -> float:
    """Largest slope ``max f'`` on ``[0, 1]``, the scalar OSL constant of ``f``."""
    if spec.kind == "bistable-cubic":
        candidates = [0.0, 1.0, min(max((1.0 + spec.theta) / 3.0, 0.0), 1.0)]
        return float(max(spec.derivative(np.array(candidates))))
    c = spec.poly_coeffs()
    d = np.polynomial.polynomial.polyder(c)
    if not np.any(d):
        return 0.0
    return _sampled_max(d, absolute=False)


def reaction_slope_bound(spec: ReactionSpec) -> float:
    """``max |f'|`` on ``[0, 1]``."""
    if spec.kind == "bistable-cubic":
        candidates = [0.0, 1.0, min(max((1.0 + spec.theta) / 3.0, 0.0), 1.0)]
        return float(max(np.abs(spec.derivative(np.array(candidates)))))
    d = np.polynomial.polynomial.polyder(spec.poly_coeffs())
    if not np.any(d):
        return 0.0
    return _sampled_max(d, absolute=True)


def reaction_sup(spec: ReactionSpec) -> float:
    """``max |f|`` on ``[0, 1]``."""
    if spec.kind == "bistable-cubic":
        ys = np.concatenate([[0.0, 1.0], _cubic_critical(spec.theta)])
        return float(np.abs(spec(ys)).max())
    c = spec.poly_coeffs()
    if not np.any(c):
        return 0.0
    return _sampled_max(c, absolute=True)


# --- stencil spectrum ----------------------------------------------------------

def laplacian_max_eigenvalue(M: int, h: float) -> float:
    """Largest (least negative) eigenvalue ``(2/h^2)(cos(pi/(M+1)) - 1)``."""
    s = math.sin(math.pi / (2.0 * (M + 1)))
    return -4.0 * s * s / (h * h)


def laplacian_norm(M: int, h: float) -> float:
    """Spectral norm ``(2/h^2)(1 - cos(M pi/(M+1)))``."""
    s = math.sin(M * math.pi / (2.0 * (M + 1)))
    return 4.0 * s * s / (h * h)


# --- per-mode constants ------------------------------------------------------

def osl_constant(sys: DiscreteSystem, mode: Mode | None = None) -> float:
    """A valid OSL constant of ``f_u`` on ``S``; the boundary term cancels, so
    the value is the same for every mode."""
    return sys.sigma * laplacian_max_eigenvalue(sys.M, sys.h) + reaction_osl(sys.reaction)


def lipschitz_constant(sys: DiscreteSystem, mode: Mode | None = None) -> float:
    return sys.sigma * laplacian_norm(sys.M, sys.h) + reaction_slope_bound(sys.reaction)


def sup_field_norm(sys: DiscreteSystem, mode: Mode) -> float:
    """Interval-arithmetic bound on ``sup_{y in S} |f_u(y)|``.

    Per component the stencil sum ranges over ``[-2 + b, n_i + b]`` where
    ``n_i`` counts interior neighbours and ``b`` is the boundary data entering
    that node.
    """
    M = sys.M
    nbrs = np.full(M, 2.0)
    nbrs[0] -= 1.0
    nbrs[-1] -= 1.0
    b = np.zeros(M)
    b[0] += mode.u0
    b[-1] += mode.uL
    if M == 1:
        nbrs[:] = 0.0
    lo = -2.0 + b
    hi = nbrs + b
    comp = sys.sigma * sys.inv_h2 * np.maximum(np.abs(lo), np.abs(hi)) + reaction_sup(sys.reaction)
    return float(np.linalg.norm(comp))


def c_constant(sys: DiscreteSystem, mode: Mode, strategy: str = "definition-literal",
               value: float | None = None, samples: int = 4096, seed: int = 0) -> float:
    """The curvature constant ``C_u`` under one of three strategies.

    ``definition-literal``
        ``L_u * sup |f_u|``, sound but conservative.
    ``sampled-curvature``
        ``1.2 * max |J_u(y) f_u(y)|`` over random states and box vertices;
        an estimate of ``sup |d f_u(y(t))/dt|``, not a certificate.
    ``explicit``
        ``value`` as given.
    """
    if strategy == "definition-literal":
        return lipschitz_constant(sys, mode) * sup_field_norm(sys, mode)
    if strategy == "sampled-curvature":
        rng = np.random.default_rng(seed)
        ys = rng.random((samples, sys.M))
        if sys.M <= 12:
            verts = ((np.arange(2 ** sys.M)[:, None] >> np.arange(sys.M)) & 1).astype(float)
            ys = np.vstack([ys, verts])
        f = vector_field(sys, mode, ys)
        jf = jacobian_apply(sys, ys, f)
        return CURVATURE_SAFETY * float(np.linalg.norm(jf, axis=1).max())
    if strategy == "explicit":
        if value is None or not value > 0 or not math.isfinite(value):
            raise ConfigError(f"explicit C must be a positive number, got {value!r}")
        return float(value)
    raise ConfigError(f"unknown C strategy {strategy!r}")


# --- the error ball -----------------------------------------------------------

def _exp_tail3(x: float) -> float:
    """``e^x - 1 - x - x^2/2`` without cancellation near zero."""
    if abs(x) < 0.5:
        term = x * x * x / 6.0
        total = term
        n = 3
        while abs(term) > 1e-18 * abs(total):
            n += 1
            term *= x / n
            total += term
        return total
    return math.expm1(x) - x - 0.5 * x * x


def delta_bound(lam: float, c: float, mu: float, t: float) -> float:
    """Radius ``delta(t)`` of the exact-vs-Euler error ball.

    The three branches (``lam < 0``, ``lam == 0``, ``lam > 0``) are the
    published closed forms.  Their polynomial-exponential brackets are all of
    the form ``k * (e^x - 1 - x - x^2/2)`` and are evaluated that way to avoid
    cancellation when ``|lam| t`` is small.  ``|lam| < 1e-12`` routes to the
    zero branch.
    """
    if c < 0 or mu < 0 or t < 0:
        raise ValueError("delta_bound needs c, mu, t >= 0")
    if abs(lam) < ZERO_LAMBDA:
        # mu^2 e^t + C^2 (-t^2 - 2t + 2(e^t - 1))
        bracket = mu * mu * math.exp(t) + c * c * 2.0 * _exp_tail3(t)
    elif lam < 0:
        # mu^2 e^{lt} + C^2/l^2 (t^2 + 2t/l + 2/l^2 (1 - e^{lt}))
        x = lam * t
        bracket = mu * mu * math.exp(x) - 2.0 * c * c * _exp_tail3(x) / lam**4
    else:
        # mu^2 e^{3lt} + C^2/(3l^2) (-t^2 - 2t/(3l) + 2/(9l^2)(e^{3lt} - 1))
        x = 3.0 * lam * t
        bracket = mu * mu * math.exp(x) + 2.0 * c * c * _exp_tail3(x) / (27.0 * lam**4)
    if bracket < 0:
        if bracket < -NEGATIVE_GUARD:
            raise ArithmeticError(f"negative error-ball bracket {bracket!r}")
        bracket = 0.0
    return math.sqrt(bracket)


def stability_params(lam: float, c: float, e0: float) -> tuple[float, float, float]:
    """Return ``(G, alpha, tau_max)`` for which ``delta_{e0}(t) <= e0`` on
    ``[0, tau_max]``.

    Raises:
        HypothesisError: if ``lam >= 0`` or ``|lam| G / 4 >= 1``.
    """
    if not lam < 0:
        raise HypothesisError(f"OSL constant {lam!r} is not negative")
    if not (c > 0 and e0 > 0):
        raise ValueError("stability_params needs c > 0 and e0 > 0")
    g = math.sqrt(3.0) * e0 * abs(lam) / c
    a = abs(lam) * g / 4.0
    if a >= 1.0:
        raise HypothesisError(f"|lambda| G / 4 = {a!r} >= 1")
    # 1 + a - sqrt(1 + a^2), rearranged for small a
    alpha = a - a * a / (1.0 + math.sqrt(1.0 + a * a))
    return g, alpha, g * (1.0 - alpha)


# --- hypothesis check ------------------------------------------------------------

@dataclass(frozen=True)
class ModeBounds:
    mode: Mode
    lam: float
    lipschitz: float
    c_const: float
    g_const: float
    alpha: float
    tau_max: float

    @property
    def stable(self) -> bool:
        return self.lam < 0 and abs(self.lam) * self.g_const / 4.0 < 1.0

    def to_dict(self) -> dict:
        return {"u0": self.mode.u0, "uL": self.mode.uL, "lambda": self.lam,
                "lipschitz": self.lipschitz, "c": self.c_const, "g": self.g_const,
                "alpha": self.alpha, "tau_max": self.tau_max}


@dataclass(frozen=True)
class HypothesisReport:
    modes: tuple[ModeBounds, ...]
    e0: float
    satisfied: bool
    delta_t: float | None
    substeps_per_tau: int | None
    reasons: tuple[str, ...] = ()

    @property
    def min_tau_max(self) -> float:
        return min(b.tau_max for b in self.modes)

    def to_dict(self) -> dict:
        return {"modes": [b.to_dict() for b in self.modes], "e0": self.e0,
                "delta_t": self.delta_t, "substeps": self.substeps_per_tau,
                "satisfied": self.satisfied, "reasons": list(self.reasons)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)


def initial_error(e0_mode: str, M: int, eta: float, value: float | None = None) -> float:
    """Resolve the initial error from its configured mode.

    ``cell_radius`` is ``sqrt(M) eta / 2`` (the representative radius),
    ``half_spacing`` is ``eta / 2``, ``explicit`` uses ``value``.
    """
    if e0_mode == "cell_radius":
        return math.sqrt(M) * eta / 2.0
    if e0_mode == "half_spacing":
        return eta / 2.0
    if e0_mode == "explicit":
        if value is None or not value > 0:
            raise ConfigError("explicit e0 must be positive")
        return float(value)
    raise ConfigError(f"unknown e0 mode {e0_mode!r}")


def check_hypothesis(sys: DiscreteSystem, e0: float, c_strategy: str = "definition-literal",
                     explicit_c: Sequence[float] | float | None = None,
                     explicit_lambda: float | None = None, substeps: int | None = None,
                     strict: bool = True) -> HypothesisReport:
    """Compute every mode's constants and pick the elementary Euler step.

    The step is ``tau / n`` with ``n`` the smallest integer such that
    ``tau / n <= min tau_max``, unless ``substeps`` fixes ``n`` (which is then
    only verified).  ``explicit_lambda`` replaces the computed OSL constant for
    every mode; ``explicit_c`` gives one value per mode, or one for all.

    With ``strict`` (the default) an unsatisfiable hypothesis raises
    :class:`HypothesisError` carrying the report.
    """
    if not e0 > 0:
        raise ValueError("e0 must be positive")
    if c_strategy == "explicit":
        if explicit_c is None:
            raise ConfigError("c_strategy 'explicit' needs explicit_c")
        cs = [float(explicit_c)] * sys.m if np.isscalar(explicit_c) else [float(v) for v in explicit_c]
        if len(cs) != sys.m:
            raise ConfigError(f"explicit_c has {len(cs)} entries for {sys.m} modes")
    else:
        cs = [None] * sys.m

    reasons = []
    per_mode = []
    for mode, cv in zip(sys.modes, cs):
        lam = osl_constant(sys, mode) if explicit_lambda is None else float(explicit_lambda)
        lip = lipschitz_constant(sys, mode)
        c = c_constant(sys, mode, c_strategy, value=cv)
        g = alpha = tmax = math.nan
        if not lam < 0:
            reasons.append(f"mode ({mode.u0}, {mode.uL}): lambda = {lam:.6g} is not negative")
        elif not c > 0:
            reasons.append(f"mode ({mode.u0}, {mode.uL}): C = {c!r} is not positive")
        else:
            g = math.sqrt(3.0) * e0 * abs(lam) / c
            try:
                g, alpha, tmax = stability_params(lam, c, e0)
            except HypothesisError as exc:
                reasons.append(f"mode ({mode.u0}, {mode.uL}): {exc}")
        per_mode.append(ModeBounds(mode, lam, lip, c, g, alpha, tmax))

    delta_t = n = None
    if not reasons:
        tmin = min(b.tau_max for b in per_mode)
        if substeps is None:
            n = max(1, math.ceil(sys.tau / tmin))
            while sys.tau / n > tmin:
                n += 1
        else:
            n = int(substeps)
            if n < 1:
                raise ConfigError("substeps must be >= 1")
        delta_t = sys.tau / n
        if delta_t > tmin:
            reasons.append(f"step tau/{n} = {delta_t:.6g} exceeds tau_max = {tmin:.6g}")

    report = HypothesisReport(tuple(per_mode), float(e0), not reasons, delta_t, n, tuple(reasons))
    if strict and not report.satisfied:
        raise HypothesisError("; ".join(reasons), report)
    return report
