"""Method-of-lines discretization of a 1D reaction-diffusion equation.

The PDE ``y_t = sigma * y_xx + f(y)`` on ``[0, L]`` with Dirichlet data
``y(t, 0) = u0`` and ``y(t, L) = uL`` becomes, on ``M`` interior nodes
``x_j = j*h`` with ``h = L/(M+1)``, the ODE system::

    dy/dt = sigma * Lap_h y + sigma * phi_h(u) + f(y)

``Lap_h`` is the tridiagonal stencil ``(1, -2, 1)/h**2`` and
``phi_h(u) = (u0, 0, ..., 0, uL)/h**2``.  The Laplacian is never formed as a
dense matrix.

State vectors have shape ``(M,)``; batches of states have shape ``(n, M)``
(one state per row).  All functions accept either.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigError

MAX_POLY_DEGREE = 6
DEFAULT_EXTENDED_CAP = 10**5


@dataclass(frozen=True)
class ReactionSpec:
    """Autonomous, componentwise reaction term ``f``.

    ``kind="bistable-cubic"`` evaluates ``y(1-y)(y-theta)``;
    ``kind="polynomial"`` evaluates ``sum(coeffs[j] * y**j)``.
    """

    kind: str = "bistable-cubic"
    theta: float = 0.3
    coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if self.kind == "bistable-cubic":
            if not math.isfinite(self.theta):
                raise ConfigError("reaction theta must be finite")
        elif self.kind == "polynomial":
            object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
            if len(self.coeffs) == 0:
                object.__setattr__(self, "coeffs", (0.0,))
            if len(self.coeffs) - 1 > MAX_POLY_DEGREE:
                raise ConfigError(f"polynomial degree capped at {MAX_POLY_DEGREE}")
            if not all(math.isfinite(c) for c in self.coeffs):
                raise ConfigError("polynomial coefficients must be finite")
        else:
            raise ConfigError(f"unknown reaction kind {self.kind!r}")

    @classmethod
    def zero(cls) -> "ReactionSpec":
        return cls(kind="polynomial", coeffs=(0.0,))

    def poly_coeffs(self) -> np.ndarray:
        """Ascending-degree coefficients of ``f`` (the cubic expanded)."""
        if self.kind == "bistable-cubic":
            th = self.theta
            return np.array([0.0, -th, 1.0 + th, -1.0])
        return np.array(self.coeffs, dtype=float)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "bistable-cubic":
            return y * (1.0 - y) * (y - self.theta)
        c = self.coeffs
        r = np.full_like(y, c[-1])
        for a in c[-2::-1]:
            r = r * y + a
        return r

    def derivative(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "bistable-cubic":
            th = self.theta
            return -3.0 * y * y + 2.0 * (1.0 + th) * y - th
        d = np.polynomial.polynomial.polyder(self.poly_coeffs())
        return np.polynomial.polynomial.polyval(y, d)

    def to_dict(self) -> dict:
        if self.kind == "bistable-cubic":
            return {"kind": self.kind, "theta": self.theta}
        return {"kind": self.kind, "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class Mode:
    """Constant boundary control pair ``(u0, uL)``."""

    u0: float
    uL: float

    def __post_init__(self):
        for name in ("u0", "uL"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0.0 or v > 1.0:
                raise ConfigError(f"mode component {name}={v!r} outside [0, 1]")


@dataclass(frozen=True)
class ExtendedMode:
    """A block of ``p`` base modes applied back to back (indices into ``modes``)."""

    parts: tuple[int, ...]

    @property
    def p(self) -> int:
        return len(self.parts)


@dataclass(frozen=True)
class DiscreteSystem:
    M: int
    L: float
    sigma: float
    reaction: ReactionSpec
    modes: tuple[Mode, ...]
    tau: float
    h: float = field(init=False)

    def __post_init__(self):
        if isinstance(self.M, bool) or not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ConfigError(f"M must be a positive integer, got {self.M!r}")
        for name in ("L", "sigma", "tau"):
            v = getattr(self, name)
            if not isinstance(v, (int, float, np.floating)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be finite, got {v!r}")
        if self.L <= 0 or self.tau <= 0:
            raise ConfigError("L and tau must be positive")
        if self.sigma < 0:
            raise ConfigError("sigma must be non-negative")
        modes = tuple(self.modes)
        if not modes:
            raise ConfigError("mode list must be non-empty")
        if not all(isinstance(m, Mode) for m in modes):
            raise ConfigError("modes must be Mode instances")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "h", self.L / (self.M + 1))

    @property
    def inv_h2(self) -> float:
        return 1.0 / (self.h * self.h)

    @property
    def m(self) -> int:
        return len(self.modes)

    def nodes(self) -> np.ndarray:
        """Interior node positions ``x_j = j*h``."""
        return self.h * np.arange(1, self.M + 1)

    def replace(self, **changes) -> "DiscreteSystem":
        kw = dict(M=self.M, L=self.L, sigma=self.sigma, reaction=self.reaction,
                  modes=self.modes, tau=self.tau)
        kw.update(changes)
        return DiscreteSystem(**kw)


def _as_mode(m) -> Mode:
    if isinstance(m, Mode):
        return m
    if isinstance(m, Mapping):
        return Mode(float(m["u0"]), float(m["uL"]))
    u0, uL = m
    return Mode(float(u0), float(uL))


def _as_reaction(r) -> ReactionSpec:
    if isinstance(r, ReactionSpec):
        return r
    if r is None:
        return ReactionSpec()
    r = dict(r)
    kind = r.pop("kind", "bistable-cubic")
    if kind == "bistable-cubic":
        return ReactionSpec(kind=kind, theta=float(r.pop("theta", 0.3)))
    return ReactionSpec(kind=kind, coeffs=tuple(r.pop("coeffs", (0.0,))))


def build_system(config: Mapping | None = None, **kwargs) -> DiscreteSystem:
    """Build a :class:`DiscreteSystem` from a mapping and/or keyword arguments.

    Recognised keys: ``M``, ``L``, ``sigma``, ``reaction`` (mapping or
    :class:`ReactionSpec`), ``modes`` (sequence of pairs or :class:`Mode`),
    ``tau``.
    """
    cfg = dict(config or {})
    cfg.update(kwargs)
    try:
        M = cfg["M"]
        L = float(cfg["L"])
        sigma = float(cfg.get("sigma", 1.0))
        tau = float(cfg["tau"])
        modes = tuple(_as_mode(m) for m in cfg["modes"])
    except KeyError as exc:
        raise ConfigError(f"missing model parameter {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid model parameter: {exc}") from None
    if isinstance(M, float) and M.is_integer():
        M = int(M)
    if not sigma > 0:
        raise ConfigError(f"sigma must be positive, got {sigma!r}")
    return DiscreteSystem(M=M, L=L, sigma=sigma, reaction=_as_reaction(cfg.get("reaction")),
                          modes=modes, tau=tau)


def _check_dim(sys: DiscreteSystem, y: np.ndarray):
    if y.ndim not in (1, 2) or y.shape[-1] != sys.M:
        raise ValueError(f"state has shape {y.shape}, expected (..., {sys.M})")


def _stencil(y: np.ndarray) -> np.ndarray:
    # (y[i-1] - 2 y[i]) + y[i+1], zero Dirichlet padding
    out = -2.0 * y
    out[..., 1:] += y[..., :-1]
    out[..., :-1] += y[..., 1:]
    return out


def laplacian_apply(sys: DiscreteSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    _check_dim(sys, y)
    return _stencil(y) * sys.inv_h2


def boundary_input(sys: DiscreteSystem, mode: Mode) -> np.ndarray:
    """``phi_h(u)``: boundary data injected into the first and last nodes."""
    b = np.zeros(sys.M)
    b[0] += mode.u0
    b[-1] += mode.uL
    return b * sys.inv_h2


def boundary_term(sys: DiscreteSystem, mode: Mode) -> np.ndarray:
    """``sigma * phi_h(u)``, the exact vector added in every field evaluation."""
    return sys.sigma * boundary_input(sys, mode)


def vector_field(sys: DiscreteSystem, mode: Mode, y) -> np.ndarray:
    """Right-hand side ``f_u(y)``.

    The operation order ``(sigma*Lap_h y + b) + f(y)`` is shared with the
    compiled Euler kernel so both agree bit for bit.
    """
    y = np.asarray(y, dtype=float)
    _check_dim(sys, y)
    out = sys.sigma * (_stencil(y) * sys.inv_h2)
    out += boundary_term(sys, mode)
    out += sys.reaction(y)
    return out


def jacobian_apply(sys: DiscreteSystem, y, v) -> np.ndarray:
    """``J_u(y) v`` with ``J_u = sigma*Lap_h + diag(f'(y))``."""
    y = np.asarray(y, dtype=float)
    v = np.asarray(v, dtype=float)
    return sys.sigma * sys.inv_h2 * _stencil(v) + sys.reaction.derivative(y) * v


def extend_modes(sys: DiscreteSystem, p: int, cap: int = DEFAULT_EXTENDED_CAP) -> list[ExtendedMode]:
    if p < 1:
        raise ConfigError("extended mode length p must be >= 1")
    count = sys.m ** p
    if count > cap:
        raise ConfigError(f"{sys.m}**{p} = {count} extended modes exceeds cap {cap}")
    return [ExtendedMode(parts) for parts in itertools.product(range(sys.m), repeat=p)]


def decode_extended(index: int, m: int, p: int) -> tuple[int, ...]:
    """Base-mode indices of extended mode ``index`` (first part most significant)."""
    parts = []
    for _ in range(p):
        index, r = divmod(index, m)
        parts.append(r)
    return tuple(reversed(parts))


def sample_profile(sys: DiscreteSystem, a: float, b: float) -> np.ndarray:
    """Sample ``a*x/L + b*(1 - x/L)`` at the interior nodes."""
    x = sys.nodes() / sys.L
    return a * x + b * (1.0 - x)
