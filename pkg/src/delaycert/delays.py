"""Delay functions, feedback kernels, delay channels and their catalog.

For a delay tau with tau'(t) <= c < 1 the shifted time phi(s) = s - tau(s) is
strictly increasing, so the delayed-time integrals can be pulled back to real
time through phi^{-1} with Jacobian at most 1/(1 - c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import HistorySegment, StateSpace
from .errors import ConfigurationError, InversionError, StructuralError, ToleranceNotMetError
from .quadrature import QuadConfig, integrate


@dataclass(frozen=True, eq=False)
class DelayFunction:
    """tau(t) >= 0 with declared slope bound tau' <= c < 1.

    ``slope_lower`` is d >= 0 with tau' >= -d, when known; it bounds the
    Jacobian of phi from above and is only needed for tail estimates.
    ``tau`` must accept numpy arrays and arguments down to -tau(0).
    """

    tau: Callable
    c: float
    slope_lower: Optional[float] = 0.0
    name: str = "custom"
    tau0: float = field(init=False)

    def __post_init__(self):
        if not self.c < 1:
            raise ConfigurationError(f"delay slope bound c={self.c} must be < 1")
        object.__setattr__(self, "tau0", float(self.tau(0.0)))
        if self.tau0 < 0 or not math.isfinite(self.tau0):
            raise ConfigurationError(f"tau(0)={self.tau0} must be finite and nonnegative")

    def __call__(self, t):
        return self.tau(t)

    def validate(self, horizon: float, n: int = 1024) -> None:
        t = np.linspace(0.0, horizon, n)
        vals = np.asarray(self.tau(t), dtype=float) * np.ones_like(t)
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ConfigurationError(f"delay {self.name} is negative or non-finite on [0, {horizon}]")
        slopes = np.diff(vals) / np.diff(t)
        worst = float(slopes.max())
        if worst > self.c + 1e-6:
            raise ConfigurationError(
                f"delay {self.name}: finite-difference slope {worst:.6g} exceeds declared c={self.c}")
        if self.slope_lower is not None and float(slopes.min()) < -self.slope_lower - 1e-6:
            raise ConfigurationError(
                f"delay {self.name}: slope {slopes.min():.6g} below declared lower bound -{self.slope_lower}")

    def is_zero(self, horizon: float, n: int = 1024) -> bool:
        t = np.linspace(0.0, horizon, n)
        return bool(np.all(np.asarray(self.tau(t)) * np.ones_like(t) == 0.0))


@dataclass(frozen=True, eq=False)
class KernelCoefficient:
    """k(t), locally integrable; ``l1_tail(T)`` bounds the integral of |k| over [T, inf)."""

    k: Callable
    l1_tail: Optional[Callable[[float], float]] = None
    name: str = "custom"

    def __call__(self, t):
        return self.k(t)

    def validate(self, cfg: QuadConfig = QuadConfig(rel_tol=1e-8, abs_tol=1e-12)) -> None:
        try:
            integrate(lambda s: abs(float(self.k(s))), 0.0, 1.0, cfg)
        except ToleranceNotMetError as exc:
            raise ConfigurationError(f"kernel {self.name} is not integrable on [0, 1]: {exc}") from exc

    def scaled(self, factor: float) -> "KernelCoefficient":
        k = self.k
        tail = self.l1_tail
        return KernelCoefficient(lambda t: factor * k(t),
                                 None if tail is None else (lambda T: abs(factor) * tail(T)),
                                 f"{factor}*{self.name}")


class DelayChannel:
    """One feedback term k(t) B U(t - tau(t)) with its history for B U on [-tau(0), 0]."""

    def __init__(self, delay: DelayFunction, kernel: KernelCoefficient, op_matrix,
                 history: HistorySegment, space: StateSpace, op_norm_b: Optional[float] = None,
                 index: int = 0):
        self.delay = delay
        self.kernel = kernel
        self.op_matrix = np.array(op_matrix, dtype=float).reshape(space.dim, space.dim)
        self.op_matrix.setflags(write=False)
        self.index = index
        computed = space.op_norm(self.op_matrix)
        if op_norm_b is None:
            op_norm_b = computed
        elif op_norm_b < computed * (1 - 1e-9):
            raise ConfigurationError(
                f"channel {index}: declared b={op_norm_b} is below the operator norm {computed}")
        self.op_norm_b = float(op_norm_b)
        if history.dim != space.dim:
            raise StructuralError(f"channel {index}: history dimension {history.dim} != {space.dim}")
        if history.domain[0] > -delay.tau0 + 1e-12:
            raise StructuralError(f"channel {index}: history does not reach -tau(0) = {-delay.tau0}")
        history.channel = index
        self.history = history

    @property
    def c(self) -> float:
        return self.delay.c

    def __repr__(self):
        return (f"DelayChannel(index={self.index}, delay={self.delay.name}, kernel={self.kernel.name}, "
                f"b={self.op_norm_b:.6g})")


@dataclass(frozen=True, eq=False)
class DelayFamily:
    """Finite truncation of the countable channel family.

    ``tail_bound`` must dominate what the discarded channels would add to
    both integrals of the smallness condition; ``tail_supremum`` is their
    largest tau(0), if any.
    """

    channels: Sequence[DelayChannel] = ()
    tail_bound: float = 0.0
    tail_supremum: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.tail_bound >= 0:
            raise ConfigurationError("tail bound must be nonnegative")
        if self.tail_supremum is not None and not math.isfinite(self.tail_supremum):
            raise ConfigurationError("an unbounded supremum of initial delays is not supported")

    @property
    def tau_star(self) -> float:
        return family_tau_star(self)

    def __len__(self):
        return len(self.channels)

    def __iter__(self):
        return iter(self.channels)


def family_tau_star(fam: DelayFamily) -> float:
    if fam.tail_supremum is not None and not math.isfinite(fam.tail_supremum):
        raise ConfigurationError("an unbounded supremum of initial delays is not supported")
    tau = max((ch.delay.tau0 for ch in fam.channels), default=0.0)
    if fam.tail_supremum is not None:
        tau = max(tau, float(fam.tail_supremum))
    return tau


def phi(ch: DelayChannel, s: float) -> float:
    return s - float(ch.delay(s))


def phi_inverse(ch: DelayChannel, z: float, tol: Optional[float] = None) -> float:
    """s with |phi(s) - z| <= tol, by a bracketed Illinois (false position) iteration.

    phi has slope >= 1 - c > 0, so the root is unique and lies right of z.
    """
    if tol is None:
        tol = 1e-10 * (1 + abs(z))
    tau = ch.delay
    # phi(0) = -tau(0) <= z keeps the bracket in t >= 0, where tau is always defined
    lo = max(z, 0.0) if z >= -tau.tau0 else z
    f_lo = lo - float(tau(lo)) - z
    if f_lo > tol:
        raise InversionError(f"channel {ch.index}: phi({lo}) > z={z}; tau violates its bounds")
    if abs(f_lo) <= tol:
        return lo
    width = max(float(tau(lo)), tol)
    hi = lo + width
    f_hi = hi - float(tau(hi)) - z
    doublings = 0
    while f_hi < 0:
        doublings += 1
        if doublings > 64:
            raise InversionError(f"channel {ch.index}: no bracket for phi^-1({z}) after 64 doublings")
        lo, f_lo = hi, f_hi
        width *= 2
        hi = lo + width
        f_hi = hi - float(tau(hi)) - z
    if f_hi <= tol:
        return hi  # exact for a delay that is constant near lo
    side = 0
    for _ in range(400):
        s = (lo * f_hi - hi * f_lo) / (f_hi - f_lo)
        if not lo < s < hi:
            s = 0.5 * (lo + hi)
        f_s = s - float(tau(s)) - z
        if abs(f_s) <= tol:
            return s
        if f_s < 0:
            lo, f_lo = s, f_s
            if side == -1:
                f_hi *= 0.5
            side = -1
        else:
            hi, f_hi = s, f_s
            if side == 1:
                f_lo *= 0.5
            side = 1
        if hi - lo <= 4 * np.finfo(float).eps * max(abs(hi), 1.0):
            return 0.5 * (lo + hi)
    raise InversionError(f"channel {ch.index}: phi^-1({z}) did not converge")


def effective_weight(ch: DelayChannel, z: float, tol: Optional[float] = None) -> float:
    """|k(phi^{-1}(z))| / (1 - c)."""
    return abs(float(ch.kernel(phi_inverse(ch, z, tol)))) / (1.0 - ch.c)


# ---------------------------------------------------------------- catalog

def _req(spec: dict, key: str, what: str):
    if key not in spec:
        raise ConfigurationError(f"{what} '{spec.get('kind')}' needs parameter '{key}'")
    return float(spec[key])


def _table(spec: dict, what: str):
    pts = np.asarray(spec.get("points", []), dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2 or np.any(np.diff(pts[:, 0]) <= 0):
        raise ConfigurationError(f"{what} piecewise_table needs >= 2 [t, value] points with increasing t")
    return pts[:, 0].copy(), pts[:, 1].copy()


def make_delay(spec: dict, c: Optional[float] = None) -> DelayFunction:
    """Build a delay from a catalog entry; ``c`` overrides the natural slope bound."""
    kind = spec.get("kind")
    if kind == "constant":
        v = _req(spec, "value", "delay")
        tau, nat_c, d = (lambda t: v + 0.0 * np.asarray(t, dtype=float)), 0.0, 0.0
    elif kind == "linear":
        t0, m = _req(spec, "tau0", "delay"), _req(spec, "slope", "delay")
        tau, nat_c, d = (lambda t: t0 + m * np.asarray(t, dtype=float)), m, max(-m, 0.0)
    elif kind == "sinusoidal":
        mean, amp, w = _req(spec, "mean", "delay"), _req(spec, "amp", "delay"), _req(spec, "freq", "delay")
        ph = float(spec.get("phase", 0.0))
        if mean < abs(amp):
            raise ConfigurationError("sinusoidal delay needs mean >= |amp| to stay nonnegative")
        tau = lambda t: mean + amp * np.sin(w * np.asarray(t, dtype=float) + ph)  # noqa: E731
        nat_c = d = abs(amp * w)
    elif kind == "piecewise_table":
        ts, vs = _table(spec, "delay")
        if np.any(vs < 0):
            raise ConfigurationError("piecewise_table delay has negative values")
        slopes = np.diff(vs) / np.diff(ts)
        tau = lambda t: np.interp(t, ts, vs)  # noqa: E731
        nat_c, d = max(float(slopes.max()), 0.0), max(float(-slopes.min()), 0.0)
    else:
        raise ConfigurationError(f"unknown delay kind {kind!r}")
    if c is None:
        c = nat_c
    elif c < nat_c - 1e-12:
        raise ConfigurationError(f"declared c={c} is below the delay's own slope bound {nat_c}")
    return DelayFunction(tau, float(c), d, name=str(kind))


def make_kernel(spec: dict) -> KernelCoefficient:
    kind = spec.get("kind")
    tail = None
    if kind == "constant":
        v = _req(spec, "value", "kernel")
        k = lambda t: v + 0.0 * np.asarray(t, dtype=float)  # noqa: E731
        if v == 0:
            tail = lambda T: 0.0  # noqa: E731
    elif kind == "linear":
        k0, m = _req(spec, "k0", "kernel"), _req(spec, "slope", "kernel")
        k = lambda t: k0 + m * np.asarray(t, dtype=float)  # noqa: E731
        if k0 == 0 and m == 0:
            tail = lambda T: 0.0  # noqa: E731
    elif kind == "sinusoidal":
        mean, amp, w = _req(spec, "mean", "kernel"), _req(spec, "amp", "kernel"), _req(spec, "freq", "kernel")
        ph = float(spec.get("phase", 0.0))
        k = lambda t: mean + amp * np.sin(w * np.asarray(t, dtype=float) + ph)  # noqa: E731
        if mean == 0 and amp == 0:
            tail = lambda T: 0.0  # noqa: E731
    elif kind == "exp_decay_kernel":
        k0, lam = _req(spec, "k0", "kernel"), _req(spec, "rate", "kernel")
        if lam <= 0:
            raise ConfigurationError("exp_decay_kernel needs rate > 0")
        k = lambda t: k0 * np.exp(-lam * np.asarray(t, dtype=float))  # noqa: E731
        tail = lambda T: abs(k0) * math.exp(-lam * max(T, 0.0)) / lam  # noqa: E731
    elif kind == "poly_decay_kernel":
        k0, p = _req(spec, "k0", "kernel"), _req(spec, "power", "kernel")
        sh = float(spec.get("shift", 1.0))
        if p <= 1 or sh <= 0:
            raise ConfigurationError("poly_decay_kernel needs power > 1 and shift > 0")
        k = lambda t: k0 * (1.0 + np.asarray(t, dtype=float) / sh) ** (-p)  # noqa: E731
        tail = lambda T: abs(k0) * sh / (p - 1) * (1.0 + max(T, 0.0) / sh) ** (1 - p)  # noqa: E731
    elif kind == "piecewise_table":
        # linear between knots, zero after the last knot
        ts, vs = _table(spec, "kernel")
        t_end = ts[-1]
        k = lambda t: np.where(np.asarray(t) <= t_end, np.interp(t, ts, vs), 0.0)  # noqa: E731
        seg_max = np.maximum(np.abs(vs[:-1]), np.abs(vs[1:]))
        seg_len = np.diff(ts)

        def tail(T):
            left = np.clip(ts[1:] - max(T, 0.0), 0.0, seg_len)
            return float(np.sum(seg_max * left))
    else:
        raise ConfigurationError(f"unknown kernel kind {kind!r}")
    if "l1_tail" in spec:
        raise ConfigurationError("l1_tail is derived from the kernel kind and cannot be overridden")
    return KernelCoefficient(k, tail, name=str(kind))


def make_time_profile(spec: dict) -> Callable[[float], float]:
    """Scalar history profile h(s) on s <= 0."""
    kind = spec.get("kind")
    if kind == "zero":
        return lambda s: 0.0
    if kind == "constant":
        v = _req(spec, "value", "history")
        return lambda s: v
    if kind == "linear":
        v, m = _req(spec, "value", "history"), _req(spec, "slope", "history")
        return lambda s: v + m * s
    if kind == "exponential":
        v, r = _req(spec, "value", "history"), _req(spec, "rate", "history")
        return lambda s: v * math.exp(r * s)
    if kind == "sinusoidal":
        mean, amp, w = _req(spec, "mean", "history"), _req(spec, "amp", "history"), _req(spec, "freq", "history")
        return lambda s: mean + amp * math.sin(w * s)
    if kind == "piecewise_table":
        ts, vs = _table(spec, "history")
        return lambda s: float(np.interp(s, ts, vs))
    raise ConfigurationError(f"unknown history kind {kind!r}")
