"""Finite-dimensional instances: scalar testbed, damped wave, viscoelastic wave and plate.

All PDE models live on (0, 1) with n_x interior nodes, h = 1/(n_x + 1). The
memory models carry the history variable eta(s) = u(t) - u(t - s) on the
nodes s_j = j ds, j = 1..n_s (eta(0) = 0 is the inflow boundary), transported
by first-order upwinding. With trapezoid weights rho_j = w_j mu(s_j), which
are nonincreasing in j, the semi-discrete generator is dissipative in the
energy inner product

    (1 - mu~) h u^T K u + h v^T v + sum_j rho_j h eta_j^T K eta_j

where K is the stiffness (-Laplacian, or the clamped biharmonic for the plate).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .core import HistorySegment, StateSpace
from .delays import DelayChannel, DelayFamily, DelayFunction, KernelCoefficient
from .errors import ConfigurationError
from .semigroup import Generator, certify_growth_bound
from .system import NonlinearMap, SystemSpec


# ------------------------------------------------------------------ stencils

def dirichlet_stiffness(n: int) -> np.ndarray:
    """-Laplacian with homogeneous Dirichlet rows, h = 1/(n+1)."""
    h = 1.0 / (n + 1)
    k = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
    return k / h**2


def clamped_biharmonic(n: int) -> np.ndarray:
    """5-point d^4/dx^4 with u = u' = 0 at both ends (ghost node u_{-1} = u_1)."""
    if n < 5:
        raise ConfigurationError(f"clamped biharmonic stencil needs n_x >= 5, got {n}")
    h = 1.0 / (n + 1)
    k = (6.0 * np.eye(n) - 4.0 * (np.eye(n, k=1) + np.eye(n, k=-1))
         + np.eye(n, k=2) + np.eye(n, k=-2))
    k[0, 0] = k[-1, -1] = 7.0
    return k / h**4


def nodes(n: int) -> np.ndarray:
    return np.arange(1, n + 1) / (n + 1)


# ------------------------------------------------------------------ kernels

@dataclass(frozen=True)
class MemoryKernel:
    """mu(s) = mu0 e^{-delta s}; satisfies mu' = -delta mu, so mu~ = mu0 / delta."""

    mu0: float
    delta: float

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ConfigurationError(f"memory kernel needs mu(0) > 0, got {self.mu0}")
        if not self.delta > 0:
            raise ConfigurationError(f"memory kernel needs delta > 0, got {self.delta}")
        if not self.mu_tilde < 1:
            raise ConfigurationError(f"memory kernel mass mu~ = {self.mu_tilde} must be < 1")

    @property
    def mu_tilde(self) -> float:
        return self.mu0 / self.delta

    def __call__(self, s):
        return self.mu0 * np.exp(-self.delta * np.asarray(s, dtype=float))

    def tail(self, s: float) -> float:
        return self.mu0 * math.exp(-self.delta * s) / self.delta

    def horizon(self, tol: float = 1e-10) -> float:
        return max(math.log(self.mu0 / (self.delta * tol)) / self.delta, 0.0)


# ------------------------------------------------------------------ nonlinearity

def nonlinearity_catalog(kind: str, scale: float = 0.0, *, dim: int = 1,
                         source: Optional[slice] = None, target: Optional[slice] = None,
                         mass: float = 1.0, poincare: float = 1.0) -> NonlinearMap:
    """F acting on ``source`` components and writing into ``target`` components.

    ``mass`` weights the source norm used by the saturating map and
    ``poincare`` bounds ||x_source||_mass <= poincare ||U||_H, so the declared
    constant stays a valid bound when source and target slots differ.
    """
    if not scale >= 0:
        raise ConfigurationError("nonlinearity scale must be nonnegative")
    source = source or slice(0, dim)
    target = target or slice(0, dim)
    p = max(1.0, poincare)
    if kind == "zero":
        return NonlinearMap(lambda u: np.zeros_like(np.asarray(u, dtype=float)), 0.0, "zero")
    if kind == "sine":
        def f(u):
            u = np.asarray(u, dtype=float)
            out = np.zeros_like(u)
            out[..., target] = scale * np.sin(u[..., source])
            return out
        return NonlinearMap(f, scale * p, "sine")
    if kind == "saturating":
        sq = math.sqrt(mass)

        def f(u):
            u = np.asarray(u, dtype=float)
            x = u[..., source]
            r = sq * np.linalg.norm(x, axis=-1, keepdims=True)
            out = np.zeros_like(u)
            out[..., target] = scale * x / (1.0 + r)
            return out
        return NonlinearMap(f, 2.0 * scale * p, "saturating")
    raise ConfigurationError(f"unknown nonlinearity kind {kind!r}")


# ------------------------------------------------------------------ feedback channels

@dataclass
class Feedback:
    """One delay feedback channel of a model.

    For the PDE models ``region`` lists the interior node indices of O_i and
    the history of B_i U on [-tau(0), 0] is profile(s) * chi_{O_i} w, with w
    the model's history field (default: the initial velocity). For the scalar
    model ``b`` scales B = b and the history is profile(s).
    """

    delay: DelayFunction
    kernel: KernelCoefficient
    profile: Callable[[float], float] = lambda s: 1.0
    region: Sequence[int] = ()
    b: float = 1.0
    op_norm_b: Optional[float] = None


def _family(channels: List[DelayChannel], eps_tail: float, tail_supremum: Optional[float]) -> DelayFamily:
    return DelayFamily(channels, tail_bound=eps_tail, tail_supremum=tail_supremum)


def _check_regions(feedback: Sequence[Feedback], n_x: int, cover: Optional[set], what: str) -> None:
    seen = set()
    for i, fb in enumerate(feedback):
        r = [int(j) for j in fb.region]
        if not r:
            raise ConfigurationError(f"{what}: region of channel {i} is empty")
        if min(r) < 0 or max(r) >= n_x or len(set(r)) != len(r):
            raise ConfigurationError(f"{what}: region of channel {i} has invalid node indices")
        if seen & set(r):
            raise ConfigurationError(f"{what}: regions overlap (channel {i})")
        seen |= set(r)
    if feedback and cover is not None and seen != cover:
        raise ConfigurationError(f"{what}: regions do not cover the required node set")


def _certificate(gen: Generator, certificate, horizon: float, n_samples: int):
    if certificate is None:
        return certify_growth_bound(gen, horizon, n_samples)
    m, om = certificate
    return certify_growth_bound(gen, horizon, n_samples, m=m, omega=om)


def _pde_channels(feedback: Sequence[Feedback], space: StateSpace, n_x: int, v_slot: slice,
                  w: np.ndarray) -> List[DelayChannel]:
    dim = space.dim
    out = []
    for i, fb in enumerate(feedback):
        b = np.zeros((dim, dim))
        idx = v_slot.start + np.asarray(fb.region, dtype=int)
        b[idx, idx] = 1.0
        img = np.zeros(dim)
        img[idx] = w[np.asarray(fb.region, dtype=int)]
        img.setflags(write=False)
        prof = fb.profile
        hist = HistorySegment(-fb.delay.tau0, dim, func=lambda s, img=img, prof=prof: prof(s) * img)
        k = fb.kernel
        # the PDE carries + k_i chi u_t(t - tau) on the left-hand side
        kernel = KernelCoefficient(lambda t, k=k: -np.asarray(k(t)), k.l1_tail, f"-{k.name}")
        out.append(DelayChannel(fb.delay, kernel, b, hist, space, fb.op_norm_b, index=i))
    return out


def _region_table(feedback: Sequence[Feedback], channels: Sequence[DelayChannel]) -> List[dict]:
    return [{"index": ch.index, "nodes": [int(j) for j in fb.region], "b": ch.op_norm_b,
             "delay": ch.delay.name, "tau0": ch.delay.tau0, "c": ch.delay.c, "kernel": fb.kernel.name}
            for fb, ch in zip(feedback, channels)]


# ------------------------------------------------------------------ scalar

def build_scalar(a: float, channels: Sequence[Feedback] = (), f: Optional[NonlinearMap] = None,
                 u0: float = 1.0, *, certificate: Optional[Tuple[float, float]] = None,
                 horizon: float = 20.0, n_samples: int = 32, eps_tail: float = 0.0,
                 tail_supremum: Optional[float] = None) -> SystemSpec:
    """u' = -a u + sum_i k_i(t) b_i u(t - tau_i(t)) + F(u) on H = R, certified with M = 1, omega = a."""
    if not a > 0:
        raise ConfigurationError("scalar model needs a > 0")
    space = StateSpace.euclidean(1)
    gen = Generator(np.array([[-a]]), space)
    cert = _certificate(gen, certificate if certificate is not None else (1.0, a), horizon, n_samples)
    chans = []
    for i, fb in enumerate(channels):
        prof = fb.profile
        hist = HistorySegment(-fb.delay.tau0, 1, func=lambda s, prof=prof: np.array([prof(s)]))
        chans.append(DelayChannel(fb.delay, fb.kernel, [[fb.b]], hist, space, fb.op_norm_b, index=i))
    f = f if f is not None else nonlinearity_catalog("zero")
    info = {"model": "scalar", "dim": 1, "a": a,
            "channels": [{"index": ch.index, "b": ch.op_norm_b, "delay": ch.delay.name, "tau0": ch.delay.tau0,
                          "c": ch.delay.c, "kernel": ch.kernel.name} for ch in chans]}
    return SystemSpec(space, gen, cert, _family(chans, eps_tail, tail_supremum), f, np.array([u0]),
                      name="scalar", info=info)


# ------------------------------------------------------------------ damped wave

def build_damped_wave(n_x: int, a: float, damping_nodes: Optional[Sequence[int]] = None,
                      feedback: Sequence[Feedback] = (), f_kind: str = "zero", f_scale: float = 0.0,
                      u0=None, u1=None, *, history_field=None,
                      certificate: Optional[Tuple[float, float]] = None, horizon: float = 20.0,
                      n_samples: int = 48, eps_tail: float = 0.0,
                      tail_supremum: Optional[float] = None) -> SystemSpec:
    """u_tt - u_xx + a chi_O u_t + sum_i k_i chi_{O_i} u_t(t - tau_i) = f(u), state (u, v)."""
    if n_x < 1:
        raise ConfigurationError("n_x must be positive")
    if a < 0:
        raise ConfigurationError("damping coefficient a must be nonnegative")
    damping = list(range(n_x)) if damping_nodes is None else sorted(int(j) for j in damping_nodes)
    if damping and (damping[0] < 0 or damping[-1] >= n_x):
        raise ConfigurationError("damping nodes out of range")
    _check_regions(feedback, n_x, set(damping), "damped wave")
    h = 1.0 / (n_x + 1)
    k = dirichlet_stiffness(n_x)
    chi = np.zeros(n_x)
    chi[damping] = 1.0
    n = n_x
    a_mat = np.zeros((2 * n, 2 * n))
    a_mat[:n, n:] = np.eye(n)
    a_mat[n:, :n] = -k
    a_mat[n:, n:] = -a * np.diag(chi)
    gram = np.zeros_like(a_mat)
    gram[:n, :n] = h * k
    gram[n:, n:] = h * np.eye(n)
    space = StateSpace(gram)
    gen = Generator(a_mat, space)
    cert = _certificate(gen, certificate, horizon, n_samples)
    x = nodes(n)
    u0 = np.zeros(n) if u0 is None else np.asarray(u0, dtype=float)
    u1 = np.zeros(n) if u1 is None else np.asarray(u1, dtype=float)
    w = u1 if history_field is None else np.asarray(history_field, dtype=float)
    chans = _pde_channels(feedback, space, n, slice(n, 2 * n), w)
    poincare = 1.0 / math.sqrt(np.linalg.eigvalsh(k)[0])
    f = nonlinearity_catalog(f_kind, f_scale, dim=2 * n, source=slice(0, n), target=slice(n, 2 * n),
                             mass=h, poincare=poincare)
    info = {"model": "damped_wave", "dim": 2 * n, "n_x": n, "a": a, "damping_nodes": damping,
            "regions": _region_table(feedback, chans), "x": x.tolist()}
    return SystemSpec(space, gen, cert, _family(chans, eps_tail, tail_supremum), f,
                      np.concatenate([u0, u1]), name="damped_wave", info=info)


# ------------------------------------------------------------------ memory models

@dataclass
class WaveMemoryParams:
    n_x: int
    n_s: int
    kernel: MemoryKernel
    feedback: Sequence[Feedback] = ()
    s_max: Optional[float] = None
    f_kind: str = "zero"
    f_scale: float = 0.0
    u0: Optional[np.ndarray] = None
    u1: Optional[np.ndarray] = None
    # past displacement u(x, t) for t <= 0 as a callable t -> array over the
    # nodes; None means u(x, t) = u0(x), i.e. eta_0 = 0
    past: Optional[Callable[[float], np.ndarray]] = None
    history_field: Optional[np.ndarray] = None
    eps_tail: float = 0.0
    tail_supremum: Optional[float] = None
    certificate: Optional[Tuple[float, float]] = None
    horizon: float = 20.0
    n_samples: int = 48
    extra: dict = field(default_factory=dict)


def _memory_system(p: WaveMemoryParams, k: np.ndarray, name: str) -> SystemSpec:
    n, ns = p.n_x, p.n_s
    if n < 1 or ns < 1:
        raise ConfigurationError("n_x and n_s must be positive")
    _check_regions(p.feedback, n, set(range(n)), name)
    mu = p.kernel
    mt = mu.mu_tilde
    s_max = mu.horizon() if p.s_max is None else float(p.s_max)
    if mu.tail(s_max) > 1e-10 * (1 + 1e-9):
        raise ConfigurationError(f"s_max={s_max} leaves memory tail {mu.tail(s_max):.3e} > 1e-10")
    h = 1.0 / (n + 1)
    ds = s_max / ns
    s = ds * np.arange(1, ns + 1)
    wts = np.full(ns, ds)
    wts[-1] = 0.5 * ds
    rho = wts * mu(s)

    dim = 2 * n + n * ns
    a_mat = np.zeros((dim, dim))
    gram = np.zeros((dim, dim))
    iu, iv = slice(0, n), slice(n, 2 * n)

    def eta(j):
        return slice(2 * n + j * n, 2 * n + (j + 1) * n)

    eye = np.eye(n)
    a_mat[iu, iv] = eye
    a_mat[iv, iu] = -(1.0 - mt) * k
    gram[iu, iu] = (1.0 - mt) * h * k
    gram[iv, iv] = h * eye
    for j in range(ns):
        a_mat[iv, eta(j)] = -rho[j] * k
        a_mat[eta(j), iv] = eye
        a_mat[eta(j), eta(j)] = -eye / ds
        if j > 0:
            a_mat[eta(j), eta(j - 1)] = eye / ds
        gram[eta(j), eta(j)] = rho[j] * h * k
    space = StateSpace(gram)
    gen = Generator(a_mat, space)
    cert = _certificate(gen, p.certificate, p.horizon, p.n_samples)

    u0 = np.zeros(n) if p.u0 is None else np.asarray(p.u0, dtype=float)
    u1 = np.zeros(n) if p.u1 is None else np.asarray(p.u1, dtype=float)
    if p.past is None:
        eta0 = np.zeros(n * ns)
    else:
        base = np.asarray(p.past(0.0), dtype=float)
        eta0 = np.concatenate([base - np.asarray(p.past(-sj), dtype=float) for sj in s])
    w = u1 if p.history_field is None else np.asarray(p.history_field, dtype=float)
    chans = _pde_channels(p.feedback, space, n, iv, w)
    poincare = 1.0 / math.sqrt((1.0 - mt) * np.linalg.eigvalsh(k)[0])
    f = nonlinearity_catalog(p.f_kind, p.f_scale, dim=dim, source=iu, target=iv, mass=h, poincare=poincare)
    info = {"model": name, "dim": dim, "n_x": n, "n_s": ns, "s_max": s_max, "mu0": mu.mu0,
            "delta": mu.delta, "mu_tilde": mt, "memory_tail": mu.tail(s_max),
            "regions": _region_table(p.feedback, chans), "x": nodes(n).tolist(), **p.extra}
    return SystemSpec(space, gen, cert, _family(chans, p.eps_tail, p.tail_supremum), f,
                      np.concatenate([u0, u1, eta0]), name=name, info=info)


def build_wave_memory(p: WaveMemoryParams) -> SystemSpec:
    """u_tt - (1 - mu~) u_xx - int mu(s) eta_xx(s) ds + feedback = f(u); state (u, v, eta)."""
    return _memory_system(p, dirichlet_stiffness(p.n_x), "wave_memory")


def build_plate(p: WaveMemoryParams) -> SystemSpec:
    """Clamped beam analogue of the plate with memory: the wave model with -Laplacian -> biharmonic."""
    return _memory_system(p, clamped_biharmonic(p.n_x), "plate")


def model_info(sys: SystemSpec) -> dict:
    info = dict(sys.info or {})
    info.pop("x", None)
    info.update({"declared_lipschitz": sys.lipschitz, "nonlinearity": sys.nonlinearity.name,
                 "certificate": sys.certificate.to_dict(), "tau_star": sys.delays.tau_star,
                 "n_channels": len(sys.delays), "eps_tail": sys.delays.tail_bound})
    return info
