"""Matrix semigroups e^{tA} and sampled growth-bound certificates ||S(t)||_H <= M e^{-omega t}."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .core import StateSpace
from .errors import CertificateInvalidError, NumericOverflowError, StructuralError

SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Generator:
    matrix: np.ndarray
    space: StateSpace

    def __post_init__(self):
        a = np.array(self.matrix, dtype=float)
        if a.ndim == 0:
            a = a.reshape(1, 1)
        if a.shape != (self.space.dim, self.space.dim):
            raise StructuralError(f"generator has shape {a.shape}, space has dim {self.space.dim}")
        if not np.all(np.isfinite(a)):
            raise StructuralError("generator has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return self.space.dim

    def propagator(self, t: float) -> np.ndarray:
        if t < 0:
            raise StructuralError("semigroup time must be nonnegative")
        with np.errstate(over="ignore", invalid="ignore"):
            p = scipy.linalg.expm(t * self.matrix)
        if not np.all(np.isfinite(p)):
            raise NumericOverflowError(f"e^(tA) overflowed at t={t}")
        return p

    def spectral_abscissa(self) -> float:
        return float(np.max(np.linalg.eigvals(self.matrix).real))


def expm_apply(g: Generator, t: float, v) -> np.ndarray:
    v = g.space.check(v)
    if t == 0:
        return np.array(v, dtype=float)
    out = g.propagator(t) @ v
    if not np.all(np.isfinite(out)):
        raise NumericOverflowError(f"e^(tA)v overflowed at t={t}")
    return out


@dataclass(frozen=True, eq=False)
class GrowthCertificate:
    """||e^{tA}||_{L(H)} <= m e^{-omega t} on ``sample_grid``.

    ``omega`` is a signed decay rate: positive means the semigroup decays,
    negative means the bound allows growth at rate |omega|.
    """

    m: float
    omega: float
    sample_grid: np.ndarray
    origin: str  # "user" or "estimated"

    @property
    def decays(self) -> bool:
        return self.omega > 0

    @property
    def growth_rate(self) -> float:
        """|omega|, the rate in ||S(t)|| <= M e^{|omega| t}, which always holds."""
        return abs(self.omega)

    def bound(self, t):
        return self.m * np.exp(-self.omega * np.asarray(t, dtype=float))

    def to_dict(self) -> dict:
        return {"m": self.m, "omega": self.omega, "origin": self.origin,
                "horizon": float(self.sample_grid[-1]), "n_samples": int(self.sample_grid.size)}


def _sample_norms(g: Generator, grid: np.ndarray) -> np.ndarray:
    space = g.space
    out = np.empty(grid.size)
    for k, t in enumerate(grid):
        out[k] = space.op_norm(g.propagator(t))
    return out


def _geometric_grid(horizon: float, n: int) -> np.ndarray:
    return np.geomspace(horizon * 1e-4, horizon, n)


def validate_certificate(g: Generator, m: float, omega: float, grid: np.ndarray,
                         norms: Optional[np.ndarray] = None) -> None:
    if norms is None:
        norms = _sample_norms(g, grid)
    ratio = norms / (m * np.exp(-omega * grid))
    k = int(np.argmax(ratio))
    if ratio[k] > 1 + SLACK:
        raise CertificateInvalidError(
            f"growth bound M={m}, omega={omega} violated at t={grid[k]!r} "
            f"(||S(t)||/bound = {ratio[k]!r})", worst_t=float(grid[k]), worst_ratio=float(ratio[k]))


def _refine_m(g: Generator, omega: float, horizon: float, grid: np.ndarray, log_ratio: np.ndarray) -> float:
    # the bound has to hold between samples too: polish the largest local maxima
    # of ||S(t)|| e^{omega t} with a bounded scalar search on the neighbouring cells;
    # the objective is flat at a maximum, so a coarse xatol already pins its value
    best = float(log_ratio.max())
    order = np.argsort(log_ratio)[::-1]
    peaks = [k for k in order[:4] if log_ratio[k] >= best - 0.02]
    for k in peaks:
        lo = grid[k - 1] if k > 0 else 0.0
        hi = grid[k + 1] if k + 1 < grid.size else horizon
        if hi <= lo:
            continue

        def neg(t):
            return -(np.log(g.space.op_norm(g.propagator(t))) + omega * t)

        res = scipy.optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                             options={"xatol": 1e-6 * max(hi, 1.0)})
        best = max(best, -float(res.fun))
    return best


def certify_growth_bound(g: Generator, horizon: float, n_samples: int = 48,
                         m: Optional[float] = None, omega: Optional[float] = None) -> GrowthCertificate:
    """Estimate (or, given ``m`` and ``omega``, validate) a growth bound on (0, horizon].

    The estimate is a sampled certificate rather than a proof. When the
    spectral abscissa alone dominates the sampled norms the bound is exact
    with M = 1. Otherwise (log M, omega) is fitted by a linear program that
    minimises the mean log-envelope over [0, horizon] subject to covering
    every sample and omega not exceeding the asymptotic decay rate; M is then
    raised to cover a second uniform grid and the polished local maxima.
    """
    if horizon <= 0:
        raise StructuralError("horizon must be positive")
    if n_samples < 16:
        raise StructuralError("n_samples must be at least 16")
    grid = _geometric_grid(horizon, n_samples)
    norms = _sample_norms(g, grid)

    if (m is None) != (omega is None):
        raise StructuralError("supply both m and omega, or neither")
    if m is not None:
        if m < 1:
            raise CertificateInvalidError(f"M={m} < 1 cannot bound ||S(0)|| = 1")
        validate_certificate(g, m, omega, grid, norms)
        return GrowthCertificate(float(m), float(omega), grid, "user")

    alpha = g.spectral_abscissa()
    if np.all(norms <= np.exp(alpha * grid) * (1 + SLACK)):
        return GrowthCertificate(1.0, -alpha, grid, "estimated")

    logn = np.log(norms)
    # variables (log M, omega); log n_j <= log M - omega t_j
    a_ub = np.column_stack([-np.ones_like(grid), grid])
    res = scipy.optimize.linprog(c=[1.0, -0.5 * horizon], A_ub=a_ub, b_ub=-logn,
                                 bounds=[(0.0, None), (None, -alpha)], method="highs")
    if res.status != 0:
        raise CertificateInvalidError(f"growth-bound fit failed: {res.message}")
    om = float(res.x[1])

    uniform = np.linspace(horizon / n_samples, horizon, n_samples)
    all_t = np.concatenate([grid, uniform])
    all_n = np.concatenate([norms, _sample_norms(g, uniform)])
    order = np.argsort(all_t)
    all_t, all_n = all_t[order], all_n[order]
    log_m = max(0.0, _refine_m(g, om, horizon, all_t, np.log(all_n) + om * all_t))
    m_fit = float(np.exp(log_m) * (1 + 1e-12))
    validate_certificate(g, m_fit, om, all_t, all_n)
    return GrowthCertificate(m_fit, om, all_t, "estimated")


def dissipativity_check(g: Generator, n_trials: int = 100, seed: int = 0) -> float:
    """Largest <Av, v>_H / ||v||_H^2 over seeded random trial vectors."""
    rng = np.random.default_rng(seed)
    vs = rng.standard_normal((n_trials, g.dim))
    gram = g.space.gram
    av = vs @ g.matrix.T
    num = np.einsum("ki,ij,kj->k", av, gram, vs)
    den = np.einsum("ki,ij,kj->k", vs, gram, vs)
    return float(np.max(num / den))
