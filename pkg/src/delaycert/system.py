"""The complete delay evolution problem U' = AU + sum_i k_i(t) B_i U(t - tau_i(t)) + F(U)."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import StateSpace
from .delays import DelayFamily
from .errors import ConfigurationError, StructuralError
from .semigroup import GrowthCertificate, Generator


class NonlinearMap:
    """F: H -> H with declared Lipschitz constant L and F(0) = 0.

    With ``vectorized`` set, ``f`` must map an (n, dim) batch row-wise.
    """

    def __init__(self, f: Callable[[np.ndarray], np.ndarray], lipschitz: float,
                 name: str = "custom", vectorized: bool = True):
        if not lipschitz >= 0:
            raise ConfigurationError("Lipschitz constant must be nonnegative")
        self.f = f
        self.lipschitz = float(lipschitz)
        self.name = name
        self.vectorized = vectorized

    def __call__(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.vectorized or u.ndim == 1:
            return np.asarray(self.f(u), dtype=float)
        return np.stack([np.asarray(self.f(row), dtype=float) for row in u])

    def check(self, space: StateSpace, n_pairs: int = 200, seed: int = 0) -> None:
        zero = self(np.zeros(space.dim))
        if zero.shape != (space.dim,):
            raise StructuralError(f"nonlinearity {self.name} returned shape {zero.shape}")
        if np.max(np.abs(zero), initial=0.0) > 1e-12:
            raise ConfigurationError(f"nonlinearity {self.name} has F(0) != 0")
        rng = np.random.default_rng(seed)
        scales = np.geomspace(1e-3, 1e2, n_pairs)[:, None]
        u = rng.standard_normal((n_pairs, space.dim)) * scales
        v = u + rng.standard_normal((n_pairs, space.dim)) * scales[::-1] * 1e-1
        lhs = space.norm(self(u) - self(v))
        rhs = self.lipschitz * space.norm(u - v) * (1 + 1e-6)
        if np.any(lhs > rhs + 1e-300):
            k = int(np.argmax(lhs - rhs))
            raise ConfigurationError(
                f"nonlinearity {self.name} violates its declared Lipschitz constant "
                f"{self.lipschitz} (observed ratio {lhs[k] / space.norm(u[k] - v[k]):.6g})")


def zero_map() -> NonlinearMap:
    return NonlinearMap(lambda u: np.zeros_like(np.asarray(u, dtype=float)), 0.0, "zero")


@dataclass(frozen=True, eq=False)
class SystemSpec:
    space: StateSpace
    generator: Generator
    certificate: GrowthCertificate
    delays: DelayFamily
    nonlinearity: NonlinearMap
    u0: np.ndarray
    name: str = "system"
    info: Optional[dict] = None

    def __post_init__(self):
        u0 = np.array(self.space.check(self.u0), dtype=float).reshape(-1)
        if u0.size != self.space.dim or not np.all(np.isfinite(u0)):
            raise StructuralError("u0 must be a finite state of the system's space")
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.generator.space is not self.space and self.generator.dim != self.space.dim:
            raise StructuralError("generator and state space dimensions differ")
        for ch in self.delays:
            if ch.op_matrix.shape != (self.space.dim, self.space.dim):
                raise StructuralError(f"channel {ch.index} operator has wrong shape")

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def m(self) -> float:
        return self.certificate.m

    @property
    def omega(self) -> float:
        return self.certificate.omega

    @property
    def lipschitz(self) -> float:
        return self.nonlinearity.lipschitz

    def validate(self, horizon: float, seed: int = 0) -> "SystemSpec":
        """Sampled checks: delay slope bounds, kernel integrability, Lipschitz constant."""
        for ch in self.delays:
            ch.delay.validate(horizon)
            ch.kernel.validate()
        self.nonlinearity.check(self.space, seed=seed)
        return self
