"""State spaces with an explicit Gram inner product, trajectories and history data."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from .errors import HistoryRangeError, StructuralError

ENDPOINT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class StateSpace:
    """Finite-dimensional Hilbert space R^dim with <u, v>_H = u^T gram v.

    States are plain 1-D float arrays of length ``dim``; batches of states are
    2-D arrays with one state per row.
    """

    gram: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.gram, dtype=float)
        if g.ndim == 0:
            g = g.reshape(1, 1)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise StructuralError(f"gram must be a non-empty square matrix, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise StructuralError("gram has non-finite entries")
        scale = max(np.abs(g).max(), np.finfo(float).tiny)
        if np.abs(g - g.T).max() > 1e-12 * scale:
            raise StructuralError("gram is not symmetric")
        g = 0.5 * (g + g.T)
        try:
            r = scipy.linalg.cholesky(g, lower=False)
        except np.linalg.LinAlgError as exc:
            raise StructuralError("gram is not positive definite") from exc
        g.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "_chol", r)

    @classmethod
    def euclidean(cls, dim: int) -> "StateSpace":
        return cls(np.eye(dim))

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Upper factor R with gram = R^T R, so ||v||_H = ||R v||_2."""
        return self._chol

    def check(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1:] != (self.dim,):
            raise StructuralError(f"state has trailing dimension {v.shape[-1:]}, expected ({self.dim},)")
        return v

    def inner(self, u, v):
        u, v = self.check(u), self.check(v)
        return np.einsum("...i,ij,...j->...", u, self.gram, v)

    def norm(self, v):
        """H-norm of one state, or row-wise norms of a batch."""
        v = self.check(v)
        w = v @ self._chol.T
        return np.sqrt(np.einsum("...i,...i->...", w, w))

    def op_norm(self, matrix) -> float:
        """Operator norm of ``matrix`` on (R^dim, ||.||_H)."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (self.dim, self.dim):
            raise StructuralError(f"operator has shape {m.shape}, expected {(self.dim, self.dim)}")
        r = self._chol
        conj = r @ scipy.linalg.solve_triangular(r, m.T, trans="T", lower=False).T
        return float(np.linalg.norm(conj, 2))

    def conjugate(self, matrix) -> np.ndarray:
        """R M R^{-1}: the matrix seen in coordinates where H is Euclidean."""
        m = np.asarray(matrix, dtype=float)
        r = self._chol
        return r @ scipy.linalg.solve_triangular(r, m.T, trans="T", lower=False).T


def h_norm(space: StateSpace, v) -> float:
    v = space.check(v)
    if v.ndim != 1:
        raise StructuralError("h_norm expects a single state vector")
    if not np.all(np.isfinite(v)):
        raise StructuralError("state has non-finite entries")
    return float(space.norm(v))


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: np.ndarray
    states: np.ndarray
    norms: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        states = np.asarray(self.states, dtype=float)
        norms = np.asarray(self.norms, dtype=float)
        if grid.ndim != 1 or states.ndim != 2 or states.shape[0] != grid.size or norms.shape != grid.shape:
            raise StructuralError("trajectory grid, states and norms have inconsistent shapes")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise StructuralError("trajectory grid must be strictly increasing")
        for a in (grid, states, norms):
            a.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "norms", norms)

    @classmethod
    def from_states(cls, space: StateSpace, grid, states) -> "Trajectory":
        states = np.asarray(states, dtype=float)
        return cls(grid, states, space.norm(states))

    def __len__(self):
        return self.grid.size

    def prefix(self, n: int) -> "Trajectory":
        return Trajectory(self.grid[:n], self.states[:n], self.norms[:n])


def weighted_sup_norm(traj: Trajectory, omega_prime: float) -> float:
    """Discrete version of sup_t e^{-omega' t} ||U(t)||_H over the trajectory grid."""
    if omega_prime <= 0:
        raise StructuralError("omega_prime must be positive")
    if len(traj) == 0:
        raise StructuralError("empty trajectory")
    return float(np.max(np.exp(-omega_prime * traj.grid) * traj.norms))


class HistorySegment:
    """Prescribed values of B_i U on [-tau_i(0), 0].

    Either ``func`` (s -> state) or a piecewise-linear table given by
    ``times`` and ``values`` (one row per sample). The stored values are
    already the image under B_i; nothing downstream applies B_i to them.
    """

    def __init__(self, lo: float, dim: int, func: Optional[Callable[[float], np.ndarray]] = None,
                 times=None, values=None, channel: Optional[int] = None,
                 lipschitz: Optional[float] = None):
        if lo > 0:
            raise StructuralError("history domain must be [lo, 0] with lo <= 0")
        if (func is None) == (times is None):
            raise StructuralError("give exactly one of func or (times, values)")
        self.domain = (float(lo), 0.0)
        self.dim = int(dim)
        self.channel = channel
        self.func = func
        self.times = None
        self.values = None
        if times is not None:
            t = np.asarray(times, dtype=float)
            v = np.asarray(values, dtype=float).reshape(t.size, -1)
            if t.ndim != 1 or t.size < 2 or np.any(np.diff(t) <= 0):
                raise StructuralError("history table times must be strictly increasing with >= 2 samples")
            if v.shape[1] != self.dim:
                raise StructuralError("history table values have wrong dimension")
            if t[0] > lo + ENDPOINT_TOL or t[-1] < -ENDPOINT_TOL:
                raise StructuralError("history table does not cover its domain")
            if not np.all(np.isfinite(v)):
                raise StructuralError("history table has non-finite values")
            if lipschitz is not None:
                jumps = np.linalg.norm(np.diff(v, axis=0), axis=1)
                if np.any(jumps > lipschitz * np.diff(t) * (1 + 1e-9) + 1e-15):
                    raise StructuralError("history table violates its declared Lipschitz bound")
            self.times, self.values = t, v

    @classmethod
    def constant(cls, lo: float, value, channel: Optional[int] = None) -> "HistorySegment":
        value = np.atleast_1d(np.asarray(value, dtype=float)).copy()
        value.setflags(write=False)
        return cls(lo, value.size, func=lambda s: value, channel=channel)

    def _check(self, s: float) -> float:
        lo, hi = self.domain
        if s < lo - ENDPOINT_TOL or s > hi + ENDPOINT_TOL or not np.isfinite(s):
            raise HistoryRangeError(s, self.domain, self.channel)
        return min(max(s, lo), hi)

    def __call__(self, s: float) -> np.ndarray:
        s = self._check(float(s))
        if self.func is not None:
            out = np.asarray(self.func(s), dtype=float).reshape(-1)
            if out.size != self.dim:
                raise StructuralError("history callback returned wrong dimension")
            return out
        k = int(np.clip(np.searchsorted(self.times, s) - 1, 0, self.times.size - 2))
        t0, t1 = self.times[k], self.times[k + 1]
        w = (s - t0) / (t1 - t0)
        return (1.0 - w) * self.values[k] + w * self.values[k + 1]


def history_eval(h: HistorySegment, s: float) -> np.ndarray:
    return h(s)
