"""Mild solutions by Picard iteration on the Duhamel formula, plus reference integrators.

The Duhamel integral is discretised with the trapezoid rule on a uniform grid
and the exact one-step propagator P = e^{dt A}, which gives the recursion

    U_k = P (U_{k-1} + dt/2 f_{k-1}) + dt/2 f_k

for one sweep, where f is the forcing built from the previous iterate.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import certify
from .core import Trajectory
from .errors import (ConfigurationError, DegenerateFitError, DelayTooSmallError, MisuseError,
                     NonConvergenceError, NumericOverflowError, StructuralError)
from .system import NonlinearMap, SystemSpec

__all__ = [
    "SolveReport", "EnvelopeCheck", "picard_solve", "steps_solve", "ode_reference",
    "verify_envelope", "fit_decay_rate", "stopping_rate", "uniform_grid", "write_trajectory_csv",
    "NonlinearMap", "SystemSpec",
]


@dataclass
class SolveReport:
    trajectory: Trajectory
    iterations: int
    final_residual: float
    omega_prime_used: float
    converged: bool
    residuals: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"iterations": self.iterations, "final_residual": self.final_residual,
                "omega_prime_used": self.omega_prime_used, "converged": self.converged,
                "residuals": list(self.residuals), "n_nodes": len(self.trajectory),
                "T": float(self.trajectory.grid[-1])}


def uniform_grid(T: float, dt: float) -> np.ndarray:
    if not (T > 0 and dt > 0):
        raise StructuralError("T and dt must be positive")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise StructuralError(f"dt={dt} does not divide T={T}")
    return dt * np.arange(n + 1)


def stopping_rate(sys: SystemSpec) -> float:
    """omega' for the weighted stopping norm; |omega| + 1 when no contraction weight is available."""
    try:
        wp = certify.select_omega_prime(sys)
    except ConfigurationError:
        wp = None
    return wp if wp is not None else sys.certificate.growth_rate + 1.0


class _Forcing:
    """Builds f_k = sum_i k_i(t_k) D_i(t_k; U) + F(U(t_k)) on a fixed grid."""

    def __init__(self, sys: SystemSpec, grid: np.ndarray):
        self.sys = sys
        self.dt = grid[1] - grid[0]
        self.n = grid.size
        self.channels = []
        for ch in sys.delays:
            k = np.asarray(ch.kernel(grid), dtype=float) * np.ones_like(grid)
            q = grid - np.asarray(ch.delay(grid), dtype=float)
            past = q <= 0.0
            hist = np.array([ch.history(s) for s in q[past]]).reshape(-1, sys.dim)
            pos = np.where(past, 0.0, q / self.dt)
            idx = np.clip(np.floor(pos).astype(int), 0, self.n - 2)
            frac = np.clip(pos - idx, 0.0, 1.0)
            self.channels.append((k, past, hist, idx, frac, np.asarray(ch.op_matrix)))

    def __call__(self, states: np.ndarray) -> np.ndarray:
        f = self.sys.nonlinearity(states)
        f = np.array(f, dtype=float).reshape(states.shape)
        for k, past, hist, idx, frac, b in self.channels:
            delayed = (1.0 - frac)[:, None] * states[idx] + frac[:, None] * states[idx + 1]
            d = delayed @ b.T
            d[past] = hist
            f += k[:, None] * d
        return f


def _sweep(p: np.ndarray, u0: np.ndarray, f: np.ndarray, dt: float) -> np.ndarray:
    g = 0.5 * dt * f
    out = np.empty_like(f)
    out[0] = u0
    for k in range(1, f.shape[0]):
        out[k] = p @ (out[k - 1] + g[k - 1]) + g[k]
    return out


def picard_solve(sys: SystemSpec, T: float, dt: float, tol: float = 1e-10, max_iter: int = 200,
                 initial: str = "semigroup", omega_prime: Optional[float] = None,
                 raise_on_failure: bool = True) -> SolveReport:
    """Iterate the Duhamel map until successive sweeps agree to ``tol`` in the omega'-weighted sup norm.

    ``initial`` selects the starting iterate: ``"semigroup"`` for S(t)U_0,
    ``"constant"`` for U_0 at every node.

    A node is frozen at the first sweep whose weighted change on [0, t_k] is
    below ``tol``, so the returned values on a prefix of the grid never depend
    on the horizon.
    """
    grid = uniform_grid(T, dt)
    if tol <= 0 or max_iter < 1:
        raise StructuralError("tol must be positive and max_iter >= 1")
    wp = stopping_rate(sys) if omega_prime is None else float(omega_prime)
    space = sys.space
    p = sys.generator.propagator(dt)
    u0 = sys.u0
    weight = np.exp(-wp * grid)

    if initial == "semigroup":
        current = _sweep(p, u0, np.zeros((grid.size, sys.dim)), dt)
    elif initial == "constant":
        current = np.tile(u0, (grid.size, 1))
    else:
        raise StructuralError(f"unknown initial iterate {initial!r}")

    forcing = _Forcing(sys, grid)
    out = np.empty_like(current)
    frozen = np.zeros(grid.size, dtype=bool)
    residuals = []
    converged = False
    for it in range(1, max_iter + 1):
        new = _sweep(p, u0, forcing(current), dt)
        if not np.all(np.isfinite(new)):
            raise NumericOverflowError(f"Picard sweep {it} produced non-finite values")
        wdiff = weight * space.norm(new - current)
        res = float(wdiff.max())
        residuals.append(res)
        fresh = (np.maximum.accumulate(wdiff) <= tol) & ~frozen
        out[fresh] = new[fresh]
        frozen |= fresh
        current = new
        if res <= tol:
            converged = True
            break
    if not converged:
        if raise_on_failure:
            raise NonConvergenceError(
                f"Picard iteration did not reach tol={tol} in {max_iter} sweeps (last residual {residuals[-1]:.3e})",
                residuals)
        out[~frozen] = current[~frozen]
    traj = Trajectory.from_states(space, grid, out)
    return SolveReport(traj, len(residuals), residuals[-1], wp, converged, residuals)


def _rk4(rhs, grid: np.ndarray, u0: np.ndarray) -> np.ndarray:
    dt = grid[1] - grid[0]
    out = np.empty((grid.size, u0.size))
    out[0] = u0
    u = np.array(u0, dtype=float)
    for k in range(grid.size - 1):
        t = grid[k]
        k1 = rhs(t, u)
        k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise NumericOverflowError(f"RK4 produced non-finite values at t={grid[k + 1]}")
        out[k + 1] = u
    return out


def steps_solve(sys: SystemSpec, T: float, dt: float) -> Trajectory:
    """Classical method of steps with RK4; needs every delay to stay >= 10 dt.

    Delayed states come from the history or from cubic Hermite interpolation
    of already completed steps, using the stored right-hand sides as slopes.
    """
    grid = uniform_grid(T, dt)
    probe = np.linspace(0.0, T, 4097)
    for ch in sys.delays:
        tmin = float(np.min(np.asarray(ch.delay(probe)) * np.ones_like(probe)))
        if tmin < 10 * dt:
            raise DelayTooSmallError(
                f"channel {ch.index}: delay drops to {tmin:.3g} < 10 dt = {10 * dt:.3g}; "
                "only the fixed-point solver handles this regime")
    a = sys.generator.matrix
    f_nl = sys.nonlinearity
    n = grid.size
    states = np.empty((n, sys.dim))
    slopes = np.empty((n, sys.dim))
    channels = [(ch, np.asarray(ch.op_matrix)) for ch in sys.delays]
    known = 0  # last node with both state and slope stored

    def delayed_state(q: float) -> np.ndarray:
        j = min(int(math.floor(q / dt)), n - 2)
        if j + 1 > known:
            raise MisuseError(f"delayed time {q} reaches beyond completed steps")
        s = (q - grid[j]) / dt
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return (h00 * states[j] + h01 * states[j + 1]
                + dt * (h10 * slopes[j] + h11 * slopes[j + 1]))

    def rhs(t, u):
        out = a @ u + f_nl(u)
        for ch, b in channels:
            q = t - float(ch.delay(t))
            if q <= 0:
                out = out + float(ch.kernel(t)) * ch.history(q)
            else:
                out = out + float(ch.kernel(t)) * (b @ delayed_state(q))
        return out

    u = np.array(sys.u0, dtype=float)
    states[0] = u
    for k in range(n - 1):
        t = grid[k]
        k1 = rhs(t, u)
        slopes[k] = k1
        known = k
        k2 = rhs(t + 0.5 * dt, u + 0.5 * dt * k1)
        k3 = rhs(t + 0.5 * dt, u + 0.5 * dt * k2)
        k4 = rhs(t + dt, u + dt * k3)
        u = u + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(u)):
            raise NumericOverflowError(f"RK4 produced non-finite values at t={grid[k + 1]}")
        states[k + 1] = u
    return Trajectory.from_states(sys.space, grid, states)


def ode_reference(sys: SystemSpec, T: float, dt: float) -> Trajectory:
    """RK4 on U' = AU + sum_i k_i(t) B_i U + F(U); only valid when every delay vanishes."""
    grid = uniform_grid(T, dt)
    for ch in sys.delays:
        if not ch.delay.is_zero(T):
            raise MisuseError(f"channel {ch.index} has a nonzero delay; use picard_solve or steps_solve")
    a = sys.generator.matrix
    f_nl = sys.nonlinearity
    channels = [(ch.kernel, np.asarray(ch.op_matrix)) for ch in sys.delays]

    def rhs(t, u):
        out = a @ u + f_nl(u)
        for k, b in channels:
            out = out + float(k(t)) * (b @ u)
        return out

    return Trajectory.from_states(sys.space, grid, _rk4(rhs, grid, np.asarray(sys.u0, dtype=float)))


@dataclass
class EnvelopeCheck:
    passed: bool
    margin: float   # min over nodes of envelope - norm
    worst_t: float

    def to_dict(self) -> dict:
        return {"passed": self.passed, "margin": self.margin, "worst_t": self.worst_t}


def verify_envelope(report: SolveReport, cert: "certify.CertificateReport", slack: float = 1e-8) -> EnvelopeCheck:
    traj = report.trajectory
    env = certify.decay_envelope(cert, traj.grid)
    gap = env - traj.norms
    k = int(np.argmin(gap))
    return EnvelopeCheck(bool(np.all(traj.norms <= env + slack)), float(gap[k]), float(traj.grid[k]))


def fit_decay_rate(traj: Trajectory, window: Sequence[float]) -> Tuple[float, float]:
    """Least-squares line through log ||U(t)||_H on ``window``; returns (rate, intercept)."""
    t_a, t_b = window
    sel = (traj.grid >= t_a) & (traj.grid <= t_b)
    if sel.sum() < 2:
        raise DegenerateFitError(f"fewer than two grid points in window [{t_a}, {t_b}]")
    norms = traj.norms[sel]
    if np.any(norms <= 0):
        raise DegenerateFitError("zero norm inside the fit window")
    rate, intercept = np.polyfit(traj.grid[sel], np.log(norms), 1)
    return float(rate), float(intercept)


def write_trajectory_csv(path, traj: Trajectory, envelope: Optional[np.ndarray] = None) -> None:
    dim = traj.states.shape[1]
    header = ["t", "norm_H"] + (["envelope"] if envelope is not None else []) + [f"component_{i}" for i in range(dim)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k in range(len(traj)):
            row = [traj.grid[k], traj.norms[k]]
            if envelope is not None:
                row.append(envelope[k])
            row.extend(traj.states[k])
            w.writerow([format(float(x), ".17g") for x in row])
