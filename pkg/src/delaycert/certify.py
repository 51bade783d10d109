"""Explicit constants of the well-posedness and decay estimates, with error budgets.

All integrals over delayed time z are evaluated per channel on the pulled-back
weight |k(phi^{-1}(z))| / (1 - c). A channel only ever sees history on its own
[-tau_i(0), 0], so its history integrals run over that interval.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .delays import DelayChannel, effective_weight, phi_inverse
from .errors import CertificateInvalidError, ConfigurationError, StructuralError
from .quadrature import QuadConfig, integrate
from .system import SystemSpec

# inversion error must stay well below the quadrature budget
INVERSE_TOL = 1e-14


@dataclass
class ChannelIntegrals:
    index: int
    b: float
    history_g: float      # integral of w(z) ||g(z)||_H over [-tau(0), 0]
    history_g_err: float
    history_1: float      # integral of w(z) over [-tau(0), 0]
    history_1_err: float
    feedback: float       # integral of w(z) over [0, inf), tail bound included
    feedback_err: float
    t_cut: float


def _t_cut(ch: DelayChannel, cfg: QuadConfig) -> float:
    tail = ch.kernel.l1_tail
    if tail is None:
        raise ConfigurationError(
            f"channel {ch.index}: kernel {ch.kernel.name!r} has no L1 tail bound; "
            "the infinite-horizon integral cannot be certified")
    if cfg.t_cut is not None:
        return float(cfg.t_cut)
    total = float(tail(0.0))
    if total == 0.0:
        return 0.0
    t = 1.0
    while tail(t) > cfg.tail_tol * total:
        t *= 2.0
        if t > 2.0 ** 60:
            raise ConfigurationError(f"channel {ch.index}: kernel tail never falls below tolerance")
    return t


def channel_integrals(sys: SystemSpec, cfg: QuadConfig = QuadConfig()) -> List[ChannelIntegrals]:
    out = []
    space = sys.space
    for ch in sys.delays:
        t_cut = _t_cut(ch, cfg)
        lo = -ch.delay.tau0

        def w(z, ch=ch):
            return effective_weight(ch, z, INVERSE_TOL * (1 + abs(z)))

        def wg(z, ch=ch):
            return w(z) * float(space.norm(ch.history(z)))

        hg, hg_e = integrate(wg, lo, 0.0, cfg)
        h1, h1_e = integrate(w, lo, 0.0, cfg)
        fb, fb_e = integrate(w, 0.0, t_cut, cfg)
        if t_cut > 0:
            d = ch.delay.slope_lower
            if d is None:
                raise ConfigurationError(
                    f"channel {ch.index}: delay has no lower slope bound, tail cannot be bounded")
            # z >= T  <=>  s >= phi^{-1}(T); dz = (1 - tau'(s)) ds <= (1 + d) ds
            s_cut = phi_inverse(ch, t_cut)
            fb += (1.0 + d) / (1.0 - ch.c) * float(ch.kernel.l1_tail(s_cut))
        out.append(ChannelIntegrals(ch.index, ch.op_norm_b, hg, hg_e, h1, h1_e, fb, fb_e, t_cut))
    return out


def _history_factor(sys: SystemSpec) -> float:
    return math.exp(sys.certificate.growth_rate * sys.delays.tau_star)


def assumption_lhs(sys: SystemSpec, quad: QuadConfig = QuadConfig(), integrals=None):
    """Left side of the smallness condition and its quadrature error bound."""
    parts = assumption_terms(sys, quad, integrals)
    return parts["history_term"] + parts["feedback_term"], parts["quad_error"]


def assumption_terms(sys: SystemSpec, quad: QuadConfig = QuadConfig(), integrals=None) -> Dict[str, float]:
    if integrals is None:
        integrals = channel_integrals(sys, quad)
    e = _history_factor(sys)
    hist = e * math.fsum(ci.history_g for ci in integrals)
    fb = math.fsum(ci.b * ci.feedback for ci in integrals)
    err = e * math.fsum(ci.history_g_err for ci in integrals) + math.fsum(ci.b * ci.feedback_err for ci in integrals)
    return {"history_term": hist, "feedback_term": fb, "quad_error": err}


def m_tilde(sys: SystemSpec, quad: QuadConfig = QuadConfig(), integrals=None, with_error=False):
    """M~: like the smallness condition but with b_i in place of ||g_i|| on the history interval."""
    if integrals is None:
        integrals = channel_integrals(sys, quad)
    e = _history_factor(sys)
    val = e * math.fsum(ci.b * ci.history_1 for ci in integrals) + math.fsum(ci.b * ci.feedback for ci in integrals)
    if with_error:
        err = (e * math.fsum(ci.b * ci.history_1_err for ci in integrals)
               + math.fsum(ci.b * ci.feedback_err for ci in integrals))
        return val, err
    return val


def contraction_constant(sys: SystemSpec, omega_prime: float, mt: Optional[float] = None,
                         quad: QuadConfig = QuadConfig()) -> float:
    """M (M~ + L / (omega' - omega)), omega taken in the growth sense |omega|."""
    om = sys.certificate.growth_rate
    if not omega_prime > om:
        raise StructuralError(f"omega' = {omega_prime} must exceed omega = {om}")
    if mt is None:
        mt = m_tilde(sys, quad)
    return sys.m * (mt + sys.lipschitz / (omega_prime - om))


def select_omega_prime(sys: SystemSpec, mt: Optional[float] = None,
                       quad: QuadConfig = QuadConfig()) -> Optional[float]:
    """omega' = omega + 2ML / (1 - M M~), halfway into the feasible margin; None if M M~ >= 1."""
    if mt is None:
        mt = m_tilde(sys, quad)
    mm = sys.m * mt
    if mm >= 1:
        return None
    om = sys.certificate.growth_rate
    if sys.lipschitz == 0:
        return om + 1.0
    return om + 2.0 * sys.m * sys.lipschitz / (1.0 - mm)


def alpha_tilde(sys: SystemSpec, quad: QuadConfig = QuadConfig(), integrals=None) -> float:
    if not sys.certificate.decays:
        raise CertificateInvalidError("alpha~ needs a decaying growth certificate (omega > 0)")
    if integrals is None:
        integrals = channel_integrals(sys, quad)
    hist = _history_factor(sys) * math.fsum(ci.history_g for ci in integrals)
    return sys.m * float(sys.space.norm(sys.u0)) + sys.m * hist


def beta(sys: SystemSpec, t: float) -> float:
    if t < 0:
        raise StructuralError("beta is defined for t >= 0")
    return math.fsum(ch.op_norm_b * effective_weight(ch, t) for ch in sys.delays)


@dataclass
class CertificateReport:
    m: float
    omega: float
    omega_sign: str
    lipschitz: float
    tau_star: float
    assumption_lhs: float
    assumption_rhs: float
    history_term: float
    feedback_term: float
    quad_error: float
    tail_error: float
    m_tilde: float
    m_tilde_error: float
    contraction_constant: Optional[float]
    omega_prime: Optional[float]
    alpha_tilde: Optional[float]
    envelope_rate: float
    # Gronwall applied to the L term as well gives omega - M L; equal to the
    # envelope rate when M = 1 or L = 0
    gronwall_rate: float
    passed: Dict[str, bool] = field(default_factory=dict)
    channels: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False)


def build_report(sys: SystemSpec, quad: QuadConfig = QuadConfig()) -> CertificateReport:
    integrals = channel_integrals(sys, quad)
    terms = assumption_terms(sys, quad, integrals)
    lhs = terms["history_term"] + terms["feedback_term"]
    m, om, lip = sys.m, sys.omega, sys.lipschitz
    tail = sys.delays.tail_bound
    rhs = 1.0 / m
    mt, mt_err = m_tilde(sys, quad, integrals, with_error=True)
    wp = select_omega_prime(sys, mt)
    q = contraction_constant(sys, wp, mt) if wp is not None else None
    ok_assumption = lhs + terms["quad_error"] + tail < rhs
    ok_contraction = m * (mt + mt_err + tail) < 1
    ok_decay = ok_assumption and om > 0 and lip < om
    return CertificateReport(
        m=m, omega=om, omega_sign="decay" if om > 0 else "growth", lipschitz=lip,
        tau_star=sys.delays.tau_star, assumption_lhs=lhs, assumption_rhs=rhs,
        history_term=terms["history_term"], feedback_term=terms["feedback_term"],
        quad_error=terms["quad_error"], tail_error=tail, m_tilde=mt, m_tilde_error=mt_err,
        contraction_constant=q, omega_prime=wp,
        alpha_tilde=alpha_tilde(sys, quad, integrals) if om > 0 else None,
        envelope_rate=om - lip, gronwall_rate=om - m * lip,
        passed={"assumption": bool(ok_assumption), "contraction": bool(ok_contraction),
                "decay": bool(ok_decay)},
        channels=[asdict(ci) for ci in integrals],
    )


def decay_envelope(report: CertificateReport, t):
    """alpha~ e^{1 - (omega - L) t}."""
    if not report.passed.get("decay"):
        raise CertificateInvalidError("decay envelope requested from a report that did not pass the decay check")
    return report.alpha_tilde * np.exp(1.0 - report.envelope_rate * np.asarray(t, dtype=float))
