"""Solve and certify semilinear evolution equations with time-varying delay feedback."""

__version__ = "0.1.0"

from .core import HistorySegment, StateSpace, Trajectory, h_norm, weighted_sup_norm  # noqa: E402
from .semigroup import (Generator, GrowthCertificate, certify_growth_bound,  # noqa: E402
                        dissipativity_check, expm_apply)
from .delays import (DelayChannel, DelayFamily, DelayFunction, KernelCoefficient,  # noqa: E402
                     effective_weight, make_delay, make_kernel, make_time_profile, phi, phi_inverse)
from .system import NonlinearMap, SystemSpec  # noqa: E402
from .certify import (CertificateReport, alpha_tilde, assumption_lhs, build_report,  # noqa: E402
                      contraction_constant, decay_envelope, m_tilde)
from .solver import (SolveReport, fit_decay_rate, ode_reference, picard_solve, steps_solve,  # noqa: E402
                     verify_envelope)
from .models import (Feedback, MemoryKernel, WaveMemoryParams, build_damped_wave, build_plate,  # noqa: E402
                     build_scalar, build_wave_memory, nonlinearity_catalog)

__all__ = [
    "StateSpace", "Trajectory", "HistorySegment", "h_norm", "weighted_sup_norm",
    "Generator", "GrowthCertificate", "certify_growth_bound", "dissipativity_check", "expm_apply",
    "DelayFunction", "KernelCoefficient", "DelayChannel", "DelayFamily", "phi", "phi_inverse",
    "effective_weight", "make_delay", "make_kernel", "make_time_profile",
    "NonlinearMap", "SystemSpec",
    "CertificateReport", "assumption_lhs", "m_tilde", "contraction_constant", "alpha_tilde",
    "build_report", "decay_envelope",
    "SolveReport", "picard_solve", "steps_solve", "ode_reference", "verify_envelope", "fit_decay_rate",
    "MemoryKernel", "WaveMemoryParams", "Feedback", "build_scalar", "build_damped_wave",
    "build_wave_memory", "build_plate", "nonlinearity_catalog",
]
