"""Simulation, coupling and explicit convergence-rate certificates for IFS Markov operators
with place-dependent division-time densities."""

from .certificate import RateCertificate, build_certificate, final_constant
from .cellcycle import CellModel, GrowthLaw, integrate_growth
from .coupling import overlap_mass, run_coupled_ensemble, simulate_coupled
from .errors import (AuditError, CertificateError, ConfigError, EvaluationError, IFSCouplerError,
                     ModelError, RateFitError, SupportCapError)
from .families import halving, linear_ifs, load_model, model_from_dict, register_family
from .kernel import Ensemble, Trajectory, dual_apply, push_forward, simulate
from .metrics import EmpiricalMeasure, bounded_lipschitz, fit_rate, wasserstein1_1d
from .model import AssumptionAudit, ModelSpec, audit_assumptions

__all__ = [
    "AssumptionAudit",
    "AuditError",
    "CellModel",
    "CertificateError",
    "ConfigError",
    "EmpiricalMeasure",
    "Ensemble",
    "EvaluationError",
    "GrowthLaw",
    "IFSCouplerError",
    "ModelError",
    "ModelSpec",
    "RateCertificate",
    "RateFitError",
    "SupportCapError",
    "Trajectory",
    "audit_assumptions",
    "bounded_lipschitz",
    "build_certificate",
    "dual_apply",
    "final_constant",
    "fit_rate",
    "halving",
    "integrate_growth",
    "linear_ifs",
    "load_model",
    "model_from_dict",
    "overlap_mass",
    "push_forward",
    "register_family",
    "run_coupled_ensemble",
    "simulate",
    "simulate_coupled",
    "wasserstein1_1d",
]

__version__ = "0.1.0"
