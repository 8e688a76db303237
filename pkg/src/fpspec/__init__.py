"""Eigen-couple, diffusion coefficient and scaling law for a 1-D Fokker-Planck operator
with a heavy-tailed equilibrium."""
from .model import (AdmissibilityError, ModelParams, NumericalError, Tolerances, equilibrium,
                    make_params, potentials)
from .eigen import EigenResult, make_phi, oracle_mu, scan, solve_mu
from .kappa import compute_kappa, kappa_report, solve_h0

__all__ = [
    "AdmissibilityError", "NumericalError", "ModelParams", "Tolerances", "make_params",
    "equilibrium", "potentials", "EigenResult", "make_phi", "solve_mu", "oracle_mu", "scan",
    "solve_h0", "compute_kappa", "kappa_report",
]
__version__ = "0.1.0"
