"""Model constants, equilibrium profile and potentials.

Everything downstream takes a :class:`ModelParams`; nothing else stores
beta-dependent numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate


class AdmissibilityError(ValueError):
    """Input outside the range where the construction is defined."""


class NumericalError(RuntimeError):
    """A computation failed to meet its tolerance or broke an invariant."""


@dataclass(frozen=True)
class Tolerances:
    scalar_rtol: float = 1e-10
    ode_tol: float = 1e-11
    root_rtol: float = 1e-10


@dataclass(frozen=True)
class ModelParams:
    beta: float
    gamma: float
    alpha: float
    c_beta_sq: float
    eta0: float = 0.02
    lambda0: float = 0.1
    tol: Tolerances = field(default_factory=Tolerances)

    @property
    def mass(self) -> float:
        """The integral of M squared, i.e. 1 / C_beta^2."""
        return 1.0 / self.c_beta_sq


@dataclass(frozen=True)
class PotentialEval:
    v: np.ndarray | float
    m: np.ndarray | float
    w: np.ndarray | float
    w_tilde: np.ndarray | float
    v_split: np.ndarray | float


def check_beta(beta: float) -> None:
    if not np.isfinite(beta) or not 1.0 < beta < 5.0:
        raise AdmissibilityError(f"beta={beta} is outside the admissible range (1, 5)")
    if beta == 2.0:
        raise AdmissibilityError(
            "beta=2 is the excluded logarithmic case (gamma=1): the small-velocity "
            "series is resonant there and the scaling picks up a log correction"
        )


def make_params(beta: float, *, eta0: float = 0.02, lambda0: float = 0.1,
                tol: Tolerances | None = None) -> ModelParams:
    check_beta(beta)
    gamma = beta / 2.0
    return ModelParams(
        beta=float(beta),
        gamma=gamma,
        alpha=(2.0 * gamma + 1.0) / 3.0,
        c_beta_sq=c_beta_squared(gamma),
        eta0=eta0,
        lambda0=lambda0,
        tol=tol or Tolerances(),
    )


def equilibrium(params: ModelParams, v):
    """M(v) = (1 + v^2)^(-gamma/2)."""
    v = np.asarray(v, dtype=float)
    return (1.0 + v * v) ** (-0.5 * params.gamma)


def potentials(params: ModelParams, v) -> PotentialEval:
    g = params.gamma
    v = np.asarray(v, dtype=float)
    r = 1.0 + v * v
    w = (g * (g + 1.0) * v * v - g) / (r * r)
    w_tilde = g * (g + 1.0) / r
    v_split = g * (g + 2.0) / (r * r)
    return PotentialEval(v=v, m=r ** (-0.5 * g), w=w, w_tilde=w_tilde, v_split=v_split)


def _tail_integral(gamma: float, vstar: float, terms: int = 30) -> float:
    # int_{V}^inf (1+v^2)^-g dv expanded in powers of v^-2 (binomial series)
    total = 0.0
    coef = 1.0
    for k in range(terms):
        p = 2.0 * gamma + 2.0 * k - 1.0
        term = coef * vstar ** (-p) / p
        total += term
        if abs(term) < 1e-18 * abs(total):
            break
        coef *= -(gamma + k) / (k + 1.0)
    return total


def c_beta_squared(gamma: float, vstar: float = 20.0) -> float:
    """1 / int (1+v^2)^(-gamma) dv over the real line."""
    if gamma <= 0.5:
        raise AdmissibilityError(f"gamma={gamma} <= 1/2: (1+v^2)^(-gamma) is not integrable")
    f = lambda v: (1.0 + v * v) ** (-gamma)
    core, err = integrate.quad(f, 0.0, vstar, epsabs=0.0, epsrel=1e-13, limit=200)
    if err > 1e-11 * core:
        raise NumericalError(f"quadrature for C_beta^2 did not converge (err={err:.2e})")
    total = 2.0 * (core + _tail_integral(gamma, vstar))
    return 1.0 / total


def bracket(v):
    """Japanese bracket <v> = sqrt(1 + v^2)."""
    v = np.asarray(v, dtype=float)
    return np.sqrt(1.0 + v * v)

