"""Penalized eigenfunction equation, the scalar constraint B(lam, eta), and the
root search that yields the small eigenvalue mu(eta) = eta^(2/3) lam*.

For fixed (lam, eta) the function M_le = p2 h solves

    (L_eta - lam eta^(2/3)) M_le = -(<M_le, Phi> - <M, Phi>) Phi,

obtained as the fixed point h = (1/p2) T[V p2 h - <p2 h - M, Phi> Phi] with T the
right inverse of -d^2 + W_tilde + i eta v - lam eta^(2/3). The right side vanishes
exactly when B(lam, eta) = int (lam - i eta^(1/3) v) M_le M = 0.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sci_integrate
from scipy import sparse
from scipy.sparse import linalg as sparse_linalg

from .basis0 import Basis0, build_basis, default_grid, solve_psi
from .basis_eta import (DEFAULT_DELTA, DEFAULT_S0, BasisEta, WeightProfile, make_basis_eta,
                        t_eta_matrix, weight)
from .grids import MappedGrid
from .model import ModelParams, NumericalError, bracket, equilibrium, potentials

log = logging.getLogger(__name__)

MAX_SECANT = 50


class ClusterWarning(RuntimeWarning):
    """The oracle's smallest eigenvalue is not well separated from the next one."""


@dataclass
class PenaltyFunction:
    sigma: float
    radius: float
    coeff: float
    delta: float
    gamma: float

    def __call__(self, v):
        v = np.asarray(v, dtype=float)
        inside = np.abs(v) < self.radius
        taper = np.where(inside, (1.0 - (v / self.radius) ** 2) ** 4, 0.0)
        shape = bracket(v) ** (-self.sigma - self.gamma - 2.0 - self.delta)
        return self.coeff * shape * taper


def make_phi(params: ModelParams, sigma: float = 1.0, radius: float = 3.0,
             delta: float = DEFAULT_DELTA, s0: float = DEFAULT_S0) -> PenaltyFunction:
    """Even, positive, compactly supported Phi = c <v>^-sigma p1(v) taper(v/R), int Phi M = 1."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    edge = s0 * params.eta0 ** (-1.0 / 3.0)
    if not 0 < radius < edge:
        raise ValueError(f"support radius {radius} must lie inside the bulk zone (< {edge:.4g})")
    phi = PenaltyFunction(float(sigma), float(radius), 1.0, float(delta), params.gamma)
    val, err = sci_integrate.quad(lambda v: float(phi(v) * equilibrium(params, v)), 0.0, radius,
                                  epsabs=0, epsrel=1e-13, limit=200)
    phi.coeff = 1.0 / (2.0 * val)
    return phi


@dataclass
class PenalizedSolution:
    lam: complex
    eta: float
    grid: MappedGrid
    h: np.ndarray
    m_curve: np.ndarray
    b: complex
    residual: float
    iterations: int = 1

    @property
    def v(self):
        return self.grid.v


def _operator(basis):
    """(grid, dense T, potential q of the operator T inverts, lam, eta)."""
    if isinstance(basis, Basis0):
        left, right = basis.grid.cumulative_matrices
        p1, p2 = basis.psi1.value, basis.psi2.value
        t = p1[:, None] * left * p2[None, :] + p2[:, None] * right * p1[None, :]
        q = potentials(basis.params, basis.grid.v).w_tilde.astype(complex)
        return basis.grid, t, q, 0j, 0.0
    return basis.grid, t_eta_matrix(basis), basis.potential(basis.grid.v), basis.lam, basis.eta


def solve_penalized(basis: BasisEta | Basis0, phi: PenaltyFunction,
                    weights: WeightProfile | None = None) -> PenalizedSolution:
    """Dense Nystrom solve of the affine fixed point for h = M_le / p2."""
    params = basis.params
    grid, t, q, lam, eta = _operator(basis)
    if weights is None:
        weights = weight(params, lam, eta, phi.delta)
    v = grid.v
    p2 = weights.p2(v)
    pv = potentials(params, v)
    m0 = equilibrium(params, v)
    ph = phi(v)
    qw = grid.weights
    phi_m0 = float(np.dot(qw, ph * m0))
    t_phi = t @ ph
    op = (t * (pv.v_split * p2)[None, :] - np.outer(t_phi, qw * ph * p2)) / p2[:, None]
    a = np.eye(grid.n) - op
    rhs = t_phi * phi_m0 / p2
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"penalized system is singular: {exc}") from exc
    if not np.all(np.isfinite(h)):
        raise NumericalError("penalized system produced non-finite values")
    m = p2 * h
    b = complex(np.dot(qw, ph * m) - phi_m0)
    # defect of (-d^2 + W + i eta v - lam eta^(2/3)) M_le + b Phi
    _, d2 = grid.derivatives(m)
    defect = -d2 + (q - pv.v_split) * m + b * ph
    residual = float(np.abs(defect[grid.interior]).max() / np.abs(m).max())
    return PenalizedSolution(complex(lam), float(eta), grid, h, m, b, residual)


def constraint_b(sol: PenalizedSolution, params: ModelParams):
    """B = int (lam - i eta^(1/3) v) M_le M, with the two moments it is built from."""
    grid = sol.grid
    m0 = equilibrium(params, grid.v)
    qw = grid.weights
    i0 = complex(np.dot(qw, sol.m_curve * m0))
    i1 = complex(np.dot(qw, grid.v * sol.m_curve * m0))
    b_val = sol.lam * i0 - 1j * sol.eta ** (1.0 / 3.0) * i1
    return b_val, i0, i1


@dataclass
class EigenResult:
    eta: float
    lambda_star: complex
    mu: complex
    b_residual: float
    v: np.ndarray
    eigenfunction: np.ndarray          # normalized to M_eta(0) = 1
    iterations: int
    defect: float                      # ||L_eta M - mu M||_2 / ||M||_2
    l2_distance: float                 # ||M_eta - M||_2
    b_dual_gap: float                  # |B - eta^(-2/3) b| relative to |lam* int M_eta M|
    oracle_mu: complex | None = None
    rel_gap: float | None = None
    meta: dict = field(default_factory=dict)


def _eval_b(params, phi, lam, eta, band, hx):
    basis = make_basis_eta(params, lam, eta, band=band, grid=_grid_for(eta, hx))
    sol = solve_penalized(basis, phi)
    b_val, _, _ = constraint_b(sol, params)
    return b_val, sol


def _grid_for(eta, hx):
    from .basis_eta import eta_grid
    return eta_grid(eta, hx=hx)


def solve_mu(eta: float, params: ModelParams, phi: PenaltyFunction | None = None,
             guess: complex | None = None, with_oracle: bool = False,
             hx: float = 0.02, band: Basis0 | None = None) -> EigenResult:
    """Secant search for B(lam, eta) = 0; mu = eta^(2/3) lam*."""
    if eta == 0:
        v = default_grid().v
        m0 = equilibrium(params, v)
        return EigenResult(0.0, 0j, 0j, 0.0, v, m0.astype(complex), 0, 0.0, 0.0, 0.0,
                           0j if with_oracle else None, 0.0 if with_oracle else None)
    if eta < 0:
        res = solve_mu(-eta, params, phi, None if guess is None else np.conj(guess),
                       with_oracle, hx, band)
        res.eta = eta
        res.lambda_star = np.conj(res.lambda_star)
        res.mu = np.conj(res.mu)
        res.eigenfunction = np.conj(res.eigenfunction)
        if res.oracle_mu is not None:
            res.oracle_mu = np.conj(res.oracle_mu)
        return res
    phi = phi or make_phi(params)
    scale = 1.0 / params.c_beta_sq          # int M^2
    tol = params.tol.root_rtol * scale
    lam0 = params.lambda0
    x0 = complex(guess) if guess is not None else 0j
    x1 = x0 + 1e-3 * lam0 if abs(x0) < 1e-6 else x0 * (1 + 1e-3)
    f0, _ = _eval_b(params, phi, x0, eta, band, hx)
    f1, sol = _eval_b(params, phi, x1, eta, band, hx)
    it = 2
    step = abs(x1 - x0)
    # small |B| alone leaves ~tol/|dB/dlam| absolute error in lam, so also ask for a small step
    while abs(f1) > tol or step > params.tol.root_rtol * abs(x1):
        if it >= MAX_SECANT:
            raise NumericalError(f"secant did not converge at eta={eta} (|B|={abs(f1):.3e})")
        if f1 == f0:
            if abs(f1) <= tol:
                break
            raise NumericalError("secant stalled: B unchanged between iterates")
        x2 = x1 - f1 * (x1 - x0) / (f1 - f0)
        if abs(x2) > lam0:
            raise NumericalError(f"root escaped |lambda| <= {lam0} at eta={eta}; "
                                 "eta is too large for the perturbative regime")
        step = abs(x2 - x1)
        x0, f0 = x1, f1
        x1 = x2
        f1, sol = _eval_b(params, phi, x1, eta, band, hx)
        it += 1
    b_val, i0, i1 = constraint_b(sol, params)
    mu = eta ** (2.0 / 3.0) * x1
    grid = sol.grid
    v = grid.v
    mfun = sol.m_curve / sol.m_curve[grid.n // 2]
    pv = potentials(params, v)
    _, d2 = grid.derivatives(mfun)
    lm = -d2 + (pv.w + 1j * eta * v) * mfun - mu * mfun
    inner = grid.interior
    qw = grid.weights
    defect = math.sqrt(np.dot(qw[inner], np.abs(lm[inner]) ** 2)
                       / np.dot(qw, np.abs(mfun) ** 2))
    m0 = equilibrium(params, v)
    l2 = math.sqrt(np.dot(qw, np.abs(mfun - m0) ** 2))
    dual = abs(b_val - eta ** (-2.0 / 3.0) * sol.b) / max(abs(x1 * i0), tol)
    res = EigenResult(float(eta), complex(x1), complex(mu), float(abs(f1)), v, mfun, it,
                      float(defect), float(l2), float(dual))
    res.meta.update(i0=i0, i1=i1, phi=(phi.sigma, phi.radius), hx=hx)
    if with_oracle:
        res.oracle_mu = oracle_mu(eta, params)
        res.rel_gap = float(abs(res.mu - res.oracle_mu) / abs(res.mu))
    return res


# ---------------------------------------------------------------- oracle

@dataclass
class OracleResult:
    mu: complex
    coarse: complex
    fine: complex
    second: complex
    v: np.ndarray
    vector: np.ndarray


def _fd_smallest(params, eta, v_cut, n, shift=0.0):
    v = np.linspace(-v_cut, v_cut, n + 2)[1:-1]
    h = v[1] - v[0]
    pot = potentials(params, v).w + 1j * eta * v
    main = 2.0 / h ** 2 + pot
    off = np.full(n - 1, -1.0 / h ** 2, dtype=complex)
    mat = sparse.diags([off, main, off], [-1, 0, 1], format="csc")
    lu = sparse_linalg.splu((mat - shift * sparse.identity(n, format="csc")).tocsc())
    # quotients x.x / x.(A^-1 x) avoid the cancellation of x.(A x) against |A| ~ 4/h^2
    x = equilibrium(params, v).astype(complex)
    x = x / np.sqrt(np.dot(x, x))
    mu = None
    for _ in range(200):
        y = lu.solve(x)
        new = 1.0 / np.dot(x, y) + shift
        x = y / np.sqrt(np.dot(y, y))
        if mu is not None and abs(new - mu) <= 1e-11 * abs(new):
            mu = new
            break
        mu = new
    else:
        raise NumericalError("oracle inverse iteration stagnated")
    # next eigenvalue by deflated inverse iteration (bilinear projection)
    z = np.cos(np.pi * v / v_cut) + 0j
    mu2 = None
    for _ in range(500):
        z = z - np.dot(x, z) * x
        z = z / np.sqrt(np.dot(z, z))
        y = lu.solve(z)
        y = y - np.dot(x, y) * x
        new = 1.0 / np.dot(z, y) + shift
        z = y
        if mu2 is not None and abs(new - mu2) <= 1e-8 * abs(new):
            mu2 = new
            break
        mu2 = new
    return complex(mu), complex(mu2), v, x


def oracle_eigen(eta: float, params: ModelParams, v_cut: float | None = None,
                 n: int = 4000) -> OracleResult:
    """Smallest eigenvalue of the second-order finite-difference discretization of
    -d^2 + W + i eta v on [-v_cut, v_cut] with zero end values, Richardson-extrapolated
    over n and 2n+1 interior points."""
    if n < 2000:
        raise ValueError("n must be at least 2000")
    if v_cut is None:
        v_cut = 200.0 if eta == 0 else 6.0 * abs(eta) ** (-1.0 / 3.0)
    if eta != 0 and v_cut < 4 * abs(eta) ** (-1.0 / 3.0):
        raise ValueError("v_cut must be at least 4 eta^(-1/3)")
    coarse, _, _, _ = _fd_smallest(params, eta, v_cut, n)
    fine, second, v, vec = _fd_smallest(params, eta, v_cut, 2 * n + 1)
    mu = (4.0 * fine - coarse) / 3.0
    if abs(second) < 10 * abs(fine):
        warnings.warn(f"oracle eigenvalue {fine:.4g} not separated from {second:.4g}",
                      ClusterWarning, stacklevel=2)
    return OracleResult(complex(mu), coarse, fine, second, v, vec)


def oracle_mu(eta: float, params: ModelParams, v_cut: float | None = None,
              n: int = 4000) -> complex:
    return oracle_eigen(eta, params, v_cut, n).mu


# ---------------------------------------------------------------- scan

@dataclass
class ScanResult:
    results: list
    errors: dict
    slope: float
    intercept: float


def _scan_point(args):
    eta, beta, phi_args, guess, with_oracle, hx = args
    from .model import make_params
    params = make_params(beta)
    phi = make_phi(params, *phi_args)
    return solve_mu(eta, params, phi, guess, with_oracle, hx)


def fit_power(etas, mus):
    """Least squares log|mu| = slope log eta + intercept."""
    x = np.log(np.abs(np.asarray(etas, dtype=float)))
    y = np.log(np.abs(np.asarray(mus)))
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def scan(eta_list, params: ModelParams, phi: PenaltyFunction | None = None,
         with_oracle: bool = False, jobs: int = 1, hx: float = 0.02) -> ScanResult:
    """mu(eta) along a descending list of eta, seeding each root from the power law so far."""
    etas = [float(e) for e in eta_list]
    if any(b > a for a, b in zip(etas, etas[1:])):
        raise ValueError("eta_list must be sorted in descending order")
    phi = phi or make_phi(params)
    phi_args = (phi.sigma, phi.radius, phi.delta)
    results: dict[int, EigenResult] = {}
    errors: dict[float, str] = {}
    alpha = params.alpha

    def guess_for(eta):
        done = [results[k] for k in sorted(results)]
        if not done:
            return None
        last = done[-1]
        return last.lambda_star * (eta / last.eta) ** (alpha - 2.0 / 3.0)

    prefix = min(2, len(etas))
    for i in range(prefix):
        try:
            results[i] = solve_mu(etas[i], params, phi, guess_for(etas[i]), with_oracle, hx)
        except (NumericalError, ValueError) as exc:
            errors[etas[i]] = str(exc)
    rest = list(range(prefix, len(etas)))
    tasks = [(etas[i], params.beta, phi_args, guess_for(etas[i]), with_oracle, hx) for i in rest]
    if jobs > 1 and tasks:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_scan_point, t) for t in tasks]
            for i, fut in zip(rest, futures):
                try:
                    results[i] = fut.result()
                except (NumericalError, ValueError) as exc:
                    errors[etas[i]] = str(exc)
    else:
        for i, t in zip(rest, tasks):
            try:
                results[i] = solve_mu(*t[:1], params, phi, guess_for(etas[i]), with_oracle, hx)
            except (NumericalError, ValueError) as exc:
                errors[etas[i]] = str(exc)
    ordered = [results[i] for i in sorted(results)]
    if len(ordered) >= 2:
        slope, intercept = fit_power([r.eta for r in ordered], [r.mu for r in ordered])
    else:
        slope = intercept = math.nan
    return ScanResult(ordered, errors, slope, intercept)
