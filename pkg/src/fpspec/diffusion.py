"""Macroscopic side: the fractional heat semigroup in Fourier variables, a
principal-value fractional Laplacian, and a time-domain check that a single
kinetic Fourier mode decays at the rate Re mu(eta).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate as sci_integrate
from scipy import sparse
from scipy.interpolate import CubicSpline
from scipy.sparse import linalg as sparse_linalg
from scipy.special import gammaln

from .model import ModelParams, NumericalError, equilibrium, potentials


@dataclass(frozen=True)
class DensityProfile:
    xi: np.ndarray
    rho_hat: np.ndarray
    t: float = 0.0

    def is_conjugate_symmetric(self, tol: float = 0.0) -> bool:
        """conj(rho_hat(-xi)) == rho_hat(xi), for xi laid out symmetrically."""
        if not np.array_equal(self.xi, -self.xi[::-1]):
            raise ValueError("xi grid is not symmetric about 0")
        return bool(np.all(np.abs(np.conj(self.rho_hat[::-1]) - self.rho_hat) <= tol))


def evolve_rho_hat(profile: DensityProfile, t: float, kappa: float, alpha: float) -> DensityProfile:
    """rho_hat(t + s, xi) = exp(-kappa |xi|^alpha s) rho_hat(t, xi)."""
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    if not 2.0 / 3.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (2/3, 2)")
    factor = np.exp(-kappa * np.abs(profile.xi) ** alpha * t)
    return replace(profile, rho_hat=profile.rho_hat * factor, t=profile.t + t)


def frac_constant(alpha: float) -> float:
    """c_alpha with (-Delta)^(alpha/2) having symbol |xi|^alpha in one dimension."""
    return math.exp(math.log(alpha) + (alpha - 1) * math.log(2.0) + gammaln((1 + alpha) / 2)
                    - 0.5 * math.log(math.pi) - gammaln(1 - alpha / 2))


def frac_laplacian_pv(rho, x, alpha: float, points=None, small: float = 1e-3):
    """c_alpha P.V. int (rho(x) - rho(y)) / |x - y|^(1+alpha) dy at ``points``.

    ``rho`` is either samples on the increasing grid ``x`` (interpolated by a cubic
    spline, zero outside) or a callable. The integral is folded to z > 0 with
    symmetric differences; [0, small] uses the Taylor term -rho'' z^2, the far
    part past the sampled range uses rho ~ 0.
    """
    if not 0 < alpha < 2:
        raise ValueError("alpha must lie in (0, 2)")
    x = np.asarray(x, dtype=float)
    if callable(rho):
        f = rho
        h = 1e-3
        d2 = lambda p: (f(p + h) - 2 * f(p) + f(p - h)) / h ** 2
    else:
        spline = CubicSpline(x, np.asarray(rho, dtype=float), bc_type="natural", extrapolate=False)
        f = lambda p: np.nan_to_num(spline(p), nan=0.0)
        d2 = lambda p: float(np.nan_to_num(spline(p, 2), nan=0.0))
    pts = np.atleast_1d(x if points is None else np.asarray(points, dtype=float))
    c = frac_constant(alpha)
    out = np.empty(pts.shape)
    for i, p in enumerate(pts):
        fp = float(f(p))
        reach = max(abs(x[-1] - p), abs(x[0] - p))
        head = -float(d2(p)) * small ** (2 - alpha) / (2 - alpha)
        body, _ = sci_integrate.quad(lambda z: (2 * fp - float(f(p + z)) - float(f(p - z)))
                                     / z ** (1 + alpha), small, reach, limit=400,
                                     epsabs=1e-13, epsrel=1e-11)
        tail = 2 * fp * reach ** (-alpha) / alpha
        out[i] = c * (head + body + tail)
    if points is not None and np.ndim(points) == 0:
        return float(out[0])
    return out


def frac_laplacian_fourier(rho_hat_fn, x, alpha: float, xi_max: float = 60.0):
    """Oracle side: inverse transform of |xi|^alpha rho_hat(xi) for even rho_hat."""
    out = []
    for p in np.atleast_1d(x):
        val, _ = sci_integrate.quad(lambda k: k ** alpha * rho_hat_fn(k) * math.cos(k * p),
                                    0.0, xi_max, limit=400, epsabs=1e-13)
        out.append(val / math.pi)
    return np.array(out)


@dataclass
class ModeDecay:
    rate: float
    fit_residual: float
    times: np.ndarray
    projection: np.ndarray


def _fd_operator(params, eta, v):
    # fourth-order five-point -d^2/dv^2, zero values beyond the ends
    h = v[1] - v[0]
    n = len(v)
    pot = potentials(params, v).w + 1j * eta * v
    c = 1.0 / (12.0 * h * h)
    near = np.full(n - 1, -16.0 * c, dtype=complex)
    far = np.full(n - 2, 1.0 * c, dtype=complex)
    return sparse.diags([far, near, 30.0 * c + pot, near, far], [-2, -1, 0, 1, 2], format="csc")


def kinetic_mode_decay(params: ModelParams, eta: float, T: float = 400.0, dt: float = 0.5,
                       n: int = 16000, v_cut: float | None = None, eigenfunction=None,
                       fit_fraction: float = 0.5, max_residual: float = 1e-3) -> ModeDecay:
    """Implicit-Euler evolution of d g/dt = -L_eta g from g(0) = M; rate of |int g M_eta|.

    ``eigenfunction`` is (v, M_eta) on any grid; it is computed with solve_mu when omitted.
    The fitted rate is corrected for the implicit-Euler amplification 1/(1 + dt mu).
    """
    if T <= 0 or dt <= 0 or dt > T / 20:
        raise ValueError("need T > 0 and at least 20 time steps")
    if v_cut is None:
        v_cut = 200.0 if eta == 0 else 6.0 * abs(eta) ** (-1.0 / 3.0)
    v = np.linspace(-v_cut, v_cut, n + 2)[1:-1]
    hv = v[1] - v[0]
    if eta == 0:
        weight = equilibrium(params, v).astype(complex)
    else:
        if eigenfunction is None:
            from .eigen import solve_mu
            res = solve_mu(eta, params)
            eigenfunction = (res.v, res.eigenfunction)
        ev, em = eigenfunction
        weight = np.interp(v, ev, em.real) + 1j * np.interp(v, ev, em.imag)
    op = _fd_operator(params, eta, v)
    lu = sparse_linalg.splu((sparse.identity(n, format="csc") + dt * op).tocsc())
    g = equilibrium(params, v).astype(complex)
    steps = int(round(T / dt))
    proj = np.empty(steps + 1, dtype=complex)
    proj[0] = hv * np.dot(g, weight)
    for k in range(steps):
        g = lu.solve(g)
        proj[k + 1] = hv * np.dot(g, weight)
    times = dt * np.arange(steps + 1)
    keep = times >= (1 - fit_fraction) * times[-1]
    logmod = np.log(np.abs(proj[keep]))
    slope, icpt = np.polyfit(times[keep], logmod, 1)
    resid = float(np.abs(logmod - (slope * times[keep] + icpt)).max())
    decay = -slope
    if resid > max_residual * max(1.0, abs(decay) * T):
        raise NumericalError(f"decay fit residual {resid:.2e}: horizon too short to separate "
                             "the slow mode")
    # undo the implicit Euler factor: |1 + dt mu| = exp(dt * decay)
    rate = (math.exp(dt * decay) - 1.0) / dt
    return ModeDecay(float(rate), resid, times, proj)
