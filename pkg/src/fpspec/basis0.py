"""Solutions of the limiting operator L0 = -d^2/dv^2 + W_tilde and its right inverse.

psi is the even positive solution with psi(0)=1. psi1 = psi * int_v^inf psi^-2
decays at +inf, psi2(v) = psi1(-v) decays at -inf, and the pair is scaled to
Wronskian one. T0 f = psi1(v) int_{-inf}^v psi2 f + psi2(v) int_v^inf psi1 f.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grids import MappedGrid
from .model import ModelParams, NumericalError, bracket, equilibrium, potentials
from .ode import SolutionCurve, integrate

DEFAULT_V_MAX = 100.0


@dataclass
class Basis0:
    params: ModelParams
    grid: MappedGrid
    psi: SolutionCurve
    psi1: SolutionCurve
    psi2: SolutionCurve
    c: float
    c1: float
    c2: float
    norm: float
    tail_right: np.ndarray          # int_v^inf psi^-2 at the grid nodes
    fit_correction: float           # fitted a in psi ~ c v^(g+1) (1 + a v^-2)
    z_curve: SolutionCurve | None = None

    def inv_psi_sq_tail(self, v):
        """int_v^inf psi^-2 for arbitrary v."""
        v = np.asarray(v, dtype=float)
        g = self.params.gamma
        total = self.norm ** 2
        vmax = self.grid.v[-1]
        out = np.empty(v.shape)
        inside = np.abs(v) <= vmax
        vi = v[inside]
        # Hermite in v with slope -psi^-2
        pv = self.grid.v
        k = np.clip(np.searchsorted(pv, vi, side="right") - 1, 0, len(pv) - 2)
        h = pv[k + 1] - pv[k]
        t = (vi - pv[k]) / h
        s0 = -1.0 / self.psi.value[k].real ** 2
        s1 = -1.0 / self.psi.value[k + 1].real ** 2
        t2, t3 = t * t, t * t * t
        out[inside] = ((2 * t3 - 3 * t2 + 1) * self.tail_right[k] + (t3 - 2 * t2 + t) * h * s0
                       + (-2 * t3 + 3 * t2) * self.tail_right[k + 1] + (t3 - t2) * h * s1)
        hi = v > vmax
        out[hi] = _power_tail(v[hi], self.c, self.fit_correction, g)
        lo = v < -vmax
        out[lo] = total - _power_tail(-v[lo], self.c, self.fit_correction, g)
        return out

    def kernel(self, v, w):
        """K0(v, w) for scalars or broadcastable arrays inside the grid."""
        p1v, _ = self.psi1(v)
        p2v, _ = self.psi2(v)
        p1w, _ = self.psi1(w)
        p2w, _ = self.psi2(w)
        return np.where(np.asarray(w) < np.asarray(v), p1v * p2w, p1w * p2v).real


def _power_tail(v, c, a, g):
    # int_v^inf c^-2 w^(-2g-2) (1 + a w^-2)^-2 dw to second order
    p = 2 * g + 1
    return (v ** -p / p - 2 * a * v ** -(p + 2) / (p + 2)) / c ** 2


def _fit_power(v, y, p):
    """Least squares y / v^p = c (1 + a v^-2 + b v^-4); returns (c, a)."""
    r = y / v ** p
    design = np.stack([np.ones_like(v), v ** -2, v ** -4], axis=1)
    coef, *_ = np.linalg.lstsq(design, r, rcond=None)
    return coef[0], coef[1] / coef[0]


def default_grid(v_max: float = DEFAULT_V_MAX, hx: float = 0.02) -> MappedGrid:
    return MappedGrid.symmetric(v_max, hx=hx)


def solve_psi(params: ModelParams, v_max: float = DEFAULT_V_MAX,
              grid: MappedGrid | None = None) -> SolutionCurve:
    """Even solution of psi'' = W_tilde psi with psi(0)=1, psi'(0)=0, sampled on the grid.

    The curve carries per-cell integrals of psi^-2 in ``quad_pieces``.
    """
    if grid is None:
        if v_max < 50:
            raise ValueError("v_max must be at least 50 for the power-law fit")
        grid = default_grid(v_max)
    g = params.gamma
    gg = g * (g + 1.0)
    nodes = grid.v[grid.n // 2:]
    q = lambda v: gg / (1.0 + v * v)
    raw = integrate(q, 0.0, float(nodes[-1]), 1.0, 0.0, params.tol.ode_tol, eval_points=nodes,
                    quad=lambda v, y, d: 1.0 / (y * y))
    half = raw.restrict(nodes)
    if np.any(half.value.real <= 0):
        bad = half.grid[np.argmax(half.value.real <= 0)]
        raise NumericalError(f"psi lost positivity at v={bad:.6g}")
    value = np.concatenate((half.value[:0:-1], half.value)).real
    deriv = np.concatenate((-half.derivative[:0:-1], half.derivative)).real
    second = np.concatenate((half.second[:0:-1], half.second)).real
    pieces = np.concatenate((half.quad_pieces[::-1], half.quad_pieces)).real
    curve = SolutionCurve(grid.v.copy(), value, deriv, second, pieces, dict(half.meta))
    vm = nodes[-1]
    tail = (nodes >= vm / 10) & (nodes > 0)
    c, a = _fit_power(nodes[tail], half.value.real[tail], g + 1.0)
    curve.meta.update(c=float(c), correction=float(a), grid=grid)
    return curve


def build_basis(psi: SolutionCurve, params: ModelParams, with_companion: bool = True) -> Basis0:
    grid: MappedGrid = psi.meta["grid"]
    g = params.gamma
    c, a = psi.meta["c"], psi.meta["correction"]
    if not np.isfinite(c) or c <= 0:
        raise NumericalError("asymptotic constant of psi did not stabilize")
    n0 = grid.n // 2
    vmax = grid.v[-1]
    right = np.concatenate((np.cumsum(psi.quad_pieces[::-1])[::-1], [0.0]))
    right = right + _power_tail(vmax, c, a, g)
    total = 2.0 * right[n0]
    # int_v^inf = total - int_{|v|}^inf for v < 0; no small differences
    right[:n0] = total - right[::-1][:n0]
    norm = math.sqrt(total)
    val = psi.value * right / norm
    der = (psi.derivative * right - 1.0 / psi.value) / norm
    sec = params_w_tilde(params, grid.v) * val
    psi1 = SolutionCurve(grid.v.copy(), val, der, sec)
    psi2 = SolutionCurve(grid.v.copy(), val[::-1].copy(), -der[::-1], sec[::-1].copy())
    c1 = 1.0 / (c * (2 * g + 1) * norm)
    c2 = c * norm
    basis = Basis0(params, grid, psi, psi1, psi2, float(c), float(c1), float(c2), norm, right,
                   float(a))
    if with_companion:
        basis.z_curve = companion_z(params, grid=grid)
    return basis


def params_w_tilde(params: ModelParams, v):
    return potentials(params, v).w_tilde


def _tail_power(grid: MappedGrid, f: np.ndarray, end: int):
    """Local decay exponent of f at one end of the grid (end = 0 or -1)."""
    i0, i1 = (0, 1) if end == 0 else (-1, -2)
    f0, f1 = f[i0], f[i1]
    v0, v1 = abs(grid.v[i0]), abs(grid.v[i1])
    if f0 == 0 or f1 == 0:
        return math.inf
    return -math.log(abs(f0) / abs(f1)) / math.log(v0 / v1)


def green_apply(grid: MappedGrid, psi1: SolutionCurve, psi2: SolutionCurve, f: np.ndarray,
                tail_left: complex = 0.0, tail_right: complex = 0.0):
    """(u, u') with u = psi1 int_{-inf}^v psi2 f + psi2 int_v^inf psi1 f on the grid."""
    left = grid.cumulative(psi2.value * f) + tail_left
    right = grid.reverse_cumulative(psi1.value * f) + tail_right
    u = psi1.value * left + psi2.value * right
    du = psi1.derivative * left + psi2.derivative * right
    return u, du


def _sample(f, grid: MappedGrid):
    if callable(f):
        return np.asarray(f(grid.v))
    f = np.asarray(f)
    if f.shape != grid.v.shape:
        raise ValueError("sampled f must live on the basis grid")
    return f


def apply_t0(f, basis: Basis0) -> SolutionCurve:
    """Right inverse of L0 applied to f (callable or samples on the basis grid)."""
    grid = basis.grid
    g = basis.params.gamma
    fs = _sample(f, grid).astype(float)
    scale = np.abs(fs).max() if fs.size else 0.0
    tails = []
    for end in (0, -1):
        fe = fs[end]
        if scale == 0 or abs(fe) <= 1e-15 * scale:
            tails.append(0.0)
            continue
        sigma = _tail_power(grid, fs, end)
        if not sigma > g + 2:
            raise ValueError(f"f decays like |v|^-{sigma:.3g}; T0 needs decay faster than "
                             f"|v|^-{g + 2:.3g}")
        vend = abs(grid.v[end])
        # psi1 ~ c1 v^-g at +inf, psi2 ~ c1 |v|^-g at -inf
        tails.append(basis.c1 * fe * vend ** (1 - g) / (sigma + g - 1))
    u, du = green_apply(grid, basis.psi1, basis.psi2, fs, tails[0], tails[1])
    wt = params_w_tilde(basis.params, grid.v)
    _, d2u = grid.derivatives(u)
    res = -d2u + wt * u - fs
    inner = grid.interior
    residual = float(np.abs(res[inner]).max())
    return SolutionCurve(grid.v.copy(), u, du, wt * u - fs,
                         meta={"residual": residual, "tails": tuple(tails)})


def kernel_bound_check(basis: Basis0, delta: float) -> float:
    """sup_v int K0(v,w) <w>^(-g-d-2) dw / <v>^-g over the basis grid."""
    if not 0 < delta < 2:
        raise ValueError("delta must lie in (0, 2)")
    g = basis.params.gamma
    p1 = lambda v: bracket(v) ** (-g - delta - 2)
    u = apply_t0(p1, basis)
    ratio = u.value.real / bracket(basis.grid.v) ** (-g)
    return float(ratio.max())


def companion_z(params: ModelParams, v_max: float = DEFAULT_V_MAX,
                grid: MappedGrid | None = None) -> SolutionCurve:
    """Z = M(v) int_0^v M^-2, the growing solution of (-d^2 + W) Z = 0 with Z(0)=0, Z'(0)=1."""
    grid = grid or default_grid(v_max)
    v = grid.v
    m = equilibrium(params, v)
    dm = -params.gamma * v * (1 + v * v) ** (-0.5 * params.gamma - 1)
    integral = grid.cumulative_from_center(m ** -2.0)
    z = m * integral
    dz = dm * integral + 1.0 / m
    w = potentials(params, v).w
    _, d2z = grid.derivatives(z)
    res = np.abs(-d2z + w * z)[grid.interior] / np.maximum(1.0, np.abs(z[grid.interior]))
    return SolutionCurve(v.copy(), z, dz, w * z, meta={"residual": float(res.max())})
