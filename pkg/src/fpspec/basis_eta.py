"""Solutions of L_{lam,eta} = -d^2/dv^2 + W_tilde + i eta v - lam eta^(2/3), its
right inverse, and the Airy-matched weights.

In the rescaled variable s = eta^(1/3) v the far field solves u_ss = (i s - lam) u,
whose solutions a (recessive at +inf) and b (recessive at -inf) are supplied by
the airy module.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .airy import RotatedPair, decompose_in_airy_basis
from .basis0 import Basis0, green_apply, kernel_bound_check
from .grids import MappedGrid
from .model import ModelParams, NumericalError, bracket, potentials
from .ode import SolutionCurve, integrate

DEFAULT_S0 = 3.0
DEFAULT_EXTENT = 8.0      # grid half-width in units of eta^(-1/3)
DEFAULT_DELTA = 1.0


@dataclass
class BasisEta:
    params: ModelParams
    lam: complex
    eta: float
    grid: MappedGrid
    psi_le: SolutionCurve
    s0: float
    c_lambda: complex
    a_ratio: float                  # |a-part| / |b-part| of psi_le at the matching point
    psi1: SolutionCurve | None = None
    psi2: SolutionCurve | None = None
    wronskian_target: complex | None = None     # int_R psi_le^-2
    tail_fraction: float = 0.0
    bounds: tuple[float, float] | None = None   # C1 psi <= |psi_le| <= C2 psi on the bulk
    meta: dict = field(default_factory=dict)

    @property
    def scale(self) -> float:
        return self.eta ** (-1.0 / 3.0)

    def potential(self, v):
        """q(v) with L u = -u'' + q u."""
        v = np.asarray(v, dtype=float)
        return (potentials(self.params, v).w_tilde + 1j * self.eta * v
                - self.lam * self.eta ** (2.0 / 3.0))

    def kernel(self, v, w):
        p1v, _ = self.psi1(v)
        p2v, _ = self.psi2(v)
        p1w, _ = self.psi1(w)
        p2w, _ = self.psi2(w)
        return np.where(np.asarray(w) < np.asarray(v), p1v * p2w, p1w * p2v)


@lru_cache(maxsize=64)
def eta_grid(eta: float, extent: float = DEFAULT_EXTENT, hx: float = 0.02) -> MappedGrid:
    return MappedGrid.symmetric(extent * eta ** (-1.0 / 3.0), hx=hx)


def _airy_pair_v(lam, eta, v):
    """(a, a_v, b, b_v) of the rescaled Airy pair as functions of v."""
    pair = RotatedPair(complex(lam))
    k = eta ** (1.0 / 3.0)
    av, ad = pair.a(k * v)
    bv, bd = pair.b(k * v)
    return av, k * ad, bv, k * bd


def solve_psi_eta(params: ModelParams, lam: complex, eta: float, v_max: float | None = None,
                  s0: float = DEFAULT_S0, grid: MappedGrid | None = None) -> BasisEta:
    """Cauchy solution psi(0)=1, psi'(0)=0, integrated outward to both grid ends."""
    if not eta > 0:
        raise ValueError("eta must be positive; use basis0 for eta = 0")
    if eta > params.eta0 * (1 + 1e-12):
        raise ValueError(f"eta={eta} exceeds eta0={params.eta0}")
    if abs(lam) > params.lambda0 * (1 + 1e-12):
        raise ValueError(f"|lambda|={abs(lam):.3g} exceeds lambda0={params.lambda0}")
    scale = eta ** (-1.0 / 3.0)
    if grid is None:
        grid = eta_grid(eta) if v_max is None else MappedGrid.symmetric(v_max)
    if grid.v[-1] < (s0 + 2) * scale * (1 - 1e-12):
        raise ValueError("grid must reach (s0 + 2) eta^(-1/3)")
    g = params.gamma
    gg = g * (g + 1.0)
    shift = complex(lam) * eta ** (2.0 / 3.0)
    q = lambda v: gg / (1.0 + v * v) + 1j * eta * v - shift
    inv_sq = lambda v, y, d: 1.0 / (y * y)
    tol = params.tol.ode_tol
    m = grid.n // 2
    right = integrate(q, 0.0, float(grid.v[-1]), 1.0, 0.0, tol, eval_points=grid.v[m:],
                      quad=inv_sq).restrict(grid.v[m:])
    left = integrate(q, 0.0, float(grid.v[0]), 1.0, 0.0, tol, eval_points=grid.v[:m + 1],
                     quad=inv_sq).restrict(grid.v[:m + 1])
    value = np.concatenate((left.value[:-1], right.value))
    deriv = np.concatenate((left.derivative[:-1], right.derivative))
    second = np.concatenate((left.second[:-1], right.second))
    pieces = np.concatenate((left.quad_pieces, right.quad_pieces))
    mod = np.abs(value)
    if not np.all(np.isfinite(value)) or mod.min() <= 1e-300:
        raise NumericalError("psi_le vanishes on the grid; lambda0/eta0 too large or "
                             "integration failed")
    meta = {"steps": left.meta["steps"] + right.meta["steps"],
            "max_local_error": max(left.meta["max_local_error"], right.meta["max_local_error"])}
    psi = SolutionCurve(grid.v.copy(), value, deriv, second, pieces, meta)

    v_match = s0 * scale
    val, der = psi(v_match)
    c_a, c_b = decompose_in_airy_basis(val, der * scale, s0, lam)
    pair = RotatedPair(complex(lam))
    a_part = abs(c_a * pair.a(s0)[0])
    b_part = abs(c_b * pair.b(s0)[0])
    c_lambda = complex(c_b * eta ** ((g + 1.0) / 3.0))
    return BasisEta(params, complex(lam), float(eta), grid, psi, s0, c_lambda,
                    float(a_part / b_part))


def build_basis_eta(basis: BasisEta, band: Basis0 | None = None) -> BasisEta:
    """Complete the basis: psi1 = psi int_v^inf psi^-2 / sqrt(Z), psi2 likewise from -inf.

    Z = int_R psi^-2 (complex), so the Wronskian psi1 psi2' - psi1' psi2 equals 1.
    """
    grid, psi = basis.grid, basis.psi_le
    lam, eta = basis.lam, basis.eta
    # far-field tails from the recessive Airy solution beyond each end
    ends = []
    for i in (0, -1):
        v_end = float(grid.v[i])
        av, ad, bv, bd = _airy_pair_v(lam, eta, v_end)
        rec, drec = (av, ad) if i == -1 else (bv, bd)
        w = psi.value[i] * drec - psi.derivative[i] * rec
        ends.append(rec / (psi.value[i] * w))
    tail_left, tail_right = ends[0], -ends[1]
    pieces = psi.quad_pieces
    plus = np.concatenate((np.cumsum(pieces[::-1])[::-1], [0.0])) + tail_right
    minus = np.concatenate(([0.0], np.cumsum(pieces))) + tail_left
    m = grid.n // 2
    # each running sum is accurate where it is small; rebuild the other side through v = 0
    plus[:m] = plus[m] + (minus[m] - minus[:m])
    minus[m + 1:] = minus[m] + (plus[m] - plus[m + 1:])
    total = plus[m] + minus[m]
    tail_fraction = float((abs(tail_left) + abs(tail_right)) / abs(total))
    if not np.isfinite(tail_fraction) or tail_fraction > 1e-6:
        raise NumericalError(f"psi_le^-2 tails carry {tail_fraction:.2e} of the total; "
                             "grid too short")
    norm = cmath.sqrt(total)
    val1 = psi.value * plus / norm
    der1 = (psi.derivative * plus - 1.0 / psi.value) / norm
    val2 = psi.value * minus / norm
    der2 = (psi.derivative * minus + 1.0 / psi.value) / norm
    q = basis.potential(grid.v)
    basis.psi1 = SolutionCurve(grid.v.copy(), val1, der1, q * val1)
    basis.psi2 = SolutionCurve(grid.v.copy(), val2, der2, q * val2)
    basis.wronskian_target = complex(total)
    basis.tail_fraction = tail_fraction
    if band is not None:
        bulk = np.abs(grid.v) <= min(basis.s0 * basis.scale, band.grid.v[-1])
        ref, _ = band.psi(grid.v[bulk])
        ratio = np.abs(psi.value[bulk]) / ref.real
        basis.bounds = (float(ratio.min()), float(ratio.max()))
    return basis


def make_basis_eta(params: ModelParams, lam: complex, eta: float, band: Basis0 | None = None,
                   **kw) -> BasisEta:
    return build_basis_eta(solve_psi_eta(params, lam, eta, **kw), band)


def t_eta_matrix(basis: BasisEta) -> np.ndarray:
    """Dense matrix of T_{lam,eta} acting on samples of f on the basis grid."""
    left, right = basis.grid.cumulative_matrices
    p1, p2 = basis.psi1.value, basis.psi2.value
    return p1[:, None] * left * p2[None, :] + p2[:, None] * right * p1[None, :]


def apply_t_eta(f, basis: BasisEta) -> SolutionCurve:
    """T_{lam,eta} f with a finite-difference residual of L_{lam,eta} u = f in meta."""
    grid = basis.grid
    fs = np.asarray(f(grid.v) if callable(f) else f, dtype=complex)
    if fs.shape != grid.v.shape:
        raise ValueError("sampled f must live on the basis grid")
    scale = np.abs(fs).max() if fs.size else 0.0
    tails = []
    for end, rec in ((0, basis.psi2), (-1, basis.psi1)):
        fe = fs[end]
        if scale == 0 or abs(fe) <= 1e-15 * scale:
            tails.append(0.0)
            continue
        inner = -2 if end == -1 else 1
        ratio = abs(fs[end]) / abs(fs[inner])
        sigma = -math.log(ratio) / math.log(abs(grid.v[end] / grid.v[inner]))
        if not sigma > 2:
            raise ValueError(f"f decays like |v|^-{sigma:.3g}; T needs faster than |v|^-2")
        # recessive solution decays like exp(-k |v|) locally; integrate the product tail
        k = -rec.derivative[end] / rec.value[end] * (1 if end == -1 else -1)
        tails.append(rec.value[end] * fe / k)
    u, du = green_apply(grid, basis.psi1, basis.psi2, fs, tails[0], tails[1])
    q = basis.potential(grid.v)
    _, d2u = grid.derivatives(u)
    res = (-d2u + q * u - fs)[grid.interior]
    return SolutionCurve(grid.v.copy(), u, du, q * u - fs,
                         meta={"residual": float(np.abs(res).max())})


@dataclass
class WeightProfile:
    params: ModelParams
    lam: complex
    eta: float
    delta: float
    s0: float
    seam_right: float = 1.0
    seam_left: float = 1.0
    raw_jump: tuple[float, float] = (1.0, 1.0)

    def p2(self, v):
        v = np.asarray(v, dtype=float)
        g = self.params.gamma
        out = bracket(v) ** (-g)
        if self.eta == 0:
            return out
        edge = self.s0 * self.eta ** (-1.0 / 3.0)
        hi, lo = v > edge, v < -edge
        if hi.any() or lo.any():
            av, _, bv, _ = _airy_pair_v(self.lam, self.eta, v[hi | lo])
            far = np.where(v[hi | lo] > 0, self.seam_right * np.abs(av),
                           self.seam_left * np.abs(bv))
            out[hi | lo] = self.eta ** (g / 3.0) * far
        return out

    def p1(self, v):
        return self.p2(v) / bracket(v) ** (2.0 + self.delta)


def weight(params: ModelParams, lam: complex, eta: float, delta: float = DEFAULT_DELTA,
           s0: float = DEFAULT_S0) -> WeightProfile:
    """Bulk weight <v>^-g glued to eta^(g/3)|a| (right) and eta^(g/3)|b| (left).

    The Airy branches carry a seam constant so that p2 is continuous.
    """
    if not 0 < delta < 2:
        raise ValueError("delta must lie in (0, 2)")
    prof = WeightProfile(params, complex(lam), float(eta), float(delta), float(s0))
    if eta == 0:
        return prof
    g = params.gamma
    edge = s0 * eta ** (-1.0 / 3.0)
    bulk = (1 + edge * edge) ** (-g / 2)
    av, _, bv, _ = _airy_pair_v(lam, eta, np.array([edge, -edge]))
    raw_r = eta ** (g / 3.0) * abs(av[0])
    raw_l = eta ** (g / 3.0) * abs(bv[1])
    prof.seam_right = bulk / raw_r
    prof.seam_left = bulk / raw_l
    prof.raw_jump = (raw_l / bulk, raw_r / bulk)
    return prof


def weighted_kernel_bound(basis: BasisEta | Basis0, weights: WeightProfile) -> float:
    """sup_v int |K(v,w)| p1(w) dw / p2(v) over the basis grid."""
    if isinstance(basis, Basis0):
        return kernel_bound_check(basis, weights.delta)
    grid = basis.grid
    p1 = weights.p1(grid.v)
    a1 = SolutionCurve(grid.v, np.abs(basis.psi1.value), np.zeros(grid.n))
    a2 = SolutionCurve(grid.v, np.abs(basis.psi2.value), np.zeros(grid.n))
    u, _ = green_apply(grid, a1, a2, p1)
    ratio = u / weights.p2(grid.v)
    return float(ratio.max())
