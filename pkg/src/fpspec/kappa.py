"""The diffusion coefficient.

H0 solves -H'' + g(g+1) s^-2 H + i s H = 0 on s > 0 with H ~ s^-g at 0 and
decay at +inf; kappa = -2 C^2 int_0^inf s^(1-g) Im H0 ds. A second estimate
comes from fitting the small-eigenvalue scan mu(eta) ~ kappa eta^alpha.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .airy import RotatedPair, decompose_in_airy_basis
from .model import ModelParams, NumericalError
from .ode import FrobeniusSeed, SolutionCurve, frobenius_seed, integrate, join_curves

log = logging.getLogger(__name__)

S_START = 1e-2
S_MAX = 14.0
S_CUT = 4.0
# below this radius H0 is taken from its Frobenius series (truncation < 1e-22 there).
# Shooting the s^-g branch outward from s_start amplifies step errors along the
# s^(g+1) branch by (s/s_start)^(2g+1), which ruins the mixing coefficient.
S_SERIES = 0.5
SAMPLE_DU = 0.01


def _sample_points(s_start, s_end, du):
    """Nodes uniform in u = log s + s: geometric near 0, uniform for large s."""
    u0, u1 = math.log(s_start) + s_start, math.log(s_end) + s_end
    n = max(8, int(math.ceil((u1 - u0) / du)))
    u = np.linspace(u0, u1, n + 1)
    s = np.exp(np.minimum(u, 0.0))
    for _ in range(60):
        step = (np.log(s) + s - u) / (1.0 / s + 1.0)
        s = s - step
        if np.abs(step).max() <= 1e-15 * s.max():
            break
    s[0], s[-1] = s_start, s_end
    return u, s


@dataclass
class H0Solution:
    gamma: float
    a_mix: complex
    curve: SolutionCurve
    far_coeffs: tuple[complex, complex]
    c_a: complex                          # H0 = c_a R beyond s_cut, R the recessive solution
    s_start: float
    s_max: float
    s_cut: float
    seeds: tuple[FrobeniusSeed, FrobeniusSeed]
    pieces: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)


def _series_cells(seed: FrobeniusSeed, nodes, power):
    """Cell integrals of s^power times the series over consecutive nodes."""
    out = np.zeros(len(nodes) - 1, dtype=complex)
    lo, hi = nodes[:-1], nodes[1:]
    for k, b in enumerate(seed.coeffs):
        if b == 0:
            continue
        p = seed.rho + k + power + 1.0
        if abs(p) < 1e-14:
            out += b * np.log(hi / lo)
        else:
            out += b * (hi ** p - lo ** p) / p
    return out


def _series_curve(seed: FrobeniusSeed, nodes, q, power):
    val, der = seed.evaluate(nodes)
    return SolutionCurve(nodes, val, der, q(nodes) * val, _series_cells(seed, nodes, power))


def _run(q, seed_or_data, s_from, s_to, points, tol, weight_power):
    y0, dy0 = seed_or_data
    quad = lambda s, y, d: s ** weight_power * y
    return integrate(q, s_from, s_to, y0, dy0, tol, eval_points=points,
                     quad=quad).restrict(points)


def solve_h0(params: ModelParams, s_start: float = S_START, s_max: float = S_MAX,
             s_cut: float = S_CUT, tol: float | None = None,
             s_series: float = S_SERIES, du: float = SAMPLE_DU) -> H0Solution:
    """Two Frobenius branches shot outward, combined so the growing Airy part cancels.

    The branches are the series s^-g (1 + ...) and s^(g+1) (1 + ...); both are
    summed directly on [s_start, s_series] and integrated from there to s_max.
    """
    if not 0 < s_start <= 1e-2:
        raise ValueError("s_start must lie in (0, 1e-2]")
    if s_max < 12:
        raise ValueError("s_max must be at least 12")
    if not 1.0 < s_cut < s_max - 2:
        raise ValueError("s_cut must lie well inside (1, s_max)")
    g = params.gamma
    tol = tol or params.tol.ode_tol
    gg = g * (g + 1.0)
    q = lambda s: gg / (s * s) + 1j * s
    u_nodes, nodes = _sample_points(s_start, s_max, du)
    k_ser = int(np.argmin(np.abs(nodes - max(s_series, s_start))))
    s_series = float(nodes[k_ser])
    k_cut = int(np.argmin(np.abs(nodes - s_cut)))
    s_cut = float(nodes[k_cut])
    if k_cut <= k_ser:
        raise ValueError("s_cut must exceed the series radius")
    part = frobenius_seed(-g, g, 0.0, s_series)
    homog = frobenius_seed(g + 1.0, g, 0.0, s_series)
    inner = nodes[:k_cut + 1]
    outer = nodes[k_cut:]
    w = 1.0 - g
    runs = []
    for seed in (part, homog):
        near0 = _series_curve(seed, nodes[:k_ser + 1], q, w)
        shot = _run(q, (seed.value, seed.derivative), s_series, s_max, nodes[k_ser:], tol, w)
        runs.append(join_curves(near0, shot))
    cb = []
    ca = []
    for run in runs:
        c_a, c_b = decompose_in_airy_basis(run.value[-1], run.derivative[-1], s_max, 0.0)
        ca.append(c_a)
        cb.append(c_b)
    scale_b = max(abs(cb[0]), 1e-300)
    if abs(cb[1]) <= 1e-14 * scale_b:
        raise NumericalError("homogeneous branch has no growing component; connection singular")
    a_mix = -cb[0] / cb[1]

    # recessive solution of the full equation, integrated inward (its growth direction)
    pair = RotatedPair(0.0)
    av, ad = pair.a(s_max)
    rec = _run(q, (complex(av), complex(ad)), s_max, s_cut, outer, tol, w)
    comb_val = runs[0].value[k_cut] + a_mix * runs[1].value[k_cut]
    comb_der = runs[0].derivative[k_cut] + a_mix * runs[1].derivative[k_cut]
    c_a = comb_val / rec.value[0]
    match_gap = abs(comb_der - c_a * rec.derivative[0]) / abs(comb_der)

    near = SolutionCurve(inner,
                         runs[0].value[:k_cut + 1] + a_mix * runs[1].value[:k_cut + 1],
                         runs[0].derivative[:k_cut + 1] + a_mix * runs[1].derivative[:k_cut + 1],
                         runs[0].second[:k_cut + 1] + a_mix * runs[1].second[:k_cut + 1],
                         runs[0].quad_pieces[:k_cut] + a_mix * runs[1].quad_pieces[:k_cut])
    far = SolutionCurve(outer, c_a * rec.value, c_a * rec.derivative, c_a * rec.second,
                        c_a * rec.quad_pieces)
    curve = join_curves(near, far)
    comb_cb = cb[0] + a_mix * cb[1]
    sol = H0Solution(g, complex(a_mix), curve, (complex(c_a), complex(comb_cb)), complex(c_a),
                     s_start, s_max, s_cut, (part, homog))
    sol.meta.update(u_nodes=u_nodes, s_series=s_series, k_series=k_ser,
                    match_gap=float(match_gap), cb=(complex(cb[0]), complex(cb[1])),
                    ca_forward=(complex(ca[0]), complex(ca[1])),
                    b_ratio=float(abs(comb_cb) / abs(c_a)))
    return sol


def h0_series(sol: H0Solution, s):
    """Frobenius representation of H0 near 0 (value, derivative)."""
    vp, dp = sol.seeds[0].evaluate(s)
    vh, dh = sol.seeds[1].evaluate(s)
    return vp + sol.a_mix * vh, dp + sol.a_mix * dh


def h0_defect(sol: H0Solution, s_lo: float | None = None):
    """max |-H'' + g(g+1)/s^2 H + i s H| / |H| by sixth-order differences in u = log s + s."""
    s_lo = 2 * sol.s_start if s_lo is None else s_lo
    u = sol.meta["u_nodes"]
    h = sol.curve.value
    du = u[1] - u[0]
    w1 = np.array([-1, 9, -45, 0, 45, -9, 1]) / (60 * du)
    w2 = np.array([2, -27, 270, -490, 270, -27, 2]) / (180 * du * du)
    hu = np.convolve(h, w1[::-1], mode="valid")
    huu = np.convolve(h, w2[::-1], mode="valid")
    sc = sol.curve.grid[3:-3]
    hc = h[3:-3]
    gs = (1 + sc) / sc           # du/ds
    hss = gs * gs * huu - hu / (sc * sc)
    g = sol.gamma
    d = -hss + (g * (g + 1) / (sc * sc) + 1j * sc) * hc
    keep = sc >= s_lo
    return float((np.abs(d[keep]) / np.abs(hc[keep])).max())


@dataclass
class KappaReport:
    kappa_shoot: float
    kappa_scan: float | None = None
    rel_gap: float | None = None
    integral: float = math.nan
    segments: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    scan_fit: dict = field(default_factory=dict)


def compute_kappa(h0: H0Solution, params: ModelParams) -> KappaReport:
    g = params.gamma
    if g >= 2.5:
        raise ValueError("the s^(4-2g) endpoint integrand is not integrable for gamma >= 5/2")
    # [0, s_series]: term by term from the two Frobenius series
    s_ser = h0.meta["s_series"]
    series = 0.0
    series_err = 0.0
    for seed, mult in ((h0.seeds[0], 1.0), (h0.seeds[1], h0.a_mix)):
        for k, b in enumerate(seed.coeffs):
            c = (mult * b).imag
            if c == 0:
                continue
            p = seed.rho + k + 2.0 - g
            if p <= 0:
                raise NumericalError(f"non-integrable series term s^{p - 1:.3g}")
            term = c * s_ser ** p / p
            series += term
            if k >= len(seed.coeffs) - 3:
                series_err += abs(term)
    pieces = h0.curve.quad_pieces
    k_cut = int(np.searchsorted(h0.curve.grid, h0.s_cut))
    mid_near = float(pieces[h0.meta["k_series"]:k_cut].sum().imag)
    mid_far = float(pieces[k_cut:].sum().imag)
    # [s_max, inf): c_a a(s) with a'/a ~ -sqrt(i s)
    pair = RotatedPair(0.0)
    av, ad = pair.a(h0.s_max)
    tail = complex(h0.c_a * h0.s_max ** (1 - g) * av * av / ad)
    tail_val = -tail.imag
    total = series + mid_near + mid_far + tail_val
    kappa = -2.0 * params.c_beta_sq * total
    rep = KappaReport(float(kappa), integral=float(total))
    rep.segments = {"series": series, "mid_near": mid_near, "mid_far": mid_far, "tail": tail_val}
    scale = max(abs(series), abs(mid_near), abs(mid_far))
    rep.errors = {"series": series_err, "mid": params.tol.ode_tol * scale * 10,
                  "tail": abs(tail_val)}
    if kappa <= 0:
        raise NumericalError(f"kappa came out non-positive ({kappa:.3e})")
    return rep


def fit_scan(etas, mus, alpha, correction=None):
    """Fixed-exponent fit Re mu = kappa eta^alpha, optionally with a D eta^(alpha+eps) term.

    Without a correction kappa is the geometric mean of Re mu / eta^alpha (a least-squares
    fit in log space); with one, plain least squares on Re mu / eta^alpha.
    """
    etas = np.abs(np.asarray(etas, dtype=float))
    y = np.real(np.asarray(mus)) / etas ** alpha
    if correction is None:
        return float(np.exp(np.mean(np.log(y)))), None
    design = np.stack([np.ones_like(etas), etas ** correction], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(coef[0]), float(coef[1])


def kappa_from_scan(results, params: ModelParams) -> dict:
    """kappa from a list of EigenResult: fixed-exponent fit, free-exponent check, and a
    fit carrying the first correction eta^((5-2g)/3)."""
    etas = np.array([abs(r.eta) for r in results], dtype=float)
    mus = np.array([r.mu for r in results])
    if len(etas) < 5:
        raise ValueError("need at least 5 scan points")
    if math.log10(etas.max() / etas.min()) < 1.5 - 1e-9:
        raise ValueError("scan must span at least 1.5 decades")
    alpha = params.alpha
    kappa_fixed, _ = fit_scan(etas, mus, alpha)
    slope, intercept = np.polyfit(np.log(etas), np.log(np.abs(mus.real)), 1)
    eps = (5.0 - 2.0 * params.gamma) / 3.0
    kappa_corr, d = fit_scan(etas, mus, alpha, eps)
    out = {"kappa": kappa_fixed, "free_slope": float(slope), "free_intercept": float(intercept),
           "kappa_corrected": kappa_corr, "correction_coeff": d, "correction_exponent": eps,
           "asymptotic": abs(slope - alpha) <= 0.05}
    if not out["asymptotic"]:
        log.warning("free exponent %.4f deviates from %.4f: scan outside the asymptotic regime",
                    slope, alpha)
    return out


def kappa_report(params: ModelParams, scan_results=None, **kw) -> KappaReport:
    rep = compute_kappa(solve_h0(params, **kw), params)
    if scan_results:
        fit = kappa_from_scan(scan_results, params)
        rep.scan_fit = fit
        rep.kappa_scan = fit["kappa"]
        rep.rel_gap = abs(rep.kappa_shoot - rep.kappa_scan) / rep.kappa_shoot
    return rep
