"""One test per acceptance criterion; each prints a PASS/FAIL line with the measured value."""
import time
import warnings

import mpmath as mp
import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fpspec.airy import J, WRONSKIAN_AB, RotatedPair, ai
from fpspec.basis0 import apply_t0
from fpspec.basis_eta import apply_t_eta, make_basis_eta, weight, weighted_kernel_bound
from fpspec.diffusion import kinetic_mode_decay
from fpspec.eigen import ClusterWarning, make_phi, oracle_eigen, solve_mu
from fpspec.kappa import h0_series, kappa_report, solve_h0
from fpspec.model import make_params
from fpspec.ode import integrate


def test_01_scaling_exponent(scan3, scan4, report):
    ok = True
    for res, beta, target in ((scan3, 3, 4 / 3), (scan4, 4, 5 / 3)):
        assert not res.errors
        assert len(res.results) == 10
        dev = abs(res.slope - target)
        ok &= report(f"01 scaling exponent beta={beta}", dev <= 0.03,
                     f"slope {res.slope:.4f} vs {target:.4f}, |dev| {dev:.4f} <= 0.03")
    assert ok


@pytest.mark.parametrize("beta", [3.0, 4.0])
def test_02_kappa_consistency(beta, scan3, scan4, report):
    t0 = time.perf_counter()
    p = make_params(beta)
    rep = kappa_report(p, (scan3 if beta == 3 else scan4).results)
    ok = rep.kappa_shoot > 0 and rep.rel_gap <= 0.05
    report(f"02 kappa shooting vs scan beta={beta:g}", ok,
           f"shoot {rep.kappa_shoot:.6f}, scan {rep.kappa_scan:.6f}, gap {rep.rel_gap:.4f} "
           f"<= 0.05 ({time.perf_counter() - t0:.1f}s)")
    assert ok


def test_03_oracle_agreement(params3, report):
    r = solve_mu(1e-3, params3)
    with warnings.catch_warnings():
        warnings.simplefilter("error", ClusterWarning)
        orc = oracle_eigen(1e-3, params3, n=4000)
    gap = abs(r.mu - orc.mu) / abs(r.mu)
    ok = gap <= 1e-2
    report("03 oracle agreement eta=1e-3", ok,
           f"mu {r.mu.real:.8e}, oracle {orc.mu.real:.8e}, rel gap {gap:.2e} <= 1e-2")
    assert ok


def test_04_conjugation_symmetry(params3, report):
    plus = oracle_eigen(1e-3, params3).mu
    minus = oracle_eigen(-1e-3, params3).mu
    gap = abs(plus - np.conj(minus)) / abs(plus)
    # the solver route as well, which answers -eta by conjugation
    s_gap = abs(solve_mu(1e-3, params3).mu - np.conj(solve_mu(-1e-3, params3).mu))
    ok = gap <= 1e-8 and s_gap <= 1e-8 * abs(plus)
    report("04 conjugation symmetry", ok, f"oracle |mu(eta) - conj mu(-eta)|/|mu| = {gap:.1e}")
    assert ok


def test_05_eigenfunction_convergence(params3, report):
    dist = [solve_mu(e, params3).l2_distance for e in (1e-2, 1e-3, 1e-4)]
    ok = dist[0] > dist[1] > dist[2] and dist[2] <= 0.05
    report("05 ||M_eta - M||_2 decreasing", ok,
           "distances " + ", ".join(f"{d:.4f}" for d in dist) + "; last <= 0.05")
    assert ok


def _reintegrate(curve, q, v_max):
    """Integrate u'' = q u both ways from the curve's data at v = 0, keeping nodes with |v| <= v_max."""
    g = curve.grid
    c = len(g) // 2
    pts = g[np.abs(g) <= v_max]
    out = {}
    for end in (pts[0], pts[-1]):
        run = integrate(q, 0.0, float(end), curve.value[c], curve.derivative[c], 1e-11,
                        eval_points=pts)
        out.update({float(v): (y, d) for v, y, d in zip(run.grid, run.value, run.derivative)})
    return np.array([out[float(v)] for v in pts])


def _drift(a, b):
    w = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    mid = w[len(w) // 2]
    return float(np.abs(w - mid).max() / abs(mid))


def test_06_wronskian_conservation(params3, basis3, report):
    g = params3.gamma
    q0 = lambda v: g * (g + 1) / (1 + v * v)
    d0 = _drift(_reintegrate(basis3.psi1, q0, 100.0), _reintegrate(basis3.psi2, q0, 100.0))
    worst = 0.0
    for lam in (0.05, -0.05, 0.05j, -0.03 + 0.03j, 0.0):
        b = make_basis_eta(params3, lam, 1e-3)
        q = lambda v, b=b: complex(b.potential(np.array([v]))[0])
        reach = 2 * 1e-3 ** (-1 / 3)
        worst = max(worst, _drift(_reintegrate(b.psi1, q, reach), _reintegrate(b.psi2, q, reach)))
    ok = d0 <= 1e-8 and worst <= 1e-8
    report("06 Wronskian drift", ok,
           f"eta=0 pair on |v|<=100: {d0:.1e}; eta=1e-3 pair, |lam|<=0.05: {worst:.1e}")
    assert ok


def test_07_airy_suite(report):
    # values at the origin from the Gamma closed forms, 40 digits
    with mp.workdps(40):
        a0 = mp.mpf(1) / (mp.power(3, mp.mpf(2) / 3) * mp.gamma(mp.mpf(2) / 3))
        a1 = -mp.mpf(1) / (mp.power(3, mp.mpf(1) / 3) * mp.gamma(mp.mpf(1) / 3))
    v = ai(0.0)
    e0 = max(abs(v.ai - float(a0)), abs(v.ai_prime - float(a1)))
    rng = np.random.default_rng(20240607)
    s = rng.uniform(-10, 10, 1000)
    lam = rng.uniform(-0.1, 0.1, 1000) + 1j * rng.uniform(-0.1, 0.1, 1000)
    e_w = e_3 = 0.0
    for si, li in zip(s, lam):
        pair = RotatedPair(li)
        av, bv, cv = pair.a(si)[0], pair.b(si)[0], pair.c(si)[0]
        e_w = max(e_w, abs(pair.wronskian(si) - WRONSKIAN_AB) / WRONSKIAN_AB)
        e_3 = max(e_3, abs(av + J * bv + J * J * cv) / max(abs(av), abs(bv), abs(cv)))
    ok = e0 <= 1e-10 and e_w <= 1e-9 and e_3 <= 1e-10
    report("07 Airy suite", ok,
           f"origin {e0:.1e} <= 1e-10, a-b Wronskian {e_w:.1e} <= 1e-9, "
           f"three-solution {e_3:.1e} <= 1e-10")
    assert ok


def test_08_right_inverse_residuals(params3, basis3, report):
    phi = make_phi(params3)
    gauss = lambda v: np.exp(-v * v)
    res0 = [apply_t0(f, basis3).meta["residual"] for f in (phi, gauss)]
    b = make_basis_eta(params3, 0.02 + 0.01j, 1e-3)
    res1 = [apply_t_eta(f, b).meta["residual"] for f in (phi, gauss)]
    ok = max(res0 + res1) <= 1e-6
    report("08 right-inverse residuals", ok,
           f"T0 (Phi, Gaussian) {res0[0]:.1e}, {res0[1]:.1e}; "
           f"T_eta {res1[0]:.1e}, {res1[1]:.1e}; all <= 1e-6")
    assert ok


def test_09_weighted_kernel_bound(params3, report):
    consts = [weighted_kernel_bound(make_basis_eta(params3, 0.0, e), weight(params3, 0.0, e, 1.0))
              for e in (1e-2, 1e-3, 1e-4)]
    spread = max(consts) / min(consts)
    ok = spread <= 2
    report("09 weighted kernel bound", ok,
           "constants " + ", ".join(f"{c:.3f}" for c in consts) + f"; spread {spread:.2f} <= 2")
    assert ok


def test_10_h0_local_structure(report):
    p4 = make_params(4.0)
    h0 = solve_h0(p4)
    s = np.linspace(1e-3, 0.1, 60)
    dev = np.abs(s ** 2 * h0_series(h0, s)[0] - 1)
    c_fit = float((dev / s ** 3).max())
    cubic = c_fit <= 1.0 and float((dev / s ** 3).min()) > 0.5 * c_fit
    im = h0_series(h0, 0.05)[0].imag
    target = -0.05 / 6
    rel = abs(im / target - 1)
    # independent route: scipy DOP853 from s_start/10 on the series data
    s_lo = h0.s_start / 10
    y0, dy0 = h0_series(h0, s_lo)
    rhs = lambda t, y: [y[1], (6 / t ** 2 + 1j * t) * y[0]]
    ivp = solve_ivp(rhs, (s_lo, 0.05), [complex(y0), complex(dy0)], method="DOP853",
                    rtol=1e-13, atol=1e-12)
    im_ivp = ivp.y[0, -1].imag
    ok = cubic and rel <= 0.05 and abs(im_ivp - im) <= 1e-3 * abs(im)
    report("10 H0 local structure (gamma=2)", ok,
           f"|s^g H0 - 1| <= {c_fit:.3f} s^3 on (0, 0.1]; Im H0(0.05) = {im:.5e} vs "
           f"{target:.5e} ({100 * rel:.2f}% <= 5%); ODE route {im_ivp:.5e}")
    assert ok


def test_11_kinetic_mode_decay(params3, report):
    t0 = time.perf_counter()
    r = solve_mu(1e-2, params3)
    dec = kinetic_mode_decay(params3, 1e-2, eigenfunction=(r.v, r.eigenfunction))
    rel = abs(dec.rate - r.mu.real) / r.mu.real
    ok = rel <= 0.02
    report("11 kinetic mode decay eta=1e-2", ok,
           f"rate {dec.rate:.6e} vs Re mu {r.mu.real:.6e}, rel {rel:.1e} <= 0.02 "
           f"({time.perf_counter() - t0:.1f}s)")
    assert ok


def test_12_penalty_independence(params3, report):
    a = solve_mu(1e-3, params3, make_phi(params3)).mu
    b = solve_mu(1e-3, params3, make_phi(params3, sigma=2.0, radius=5.0)).mu
    rel = abs(a - b) / abs(a)
    ok = rel <= 5e-3
    report("12 penalty-function independence", ok, f"rel diff {rel:.1e} <= 5e-3")
    assert ok
