import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpspec.basis0 import default_grid
from fpspec.eigen import (ClusterWarning, fit_power, make_phi, oracle_eigen, scan, solve_mu)
from fpspec.model import NumericalError, equilibrium, make_params

P3 = make_params(3.0)


@pytest.fixture(scope="module")
def mid():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ClusterWarning)
        return solve_mu(1e-3, P3, with_oracle=True)


def test_eigenvalue_basic_properties(mid):
    assert mid.mu.real > 0
    # real by the reflection-conjugation symmetry of the problem
    assert abs(mid.mu.imag) <= 1e-12 * abs(mid.mu)
    assert mid.b_residual <= P3.tol.root_rtol / P3.c_beta_sq
    assert mid.mu == pytest.approx(1e-3 ** (2 / 3) * mid.lambda_star, rel=1e-15)
    assert mid.eigenfunction[len(mid.v) // 2] == 1.0


def test_eigen_equation_defect(mid):
    assert mid.defect <= 1e-7


def test_agrees_with_oracle(mid):
    assert mid.rel_gap <= 1e-3


def test_grid_convergence():
    coarse = solve_mu(1e-3, P3, hx=0.02)
    fine = solve_mu(1e-3, P3, hx=0.01)
    assert abs(fine.mu - coarse.mu) <= 1e-8 * abs(fine.mu)


def test_negative_eta_conjugates(mid):
    neg = solve_mu(-1e-3, P3)
    assert neg.eta == -1e-3
    assert neg.mu == pytest.approx(np.conj(mid.mu), rel=1e-14)
    assert np.allclose(neg.eigenfunction, np.conj(mid.eigenfunction))


def test_eta_zero_is_equilibrium():
    r = solve_mu(0.0, P3)
    assert r.mu == 0
    assert np.allclose(r.eigenfunction.real, equilibrium(P3, default_grid().v))


def test_dual_route_for_constraint_converges():
    # B from the penalty weight vs B from the two integrals; gap is quadrature error
    p4 = make_params(4.0)
    gaps = [solve_mu(1e-4, p4, hx=hx).b_dual_gap for hx in (0.02, 0.01)]
    assert gaps[0] <= 1e-2
    assert gaps[1] < gaps[0] / 10


def test_root_must_stay_in_window():
    tight = make_params(3.0, lambda0=1e-4)
    with pytest.raises(NumericalError, match="escaped"):
        solve_mu(1e-2, tight)


def test_penalty_function_normalized():
    for sigma, radius in ((1.0, 3.0), (2.0, 5.0), (0.5, 10.0)):
        phi = make_phi(P3, sigma=sigma, radius=radius)
        g = default_grid(hx=0.005)
        assert g.integrate(phi(g.v) * equilibrium(P3, g.v)) == pytest.approx(1.0, rel=1e-10)
        assert np.all(phi(np.array([radius, -radius, radius + 1])) == 0)
        assert np.all(phi(np.linspace(-radius * 0.99, radius * 0.99, 50)) > 0)


def test_penalty_support_inside_bulk():
    with pytest.raises(ValueError, match="bulk"):
        make_phi(P3, radius=12.0)
    with pytest.raises(ValueError):
        make_phi(P3, sigma=0.0)


def test_oracle_flags_continuum_at_zero():
    with pytest.warns(ClusterWarning):
        res = oracle_eigen(0.0, P3)
    assert abs(res.mu) < 1e-5


def test_oracle_second_eigenvalue_separated():
    res = oracle_eigen(1e-2, P3)
    assert abs(res.second) > 10 * abs(res.fine)
    # Richardson combination sits beyond both raw levels
    assert abs(res.mu - res.fine) < abs(res.fine - res.coarse)


def test_oracle_argument_checks():
    with pytest.raises(ValueError):
        oracle_eigen(1e-3, P3, n=100)
    with pytest.raises(ValueError):
        oracle_eigen(1e-3, P3, v_cut=5.0)


def test_scan_requires_descending():
    with pytest.raises(ValueError, match="descending"):
        scan([1e-3, 1e-2], P3)


def test_scan_parallel_matches_serial():
    etas = [1e-2, 5e-3, 2e-3, 1e-3]
    serial = scan(etas, P3)
    par = scan(etas, P3, jobs=2)
    assert not serial.errors and not par.errors
    for a, b in zip(serial.results, par.results):
        assert a.mu == pytest.approx(b.mu, rel=1e-9)
    assert serial.slope == pytest.approx(par.slope, rel=1e-8)


@given(st.floats(0.5, 2.0), st.floats(1e-3, 10.0))
def test_fit_power_recovers_exact_law(slope, pref):
    etas = np.logspace(-4, -2, 7)
    s, icpt = fit_power(etas, pref * etas ** slope)
    assert s == pytest.approx(slope, rel=1e-9)
    assert np.exp(icpt) == pytest.approx(pref, rel=1e-8)


def test_eigenfunction_closer_to_equilibrium_as_eta_shrinks(scan3):
    d = [r.l2_distance for r in scan3.results]
    assert all(a > b for a, b in zip(d, d[1:]))
