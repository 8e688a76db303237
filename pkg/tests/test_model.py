import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn

from fpspec.model import (AdmissibilityError, bracket, c_beta_squared, check_beta, equilibrium,
                          make_params, potentials)

admissible_beta = st.floats(1.05, 4.95).filter(lambda b: abs(b - 2.0) > 1e-3)


def test_derived_exponents():
    p = make_params(3.0)
    assert p.gamma == 1.5
    assert p.alpha == pytest.approx(4.0 / 3.0, abs=1e-15)
    assert make_params(4.0).alpha == pytest.approx(5.0 / 3.0, abs=1e-15)


@pytest.mark.parametrize("beta", [1.0, 5.0, 0.3, 7.0, float("nan"), float("inf")])
def test_outside_range_rejected(beta):
    with pytest.raises(AdmissibilityError):
        check_beta(beta)


def test_beta_two_is_the_excluded_case():
    with pytest.raises(AdmissibilityError, match="excluded"):
        make_params(2.0)


@settings(max_examples=25, deadline=None)
@given(admissible_beta)
def test_normalization_matches_gamma_functions(beta):
    g = beta / 2
    closed = gamma_fn(g) / (math.sqrt(math.pi) * gamma_fn(g - 0.5))
    assert c_beta_squared(g) == pytest.approx(closed, rel=1e-10)


def test_normalization_by_quadrature():
    # independent of both the tail series and the closed form
    for beta in (1.5, 3.0, 4.5):
        p = make_params(beta)
        val, _ = quad(lambda v: (1 + v * v) ** -p.gamma, -np.inf, np.inf, epsabs=0, epsrel=1e-12)
        assert p.c_beta_sq * val == pytest.approx(1.0, rel=1e-9)
        assert p.mass * p.c_beta_sq == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(admissible_beta, st.floats(-1e3, 1e3))
def test_potential_split_identity(beta, v):
    p = make_params(beta)
    pv = potentials(p, np.array([v]))
    g = p.gamma
    assert pv.w_tilde[0] - pv.w[0] == pytest.approx(pv.v_split[0], abs=1e-14 * pv.w_tilde[0])
    assert pv.v_split[0] == pytest.approx(g * (g + 2) / (1 + v * v) ** 2, rel=1e-12)
    assert pv.v_split[0] > 0


@settings(max_examples=30, deadline=None)
@given(admissible_beta, st.floats(-50, 50))
def test_equilibrium_solves_zero_mode(beta, v):
    # M'' = W M, checked with a centered difference on the closed form
    p = make_params(beta)
    h = 1e-3
    m = lambda x: equilibrium(p, np.array([x]))[0]
    d2 = (m(v + h) - 2 * m(v) + m(v - h)) / h ** 2
    w = potentials(p, np.array([v])).w[0]
    assert d2 == pytest.approx(w * m(v), rel=1e-5, abs=1e-9 * m(v))


@given(st.floats(-1e6, 1e6))
def test_equilibrium_even_and_bracket(v):
    p = make_params(3.0)
    assert equilibrium(p, np.array([v]))[0] == equilibrium(p, np.array([-v]))[0]
    assert bracket(np.array([v]))[0] >= 1.0


def test_equilibrium_value_at_origin():
    p = make_params(4.0)
    assert equilibrium(p, np.array([0.0]))[0] == 1.0
