import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpspec.grids import MappedGrid


@pytest.fixture(scope="module")
def grid():
    return MappedGrid.symmetric(50.0, hx=0.02)


def test_center_node_is_zero_and_symmetric(grid):
    v = grid.v
    assert v[grid.n // 2] == 0.0
    assert np.allclose(v, -v[::-1], rtol=0, atol=1e-12)
    assert v[-1] == pytest.approx(50.0)


def test_integrates_gaussian(grid):
    assert grid.integrate(np.exp(-grid.v ** 2)) == pytest.approx(np.sqrt(np.pi), rel=1e-13)


def test_cumulative_and_reverse_agree(grid):
    f = 1.0 / (1 + grid.v ** 2) ** 2
    fwd = grid.cumulative(f)
    rev = grid.reverse_cumulative(f)
    total = grid.integrate(f)
    assert np.allclose(fwd + rev, total, rtol=0, atol=1e-13)
    assert fwd[0] == 0.0 and rev[-1] == 0.0


def test_cumulative_from_center_is_odd_for_even_integrand(grid):
    f = np.exp(-grid.v ** 2 / 4)
    c = grid.cumulative_from_center(f)
    assert c[grid.n // 2] == 0.0
    assert np.allclose(c, -c[::-1], rtol=0, atol=1e-14)
    # int_0^v e^(-w^2/4) = sqrt(pi) erf(v/2)
    from scipy.special import erf
    assert np.allclose(c, np.sqrt(np.pi) * erf(grid.v / 2), rtol=0, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 1.5), st.floats(-2.0, 2.0))
def test_derivatives_of_smooth_function(k, shift):
    g = MappedGrid.symmetric(10.0, hx=0.01)
    u = np.sin(k * g.v + shift)
    du, d2u = g.derivatives(u)
    inner = g.interior
    # sixth-order stencils: error grows like k^7
    tol = 1e-7 * max(1.0, k) ** 7
    assert np.abs(du[inner] - k * np.cos(k * g.v[inner] + shift)).max() < tol
    assert np.abs(d2u[inner] + k * k * u[inner]).max() < tol
    assert np.isnan(du[0]) and np.isnan(d2u[-1])


def test_cumulative_matrices_match_vector_form(grid):
    small = MappedGrid.symmetric(5.0, hx=0.1)
    f = np.cos(small.v)
    left, right = small.cumulative_matrices
    assert np.allclose(left @ f, small.cumulative(f), atol=1e-14)
    assert np.allclose(right @ f, small.reverse_cumulative(f), atol=1e-14)


def test_quadrature_order():
    # halving hx should cut the error by about 2^6
    errs = []
    for hx in (0.2, 0.1):
        g = MappedGrid.symmetric(20.0, hx=hx)
        errs.append(abs(g.integrate(1.0 / (1 + g.v ** 2)) - 2 * np.arctan(20.0)))
    assert errs[1] < errs[0] / 30
