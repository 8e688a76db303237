import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fpspec.diffusion import (DensityProfile, evolve_rho_hat, frac_constant,
                              frac_laplacian_fourier, frac_laplacian_pv, kinetic_mode_decay)
from fpspec.model import make_params

XI = np.arange(-60, 61) * 0.1      # exactly symmetric, unlike linspace


def _profile():
    rho_hat = np.exp(-XI ** 2 / 2) * np.exp(-0.4j * XI)   # shifted Gaussian
    return DensityProfile(XI, rho_hat)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 5.0), st.floats(0.0, 5.0), st.floats(0.7, 1.95))
def test_semigroup_property(t1, t2, alpha):
    p = _profile()
    two = evolve_rho_hat(evolve_rho_hat(p, t1, 0.4, alpha), t2, 0.4, alpha)
    one = evolve_rho_hat(p, t1 + t2, 0.4, alpha)
    assert np.allclose(two.rho_hat, one.rho_hat, rtol=1e-12, atol=1e-300)
    assert two.t == pytest.approx(t1 + t2)


@given(st.floats(0.0, 20.0))
def test_reality_and_mass_preserved(t):
    p = evolve_rho_hat(_profile(), t, 0.36, 4 / 3)
    assert p.is_conjugate_symmetric(tol=1e-15)
    assert p.rho_hat[len(XI) // 2] == 1.0


def test_parameter_checks():
    with pytest.raises(ValueError):
        evolve_rho_hat(_profile(), 1.0, -0.1, 4 / 3)
    with pytest.raises(ValueError):
        evolve_rho_hat(_profile(), 1.0, 0.1, 2.0)
    with pytest.raises(ValueError):
        DensityProfile(np.array([0.0, 1.0]), np.ones(2)).is_conjugate_symmetric()


def test_constant_known_values():
    assert frac_constant(1.0) == pytest.approx(1 / math.pi, rel=1e-14)
    # c_alpha vanishes like (2 - alpha) as the operator tends to -d^2/dx^2
    assert frac_constant(2 - 1e-8) / 1e-8 == pytest.approx(1.0, rel=1e-6)


@pytest.mark.parametrize("alpha", [0.8, 4 / 3, 5 / 3])
def test_pv_matches_fourier_callable(alpha):
    pts = np.array([0.0, 0.5, 1.3, 2.0, 3.5])
    pv = frac_laplacian_pv(lambda y: np.exp(-y * y / 2), np.linspace(-15, 15, 3001), alpha,
                           points=pts)
    ft = frac_laplacian_fourier(lambda k: math.sqrt(2 * math.pi) * math.exp(-k * k / 2), pts,
                                alpha)
    assert np.abs(pv - ft).max() <= 1e-6 * np.abs(ft).max()


@pytest.mark.parametrize("alpha", [0.8, 4 / 3, 5 / 3])
def test_pv_matches_fourier_samples(alpha):
    x = np.linspace(-15, 15, 3001)
    pts = np.array([0.0, 0.5, 1.3, 2.0, 3.5])
    pv = frac_laplacian_pv(np.exp(-x * x / 2), x, alpha, points=pts)
    ft = frac_laplacian_fourier(lambda k: math.sqrt(2 * math.pi) * math.exp(-k * k / 2), pts,
                                alpha)
    assert np.abs(pv - ft).max() <= 1e-4 * np.abs(ft).max()


def test_pv_scalar_point():
    x = np.linspace(-10, 10, 2001)
    val = frac_laplacian_pv(np.exp(-x * x / 2), x, 1.0, points=0.0)
    assert isinstance(val, float) and val > 0


def test_kinetic_decay_step_independent():
    p = make_params(3.0)
    a = kinetic_mode_decay(p, 1e-2, dt=0.5)
    b = kinetic_mode_decay(p, 1e-2, dt=0.25)
    assert abs(a.rate - b.rate) <= 1e-6 * a.rate


def test_kinetic_zero_mode_does_not_decay():
    r = kinetic_mode_decay(make_params(3.0), 0.0)
    assert abs(r.rate) < 1e-6


def test_kinetic_horizon_checks():
    with pytest.raises(ValueError):
        kinetic_mode_decay(make_params(3.0), 1e-2, T=5.0, dt=1.0)
