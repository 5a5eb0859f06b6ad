import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ftdsim.coupling import X_MIN, mu, nu_with_cutoff
from ftdsim.ensemble import (
    CONTACT_CAP,
    GeometryConfig,
    contact_radius,
    hermite_average,
    mass_inside,
    moments,
    moments_mc,
    node_values,
    polar_weight,
)
from ftdsim.errors import ExcessiveCutoffMass, QuadratureNotConverged


def mu_field(p, d_hat):
    x = np.linalg.norm(p)
    c = p @ d_hat / x
    return mu(x, 1.0 - c * c)


def grad_norm(g, h=1e-6):
    r0, d_hat = g.frame()
    grad = [(mu_field(r0 + h * e, d_hat) - mu_field(r0 - h * e, d_hat)) / (2 * h) for e in np.eye(3)]
    return float(np.linalg.norm(grad))


@pytest.mark.parametrize("x0,theta0", [(3.0, math.pi / 2), (7.5, 1.0), (15.0, 0.3)])
def test_delta_limit(x0, theta0):
    g = GeometryConfig(x0, 1e-4 * x0, theta0)
    m = moments(g, 1e-10)
    assert abs(m.mu_bar - mu(x0, g.varsigma0)) < 1e-6
    # a narrow packet sees the local gradient: d_mu = |grad mu| dx0
    assert m.d_mu / g.dx0 == pytest.approx(grad_norm(g), rel=1e-3)


@settings(max_examples=12, deadline=None)
@given(st.floats(1.0, 30.0), st.floats(0.02, 0.3), st.floats(0.0, math.pi))
def test_mean_mu_is_damped_point_value(x0, ratio, theta0):
    # mu is a superposition of unit-wavenumber plane waves, so a Gaussian of
    # per-axis width s multiplies it by exp(-s^2/2)
    g = GeometryConfig(x0, ratio * x0, theta0)
    m = moments(g, 1e-10)
    assert m.mu_bar == pytest.approx(math.exp(-g.dx0**2 / 2) * mu(x0, g.varsigma0), abs=1e-10)
    assert m.d_mu >= 0 and m.d_nu >= 0
    assert all(e <= 1e-10 * max(1.0, abs(m.as_dict()[k])) for k, e in m.err_est.items())


@pytest.mark.parametrize("x0,dx0,theta0", [(3.0, 0.3, math.pi / 2), (6.0, 0.6, 0.7), (12.0, 1.2, 0.0)])
def test_radial_matches_hermite(x0, dx0, theta0):
    g = GeometryConfig(x0, dx0, theta0)
    a = moments(g, 1e-9, method="radial")
    b = moments(g, 1e-9, method="hermite")
    for k in ("mu_bar", "d_mu", "nu_bar", "d_nu"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), abs=4e-9)


def test_hermite_frames_agree():
    g = GeometryConfig(4.0, 0.4, 0.9)
    a = moments(g, 1e-10, method="hermite", frame="r0_z")
    b = moments(g, 1e-10, method="hermite", frame="dipole_z")
    assert a.mu_bar == pytest.approx(b.mu_bar, abs=1e-9)
    assert a.d_nu == pytest.approx(b.d_nu, abs=1e-9)


@pytest.mark.parametrize("x0,dx0", [(2.0, 0.8), (32.0, 12.8), (10 * math.pi, 5 * math.pi)])
def test_radial_matches_polar_quadrature_in_contact_tail(x0, dx0):
    # origin 2.5 sigma away: the nu spread is dominated by the near-contact
    # region, which a Legendre rule in the dipole cosine resolves independently
    g = GeometryConfig(x0, dx0, 0.0)
    xc = contact_radius(g)
    c, w = np.polynomial.legendre.leggauss(600)

    def avg(k):
        def fn(x):
            v = nu_with_cutoff(np.full_like(c, x), 1.0 - c * c, xc)
            return (polar_weight(x, c, g) * v**k) @ w

        pts = [p for p in (xc, 1.0, 2.0, 4.0) if p < x0 + 12 * dx0]
        return quad(fn, max(0.0, x0 - 12 * dx0), x0 + 12 * dx0, points=pts, limit=2000, epsabs=1e-13, epsrel=1e-11)[0]

    n1, n2 = avg(1), avg(2)
    m = moments(g)
    assert m.nu_bar == pytest.approx(n1, rel=1e-8, abs=1e-12)
    assert m.d_nu == pytest.approx(math.sqrt(n2 - n1 * n1), rel=1e-8)


def test_far_field_means_vanish():
    m = moments(GeometryConfig(100 * math.pi, 2 * math.pi))
    assert abs(m.mu_bar) < 1e-3 and abs(m.nu_bar) < 1e-3


def test_wide_packet_washes_out():
    m = moments(GeometryConfig(6 * math.pi, 2.5 * math.pi))
    assert abs(m.mu_bar) < 3e-2 and abs(m.nu_bar) < 3e-2


def test_mass_inside_cutoff_raises():
    with pytest.raises(ExcessiveCutoffMass):
        moments(GeometryConfig(0.02, 0.02))


def test_hermite_cap_raises():
    with pytest.raises(QuadratureNotConverged):
        moments(GeometryConfig(2.7437, 0.5), 1e-10, method="hermite")
    g = GeometryConfig(3.0, 0.3)
    with pytest.raises(QuadratureNotConverged):
        hermite_average(lambda ns: ns.mu[None, :], g, 1e-300, cap=32)


def test_bad_arguments():
    g = GeometryConfig(3.0, 0.3)
    with pytest.raises(ValueError):
        moments(g, 0.0)
    with pytest.raises(ValueError):
        moments(g, method="simpson")
    with pytest.raises(ValueError):
        GeometryConfig(-1.0, 0.1)
    with pytest.raises(ValueError):
        moments_mc(g, 10)


def test_indistinguishable_flag():
    assert GeometryConfig(1.0, 1.0).indistinguishable
    assert not GeometryConfig(1.0, 0.5).indistinguishable


class TestContactRadius:
    def test_encloses_budget(self):
        g = GeometryConfig(3.0, 0.6)
        xc = contact_radius(g, X_MIN, 1e-7)
        assert X_MIN < xc < CONTACT_CAP
        assert mass_inside(g, xc) == pytest.approx(1e-7, rel=1e-4)

    def test_zero_budget_is_plain_cutoff(self):
        assert contact_radius(GeometryConfig(3.0, 0.6), X_MIN, 0.0) == X_MIN

    def test_far_packet_uses_cap(self):
        assert contact_radius(GeometryConfig(30.0, 1.0)) == CONTACT_CAP

    def test_budget_limit(self):
        with pytest.raises(ValueError):
            contact_radius(GeometryConfig(3.0, 0.6), X_MIN, 1e-3)

    def test_reported_weight(self):
        g = GeometryConfig(3.0, 0.6)
        assert moments(g).weight_below_cutoff == pytest.approx(1e-7, rel=1e-4)


class TestMonteCarlo:
    def test_deterministic(self):
        g = GeometryConfig(3.0, 0.3)
        a = moments_mc(g, 20_000, seed=7)
        b = moments_mc(g, 20_000, seed=7)
        assert a == b
        assert moments_mc(g, 20_000, seed=8).mu_bar != a.mu_bar

    def test_agrees_with_quadrature(self):
        g = GeometryConfig(5.0, 0.5, 1.2)
        q = moments(g)
        mc = moments_mc(g, 200_000, seed=3)
        for k in ("mu_bar", "d_mu", "nu_bar", "d_nu"):
            assert abs(getattr(q, k) - getattr(mc, k)) < 4 * mc.err_est[k]


@pytest.mark.parametrize("x0,dx0", [(3.0, 0.3), (8.0, 0.8)])
def test_refinement_is_monotone(x0, dx0):
    # once converged, another doubling moves the moments by less than tol
    g = GeometryConfig(x0, dx0, 0.6)
    tol = 1e-9
    f = lambda ns: np.stack([ns.mu, ns.mu**2, ns.nu, ns.nu**2])
    val, _, ns = hermite_average(f, g, tol)
    finer = node_values(g, min(2 * ns.order, 256))
    assert np.max(np.abs(f(finer) @ finer.weights - val)) < tol
