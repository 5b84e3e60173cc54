import math

import numpy as np
import pytest
from scipy import integrate, stats
from scipy.special import ndtr

from stopbound.boundary import Boundary, initial_parabola, psi
from stopbound.model import payoff_F
from stopbound.quadrature import (QuadConfig, adaptive_gauss_legendre, fredholm_kernel_K, inner_integral,
                                  kernel_integral, psi_quadrature, rhs_quadrature, rhs_quadrature_detail)
from stopbound.sampler import SamplerConfig


def lognormal_tail(start, alpha, sigma, t, cut):
    """P(Y_t >= cut) and E[Y_t; Y_t >= cut] from scipy's lognormal, as an independent check."""
    dist = stats.lognorm(s=sigma * math.sqrt(t), scale=start * math.exp((alpha - sigma**2 / 2) * t))
    prob = dist.sf(cut)
    partial = dist.expect(lambda e: e, lb=cut)
    return prob, partial


@pytest.mark.parametrize("t,y,cut", [(0.5, 20.0, 25.0), (3.0, 10.0, 5.0), (12.0, 40.0, 90.0)])
def test_inner_integral_closed_form(fig1, t, y, cut):
    prob, partial = lognormal_tail(y, fig1.alpha2, fig1.sigma2, t, cut)
    expect = (fig1.Q1 * 30.0 - fig1.r * fig1.I) * prob + fig1.Q2 * partial
    assert float(inner_integral(fig1, 30.0, t, y, cut)) == pytest.approx(expect, rel=1e-8)


def test_adaptive_gauss_legendre_kinked():
    f = lambda z: np.abs(z - 0.3) ** 0.5 + np.where(z > 0.7, 1.0, 0.0)
    val = adaptive_gauss_legendre(f, np.array([0.0, 0.3, 0.7, 1.0]), 1e-10, 1e-12, 200, 1.0)
    val = val[0] if isinstance(val, tuple) else val
    exact = (2 / 3) * (0.3**1.5 + 0.7**1.5) + 0.3
    assert val == pytest.approx(exact, rel=1e-9)


def test_infinite_boundary_rhs_zero(fig1):
    assert rhs_quadrature(fig1, 30.0, 20.0, Boundary.constant(math.inf)) == 0.0
    assert psi_quadrature(fig1, 30.0, 20.0, Boundary.constant(math.inf)) == pytest.approx(
        fig1.lam * (fig1.I - fig1.Q1 * 30 / fig1.delta1))


@pytest.mark.parametrize("x,y", [(20.0, 10.0), (60.0, 35.0)])
def test_zero_boundary_rhs_is_payoff(fig1, x, y):
    # stopping everywhere: the discounted flow integrates to F exactly
    res = rhs_quadrature_detail(fig1, x, y, Boundary.constant(0.0, 200.0))
    assert abs(res.value - payoff_F(fig1, x, y)) <= max(res.tail_bound, 1e-7 * fig1.I) + res.error_bound
    assert res.tail_bound < 1e-5 * fig1.I


def test_constant_boundary_against_one_dim_integral(fig1):
    # with b = c the space integral over X collapses to its mean; one-dimensional scipy oracle
    c, x, y = 25.0, 40.0, 20.0

    def integrand(t):
        if t <= 0:
            return 0.0
        sd = fig1.sigma2 * math.sqrt(t)
        d = (math.log(y / c) + (fig1.alpha2 - fig1.sigma2**2 / 2) * t) / sd
        prob, partial = ndtr(d), y * math.exp(fig1.alpha2 * t) * ndtr(d + sd)
        return math.exp(-fig1.r * t) * ((fig1.Q1 * x * math.exp(fig1.alpha1 * t) - fig1.r * fig1.I) * prob
                                         + fig1.Q2 * partial)

    q = QuadConfig()
    horizon = q.horizon(fig1.r)
    pts = [1, 10, 50, 100]
    truncated, _ = integrate.quad(integrand, 0, horizon, limit=400, points=pts, epsabs=1e-9, epsrel=1e-12)
    full, _ = integrate.quad(integrand, 0, 10 * horizon, limit=400, points=pts + [horizon], epsabs=1e-9,
                             epsrel=1e-12)
    res = rhs_quadrature_detail(fig1, x, y, Boundary.constant(c, 200.0), q)
    assert res.value == pytest.approx(truncated, rel=1e-8)
    assert abs(res.value - full) <= res.tail_bound + res.error_bound


def test_truncation_horizon():
    q = QuadConfig()
    assert q.horizon(0.1) == pytest.approx(math.log(1e8) / 0.1)
    assert QuadConfig(t_cutoff=50.0).horizon(0.1) == 50.0


def test_kernel_zero_cases(fig1):
    assert fredholm_kernel_K(fig1, 30.0, 40.0, 20.0, math.inf) == 0.0
    assert fredholm_kernel_K(fig1, 0.0, 40.0, 20.0, 10.0) == 0.0
    with pytest.raises(ValueError):
        fredholm_kernel_K(fig1, 30.0, -1.0, 20.0, 10.0)


@pytest.mark.slow
def test_kernel_order_swap(fig1):
    b = initial_parabola(fig1)
    q = QuadConfig(rel_tol=1e-7)
    assert kernel_integral(fig1, 40.0, 20.0, b, q) == pytest.approx(rhs_quadrature(fig1, 40.0, 20.0, b, q), rel=1e-6)


def test_quadrature_matches_sampling_at_one_point(fig1):
    b = initial_parabola(fig1)
    est = psi(fig1, 40.0, 20.0, b, SamplerConfig(400_000, 5))
    assert abs(est.mean - psi_quadrature(fig1, 40.0, 20.0, b)) < 4 * est.std_error


def test_rhs_monotone_in_boundary(fig1):
    base = initial_parabola(fig1)
    lo = base.with_values(np.maximum(base.bs, np.maximum(40 - 0.5 * base.xs, 0)))
    hi = lo.with_values(np.minimum(lo.bs + 5.0, 56.0))
    hi = hi.with_values(np.concatenate([hi.bs[:-1], [0.0]]))
    vals = [rhs_quadrature(fig1, 30.0, 18.0, b) for b in (lo, hi)]
    assert vals[0] >= vals[1]


def test_doubling_horizon_within_tail_bound(fig1):
    b = initial_parabola(fig1)
    q = QuadConfig(rel_tol=1e-9)
    short = rhs_quadrature_detail(fig1, 30.0, 18.0, b, QuadConfig(t_cutoff=q.horizon(fig1.r) / 2, rel_tol=1e-9))
    long = rhs_quadrature_detail(fig1, 30.0, 18.0, b, QuadConfig(t_cutoff=q.horizon(fig1.r), rel_tol=1e-9))
    assert abs(long.value - short.value) <= short.tail_bound + short.error_bound + long.error_bound
