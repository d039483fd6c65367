# tests/test_age.py
import math

import numpy as np
import pytest
from scipy import integrate

from aoi_priority import age
from aoi_priority.errors import OutOfDomain, UnstableSystem
from aoi_priority.model import ModelParams


def test_clock_probabilities(reference_params):
    a, b, u, v = age.clock_probabilities(reference_params)
    assert (a, b, u, v) == pytest.approx((2 / 3, 1 / 2, 1 / 2, 1 / 3))
    assert a + v == pytest.approx(1.0)
    assert b + u == pytest.approx(1.0)


@pytest.mark.parametrize("s", [-2.0, -0.5, 0.0, 0.5, 1.0, 2.5])
def test_detour_graph_matches_closed_mgfs(reference_params, s):
    assert age.mgf_y_detour(reference_params, s) == pytest.approx(age.mgf_y(reference_params, s), rel=1e-12)
    assert age.mgf_yp_detour(reference_params, s) == pytest.approx(age.mgf_yp(reference_params, s), rel=1e-12)


def test_mgfs_at_one_point(reference_params):
    assert age.mgf_y(reference_params, 1.0) == pytest.approx(40 / 31)
    assert age.mgf_yp(reference_params, 1.0) == pytest.approx(50 / 31)


def test_service_mgf_domain(reference_params):
    edge = age.service_strip(reference_params)
    assert edge == pytest.approx(10.0 - math.sqrt(50.0))
    with pytest.raises(OutOfDomain):
        age.mgf_y(reference_params, edge)
    with pytest.raises(OutOfDomain):
        age.mgf_yp_detour(reference_params, edge + 1.0)


def test_virtual_service_moments(reference_params):
    law = age.virtual_service_moments(reference_params)
    assert law.mean_Y == pytest.approx(0.2)
    assert law.m2_Y == pytest.approx(0.12)
    assert law.mean_Yp == pytest.approx(0.4)
    assert law.m2_Yp == pytest.approx(0.28)
    assert law.pi_prime_1 == pytest.approx(0.3 * 5 / 7)
    assert law.mean_Z == pytest.approx(17 / 70)
    assert law.m2_Z == pytest.approx(0.1542857, abs=1e-7)


def test_z_moments_are_the_mixture(reference_params):
    law = age.virtual_service_moments(reference_params)
    assert law.mixture_mean() == pytest.approx(law.mean_Z, rel=1e-12)
    assert law.mixture_m2() == pytest.approx(law.m2_Z, rel=1e-12)


def test_moments_match_mgf_derivatives(reference_params):
    h = 1e-4
    law = age.virtual_service_moments(reference_params)
    f = lambda s: age.mgf_y(reference_params, s)  # noqa: E731
    g = lambda s: age.mgf_yp(reference_params, s)  # noqa: E731
    assert (f(h) - f(-h)) / (2 * h) == pytest.approx(law.mean_Y, rel=1e-6)
    assert (g(h) - g(-h)) / (2 * h) == pytest.approx(law.mean_Yp, rel=1e-6)
    assert (f(h) - 2 * f(0.0) + f(-h)) / h**2 == pytest.approx(law.m2_Y, rel=1e-4)


def test_sampled_virtual_service(reference_params):
    y = age.sample_virtual_service(reference_params, 50_000, seed=3)
    yp = age.sample_virtual_service(reference_params, 50_000, seed=4, finds_priority=True)
    assert y.mean() == pytest.approx(0.2, rel=0.03)
    assert yp.mean() == pytest.approx(0.4, rel=0.03)
    assert np.all(y > 0.0)


# =========================================================
# System time of the fictitious queue
# =========================================================

def test_system_time_reference_values(reference_params):
    lb = age.system_time_lb(reference_params)
    assert lb.rho == pytest.approx(0.4)
    assert lb.alpha1 == pytest.approx(9.0 + math.sqrt(51.0))
    assert lb.alpha2 == pytest.approx(9.0 - math.sqrt(51.0))
    assert lb.c1 == pytest.approx(-4.6803361, abs=1e-6)
    assert lb.c2 == pytest.approx(-1.3196639, abs=1e-6)
    assert lb.c1 < 0.0 and lb.c2 < 0.0
    assert not lb.coincident


def test_system_time_density_integrates_to_one(reference_params):
    lb = age.system_time_lb(reference_params)
    total, _ = integrate.quad(lambda t: float(age.system_time_density(lb, t)), 0.0, np.inf)
    mean, _ = integrate.quad(lambda t: t * float(age.system_time_density(lb, t)), 0.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert mean == pytest.approx(age.mean_system_time_lb(lb), rel=1e-8)
    assert age.mean_system_time_lb(lb) == pytest.approx(0.4, abs=1e-10)


def test_system_time_mgf(reference_params):
    lb = age.system_time_lb(reference_params)
    assert age.system_time_mgf(reference_params, 0.0) == pytest.approx(1.0, abs=1e-14)
    h = 1e-5
    slope = (age.system_time_mgf(reference_params, h) - age.system_time_mgf(reference_params, -h)) / (2 * h)
    assert slope == pytest.approx(0.4, rel=1e-6)
    with pytest.raises(OutOfDomain):
        age.system_time_mgf(reference_params, lb.alpha2)


def test_mean_system_time_is_pollaczek_khinchine(reference_params):
    # E[T] = E[Y] + lambda1 E[Y^2] / (2 (1 - rho))
    law = age.virtual_service_moments(reference_params)
    lb = age.system_time_lb(reference_params)
    pk = law.mean_Y + reference_params.lambda1 * law.m2_Y / (2.0 * (1.0 - lb.rho))
    assert age.mean_system_time_lb(lb) == pytest.approx(pk, rel=1e-12)


def test_single_stream_reduces_to_one_exponential(single_stream_params):
    lb = age.system_time_lb(single_stream_params)
    assert lb.alpha1 == pytest.approx(8.0)
    assert lb.c1 == pytest.approx(-8.0)
    assert lb.c2 == pytest.approx(0.0, abs=1e-12)
    t = np.linspace(0.0, 3.0, 31)
    assert age.system_time_density(lb, t) == pytest.approx(8.0 * np.exp(-8.0 * t), abs=1e-10)


def test_coincident_roots_branch():
    # lambda2 = 0 with mu2 = mu1 - lambda1 gives a double root at 8
    p = ModelParams.of(lambda1=2.0, lambda2=0.0, mu1=10.0, mu2=8.0)
    lb = age.system_time_lb(p)
    assert lb.coincident
    assert lb.alpha1 == lb.alpha2 == pytest.approx(8.0)
    t = np.linspace(0.0, 3.0, 31)
    assert age.system_time_density(lb, t) == pytest.approx(8.0 * np.exp(-8.0 * t), abs=1e-10)
    total, _ = integrate.quad(lambda x: float(age.system_time_density(lb, x)), 0.0, np.inf)
    assert total == pytest.approx(1.0, abs=1e-8)
    assert age.expected_overlap(p) == pytest.approx(0.0025, abs=1e-12)
    assert age.age_lower_bound(p) == pytest.approx(0.605, abs=1e-10)


# =========================================================
# Overlap and the lower bound
# =========================================================

def test_overlap_and_lower_bound(reference_params):
    assert age.expected_overlap(reference_params) == pytest.approx(0.0514286, abs=1e-7)
    assert age.age_lower_bound(reference_params) == pytest.approx(0.8028571, abs=1e-7)


def test_overlap_by_quadrature(reference_params):
    lb = age.system_time_lb(reference_params)
    l1 = reference_params.lambda1
    value, _ = integrate.dblquad(
        lambda t, x: x * (t - x) * l1 * math.exp(-l1 * x) * float(age.system_time_density(lb, t)),
        0.0, np.inf, lambda x: x, lambda x: np.inf,
    )
    assert value == pytest.approx(age.expected_overlap(reference_params), rel=1e-5)


def test_rational_form_disagrees(reference_params):
    rational = age.overlap_rational_form(reference_params)
    assert rational == pytest.approx(-0.009224, abs=5e-5)
    assert rational < 0.0 < age.expected_overlap(reference_params)


def test_single_stream_lower_bound_is_mm1(single_stream_params):
    assert age.expected_overlap(single_stream_params) == pytest.approx(0.0025, abs=1e-12)
    assert age.age_lower_bound(single_stream_params) == pytest.approx(0.605, abs=1e-10)


def test_lower_bound_below_peak(sweep_fixed):
    from aoi_priority.analytic import peak_age_ordinary

    for v in np.linspace(0.5, 19.0, 38):
        p = ModelParams.of(lambda2=float(v), **sweep_fixed)
        assert age.age_lower_bound(p) < peak_age_ordinary(p)


def test_unstable_refused(sweep_fixed):
    p = ModelParams.of(lambda2=25.0, **sweep_fixed)
    with pytest.raises(UnstableSystem):
        age.system_time_lb(p)
    with pytest.raises(UnstableSystem):
        age.virtual_service_moments(p)
