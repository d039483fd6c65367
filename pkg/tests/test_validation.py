# tests/test_validation.py
import numpy as np
import pytest

from aoi_priority import age, validation
from aoi_priority.model import ModelParams


def test_close_rules():
    assert validation.close("x", 1.0, 1.01, rel=0.02).passed
    assert not validation.close("x", 1.0, 1.03, rel=0.02).passed
    assert validation.close("x", 0.0, 1e-10, abs_tol=1e-9).passed
    assert not validation.close("x", 1.0, None, rel=0.5).passed
    assert not validation.close("x", 1.0, float("nan"), rel=0.5).passed


def test_within():
    assert validation.within("w", 1.9, 1.6, 2.2).passed
    assert not validation.within("w", 2.3, 1.6, 2.2).passed
    assert not validation.within("w", None, 1.6, 2.2).passed


def test_overlap_quadrature(reference_params):
    assert validation.overlap_quadrature(reference_params) == pytest.approx(
        age.expected_overlap(reference_params), rel=1e-5
    )


def test_overlap_monte_carlo(reference_params):
    mc = validation.overlap_monte_carlo(reference_params, n=1_000_000, seed=3)
    assert mc == pytest.approx(age.expected_overlap(reference_params), rel=0.01)


def test_system_time_sampler_mean(reference_params):
    lb = age.system_time_lb(reference_params)
    t = validation.sample_system_time(lb, 400_000, np.random.default_rng(5))
    assert t.mean() == pytest.approx(0.4, rel=0.01)


def test_system_time_sampler_coincident():
    p = ModelParams.of(lambda1=2.0, lambda2=0.0, mu1=10.0, mu2=8.0)
    lb = age.system_time_lb(p)
    t = validation.sample_system_time(lb, 400_000, np.random.default_rng(6))
    assert t.mean() == pytest.approx(1 / 8, rel=0.01)


def test_conditional_overlap_small_t():
    t = np.array([1e-3, 1e-2])
    l1 = 2.0
    assert validation._conditional_overlap(l1, t) == pytest.approx(l1 * t**3 / 6.0, rel=1e-2)


def test_analytic_suites_pass():
    for check in validation.stationary_checks() + validation.spectral_checks():
        assert check.passed, check


@pytest.mark.slow
def test_quick_suite_passes():
    checks = validation.run_suite(validation.SuiteSettings(quick=True, jobs=2))
    failed = [c for c in checks if not c.passed]
    assert not failed, failed


def test_stationary_ladder_matches_oracle():
    checks = {c.name: c for c in validation.stationary_checks()}
    ladder = checks["stationary.ladder_vs_oracle"]
    assert ladder.passed, ladder
    assert ladder.observed < 1e-9
    assert checks["stationary.normalization"].passed


def test_sweep_bracket_band():
    row = {"age_lb_1": 15.83, "peak_age_1": 20.0, "sim_age_1": 14.41, "sim_age_1_halfwidth": 1.0}
    assert validation._bracketed(row, 0.04)
    assert not validation._bracketed({**row, "sim_age_1_halfwidth": None}, 0.04)
    assert not validation._bracketed({**row, "sim_age_1": 22.0}, 0.04)


def test_default_jobs():
    assert validation.SuiteSettings().jobs >= 1
    assert validation.SuiteSettings(jobs=3).jobs == 3
