# tests/test_ctmc.py
import numpy as np
import pytest

from aoi_priority import analytic, ctmc
from aoi_priority.errors import InvalidConfig
from aoi_priority.model import ModelParams


def _random_stable_points(n: int, seed: int):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        l1, l2, m1, m2 = np.exp(rng.uniform(np.log(0.1), np.log(20.0), size=4))
        p = ModelParams.of(float(l1), float(l2), float(m1), float(m2))
        report = analytic.check_stability(p)
        # keep clear of the boundary so the truncation cap is never hit
        if report.is_stable and report.margin / p.mu1 > 0.05 and ctmc.default_truncation(p) < ctmc.K_MAX:
            out.append(p)
    return out


def test_generator_rows_sum_to_zero(reference_params):
    gen = ctmc.build_generator(reference_params, 30)
    assert gen.dimension == 61
    row_sums = np.asarray(gen.q.sum(axis=1)).ravel()
    assert row_sums == pytest.approx(np.zeros(61), abs=1e-12)
    assert [label for label, _ in gen.dropped] == ["q30", "q'30"]


def test_generator_rates(reference_params):
    K = 10
    q = ctmc.build_generator(reference_params, K).q
    assert q[0, ctmc.q_index(1)] == 2.0
    assert q[0, ctmc.q_prime_index(1, K)] == 5.0
    assert q[ctmc.q_index(3), ctmc.q_prime_index(4, K)] == 5.0
    assert q[ctmc.q_prime_index(3, K), ctmc.q_index(2)] == 5.0
    assert q[ctmc.q_index(3), ctmc.q_index(2)] == 10.0
    assert q[ctmc.q_prime_index(1, K), 0] == 5.0


def test_state_labels():
    assert ctmc.state_label(0, 5) == "q0"
    assert ctmc.state_label(3, 5) == "q3"
    assert ctmc.state_label(8, 5) == "q'3"


def test_truncation_too_small(reference_params):
    with pytest.raises(InvalidConfig):
        ctmc.build_generator(reference_params, 1)


def test_oracle_matches_closed_form(reference_params):
    sol = ctmc.oracle_stationary(reference_params, K=200)
    dist = analytic.stationary(reference_params, 50)
    assert sol.pi0 == pytest.approx(0.3, abs=1e-9)
    assert sol.pi[:50] == pytest.approx(dist.pi, abs=1e-9)
    assert sol.pi_prime[:50] == pytest.approx(dist.pi_prime, abs=1e-9)
    assert sol.probabilities.sum() == pytest.approx(1.0, abs=1e-8)
    assert not sol.non_vanishing_tail


def test_oracle_expected_n(reference_params):
    assert ctmc.oracle_expected_n(reference_params, K=200) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("p", _random_stable_points(20, seed=2024))
def test_oracle_agrees_on_random_points(p):
    sol = ctmc.oracle_stationary(p)
    dist = analytic.stationary(p, 2)
    assert sol.pi0 == pytest.approx(dist.pi0, abs=1e-8)
    assert sol.pi[0] == pytest.approx(dist.pi[0], abs=1e-8)
    assert sol.pi_prime[0] == pytest.approx(dist.pi_prime[0], abs=1e-8)
    assert ctmc.oracle_expected_n(p) == pytest.approx(analytic.expected_queue_length(p), abs=1e-8)


def test_boundary_mass_shrinks_with_k(reference_params):
    masses = [ctmc.oracle_stationary(reference_params, K).boundary_mass for K in (5, 10, 20, 40)]
    assert all(b < a for a, b in zip(masses, masses[1:]))


def test_default_truncation(reference_params, sweep_fixed):
    assert ctmc.default_truncation(reference_params) == ctmc.K_MIN
    assert ctmc.default_truncation(ModelParams.of(lambda2=25.0, **sweep_fixed)) == ctmc.K_MIN
    assert ctmc.default_truncation(ModelParams.of(lambda2=20.0 - 1e-10, **sweep_fixed)) == ctmc.K_MAX


def test_unstable_chain_flags_tail(sweep_fixed):
    sol = ctmc.oracle_stationary(ModelParams.of(lambda2=25.0, **sweep_fixed), K=64)
    assert sol.non_vanishing_tail
    assert sol.pi0 < 0.01


def _k2_generator(reference_params, sweep_fixed):
    q = ctmc.build_generator(reference_params, 2).q.toarray()
    labels = [ctmc.state_label(j, 2) for j in range(5)]
    rows = {
        labels[r]: {labels[c]: q[r, c] for c in range(5) if q[r, c] != 0.0}
        for r in range(5)
    }
    assert rows == {
        "q0": {"q0": -7.0, "q1": 2.0, "q'1": 5.0},
        "q1": {"q0": 10.0, "q1": -17.0, "q2": 2.0, "q'2": 5.0},
        "q2": {"q1": 10.0, "q2": -10.0},
        "q'1": {"q0": 5.0, "q'1": -7.0, "q'2": 2.0},
        "q'2": {"q1": 5.0, "q'2": -5.0},
    }


def _truncation_convergence(reference_params, sweep_fixed):
    small = ctmc.oracle_stationary(reference_params, K=50)
    large = ctmc.oracle_stationary(reference_params, K=400)
    assert abs(small.pi0 - large.pi0) < 1e-9
    assert np.max(np.abs(small.pi - large.pi[:50])) < 1e-9
    assert np.max(np.abs(small.pi_prime - large.pi_prime[:50])) < 1e-9
    n_small = ctmc.oracle_expected_n(reference_params, K=50)
    assert abs(n_small - ctmc.oracle_expected_n(reference_params, K=400)) < 1e-9


def _near_single_stream(reference_params, sweep_fixed):
    p = ModelParams.of(lambda2=0.001, **sweep_fixed)
    assert ctmc.oracle_expected_n(p, K=200) == pytest.approx(0.25, abs=1e-3)


def _unstable_boundary_mass(reference_params, sweep_fixed):
    sol = ctmc.oracle_stationary(ModelParams.of(lambda2=25.0, **sweep_fixed), K=200)
    assert sol.boundary_mass > 1e-3
    assert sol.non_vanishing_tail


@pytest.mark.parametrize(
    "case",
    [_k2_generator, _truncation_convergence, _near_single_stream, _unstable_boundary_mass],
    ids=["k2_generator", "truncation_convergence", "near_single_stream", "unstable_boundary_mass"],
)
def test_oracle_reference_cases(case, reference_params, sweep_fixed):
    case(reference_params, sweep_fixed)
