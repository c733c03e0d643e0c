import math

import numpy as np
import pytest

from vmfb import (
    LinearMap,
    Metric,
    MetricError,
    auto_steps,
    block_schedule,
    constant_schedule,
    constant_steps,
    geometric_errors,
    increasing_schedule,
    loewner_geq,
    perturbed_schedule,
    scalar_schedule,
    validate_corollary62,
    validate_theorem41,
    zero_errors,
)
from conftest import random_diag_metric, random_metric


class TestConstructors:
    def test_constant_schedule_classical_setting(self):
        ms = constant_schedule(Metric.identity(3))
        assert ms.eta(5) == 0.0
        assert ms.mu_bound == 1.0
        assert ms.monotone_up_flag and ms.compatibility_flag

    def test_constant_diag_mu_bound(self):
        ms = constant_schedule(Metric(np.diag([1.0, 2.0])))
        assert ms.mu_bound == pytest.approx(2.0)

    def test_perturbed_zero_amplitude_is_constant(self, rng):
        U = random_metric(rng, 3)
        ms = perturbed_schedule(U, 0.5, 0.0)
        assert ms.descriptor == "constant"

    def test_perturbed_identity_direction_closed_form(self):
        # U_n = (1 + 0.5^{n+1}) I; the certified eta is the eigenvalue ratio
        ms = perturbed_schedule(Metric.identity(2), 0.5, 0.5,
                                direction=np.eye(2))
        for n in range(6):
            Un = ms.metric(n)
            assert np.allclose(Un.mat, (1.0 + 0.5 ** (n + 1)) * np.eye(2))
            exact = (1.0 + 0.5 ** (n + 1)) / (1.0 + 0.5 ** (n + 2)) - 1.0
            assert ms.eta(n) == pytest.approx(exact, rel=1e-10)

    def test_perturbed_chain_holds_at_slack(self, rng):
        base = random_metric(rng, 4)
        ms = perturbed_schedule(base, 0.5, 0.3, seed=3)
        for n in range(200):
            lhs = (1.0 + ms.eta(n)) * ms.metric(n + 1).mat
            assert loewner_geq(lhs, ms.metric(n).mat, slack=1e-10)

    def test_perturbed_eta_summable_budget(self, rng):
        base = random_diag_metric(rng, 5, lo=1.0, hi=2.0)
        ms = perturbed_schedule(base, 0.6, 0.2, seed=1)
        total = sum(ms.eta(n) for n in range(300))
        assert total <= ms.eta_tail_sum + 1e-12
        assert math.isfinite(ms.eta_tail_sum)

    def test_perturbed_rejects_large_amplitude(self):
        with pytest.raises(MetricError, match="lower eigenvalue"):
            perturbed_schedule(Metric.identity(2), 0.5, 2.0, direction=np.eye(2))

    def test_perturbed_varying_directions(self, rng):
        base = random_diag_metric(rng, 3, lo=1.0, hi=2.0)
        ms = perturbed_schedule(base, 0.5, 0.2, vary=True, seed=9)
        mats = [ms.metric(n).mat for n in range(4)]
        assert not np.allclose(mats[0] - base.mat,
                               2 * (mats[1] - base.mat))
        for n in range(100):
            assert loewner_geq((1 + ms.eta(n)) * ms.metric(n + 1).mat,
                               ms.metric(n).mat, slack=1e-10)

    def test_perturbed_settles(self):
        ms = perturbed_schedule(Metric.identity(2), 0.5, 0.5, direction=np.eye(2))
        big = ms.settled_at + 5
        assert ms.metric(big) is ms.metric(big + 1)
        assert ms.eta(big) == 0.0

    def test_increasing_schedule_monotone(self, rng):
        lim = random_diag_metric(rng, 4, lo=1.0, hi=2.0)
        ms = increasing_schedule(lim, 0.5, 0.3, seed=2)
        assert ms.compatibility_flag
        for n in range(80):
            assert loewner_geq(ms.metric(n + 1).mat, ms.metric(n).mat, slack=1e-12)
        assert ms.eta(0) == 0.0

    def test_increasing_reverse_chain_certified(self, rng):
        lim = random_diag_metric(rng, 3, lo=1.0, hi=2.0)
        ms = increasing_schedule(lim, 0.5, 0.2, seed=4)
        for n in range(50):
            nu = ms.nu(n)
            assert loewner_geq((1 + nu) * ms.metric(n).mat, ms.metric(n + 1).mat,
                               slack=1e-12)

    def test_block_schedule_combines(self, rng):
        a = constant_schedule(random_metric(rng, 2))
        b = perturbed_schedule(random_diag_metric(rng, 3, lo=1.0, hi=2.0),
                               0.5, 0.2, seed=5)
        blk = block_schedule([a, b])
        assert blk.dim == 5
        assert blk.mu_bound == pytest.approx(max(a.mu_bound, b.mu_bound))
        assert blk.alpha == pytest.approx(min(a.alpha, b.alpha))
        U = blk.metric(0)
        assert np.allclose(U.mat[:2, :2], a.metric(0).mat)
        assert np.allclose(U.mat[2:, 2:], b.metric(0).mat)


class TestStepAndErrorSchedules:
    def test_auto_steps_interval(self):
        ss = auto_steps(1.0, 1.0)
        assert ss.epsilon == pytest.approx(0.9)
        assert ss.gamma(0) == pytest.approx(1.0)
        assert ss.lam(3) == 1.0

    def test_constant_steps(self):
        ss = constant_steps(0.5, 0.7, 0.9)
        assert (ss.epsilon, ss.gamma(9), ss.lam(9)) == (0.5, 0.7, 0.9)

    def test_zero_errors(self):
        es = zero_errors(3)
        assert es.is_zero
        assert np.all(es.a(7) == 0) and np.all(es.b(7) == 0)

    def test_geometric_errors_budget_exact(self):
        es = geometric_errors(4, total_a=1.0, total_b=2.0, rate=0.5, seed=11)
        suma = sum(np.linalg.norm(es.a(n)) for n in range(200))
        sumb = sum(np.linalg.norm(es.b(n)) for n in range(200))
        assert suma == pytest.approx(1.0, rel=1e-12)
        assert sumb == pytest.approx(2.0, rel=1e-12)

    def test_geometric_errors_deterministic(self):
        e1 = geometric_errors(3, seed=7)
        e2 = geometric_errors(3, seed=7)
        assert np.array_equal(e1.a(5), e2.a(5))
        assert not np.array_equal(geometric_errors(3, seed=8).a(5), e1.a(5))


class TestTheorem41Validator:
    def test_classical_setting_passes(self):
        ms = constant_schedule(Metric.identity(2))
        ss = constant_steps(min(1.0, 1.0), 1.0, 1.0)  # beta=1, mu=1
        rep = validate_theorem41(ms, ss, beta=1.0, n_check=50)
        assert rep.passed, rep.text()

    def test_gamma_at_upper_boundary_fails(self):
        # gamma = 2 beta / mu exceeds (2 beta - eps)/mu
        ms = constant_schedule(Metric.identity(2))
        ss = constant_steps(0.5, 2.0, 1.0)
        rep = validate_theorem41(ms, ss, beta=1.0, n_check=10)
        assert not rep.passed
        assert any(c.name == "gamma-in-range" and not c.passed for c in rep.checks)

    def test_misdeclared_mu_bound_reported_with_n(self, rng):
        base = random_diag_metric(rng, 3, lo=1.0, hi=2.0)
        ms = perturbed_schedule(base, 0.5, 0.3, seed=6)
        ms.mu_bound = float(np.max(base.diagonal)) * 0.9  # understate
        ss = auto_steps(1.0, ms.mu_bound)
        rep = validate_theorem41(ms, ss, beta=1.0, n_check=50)
        check = next(c for c in rep.checks if c.name == "metric-norm-bound")
        assert not check.passed and check.worst_n is not None

    def test_validator_never_throws(self):
        ms = constant_schedule(Metric.identity(2))
        ss = constant_steps(5.0, -1.0, 2.0)  # absurd on purpose
        rep = validate_theorem41(ms, ss, beta=0.1, n_check=5)
        assert not rep.passed

    def test_constructor_schedules_pass_own_validator(self, rng):
        for ms in [
            constant_schedule(random_metric(rng, 3)),
            perturbed_schedule(random_diag_metric(rng, 3, lo=1.0, hi=2.0),
                               0.5, 0.3, seed=1),
            increasing_schedule(random_diag_metric(rng, 3, lo=1.0, hi=2.0),
                                0.5, 0.2, seed=2),
        ]:
            ss = auto_steps(1.0, ms.mu_bound)
            rep = validate_theorem41(ms, ss, beta=1.0, n_check=300)
            assert rep.passed, rep.text()


class TestCorollary62Validator:
    def test_scalar_closed_form(self):
        # delta_n = 1/(sqrt(sigma tau) ||L||) - 1 under scalar metrics
        tau, sigma = 0.3, 0.45
        L = LinearMap(np.array([[1.2, -0.4], [0.3, 0.8], [0.0, 0.5]]))
        ms_p = scalar_schedule(tau, 2)
        ms_d = [scalar_schedule(sigma, 3)]
        rep = validate_corollary62(ms_p, ms_d, [L], beta=5.0, epsilon=0.5,
                                   n_check=4)
        expected = 1.0 / (math.sqrt(sigma * tau) * L.norm) - 1.0
        assert np.allclose(rep.extras["delta"], expected, atol=1e-12)
        zeta_expected = expected / ((1.0 + expected) * max(tau, sigma))
        assert np.allclose(rep.extras["zeta"], zeta_expected, atol=1e-12)

    def test_boundary_scaling_infeasible(self):
        # tau sigma ||L||^2 = 1 gives delta = 0 -> infeasible
        L = LinearMap(np.eye(2) * 2.0)  # norm 2
        tau = sigma = 0.5  # sqrt(0.25)*2 = 1
        rep = validate_corollary62(scalar_schedule(tau, 2),
                                   [scalar_schedule(sigma, 2)], [L],
                                   beta=10.0, epsilon=0.5, n_check=3)
        check = next(c for c in rep.checks if c.name == "delta-positive")
        assert not check.passed

    def test_scaled_down_metrics_pass_with_margin(self):
        L = LinearMap(np.eye(2))
        beta, eps = 1.0, 0.5
        rep = validate_corollary62(scalar_schedule(0.2, 2),
                                   [scalar_schedule(0.2, 2)], [L],
                                   beta=beta, epsilon=eps, n_check=3)
        assert rep.passed, rep.text()
        floor = 1.0 / (2 * beta - eps)
        assert np.all(rep.extras["zeta"] >= floor)

    def test_requires_monotone_metrics(self, rng):
        # a decaying positive perturbation makes the sequence decrease
        base = random_diag_metric(rng, 2, lo=1.0, hi=1.5)
        wiggling = perturbed_schedule(base, 0.5, 0.2,
                                      direction=np.diag([1.0, 0.5]))
        rep = validate_corollary62(wiggling, [scalar_schedule(0.1, 2)],
                                   [LinearMap(np.eye(2))], beta=5.0,
                                   epsilon=0.5, n_check=30)
        check = next(c for c in rep.checks if c.name == "metric-monotone-primal")
        assert not check.passed

    def test_no_blocks_edge(self):
        rep = validate_corollary62(scalar_schedule(0.5, 3), [], [],
                                   beta=1.0, epsilon=0.5, n_check=3)
        assert rep.passed
        assert np.all(np.isinf(rep.extras["delta"]))
        assert np.allclose(rep.extras["zeta"], 2.0)
