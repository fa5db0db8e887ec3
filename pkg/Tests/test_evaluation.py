# SPDX-License-Identifier: Apache-2.0
# Copyright 2025 Ague Samuel Amen
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""
Tests for Core.evaluation - evaluations, concatenation, dividends, stopping and axiom checks
"""

import numpy as np
import pytest

from Core.bsde_engine import evaluate, solve_bsde
from Core.drivers import builtin
from Core.errors import BadPartition, LatticeMismatch, NotMeasurable, StoppingOrder, TimeOrder
from Core.evaluation import (
    LiftedEvaluation,
    LinearExpectation,
    TableEvaluation,
    apply,
    axiom_suite,
    concatenate,
    expectation_suite,
    extend_to_stopping,
    from_driver,
    lift_with_dividend,
    lifted_domination_check,
)
from Core.evaluation.axioms import AXIOMS
from Core.lattice import AdaptedProcess, RandomVariable, cond_expect, hitting_time, stopped_value

from .lattice_support import increasing_process, random_claim


@pytest.fixture()
def g_mu_eval(lat4):
    return from_driver(builtin("g_mu", {"mu": 0.5}), lat4)


class TestEvaluations:
    """Driver, linear and tabulated evaluations"""

    def test_linear_expectation(self, lat4, rng):
        X = random_claim(lat4, 4, rng)
        E = LinearExpectation(lat4)
        assert E.apply(1, 4, X).max_abs_diff(cond_expect(X, 1)) < 1e-14
        assert E.step(2, X.cond_expect(3)).max_abs_diff(cond_expect(X, 2)) < 1e-14
        assert E.mu == 0.0

    def test_driver_apply_matches_engine(self, lat4, rng, g_mu_eval):
        X = random_claim(lat4, 3, rng)
        assert g_mu_eval.apply(1, 3, X).max_abs_diff(evaluate(g_mu_eval.g, 1, 3, X)) == 0.0
        assert g_mu_eval.describe()["driver"]["mu"] == 0.5

    def test_steps_compose_to_apply(self, lat4, rng, g_mu_eval):
        X = random_claim(lat4, 4, rng)
        table = TableEvaluation.from_evaluation(g_mu_eval)
        assert table.mu == 0.5
        assert table.apply(0, 4, X).max_abs_diff(g_mu_eval.apply(0, 4, X)) < 1e-12

    def test_apply_helper(self, lat4, rng, g_mu_eval):
        X = random_claim(lat4, 2, rng)
        assert apply(g_mu_eval, 0, 2, X).max_abs_diff(g_mu_eval.apply(0, 2, X)) == 0.0

    def test_time_order(self, lat4, g_mu_eval):
        with pytest.raises(TimeOrder):
            g_mu_eval.apply(3, 1, lat4.brownian(1))

    def test_table_needs_one_map_per_step(self, lat4):
        with pytest.raises(LatticeMismatch):
            TableEvaluation(lat4, [lambda c: c.mean(axis=1)])

    def test_invert_node(self, lat4, rng):
        table = TableEvaluation.from_evaluation(LinearExpectation(lat4))
        X = random_claim(lat4, 1, rng)
        bad = table.invert_node(0, 0)
        assert bad.apply(0, 1, X).values[0] == pytest.approx(-X.mean())
        # the original is untouched
        assert table.apply(0, 1, X).values[0] == pytest.approx(X.mean())


class TestConcatenation:
    def test_pieces(self, lat4, rng, g_mu_eval):
        X = random_claim(lat4, 4, rng)
        E = concatenate([(g_mu_eval, (0, 2)), (LinearExpectation(lat4), (2, 4))])
        expected = g_mu_eval.apply(0, 2, cond_expect(X, 2))
        assert E.apply(0, 4, X).max_abs_diff(expected) < 1e-14
        assert E.step(3, X).max_abs_diff(cond_expect(X, 3)) < 1e-14
        assert E.mu == 0.5

    @pytest.mark.parametrize("bounds", [[(0, 2), (3, 4)], [(1, 2), (2, 4)], [(0, 2), (2, 3)], [(0, 0), (0, 4)]])
    def test_bad_partitions(self, lat4, bounds):
        E = LinearExpectation(lat4)
        with pytest.raises(BadPartition):
            concatenate([(E, b) for b in bounds])

    def test_empty(self):
        with pytest.raises(BadPartition):
            concatenate([])


class TestDividends:
    def test_null_dividend_returns_evaluation(self, lat4, g_mu_eval):
        assert lift_with_dividend(g_mu_eval, AdaptedProcess.zeros(lat4)) is g_mu_eval

    def test_lifted_linear(self, lat4):
        """E[B_4 + K_4 - K_0] = 0.4 for K_k = 0.1 k"""
        K = AdaptedProcess.deterministic(lat4, lambda k: 0.1 * k)
        lifted = lift_with_dividend(LinearExpectation(lat4), K)
        assert isinstance(lifted, LiftedEvaluation)
        assert lifted.apply(0, 4, lat4.brownian(4)).values[0] == pytest.approx(0.4)

    def test_lifted_driver_matches_engine(self, lat4, rng, g_mu_eval):
        K = increasing_process(lat4, rng)
        X = random_claim(lat4, 4, rng)
        lifted = lift_with_dividend(g_mu_eval, K)
        expected = solve_bsde(g_mu_eval.g, 4, X, K).Y[1]
        assert lifted.apply(1, 4, X).max_abs_diff(expected) < 1e-12

    def test_lifted_domination(self, lat4, rng, g_mu_eval):
        K, K2 = increasing_process(lat4, rng), increasing_process(lat4, rng)
        X, X2 = random_claim(lat4, 4, rng), random_claim(lat4, 4, rng)
        check = lifted_domination_check(g_mu_eval, K, K2, X, X2)
        assert check.passed
        assert check.n_checked == 4


class TestStopping:
    """E_{sigma, tau} from one-step operators"""

    def test_optional_stopping_for_expectation(self, lat4):
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        out = extend_to_stopping(LinearExpectation(lat4), 0, tau, stopped_value(B, tau))
        assert out.time_index == 0
        assert out.values[0] == pytest.approx(0.0, abs=1e-14)

    def test_matches_engine(self, lat4, rng, g_mu_eval):
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        X = stopped_value(AdaptedProcess.from_function(lat4, lambda k, w: np.sin(w[:, 0]) + 0.1 * k), tau)
        ours = extend_to_stopping(g_mu_eval, 0, tau, X)
        assert ours.max_abs_diff(evaluate(g_mu_eval.g, 0, tau, X)) < 1e-10

    def test_stopping_sigma(self, lat4):
        B = AdaptedProcess.brownian(lat4)
        sigma = hitting_time(B, lat4.sqrt_dt - 1e-12)
        out = extend_to_stopping(LinearExpectation(lat4), sigma, 4, lat4.brownian(4))
        assert out.max_abs_diff(stopped_value(B, sigma)) < 1e-14

    def test_claim_must_be_f_tau_measurable(self, lat4):
        tau = hitting_time(AdaptedProcess.brownian(lat4), lat4.sqrt_dt - 1e-12)
        with pytest.raises(NotMeasurable):
            extend_to_stopping(LinearExpectation(lat4), 0, tau, lat4.brownian(4))

    def test_order(self, lat4):
        B = AdaptedProcess.brownian(lat4)
        tau = hitting_time(B, lat4.sqrt_dt - 1e-12)
        with pytest.raises(StoppingOrder):
            extend_to_stopping(LinearExpectation(lat4), 3, tau, stopped_value(B, tau))


class TestAxiomSuite:
    """Sampled axiom checks"""

    def test_g_mu_passes(self, g_mu_eval):
        report = axiom_suite(g_mu_eval, n_samples=15, rng_seed=3, threads=1)
        assert report.passed, report.summary()
        assert set(AXIOMS) <= set(report.checks)
        assert report.mu == 0.5

    def test_kappa_passes_with_expectation_checks(self, lat4):
        E = from_driver(builtin("kappa_abs_z", {"kappa": 0.3}), lat4)
        report = axiom_suite(E, n_samples=10, rng_seed=1, expectation=True, threads=1)
        assert report.passed, report.summary()
        assert report.checks["A2'"].n_checked == 10

    def test_black_scholes_passes(self, lat4):
        E = from_driver(builtin("black_scholes", {"r": 0.05, "theta": 0.25}), lat4)
        report = axiom_suite(E, n_samples=20, rng_seed=4, threads=1)
        assert report.passed, report.summary()
        assert report.mu == pytest.approx(0.25)

    def test_domination_outside_step_guard_is_a_failed_check(self, lat4):
        """mu * sqrt(dt) = 1 exceeds the guard: A5 fails, the other checks still run"""
        report = axiom_suite(LinearExpectation(lat4), n_samples=5, rng_seed=0, mu=2.0, threads=1)
        assert report.failures() == ["A5"]
        assert report.checks["A5"].witness["mu"] == 2.0
        assert "0.5" in report.checks["A5"].witness["error"]

    def test_deterministic_in_seed_and_threads(self, g_mu_eval):
        one = axiom_suite(g_mu_eval, n_samples=8, rng_seed=11, threads=1).to_dict()
        many = axiom_suite(g_mu_eval, n_samples=8, rng_seed=11, threads=4).to_dict()
        assert one == many

    def test_inverted_node_fails_monotonicity(self, lat4):
        bad = TableEvaluation.from_evaluation(from_driver(builtin("g_mu", {"mu": 0.5}), lat4)).invert_node(0, 0)
        report = axiom_suite(bad, n_samples=40, rng_seed=5, threads=1)
        assert not report.passed
        assert "A1" in report.failures()
        assert report.checks["A1"].witness["s"] == 0

    def test_mu_scan_for_undeclared_table(self, lat4):
        """Without a declared constant the suite finds a dominating one"""
        table = TableEvaluation.from_evaluation(from_driver(builtin("g_mu", {"mu": 0.5}), lat4), mu=None)
        table.mu = None
        report = axiom_suite(table, n_samples=6, rng_seed=2, threads=1)
        assert report.mu is not None
        assert report.checks["A5"].passed

    def test_expectation_suite_for_conditional_expectation(self, lat4):
        report = expectation_suite(LinearExpectation(lat4), n_samples=10, rng_seed=7)
        assert report.passed, report.summary()
        assert set(report.checks) == {"A2'", "B1", "B2", "B3", "B4"}

    def test_summary_lists_checks(self, g_mu_eval):
        text = axiom_suite(g_mu_eval, n_samples=2, rng_seed=0, threads=1).summary()
        assert "A4_0" in text and "seed 0" in text

    def test_zero_samples_rejected(self, g_mu_eval):
        with pytest.raises(ValueError):
            axiom_suite(g_mu_eval, n_samples=0)

    def test_apply_on_intermediate_claim(self, lat4):
        X = RandomVariable(lat4, 2, np.arange(4.0))
        assert LinearExpectation(lat4).apply(0, 2, X).values[0] == pytest.approx(1.5)
