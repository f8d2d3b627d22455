import math
from unittest import TestCase

import numpy as np

from decaycert.engine.discrete import DiscreteScheme, evolve_extremal
from decaycert.engine.inequality import TimeGrid, verify_bound
from decaycert.engine.simulator import (ConstantMatrix, EnvelopeVector, EvolutionProblem, MatrixFunction, NormPower,
                                        ScaledByCoefficient, ZeroTerm, bernoulli_escape_time, bernoulli_oracle,
                                        dissipativity_margin, end_to_end_verify, integrate,
                                        verify_nonlinearity_envelope)
from decaycert.engine.synthesis import ProblemConstants, Regime, synth_exponential_from_u0
from decaycert.families import Constant, PowerDecay, PowerLaw
from test.utils.builders import exponential_problem, forced_problem, power_problem


class TestDissipativity(TestCase):

    def test_01a_margin_examples(self):
        """
        Ensure the margin is minus the top eigenvalue of the Hermitian part.
        """
        self.assertAlmostEqual(1.0, dissipativity_margin(-np.eye(2)), delta=1e-10)
        self.assertAlmostEqual(0.0, dissipativity_margin(np.array([[-1.0, 2.0], [0.0, -1.0]])), delta=1e-10)
        for k, omega in ((0.5, 3.0), (2.0, -7.5), (1.0, 0.0)):
            a = np.array([[-k, omega], [-omega, -k]])
            self.assertAlmostEqual(k, dissipativity_margin(a), delta=1e-10)

    def test_01b_complex_matrix(self):
        """
        Ensure complex matrices use the conjugate transpose.
        """
        a = np.array([[-1.0 + 5.0j, 0.0], [0.0, -3.0 - 1.0j]])
        self.assertAlmostEqual(1.0, dissipativity_margin(a), delta=1e-12)

    def test_01c_scaled_margin(self):
        """
        Ensure the margin of s(t) M is s(t) times the margin of M.
        """
        a = ScaledByCoefficient(-np.eye(2), PowerDecay(2.0, 1.0))
        t = np.array([0.0, 1.0, 3.0])
        np.testing.assert_allclose([2.0, 1.0, 0.5], a.margin_on_grid(t))
        self.assertAlmostEqual(1.0, dissipativity_margin(a, 1.0), places=14)

    def test_01d_non_square(self):
        """
        Ensure non-square matrices are rejected.
        """
        with self.assertRaises(ValueError):
            dissipativity_margin(np.ones((2, 3)))


class TestProblem(TestCase):

    def test_01a_from_config(self):
        """
        Ensure a problem is read from its config mapping.
        """
        problem = EvolutionProblem.from_config({
            "A": {"kind": "scaled", "matrix": [[-1.0, 0.0], [0.0, -2.0]], "s": {"kind": "power_decay", "c": 1,
                                                                            "q": 0.5}},
            "F": {"kind": "norm_power", "c0": 0.5, "p": 3, "D": [[0.0, 1.0], [1.0, 0.0]]},
            "b": {"kind": "envelope", "beta": 0.1, "e": [0.6, 0.8]},
            "u0": [0.1, 0.2],
        })
        self.assertEqual(2, problem.dim)
        self.assertIsInstance(problem.a, ScaledByCoefficient)
        self.assertEqual(Constant(0.1), problem.b.envelope())
        np.testing.assert_allclose([0.06, 0.08], problem.b.value(3.0))
        np.testing.assert_allclose([-0.1 + 0.06, -0.4 + 0.08], problem.rhs(0.0, np.array([0.1, 0.2])) -
                                   problem.f.value(0.0, np.array([0.1, 0.2])))

    def test_01b_from_config_defaults(self):
        """
        Ensure F and b default to zero.
        """
        problem = EvolutionProblem.from_config({"A": {"kind": "constant", "matrix": [[-1.0]]}, "u0": [1.0]})
        self.assertIsInstance(problem.f, ZeroTerm)
        self.assertEqual(0.0, problem.b.value(1.0))

    def test_01c_from_config_errors(self):
        """
        Ensure config errors name the offending field path.
        """
        cases = [({"A": {"kind": "constant", "matrix": [[-1.0, 0.0]]}, "u0": [1.0]}, "problem.A.matrix"),
                 ({"A": {"kind": "rotating"}, "u0": [1.0]}, "problem.A.kind"),
                 ({"A": {"kind": "constant", "matrix": [[-1.0]]}}, "problem.u0"),
                 ({"A": {"kind": "constant", "matrix": [[-1.0]]}, "u0": [1.0], "F": {"kind": "norm_power", "c0": 1,
                                                                                   "p": 1}}, "problem.F.p"),
                 ({"A": {"kind": "constant", "matrix": [[-1.0]]}, "u0": [1.0, 2.0]}, "problem")]
        for options, path in cases:
            with self.assertRaises(ValueError) as context:
                EvolutionProblem.from_config(options)
            self.assertIn("'{0}".format(path), str(context.exception))

    def test_01d_part_validation(self):
        """
        Ensure D with norm above 1, non-unit forcing directions and dimension mismatches are rejected.
        """
        with self.assertRaises(ValueError):
            NormPower(1.0, 2.0, 2.0 * np.eye(2))
        with self.assertRaises(ValueError):
            EnvelopeVector(Constant(1.0), [1.0, 1.0])
        with self.assertRaises(ValueError):
            EvolutionProblem(ConstantMatrix(-np.eye(2)), NormPower(1.0, 2.0, np.eye(3)), None, [1.0, 0.0])
        with self.assertRaises(ValueError):
            MatrixFunction.from_config({"kind": "constant", "matrix": "bogus"})


class TestEnvelope(TestCase):

    def test_01a_examples(self):
        """
        Ensure the sampled ratio |F| / (c0 |u|^p) is 0, 1 and 1/2 for the reference terms.
        """
        self.assertEqual(0.0, verify_nonlinearity_envelope(ZeroTerm(), 1.0, 2.0, 100, dim=3).max_ratio)
        report = verify_nonlinearity_envelope(NormPower(1.0, 2.0, np.eye(2)), 1.0, 2.0, 100)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(1.0, report.max_ratio, delta=1e-12)
        report = verify_nonlinearity_envelope(NormPower(1.0, 2.0, 0.5 * np.eye(2)), 1.0, 2.0, 100)
        self.assertAlmostEqual(0.5, report.max_ratio, delta=1e-12)

    def test_01b_violation(self):
        """
        Ensure a term above the declared envelope is reported with its witnesses.
        """
        report = verify_nonlinearity_envelope(NormPower(2.0, 2.0), 1.0, 2.0, 20, dim=2)
        self.assertFalse(report.passed)
        self.assertEqual(20, len(report.violations))
        self.assertAlmostEqual(2.0, report.max_ratio, delta=1e-12)

    def test_01c_invalid_samples(self):
        """
        Ensure at least one sample is required.
        """
        with self.assertRaises(ValueError):
            verify_nonlinearity_envelope(ZeroTerm(), 1.0, 2.0, 0)


class TestIntegrate(TestCase):

    def test_01a_linear_decay(self):
        """
        Ensure u' = -u from (1, 0) gives |u(1)| = exp(-1).
        """
        problem = EvolutionProblem(ConstantMatrix(-np.eye(2)), None, None, [1.0, 0.0])
        trajectory = integrate(problem, TimeGrid.uniform(1.0, 11))
        self.assertAlmostEqual(math.exp(-1.0), trajectory.norms[-1], delta=1e-8)
        np.testing.assert_allclose([math.exp(-1.0), 0.0], trajectory.states[-1], atol=1e-8)
        self.assertFalse(trajectory.blew_up)

    def test_01b_equilibrium(self):
        """
        Ensure u0 = 0 without forcing stays exactly 0.
        """
        problem = EvolutionProblem(ConstantMatrix([[-1.0, 3.0], [0.0, -2.0]]), NormPower(1.0, 2.0), None, [0.0, 0.0])
        trajectory = integrate(problem, TimeGrid.geometric(50.0, 256))
        np.testing.assert_array_equal(np.zeros(256), trajectory.norms)

    def test_01c_rotation_invariance(self):
        """
        Ensure rotating A and u0 leaves the norm trajectory unchanged.
        """
        a = np.array([[-1.0, 0.5], [-0.3, -2.0]])
        u0 = np.array([0.3, 0.4])
        theta = 0.7
        q = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        grid = TimeGrid.uniform(5.0, 501)
        plain = integrate(EvolutionProblem(ConstantMatrix(a), NormPower(0.5, 2.0), None, u0), grid)
        rotated = integrate(EvolutionProblem(ConstantMatrix(q.T @ a @ q), NormPower(0.5, 2.0), None, q.T @ u0), grid)
        np.testing.assert_allclose(plain.norms, rotated.norms, rtol=0.0, atol=1e-10)

    def test_01d_one_step_consistency(self):
        """
        Ensure each measured step stays below the one-step extremal recursion of the norm inequality.
        """
        problem = EvolutionProblem(ConstantMatrix([[-1.0, 0.5], [-0.5, -1.0]]), NormPower(0.5, 2.0), None,
                                   [0.3, 0.4])
        grid = TimeGrid.uniform(2.0, 4001)
        trajectory = integrate(problem, grid)
        gamma_est = float(np.min(problem.a.margin_on_grid(grid.points)))
        h = np.diff(trajectory.times)[np.newaxis, :]
        count = h.shape[1]
        scheme = DiscreteScheme(h, np.full((1, count), gamma_est), np.zeros((1, count)), np.ones((2, count)),
                                PowerLaw(0.5, 2.0))
        predicted = evolve_extremal(scheme, trajectory.norms[:-1]).g[1]
        self.assertTrue(np.all(trajectory.norms[1:] <= predicted + 1e-6))

    def test_01e_blow_up_time(self):
        """
        Ensure the integrator detects blow-up at the closed form escape time ln 2.
        """
        trajectory = integrate(exponential_problem(1.0, 2.0, 2.0, 1.0), TimeGrid.uniform(2.0, 2048))
        self.assertTrue(trajectory.blew_up)
        self.assertAlmostEqual(math.log(2.0), trajectory.escape_time, delta=1e-3)
        self.assertAlmostEqual(math.log(2.0), bernoulli_escape_time(1.0, 2.0, 2.0, 1.0), places=15)
        self.assertLess(trajectory.times[-1], math.log(2.0))


class TestOracle(TestCase):

    def test_01a_examples(self):
        """
        Ensure the closed form solution of g' = -k g + c0 g^p matches hand computed values.
        """
        result = bernoulli_oracle(1.0, 0.5, 2.0, 0.5, 1.0)
        self.assertTrue(result.exists)
        self.assertIsNone(result.escape_time)
        self.assertAlmostEqual(1.0 / (1.5 * math.e + 0.5), result.value, places=14)
        t = np.linspace(0.0, 5.0, 11)
        np.testing.assert_allclose(0.7 * np.exp(-2.0 * t), bernoulli_oracle(2.0, 0.0, 3.0, 0.7, t).value,
                                   rtol=1e-14)

    def test_01b_blow_up(self):
        """
        Ensure data above the global existence threshold reports the escape time and inf beyond it.
        """
        result = bernoulli_oracle(1.0, 2.0, 2.0, 1.0, np.array([0.0, 0.5, 1.0]))
        self.assertAlmostEqual(math.log(2.0), result.escape_time, places=15)
        self.assertEqual(1.0, result.value[0])
        self.assertTrue(np.isfinite(result.value[1]))
        self.assertTrue(np.isinf(result.value[2]))
        self.assertFalse(bernoulli_oracle(1.0, 2.0, 2.0, 1.0, 1.0).exists)

    def test_01c_invalid(self):
        """
        Ensure non-positive data or p <= 1 are rejected.
        """
        with self.assertRaises(ValueError):
            bernoulli_oracle(1.0, 1.0, 2.0, 0.0, 1.0)
        with self.assertRaises(ValueError):
            bernoulli_oracle(1.0, 1.0, 1.0, 0.5, 1.0)

    def test_01d_small_data_acceptance(self):
        """
        Ensure integration matches the oracle on [0, 20] and both respect 0.5 exp(-0.75 t).
        """
        grid = TimeGrid.geometric(20.0, 2048)
        trajectory = integrate(exponential_problem(1.0, 0.5, 2.0, 0.5), grid)
        exact = bernoulli_oracle(1.0, 0.5, 2.0, 0.5, grid.points).value
        self.assertLessEqual(float(np.max(np.abs(trajectory.norms - exact) / exact)), 1e-6)
        mu = synth_exponential_from_u0(1.0, 0.5, 2.0, 0.5).majorant
        self.assertTrue(verify_bound(grid.points, exact, mu, rtol=1e-12).passed)
        self.assertTrue(verify_bound(trajectory.times, trajectory.norms, mu, rtol=1e-6).passed)

    def test_01e_random_agreement(self):
        """
        Ensure integration matches the oracle within 1e-6 relative for 100 random globally existing solutions.
        """
        rng = np.random.default_rng(42)
        grid = TimeGrid.geometric(20.0, 256)
        for i in range(100):
            k, c0, p = rng.uniform(0.2, 2.0), rng.uniform(0.1, 3.0), rng.uniform(1.5, 4.0)
            u0 = (k / c0) ** (1.0 / (p - 1.0)) * rng.uniform(0.1, 0.9)
            trajectory = integrate(exponential_problem(k, c0, p, u0), grid)
            exact = bernoulli_oracle(k, c0, p, u0, grid.points).value
            error = float(np.max(np.abs(trajectory.norms - exact) / exact))
            self.assertLessEqual(error, 1e-6, "case {0}: k={1}, c0={2}, p={3}, u0={4}".format(i, k, c0, p, u0))


class TestEndToEnd(TestCase):
    grid = TimeGrid.geometric(50.0, 2048)

    def test_01a_exponential_pipeline(self):
        """
        Ensure the exponential regime passes every stage with zero slack at t = 0.
        """
        report = end_to_end_verify(exponential_problem(1.0, 1.0, 2.0, 0.4), Regime.Exponential,
                                   ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5), self.grid)
        self.assertTrue(report.passed, report.stages)
        self.assertEqual(["preconditions", "synthesize", "certify", "integrate", "verify"],
                         [s.name for s in report.stages])
        self.assertAlmostEqual(0.0, report.certificate.slack[0], delta=1e-12)
        bound = 0.5 * np.exp(-0.5 * report.trajectory.times)
        self.assertTrue(np.all(report.trajectory.norms <= bound * (1.0 + 1e-6)))

    def test_01b_power_pipeline(self):
        """
        Ensure the power regime with p = 3 passes and its p = 2 companion is rejected at synthesis.
        """
        constants = ProblemConstants(c0=1.0, p=3.0, c1=1.0, q1=1.0, epsilon=0.5)
        report = end_to_end_verify(power_problem(1.0, 1.0, 1.0, 3.0, 2.0 ** -0.5), "power", constants, self.grid)
        self.assertTrue(report.passed, report.stages)
        self.assertEqual(50.0, report.trajectory.times[-1])
        bound = 1.0 / (math.sqrt(2.0) * np.sqrt(1.0 + report.trajectory.times))
        self.assertTrue(np.all(report.trajectory.norms <= bound * (1.0 + 1e-6)))

        companion = ProblemConstants(c0=1.0, p=2.0, c1=1.0, q1=1.0, epsilon=0.5)
        report = end_to_end_verify(power_problem(1.0, 1.0, 1.0, 2.0, 0.4), Regime.Power, companion, self.grid)
        self.assertFalse(report.passed)
        self.assertEqual("synthesize", report.failed_stage)
        self.assertIn("power_monotonicity", report.stages[-1].detail)

    def test_01c_forced_pipeline(self):
        """
        Ensure the forced regime passes with bound 1/(5 sqrt(1 + t)) and c2 = 1 is rejected by its rate budget.
        """
        constants = ProblemConstants(c0=1.0, p=2.0, c1=1.0, q1=0.5, c2=0.04, q2=1.5, nu=0.5)
        report = end_to_end_verify(forced_problem(1.0, 0.5, 1.0, 2.0, 0.04, 1.5, 0.2), Regime.Forced, constants,
                                   self.grid)
        self.assertTrue(report.passed, report.stages)
        bound = 1.0 / (5.0 * np.sqrt(1.0 + report.trajectory.times))
        self.assertTrue(np.all(report.trajectory.norms <= bound * (1.0 + 1e-6)))

        infeasible = ProblemConstants(c0=1.0, p=2.0, c1=1.0, q1=0.5, c2=1.0, q2=1.5, nu=0.5)
        report = end_to_end_verify(forced_problem(1.0, 0.5, 1.0, 2.0, 1.0, 1.5, 0.2), Regime.Forced, infeasible,
                                   self.grid)
        self.assertEqual("synthesize", report.failed_stage)
        self.assertIn("forced_rate_budget", report.stages[-1].detail)

    def test_01d_precondition_failures(self):
        """
        Ensure a problem that does not match its declared constants stops at the preconditions.
        """
        weak = end_to_end_verify(exponential_problem(1.0, 1.0, 2.0, 0.4), Regime.Exponential,
                                 ProblemConstants(c0=1.0, p=2.0, k=2.0, epsilon=0.5), self.grid)
        self.assertEqual("preconditions", weak.failed_stage)
        self.assertIn("margin", weak.stages[0].detail)
        self.assertIsNone(weak.synthesis)

        strong = end_to_end_verify(exponential_problem(1.0, 2.0, 2.0, 0.4), Regime.Exponential,
                                   ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5), self.grid)
        self.assertEqual("preconditions", strong.failed_stage)
        self.assertIn("envelope", strong.stages[0].detail)

    def test_01e_initial_data_too_large(self):
        """
        Ensure data outside the certified radius fails certification.
        """
        report = end_to_end_verify(exponential_problem(1.0, 1.0, 2.0, 0.6), Regime.Exponential,
                                   ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5), self.grid)
        self.assertEqual("certify", report.failed_stage)
        self.assertIsNone(report.trajectory)
