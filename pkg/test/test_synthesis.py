import math
from unittest import TestCase

import numpy as np

from decaycert.engine.inequality import TimeGrid, check_majorant_condition
from decaycert.engine.synthesis import (ProblemConstants, Regime, certificate_families, h_of_lambda, hmin,
                                        lambda_min_power, lambda_zero, sweep_forced_nu, sweep_power_epsilon,
                                        synth_exponential, synth_exponential_from_u0, synth_forced, synth_power,
                                        synthesize)
from decaycert.families import ZERO, Constant, Exponential, Power, PowerDecay, PowerLaw

FORCED = dict(c1=1.0, q1=0.5, c0=1.0, p=2.0, c2=0.04, q2=1.5)


class TestExponentialSynthesis(TestCase):

    def test_01a_examples(self):
        """
        Ensure lambda = (c0/eps)^(1/(p-1)) and b = k - eps.
        """
        result = synth_exponential(1.0, 1.0, 2.0, 0.5)
        self.assertTrue(result.feasible)
        self.assertEqual(Exponential(2.0, 0.5), result.majorant)
        self.assertEqual(0.5, result.initial_radius)

        result = synth_exponential(1.0, 1.0, 3.0, 0.25)
        self.assertAlmostEqual(2.0, result.constants["lambda"], places=14)
        self.assertEqual(0.75, result.constants["b"])
        self.assertAlmostEqual(0.5, result.initial_radius, places=14)

        for epsilon in (0.1, 0.5, 0.9):
            self.assertAlmostEqual(1.0, synth_exponential(1.0, epsilon, 2.0, epsilon).initial_radius, places=14)

    def test_01b_epsilon_range(self):
        """
        Ensure eps outside (0, k) is rejected.
        """
        for epsilon in (0.0, 1.0, 1.5, -0.1):
            with self.assertRaises(ValueError):
                synth_exponential(1.0, 1.0, 2.0, epsilon)

    def test_01c_epsilon_trade_off(self):
        """
        Ensure a larger eps buys a larger radius at the price of a slower rate.
        """
        results = [synth_exponential(1.0, 1.0, 2.5, epsilon) for epsilon in np.linspace(0.05, 0.95, 19)]
        radii = [r.initial_radius for r in results]
        rates = [r.constants["b"] for r in results]
        self.assertTrue(all(a < b for a, b in zip(radii, radii[1:])))
        self.assertTrue(all(a > b for a, b in zip(rates, rates[1:])))

    def test_01d_small_data_examples(self):
        """
        Ensure the small data rate is k - c0 |u0|^(p-1) and equality is infeasible.
        """
        result = synth_exponential_from_u0(1.0, 0.5, 2.0, 0.5)
        self.assertTrue(result.feasible)
        self.assertEqual(0.75, result.constants["b"])
        self.assertEqual(Exponential(2.0, 0.75), result.majorant)
        self.assertEqual(0.5, result.initial_radius)

        result = synth_exponential_from_u0(1.0, 2.0, 2.0, 0.5)
        self.assertFalse(result.feasible)
        self.assertEqual(["small_data_rate: c0 |u0|^(p-1) < k fails (slack 0)"], result.reasons)

        self.assertAlmostEqual(2.0, synth_exponential_from_u0(2.0, 5.0, 2.0, 1e-9).constants["b"], places=7)

    def test_01e_small_data_matches_exponential(self):
        """
        Ensure the small data majorant is the exponential synthesis with eps = c0 |u0|^(p-1).
        """
        rng = np.random.default_rng(3)
        for _ in range(50):
            k, c0, p = rng.uniform(0.5, 2.0), rng.uniform(0.1, 2.0), rng.uniform(1.5, 3.0)
            u0 = 0.9 * (k / c0) ** (1.0 / (p - 1.0)) * rng.uniform(0.1, 1.0)
            small = synth_exponential_from_u0(k, c0, p, u0)
            general = synth_exponential(k, c0, p, c0 * u0 ** (p - 1.0))
            self.assertAlmostEqual(1.0, small.majorant.lam / general.majorant.lam, places=12)
            self.assertAlmostEqual(small.majorant.b, general.majorant.b, places=12)


class TestPowerSynthesis(TestCase):

    def test_01a_examples(self):
        """
        Ensure nu = c1 - eps and the shape constraint (p - 1) nu >= q1.
        """
        result = synth_power(1.0, 1.0, 1.0, 3.0, 0.5)
        self.assertTrue(result.feasible)
        self.assertEqual(0.5, result.constants["nu"])
        self.assertAlmostEqual(math.sqrt(2.0), result.constants["lambda"], places=14)
        self.assertAlmostEqual(1.0 / math.sqrt(2.0), result.initial_radius, places=14)

        result = synth_power(1.0, 1.0, 1.0, 2.0, 0.5)
        self.assertFalse(result.feasible)
        self.assertEqual(1, len(result.reasons))
        self.assertTrue(result.reasons[0].startswith("power_monotonicity"))

        result = synth_power(1.0, 0.0, 1.0, 2.0, 0.5)
        self.assertTrue(result.feasible)
        self.assertEqual(Power(2.0, 0.5), result.majorant)

    def test_01b_invalid(self):
        """
        Ensure eps outside (0, c1) and q1 outside [0, 1] are rejected.
        """
        with self.assertRaises(ValueError):
            synth_power(1.0, 0.5, 1.0, 2.0, 1.0)
        with self.assertRaises(ValueError):
            synth_power(1.0, 1.5, 1.0, 2.0, 0.5)
        with self.assertRaises(ValueError):
            synth_power(1.0, 0.5, 1.0, 1.0, 0.5)

    def test_01c_lambda_min(self):
        """
        Ensure the admissible lambda tends to (c0/c1)^(1/(p-1)) as eps approaches c1.
        """
        self.assertEqual(1.0, lambda_min_power(1.0, 1.0, 3.0))
        self.assertAlmostEqual(0.5, lambda_min_power(2.0, 1.0, 2.0), places=15)
        near = synth_power(2.0, 0.0, 1.0, 2.0, 2.0 - 1e-9)
        self.assertAlmostEqual(lambda_min_power(2.0, 1.0, 2.0), near.constants["lambda"], places=8)

    def test_01d_epsilon_sweep(self):
        """
        Ensure the sweep picks the largest radius among the feasible eps.
        """
        best = sweep_power_epsilon(1.0, 1.0, 1.0, 3.0, count=200)
        self.assertTrue(best.feasible)
        self.assertAlmostEqual(1.0 - 100.0 / 201.0, best.constants["nu"], places=12)
        self.assertIsNone(sweep_power_epsilon(1.0, 1.0, 1.0, 1.5, count=50))


class TestForcedSynthesis(TestCase):

    def test_01a_example(self):
        """
        Ensure lambda0 = 5, h_min = 0.4 and a feasible rate 0.5 for the forced example.
        """
        result = synth_forced(nu=0.5, **FORCED)
        self.assertTrue(result.feasible)
        self.assertAlmostEqual(5.0, result.constants["lambda0"], places=14)
        self.assertAlmostEqual(0.4, result.constants["h_min"], places=14)
        self.assertAlmostEqual(0.2, result.initial_radius, places=14)
        self.assertEqual(["forced_monotonicity", "forced_rate_budget"], [c.tag for c in result.checks])

    def test_01b_infeasible_budget(self):
        """
        Ensure c2 = 1 is rejected by the rate budget h_min + nu <= c1.
        """
        constants = dict(FORCED, c2=1.0)
        result = synth_forced(nu=0.5, **constants)
        self.assertFalse(result.feasible)
        self.assertEqual(2.0, result.constants["h_min"])
        self.assertEqual(1, len(result.reasons))
        self.assertIn("forced_rate_budget", result.reasons[0])

    def test_01c_vanishing_forcing(self):
        """
        Ensure lambda0 grows without bound and the radius shrinks as c2 tends to 0.
        """
        radii = [synth_forced(nu=0.5, **dict(FORCED, c2=c2)).initial_radius for c2 in (1e-2, 1e-4, 1e-6, 1e-8)]
        self.assertTrue(all(a > b for a, b in zip(radii, radii[1:])))
        self.assertLess(radii[-1], 1e-3)

    def test_01d_hmin_examples(self):
        """
        Ensure the closed form h_min agrees with h(lambda0).
        """
        self.assertAlmostEqual(2.0, hmin(1.0, 2.0, 1.0), places=14)
        self.assertAlmostEqual(0.4, hmin(1.0, 2.0, 0.04), places=14)
        self.assertAlmostEqual(3.0, hmin(1.0, 3.0, 2.0), places=14)
        self.assertAlmostEqual(1.0, lambda_zero(1.0, 3.0, 2.0), places=14)
        self.assertAlmostEqual(3.0, h_of_lambda(1.0, 3.0, 2.0, 1.0), places=14)
        with self.assertRaises(ValueError):
            hmin(0.0, 2.0, 1.0)

    def test_01e_hmin_optimality(self):
        """
        Ensure h_min = h(lambda0) within 1e-12 and h_min <= h(lambda) for 100 random lambda, over 1000 draws.
        """
        rng = np.random.default_rng(1000)
        for _ in range(1000):
            c0, p, c2 = rng.uniform(0.01, 10.0), rng.uniform(1.05, 6.0), rng.uniform(0.001, 10.0)
            closed = hmin(c0, p, c2)
            lam0 = lambda_zero(c0, p, c2)
            self.assertAlmostEqual(1.0, closed / h_of_lambda(c0, p, c2, lam0), delta=1e-12)
            for lam in lam0 * np.exp(rng.uniform(-3.0, 3.0, 100)):
                self.assertLessEqual(closed, h_of_lambda(c0, p, c2, lam) * (1.0 + 1e-12))

    def test_01f_nu_sweep(self):
        """
        Ensure the sweep returns the largest admissible rate c1 - h_min, or nothing when h_min exceeds c1.
        """
        best = sweep_forced_nu(count=100, **FORCED)
        self.assertTrue(best.feasible)
        self.assertAlmostEqual(0.6, best.constants["nu"], places=12)
        self.assertIsNone(sweep_forced_nu(count=100, **dict(FORCED, c2=1.0)))


class TestDispatch(TestCase):

    def test_01a_problem_constants_validation(self):
        """
        Ensure invalid constants name the offending field.
        """
        with self.assertRaises(ValueError) as context:
            ProblemConstants(c0=1.0, p=0.5)
        self.assertIn("p must exceed 1", str(context.exception))
        self.assertIn("constants.p", str(context.exception))
        with self.assertRaises(ValueError) as context:
            ProblemConstants(c0=1.0, p=2.0, q1=1.5)
        self.assertIn("constants.q1", str(context.exception))
        with self.assertRaises(ValueError) as context:
            ProblemConstants(c0=1.0, p=2.0, k=-1.0)
        self.assertIn("constants.k", str(context.exception))

    def test_01b_missing_constants(self):
        """
        Ensure each regime reports the constants it still needs.
        """
        constants = ProblemConstants(c0=1.0, p=2.0, k=1.0)
        self.assertEqual(["epsilon"], constants.missing_for(Regime.Exponential))
        self.assertEqual(["c1", "q1", "c2", "q2", "nu"], constants.missing_for(Regime.Forced))
        with self.assertRaises(ValueError):
            synthesize(Regime.Exponential, constants)
        self.assertEqual({"c0": 1.0, "p": 2.0, "k": 1.0}, constants.as_dict())

    def test_01c_regime_from_text(self):
        """
        Ensure regime names are accepted in any case and with dashes.
        """
        self.assertIs(Regime.SmallData, Regime.from_text("small-data"))
        self.assertIs(Regime.Forced, Regime.from_text(" Forced "))
        self.assertIs(Regime.Power, Regime.from_text(None, Regime.Power))
        self.assertEqual("small_data", str(Regime.SmallData))

    def test_01d_dispatch(self):
        """
        Ensure synthesize routes to the regime's synthesis.
        """
        cases = [(Regime.Exponential, ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5), Exponential(2.0, 0.5)),
                 (Regime.SmallData, ProblemConstants(c0=0.5, p=2.0, k=1.0, u0_norm=0.5), Exponential(2.0, 0.75)),
                 (Regime.Power, ProblemConstants(c0=1.0, p=2.0, c1=1.0, q1=0.0, epsilon=0.5), Power(2.0, 0.5))]
        for regime, constants, majorant in cases:
            result = synthesize(regime, constants)
            self.assertIs(regime, result.regime)
            self.assertEqual(majorant, result.majorant)
        forced = synthesize(Regime.Forced, ProblemConstants(nu=0.5, **FORCED))
        self.assertAlmostEqual(5.0, forced.majorant.lam, places=14)

    def test_01e_certificate_families(self):
        """
        Ensure each regime certifies against the families it was synthesized for.
        """
        constants = ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5)
        self.assertEqual((PowerLaw(1.0, 2.0), ZERO, Constant(1.0)),
                         certificate_families(Regime.Exponential, constants))
        forced = ProblemConstants(nu=0.5, **FORCED)
        self.assertEqual((PowerLaw(1.0, 2.0), PowerDecay(0.04, 1.5), PowerDecay(1.0, 0.5)),
                         certificate_families(Regime.Forced, forced))

    def test_01f_synthesis_passes_certification(self):
        """
        Ensure every feasible synthesis yields a feasible certificate at its initial radius.
        """
        grid = TimeGrid.geometric(50.0, 1024)
        cases = [(Regime.Exponential, ProblemConstants(c0=1.0, p=2.0, k=1.0, epsilon=0.5)),
                 (Regime.Exponential, ProblemConstants(c0=2.0, p=3.0, k=1.5, epsilon=0.2)),
                 (Regime.SmallData, ProblemConstants(c0=0.5, p=2.0, k=1.0, u0_norm=0.5)),
                 (Regime.Power, ProblemConstants(c0=1.0, p=3.0, c1=1.0, q1=1.0, epsilon=0.5)),
                 (Regime.Power, ProblemConstants(c0=0.3, p=2.5, c1=2.0, q1=0.4, epsilon=1.0)),
                 (Regime.Forced, ProblemConstants(nu=0.5, **FORCED))]
        for regime, constants in cases:
            result = synthesize(regime, constants)
            self.assertTrue(result.feasible, repr(regime))
            alpha, beta, gamma = certificate_families(regime, constants)
            certificate = check_majorant_condition(alpha, beta, gamma, result.majorant, result.initial_radius, grid)
            self.assertTrue(certificate.feasible, repr(regime))
            self.assertTrue(certificate.proven_for_all_t, repr(regime))
            self.assertTrue(certificate.borderline, repr(regime))
