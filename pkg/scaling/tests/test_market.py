import math

import numpy as np
from django.test import SimpleTestCase, override_settings, tag

from scaling import market as mk
from scaling.det_equiv import RidgeConfig, l1_det_expected
from scaling.problem_instance import INFINITY, DomainError, \
    ParameterError, lstar, make_power_law, problem_for_nu
from scaling.scaling_laws import Regime, optimize_lambda_exact


def _tau_for(problem, g):
    """ Safety threshold whose infinite-data loss is g. """
    return (math.sqrt(lstar(problem)) - math.sqrt(g)) ** 2


def _slope(xs, ys) -> float:
    """ Least-squares slope of log y against log x. """
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def _search(problem, n_i, tau_i, tau_e=INFINITY):
    return mk.entry_threshold_search(
        problem, mk.CompanyConfig(n_i, tau_i), mk.CompanyConfig(1, tau_e)).n


def _bumpy_loss(n):
    """ Falls to zero at 50 and from 100 on, with a bump at 64. """
    if n == 50 or n >= 100:
        return 0.0
    return 2.0 if n == 64 else 1.0


class CompanyConfigTestCase(SimpleTestCase):

    def test_bounds(self):
        """ n is a positive integer or infinite, tau positive or infinite.
        """
        with self.assertRaises(ParameterError, msg='n of zero.'):
            mk.CompanyConfig(0, 1.0)
        with self.assertRaises(ParameterError, msg='Fractional n.'):
            mk.CompanyConfig(2.5, 1.0)
        with self.assertRaises(ParameterError, msg='tau of zero.'):
            mk.CompanyConfig(10, 0.0)
        self.assertEqual(2, mk.CompanyConfig(2.0, INFINITY).n)
        self.assertIsInstance(mk.CompanyConfig(2.0, INFINITY).n, int)


class InfiniteDataTestCase(SimpleTestCase):

    def setUp(self):
        self.problem = problem_for_nu(1.0, 0.5, 1000)
        self.lstar = lstar(self.problem)

    def test_quarter_constraint(self):
        """ tau = L*/4 forces an even mixture. """
        outcome = mk.incumbent_infinite_opt(self.problem, self.lstar / 4)
        self.assertAlmostEqual(0.5, outcome.alpha, places=12)
        self.assertAlmostEqual(self.lstar / 4, outcome.perf_loss, places=12)
        self.assertEqual(0.0, outcome.lam)

    def test_loose_constraint(self):
        """ tau >= L* lets the company train on performance labels only. """
        for tau in (self.lstar, 2 * self.lstar, INFINITY):
            outcome = mk.incumbent_infinite_opt(self.problem, tau)
            self.assertEqual(1.0, outcome.alpha, f'alpha at tau={tau}')
            self.assertEqual(0.0, outcome.perf_loss, f'loss at tau={tau}')

    def test_intermediate_constraint(self):
        """ tau = 0.49 L* gives alpha = 0.7 and a loss of 0.09 L*. """
        outcome = mk.incumbent_infinite_opt(self.problem, 0.49 * self.lstar)
        self.assertAlmostEqual(0.7, outcome.alpha, places=12)
        self.assertAlmostEqual(0.09 * self.lstar, outcome.perf_loss,
                               places=12)
        self.assertAlmostEqual(0.49 * self.lstar, outcome.safety, places=12)

    def test_infeasible(self):
        """ Thresholds below L*/4 are outside the model. """
        with self.assertRaises(mk.InfeasibleModelError):
            mk.incumbent_infinite_opt(self.problem, 0.2 * self.lstar)
        with self.assertRaises(mk.InfeasibleModelError):
            mk.threshold_warmup(self.problem, 0.2 * self.lstar)

    def test_threshold_params(self):
        """ An unconstrained entrant has no infinite-data loss. """
        params = mk.threshold_params(self.problem, 0.49 * self.lstar)
        self.assertAlmostEqual(0.7, params.alpha_star_i, places=12)
        self.assertEqual(1.0, params.alpha_star_e)
        self.assertEqual(0.0, params.g_e)
        self.assertEqual(params.g_i, params.d)
        self.assertEqual(1.0, params.nu)


class CompanyOptimumTestCase(SimpleTestCase):

    def setUp(self):
        self.problem = make_power_law(0.5, 0.5, 0.5, 2000)

    def test_infinite_data(self):
        """ Infinite data falls back to the ridgeless optimum. """
        tau = 0.49 * lstar(self.problem)
        self.assertEqual(
            mk.incumbent_infinite_opt(self.problem, tau),
            mk.company_opt_simple(self.problem, mk.CompanyConfig(INFINITY,
                                                                 tau)))

    def test_finite_data(self):
        """ The constraint fixes alpha and safety; lambda is tuned. """
        tau = 0.49 * lstar(self.problem)
        outcome = mk.company_opt_simple(self.problem,
                                        mk.CompanyConfig(500, tau))
        self.assertAlmostEqual(0.7, outcome.alpha, places=12)
        self.assertAlmostEqual(tau, outcome.safety, places=12)
        self.assertGreater(outcome.lam, 0)
        self.assertGreater(outcome.perf_loss, 0.09 * lstar(self.problem))

    def test_unconstrained(self):
        """ Without a threshold only performance labels are used. """
        outcome = mk.company_opt_simple(self.problem,
                                        mk.CompanyConfig(500, INFINITY))
        self.assertEqual(1.0, outcome.alpha)
        self.assertAlmostEqual(lstar(self.problem), outcome.safety, places=12)

    def test_matches_grid(self):
        """ No cell of an (alpha, lambda) grid over the feasible mixtures
        beats the optimum, and every lambda row is best at alpha*. """
        problem = make_power_law(0.5, 0.5, 0.5, 1000)
        tau = 0.64 * lstar(problem)
        outcome = mk.company_opt_simple(problem, mk.CompanyConfig(200, tau))
        self.assertEqual(mk.alpha_star(problem, tau), outcome.alpha)
        alphas = np.linspace(0.5, outcome.alpha, 7)
        lambdas = np.geomspace(1e-6, 0.4, 25)
        grid = np.array([
            [l1_det_expected(problem, RidgeConfig(200, alpha, lam)).value
             for alpha in alphas]
            for lam in lambdas])
        self.assertLessEqual(outcome.perf_loss, grid.min() * (1 + 1e-6))
        np.testing.assert_array_equal(
            np.full(len(lambdas), len(alphas) - 1), grid.argmin(axis=1))


class WarmupTestCase(SimpleTestCase):

    def setUp(self):
        self.problem = problem_for_nu(1.0, 0.5, 1000)
        self.lstar = lstar(self.problem)

    def test_value(self):
        """ The threshold is G_I^{-1/nu}. """
        self.assertAlmostEqual(
            1 / (0.09 * self.lstar),
            mk.threshold_warmup(self.problem, 0.49 * self.lstar), places=8)

    def test_no_gap(self):
        """ An incumbent that reaches zero loss cannot be caught up with. """
        self.assertEqual(INFINITY,
                         mk.threshold_warmup(self.problem, self.lstar))
        self.assertEqual(INFINITY,
                         mk.threshold_warmup(self.problem, INFINITY))

    def test_tighter_constraint_lowers_threshold(self):
        """ A stricter incumbent is easier to match. """
        taus = [0.3, 0.5, 0.7, 0.9]
        values = [mk.threshold_warmup(self.problem, tau * self.lstar)
                  for tau in taus]
        self.assertEqual(sorted(values), values)


class FiniteIncumbentTestCase(SimpleTestCase):

    def setUp(self):
        self.problem = problem_for_nu(1.0, 0.5, 1000)

    def test_regimes(self):
        """ Boundaries sit at (G(1-rho))^{-1/(2 nu)} and
        G^{-1/2-1/nu}(1-rho)^{1/2}. """
        first = mk.finite_incumbent_threshold(self.problem, 10, 0.01)
        self.assertEqual(Regime.R1, first.regime)
        self.assertAlmostEqual(10.0, first.value, places=12)

        second = mk.finite_incumbent_threshold(self.problem, 100, 0.01)
        self.assertEqual(Regime.R2, second.regime)
        self.assertAlmostEqual(10 * 0.005 ** -0.25, second.value, places=9)

        third = mk.finite_incumbent_threshold(self.problem, 10 ** 4, 0.01)
        self.assertEqual(Regime.R3, third.regime)
        self.assertAlmostEqual(100.0, third.value, places=9)

    def test_boundaries(self):
        """ The regime changes right after each boundary. """
        self.assertEqual(
            Regime.R1,
            mk.finite_incumbent_threshold(self.problem, 14, 0.01).regime)
        self.assertEqual(
            Regime.R2,
            mk.finite_incumbent_threshold(self.problem, 15, 0.01).regime)
        self.assertEqual(
            Regime.R2,
            mk.finite_incumbent_threshold(self.problem, 707, 0.01).regime)
        self.assertEqual(
            Regime.R3,
            mk.finite_incumbent_threshold(self.problem, 708, 0.01).regime)

    def test_second_regime_exponent(self):
        """ Doubling N_I scales the threshold by 2^{1/(nu+1)}. """
        problem = problem_for_nu(0.34, 0.5, 1000)
        low = mk.finite_incumbent_threshold(problem, 10 ** 4, 0.01)
        high = mk.finite_incumbent_threshold(problem, 2 * 10 ** 4, 0.01)
        self.assertEqual(Regime.R2, low.regime)
        self.assertEqual(Regime.R2, high.regime)
        self.assertAlmostEqual(2 ** (1 / 1.34), high.value / low.value,
                               places=9)

    def test_infinite_incumbent(self):
        """ An incumbent with infinite data gives the warmup law. """
        problem = problem_for_nu(0.34, 0.5, 1000)
        result = mk.finite_incumbent_threshold(problem, INFINITY, 0.5)
        self.assertEqual(Regime.R3, result.regime)
        self.assertAlmostEqual(0.5 ** (-1 / 0.34), result.value, places=9)
        self.assertAlmostEqual(7.68, result.value, delta=0.01)

    def test_from_threshold(self):
        """ threshold_finite goes through G_I of the incumbent threshold. """
        tau = 0.49 * lstar(self.problem)
        result = mk.threshold_finite(self.problem, 10 ** 6, tau)
        self.assertEqual(Regime.R3, result.regime)
        self.assertAlmostEqual(mk.threshold_warmup(self.problem, tau),
                               result.value, places=9)


class ConstrainedTestCase(SimpleTestCase):

    def test_first_and_second_regime(self):
        """ With delta <= 1 the law has two regimes. """
        problem = problem_for_nu(1.0, 0.5, 1000)
        tau_e = _tau_for(problem, 0.001)

        first = mk.threshold_constrained(
            problem, _tau_for(problem, 0.1), tau_e)
        self.assertEqual(Regime.R1, first.regime)
        self.assertAlmostEqual(1 / 0.099, first.value, places=6)

        second = mk.threshold_constrained(
            problem, _tau_for(problem, 0.011), tau_e)
        self.assertEqual(Regime.R2, second.regime)
        self.assertAlmostEqual(0.01 ** -2 * math.sqrt(0.0005), second.value,
                               places=6)

    def test_third_regime(self):
        """ delta > 1 opens a third regime for small gaps. """
        problem = make_power_law(0.5, 2.5, 0.5, 1000)
        tau_e = _tau_for(problem, 0.04)

        second = mk.threshold_constrained(
            problem, _tau_for(problem, 0.065), tau_e)
        self.assertEqual(Regime.R2, second.regime)
        self.assertAlmostEqual(
            0.025 ** (-4 / 3) * math.sqrt(0.02), second.value, places=6)

        third = mk.threshold_constrained(
            problem, _tau_for(problem, 0.05), tau_e)
        self.assertEqual(Regime.R3, third.regime)
        self.assertAlmostEqual(
            (0.01 / math.sqrt(0.02)) ** (-5 / 3), third.value, places=6)

    def test_domain(self):
        """ tau_E must exceed tau_I, which must be at least 0.5625 L*. """
        problem = problem_for_nu(1.0, 0.5, 1000)
        best = lstar(problem)
        with self.assertRaises(DomainError):
            mk.threshold_constrained(problem, 0.6 * best, 0.6 * best)
        with self.assertRaises(DomainError):
            mk.threshold_constrained(problem, 0.7 * best, 0.6 * best)
        with self.assertRaises(mk.InfeasibleModelError):
            mk.threshold_constrained(problem, 0.5 * best, 0.9 * best)

    def test_no_gap(self):
        """ Both thresholds past L* leave nothing to catch up on. """
        problem = problem_for_nu(1.0, 0.5, 1000)
        best = lstar(problem)
        self.assertEqual(
            mk.ThetaThreshold(None, INFINITY),
            mk.threshold_constrained(problem, 1.5 * best, 2 * best))


class SearchThresholdTestCase(SimpleTestCase):

    def test_reciprocal(self):
        """ For a loss of 1/N the threshold is 1/target. """
        self.assertEqual(mk.ThresholdSearch(100, True),
                         mk.search_threshold(lambda n: 1 / n, 0.01))

    def test_first_size(self):
        """ A target the entrant meets with one point gives 1. """
        self.assertEqual(1, mk.search_threshold(lambda n: 0.5, 1.0).n)

    def test_cannot_enter(self):
        """ None counts as a failure to enter. """
        self.assertEqual(
            10,
            mk.search_threshold(lambda n: None if n < 10 else 0.0, 0.5).n)

    def test_non_monotone(self):
        """ A bump among the evaluated sizes triggers the linear scan, which
        finds an earlier dip. """
        with self.assertLogs('scaling.market', 'WARNING'):
            self.assertEqual(mk.ThresholdSearch(50, True),
                             mk.search_threshold(_bumpy_loss, 0.5))

    @override_settings(MOSCALE={'LINEAR_SCAN_LIMIT': 10})
    def test_non_monotone_past_scan_limit(self):
        """ Past LINEAR_SCAN_LIMIT the bisection result is kept and flagged
        as not monotone. """
        with self.assertLogs('scaling.market', 'WARNING') as logs:
            found = mk.search_threshold(_bumpy_loss, 0.5)
        self.assertEqual(mk.ThresholdSearch(100, False), found)
        self.assertIn('keeping the bisection result 100', logs.output[0])

    @override_settings(MOSCALE={'MAX_ENTRANT_N': 1000})
    def test_cap(self):
        """ The search stops at MAX_ENTRANT_N. """
        with self.assertRaises(mk.ThresholdSearchError):
            mk.search_threshold(lambda n: 1.0, 0.5)


class EntryThresholdSearchTestCase(SimpleTestCase):

    def setUp(self):
        self.problem = problem_for_nu(1.0, 0.5, 1000)
        self.lstar = lstar(self.problem)

    def test_unreachable(self):
        """ The entrant never catches an incumbent at zero loss, nor one
        bound by the same constraint. """
        self.assertEqual(INFINITY, mk.entry_threshold_search(
            self.problem, mk.CompanyConfig(INFINITY, self.lstar),
            mk.CompanyConfig(1, INFINITY)).n)
        tau = 0.49 * self.lstar
        self.assertEqual(INFINITY, mk.entry_threshold_search(
            self.problem, mk.CompanyConfig(INFINITY, tau),
            mk.CompanyConfig(1, tau)).n)

    @tag('slow')
    def test_matches_warmup_law(self):
        """ The searched threshold is within a constant factor of
        G_I^{-1/nu}. """
        problem = problem_for_nu(1.0, 0.5, 10 ** 4)
        tau = 0.49 * lstar(problem)
        found = mk.entry_threshold_search(
            problem, mk.CompanyConfig(INFINITY, tau),
            mk.CompanyConfig(1, INFINITY)).n
        law = mk.threshold_warmup(problem, tau)
        self.assertGreaterEqual(found, 0.1 * law)
        self.assertLessEqual(found, 10 * law)


@tag('slow')
class SearchedThresholdTestCase(SimpleTestCase):
    """ Log-log slopes of searched thresholds inside each regime of the
    threshold laws. """

    def test_warmup_slope(self):
        """ Against an incumbent with infinite data the threshold scales as
        G_I^{-1/nu}, grows with tau_I and becomes infinite at L*. """
        problem = problem_for_nu(1.0, 0.5, 3 * 10 ** 4)
        best = lstar(problem)
        taus = [alpha ** 2 * best for alpha in (0.9, 0.95, 0.98)]
        gaps = [mk.infinite_data_loss(problem, tau) for tau in taus]
        found = [_search(problem, INFINITY, tau) for tau in taus]
        slope = _slope(gaps, found)
        self.assertAlmostEqual(-1.0, slope, delta=0.1,
                               msg=f'Slope {slope} instead of -1.')
        self.assertEqual(sorted(found), found)
        for tau, n in zip(taus, found):
            ratio = n / mk.threshold_warmup(problem, tau)
            self.assertTrue(0.5 <= ratio <= 20, f'Ratio {ratio}.')
        self.assertEqual(INFINITY, _search(problem, INFINITY, best))

    def test_finite_incumbent_first_regime(self):
        """ Below the first boundary the entrant needs about as much data as
        the incumbent. """
        problem = make_power_law(0.5, 0.5, 0.99, 2000)
        tau = 0.99 ** 2 * lstar(problem)
        g_i = mk.infinite_data_loss(problem, tau)
        sizes = (10, 20, 40, 80)
        self.assertEqual(
            Regime.R1, mk.finite_incumbent_threshold(problem, 80, g_i).regime)
        found = [_search(problem, n_i, tau) for n_i in sizes]
        for n_i, n in zip(sizes, found):
            self.assertTrue(0.5 * n_i <= n <= n_i, f'{n} against {n_i}.')
        self.assertEqual(sorted(found), found)
        slope = _slope(sizes, found)
        self.assertAlmostEqual(1.0, slope, delta=0.15,
                               msg=f'Slope {slope} instead of 1.')

    def test_finite_incumbent_second_regime(self):
        """ Between the boundaries the threshold grows as N_I^{1/(nu+1)} and
        falls behind N_I. """
        problem = make_power_law(0.5, 0.5, 0.0, 5 * 10 ** 4)
        tau = 0.99 ** 2 * lstar(problem)
        g_i = mk.infinite_data_loss(problem, tau)
        sizes = (2000, 20000)
        for n_i in sizes:
            self.assertEqual(
                Regime.R2,
                mk.finite_incumbent_threshold(problem, n_i, g_i).regime)
        found = [_search(problem, n_i, tau) for n_i in sizes]
        slope = _slope(sizes, found)
        self.assertAlmostEqual(0.5, slope, delta=0.075,
                               msg=f'Slope {slope} instead of 0.5.')
        self.assertGreater(found[0] / sizes[0], found[1] / sizes[1])

    def test_finite_incumbent_third_regime(self):
        """ Past the last boundary more incumbent data barely moves the
        threshold, which approaches the infinite-data one from below. """
        problem = problem_for_nu(1.0, 0.5, 2 * 10 ** 4)
        tau = 0.49 * lstar(problem)
        g_i = mk.infinite_data_loss(problem, tau)
        self.assertEqual(
            Regime.R3,
            mk.finite_incumbent_threshold(problem, 1000, g_i).regime)
        found = [_search(problem, n_i, tau)
                 for n_i in (1000, 10000, INFINITY)]
        self.assertEqual(sorted(found), found)
        slope = _slope((1000, 10000), found[:2])
        self.assertLessEqual(abs(slope), 0.15, f'Slope {slope}.')

    def _constrained(self, problem, alpha_e, sizes):
        """ Searches against incumbents with infinite data whose loss equals
        the constrained entrant's optimum at each size; returns the gaps D
        and the thresholds. """
        tau_e = alpha_e ** 2 * lstar(problem)
        gaps, found = [], []
        for n in sizes:
            g_i = optimize_lambda_exact(problem, n, alpha_e).value
            tau_i = _tau_for(problem, g_i)
            gaps.append(mk.threshold_params(problem, tau_i, tau_e).d)
            found.append(_search(problem, INFINITY, tau_i, tau_e))
        return gaps, found

    def test_constrained_first_regime(self):
        """ For large gaps the threshold scales as D^{-1/nu}. """
        problem = make_power_law(0.5, 0.5, 0.5, 5000)
        gaps, found = self._constrained(problem, 0.9999, (50, 100, 200))
        slope = _slope(gaps, found)
        self.assertAlmostEqual(-1.0, slope, delta=0.15,
                               msg=f'Slope {slope} instead of -1.')

    def test_constrained_second_regime(self):
        """ For small gaps with delta <= 1 the threshold scales as
        D^{-(nu+1)/nu}. """
        problem = make_power_law(0.5, 0.5, 0.5, 5 * 10 ** 4)
        gaps, found = self._constrained(problem, 0.9, (2000, 20000))
        slope = _slope(gaps, found)
        self.assertAlmostEqual(-2.0, slope, delta=0.3,
                               msg=f'Slope {slope} instead of -2.')

    def test_constrained_third_regime(self):
        """ With delta = 2.5 small gaps give D^{-(nu'+1)/nu'}. """
        problem = make_power_law(0.5, 2.5, 0.5, 10 ** 5)
        gaps, found = self._constrained(problem, 0.95, (20000, 200000))
        slope = _slope(gaps, found)
        self.assertAlmostEqual(-5 / 3, slope, delta=1 / 3,
                               msg=f'Slope {slope} instead of -5/3.')

    def test_entrant_constraint(self):
        """ A looser entrant threshold above the incumbent's gives a finite
        threshold that does not grow. """
        problem = problem_for_nu(1.0, 0.5, 2000)
        best = lstar(problem)
        found = [_search(problem, INFINITY, 0.49 * best, tau_e * best)
                 for tau_e in (0.64, 0.72, 0.81)]
        self.assertNotIn(INFINITY, found)
        self.assertEqual(sorted(found, reverse=True), found)
