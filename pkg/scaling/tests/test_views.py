from django.test import SimpleTestCase
from django.urls import reverse

from scaling.problem_instance import lstar, make_power_law


class KappaViewTestCase(SimpleTestCase):

    def test_kappa(self):
        """ The fixed point is at least lambda and has a small residual. """
        response = self.client.get(reverse('kappa'), {
            'gamma': 0.5, 'lambda': 0.001, 'n': 1000, 'p': 1000})
        self.assertEqual(200, response.status_code)
        body = response.json()
        self.assertGreaterEqual(body['kappa'], 0.001)
        self.assertLess(abs(body['residual']), 1e-9)

    def test_infinite_n(self):
        """ kappa needs a finite dataset size. """
        response = self.client.get(reverse('kappa'), {
            'gamma': 0.5, 'lambda': 0.001, 'n': 'inf'})
        self.assertEqual(400, response.status_code)
        self.assertIn('n', response.json())


class DetEquivViewTestCase(SimpleTestCase):

    def test_ridgeless(self):
        """ One mode, infinite data and no ridge give (1 - alpha)^2 L*. """
        response = self.client.get(reverse('detequiv'), {
            'gamma': 1, 'delta': 1, 'rho': 0, 'p': 1, 'n': 'inf',
            'alpha': 0.75, 'lambda': 0})
        self.assertEqual(200, response.status_code)
        body = response.json()
        self.assertEqual(0.125, body['value'])
        self.assertEqual('l1', body['objective'])
        self.assertEqual(5, len(body['terms']))

    def test_bad_rho(self):
        """ rho = 1 is rejected with the validation message. """
        response = self.client.get(reverse('detequiv'), {
            'gamma': 0.5, 'delta': 0.5, 'rho': 1, 'n': 100, 'alpha': 0.5,
            'lambda': 0.01})
        self.assertEqual(400, response.status_code)
        self.assertIn('non_field_errors', response.json())

    def test_missing_parameter(self):
        """ Every parameter without a default is required. """
        response = self.client.get(reverse('detequiv'), {
            'gamma': 0.5, 'delta': 0.5, 'rho': 0.5, 'n': 100,
            'alpha': 0.5})
        self.assertEqual(400, response.status_code)
        self.assertIn('lam', response.json())


class ThresholdViewTestCase(SimpleTestCase):

    def setUp(self):
        self.params = {'gamma': 0.5, 'delta': 0.5, 'rho': 0.5, 'p': 1000}

    def test_warmup(self):
        """ The warmup threshold is G_I^{-1/nu} with tau_I relative to L*.
        """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='warmup', tau_i=0.49))
        self.assertEqual(200, response.status_code)
        body = response.json()
        best = lstar(make_power_law(0.5, 0.5, 0.5, 1000))
        self.assertAlmostEqual(1 / (0.09 * best), body['n_e_star'], places=6)
        self.assertIsNone(body['regime'])
        self.assertTrue(body['monotone'])
        self.assertAlmostEqual(best, body['lstar'], places=12)

    def test_unreachable(self):
        """ Infinity is sent as the string 'inf'. """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='warmup', tau_i=1))
        self.assertEqual('inf', response.json()['n_e_star'])

    def test_finite(self):
        """ Regimes are sent by name. """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='finite', tau_i=0.49, n_i=1000000))
        self.assertEqual('R3', response.json()['regime'])

    def test_search_mode(self):
        """ Searches are not served over HTTP. """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='search', tau_i=0.49))
        self.assertEqual(400, response.status_code)
        self.assertIn('mode', response.json())

    def test_infeasible(self):
        """ A threshold below L*/4 is a 400 with the reason. """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='warmup', tau_i=0.2))
        self.assertEqual(400, response.status_code)
        self.assertIn('error', response.json())

    def test_constrained_needs_tau_e(self):
        """ The constrained mode needs an entrant threshold above tau_I. """
        response = self.client.get(reverse('threshold'), dict(
            self.params, mode='constrained', tau_i=0.6))
        self.assertEqual(400, response.status_code)
        self.assertIn('tau_e', response.json())
