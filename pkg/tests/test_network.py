import unittest

import numpy as np

from cdsclear import NetworkValidationError, DegenerateNetworkError, DefaultCostsPresentError
from cdsclear.file_utils import load_resource_json
from cdsclear.formats import parse_network
from cdsclear.network import (FinancialNetwork, update_F, map_f, is_clearing, is_eps_approx_clearing,
                              eps_violations, degenerate_banks, is_nondegenerate, snapshot, truncate,
                              require_approximation_setting, as_recovery, evaluate)
from cdsclear.instancegenerator import random_network


def input_pair_network(alpha=1.0, beta=1.0):
    return FinancialNetwork(["u", "x"], [0.0, 0.0], {("u", "x"): 1.0, ("x", "u"): 1.0}, alpha=alpha, beta=beta)


def no_clearing():
    return parse_network(load_resource_json("no_clearing.json"))


class ValidationTestCase(unittest.TestCase):

    def test_negative_notional_is_rejected(self):
        with self.assertRaises(NetworkValidationError) as context:
            FinancialNetwork(["A", "B"], [1.0, 0.0], {("A", "B"): -1.0})
        self.assertEqual(context.exception.field, "debts[A->B]")

    def test_unknown_bank_is_rejected(self):
        with self.assertRaises(NetworkValidationError):
            FinancialNetwork(["A", "B"], [1.0, 0.0], cds={("A", "B", "Z"): 1.0})

    def test_cds_writer_cannot_be_holder_or_reference(self):
        with self.assertRaises(NetworkValidationError):
            FinancialNetwork(["A", "B"], [1.0, 0.0], cds={("A", "A", "B"): 1.0})
        with self.assertRaises(NetworkValidationError):
            FinancialNetwork(["A", "B"], [1.0, 0.0], cds={("A", "B", "A"): 1.0})

    def test_cds_on_its_own_holder_is_allowed(self):
        net = FinancialNetwork(["s", "w"], [5.0, 0.0], {("w", "s"): 1.0}, cds={("s", "w", "w"): 2.0})
        self.assertEqual(net.cds[("s", "w", "w")], 2.0)

    def test_default_costs_out_of_range(self):
        with self.assertRaises(NetworkValidationError):
            input_pair_network(alpha=1.5)
        with self.assertRaises(NetworkValidationError):
            input_pair_network(beta=-0.1)

    def test_duplicate_bank(self):
        with self.assertRaises(NetworkValidationError):
            FinancialNetwork(["A", "A"], [1.0, 1.0])

    def test_external_assets_by_mapping(self):
        net = FinancialNetwork(["A", "B"], {"B": 2.0})
        self.assertEqual(net.external_of("A"), 0.0)
        self.assertEqual(net.external_of("B"), 2.0)

    def test_equality(self):
        self.assertEqual(input_pair_network(), input_pair_network())
        self.assertNotEqual(input_pair_network(), input_pair_network(alpha=0.5))


class UpdateMapTestCase(unittest.TestCase):

    def test_input_pair_fixed_points(self):
        net = input_pair_network()
        self.assertTrue(is_clearing(net, [0.0, 0.0]))
        self.assertTrue(is_clearing(net, [0.37, 0.37]))
        self.assertFalse(is_clearing(net, [0.2, 0.9]))
        np.testing.assert_allclose(update_F(net, [0.2, 0.9]), [0.9, 0.2])

    def test_no_clearing_at_all_ones(self):
        net = no_clearing()
        self.assertEqual(net.banks, ("A", "B", "C", "s", "t"))
        np.testing.assert_allclose(update_F(net, np.ones(5)), [0.0, 1.0, 1.0, 1.0, 1.0])

    def test_default_costs(self):
        net = FinancialNetwork(["A", "B"], [1.0, 1.0], {("A", "B"): 2.0}, alpha=0.5)
        np.testing.assert_allclose(update_F(net, [1.0, 1.0]), [0.25, 1.0])
        self.assertTrue(is_clearing(net, [0.25, 1.0]))

    def test_zero_liability_is_solvent(self):
        net = FinancialNetwork(["A"], [0.0])
        np.testing.assert_allclose(update_F(net, [0.3]), [1.0])

    def test_exact_solvency_comparison(self):
        # assets equal to liabilities count as solvent
        net = FinancialNetwork(["A", "B"], [1.0, 0.0], {("A", "B"): 1.0})
        self.assertEqual(update_F(net, [0.5, 1.0])[0], 1.0)

    def test_snapshot(self):
        net = FinancialNetwork(["A", "B", "C"], [1.0, 0.0, 0.0], {("A", "B"): 1.0}, cds={("A", "C", "B"): 2.0})
        snap = snapshot(net, [1.0, 0.25, 1.0])
        self.assertAlmostEqual(snap.pair_liabilities[("A", "C")], 1.5)
        self.assertAlmostEqual(snap.liabilities[0], 2.5)
        self.assertAlmostEqual(snap.incoming[2], 1.5)

    def test_recovery_shape(self):
        with self.assertRaises(ValueError):
            update_F(input_pair_network(), [1.0])
        r = as_recovery(input_pair_network(), {"u": 1.2, "x": -0.5})
        np.testing.assert_allclose(r, [1.0, 0.0])

    def test_truncate(self):
        self.assertEqual(truncate(1.3), 1.0)
        self.assertEqual(truncate(-0.1), 0.0)
        np.testing.assert_allclose(truncate(np.array([0.5, 2.0])), [0.5, 1.0])


class DegeneracyTestCase(unittest.TestCase):

    def test_no_clearing_is_degenerate(self):
        net = no_clearing()
        self.assertEqual(degenerate_banks(net), ["B", "C"])
        self.assertFalse(is_nondegenerate(net))
        with self.assertRaises(DegenerateNetworkError):
            require_approximation_setting(net)

    def test_always_solvent_banks(self):
        net = no_clearing()
        self.assertEqual([b for b, flag in zip(net.banks, net.always_solvent) if flag], ["s", "t"])

    def test_continuous_map_rejects_degenerate_point(self):
        net = FinancialNetwork(["A", "B"], [0.0, 1.0])
        with self.assertRaises(DegenerateNetworkError):
            map_f(net, [1.0, 1.0])

    def test_continuous_map(self):
        net = input_pair_network()
        np.testing.assert_allclose(map_f(net, [0.2, 0.9]), [0.9, 0.2])


class ApproximateClearingTestCase(unittest.TestCase):

    def test_input_pair(self):
        net = input_pair_network()
        self.assertTrue(is_eps_approx_clearing(net, [0.37, 0.37], 0.01))
        self.assertTrue(is_eps_approx_clearing(net, [0.2, 0.25], 0.1))
        self.assertFalse(is_eps_approx_clearing(net, [0.2, 0.25], 0.01))

    def test_solvency_side_condition(self):
        net = FinancialNetwork(["A", "B"], [2.0, 1.0], {("A", "B"): 1.0})
        violations = eps_violations(net, [0.95, 1.0], 0.1)
        self.assertEqual(len(violations), 1)
        self.assertIn("'A'", violations[0])
        self.assertTrue(is_eps_approx_clearing(net, [1.0, 1.0], 0.1))

    def test_default_costs_are_rejected(self):
        with self.assertRaises(DefaultCostsPresentError):
            is_eps_approx_clearing(input_pair_network(alpha=0.5), [0.5, 0.5], 0.1)

    def test_exact_clearing_is_approximate(self):
        net = input_pair_network()
        for value in np.linspace(0.0, 1.0, 5):
            self.assertTrue(is_eps_approx_clearing(net, [value, value], 1e-6))


class RandomNetworkPropertyTestCase(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(17)
        self.networks = [random_network(self.rng, int(self.rng.integers(2, 7))) for _ in range(25)]

    def test_update_map_agrees_with_continuous_map(self):
        for k, net in enumerate(self.networks):
            for _ in range(10):
                r = self.rng.uniform(0.0, 1.0, net.n)
                with self.subTest(network=k):
                    np.testing.assert_allclose(update_F(net, r), map_f(net, r), rtol=0.0, atol=1e-12)
            with self.subTest(network=k, r="ones"):
                np.testing.assert_allclose(update_F(net, np.ones(net.n)), map_f(net, np.ones(net.n)), atol=1e-12)

    def test_liabilities_decrease_in_r(self):
        for k, net in enumerate(self.networks):
            for _ in range(10):
                low = self.rng.uniform(0.0, 1.0, net.n)
                high = np.minimum(1.0, low + self.rng.uniform(0.0, 1.0, net.n))
                with self.subTest(network=k):
                    self.assertTrue(np.all(evaluate(net, high)[0] <= evaluate(net, low)[0] + 1e-12))


if __name__ == '__main__':
    unittest.main()
