import os
import unittest
from unittest import mock

import numpy as np

from cdsclear import metrics, CapExceededError, CyclicDependencyError, DefaultCostsPresentError
from cdsclear.file_utils import load_resource_json
from cdsclear.formats import parse_network
from cdsclear.gadgets import infeasibility, input_pair, drive, nand, purify, product, or_gate, BankNamer
from cdsclear.instancegenerator import random_network
from cdsclear.network import FinancialNetwork, is_clearing, is_eps_approx_clearing, eps_violations, truncate, update_F
from cdsclear.solver import (iterate_F, iterate_f, map_G, map_g, solve_eps_approx, enumerate_patterns,
                             forward_eval, default_threads, load_solver_config, SolverConfig)


def input_pair_network():
    return FinancialNetwork(["u", "x"], [0.0, 0.0], {("u", "x"): 1.0, ("x", "u"): 1.0})


def no_clearing():
    return parse_network(load_resource_json("no_clearing.json"))


class ConfigTestCase(unittest.TestCase):

    def test_packaged_config(self):
        config = load_solver_config()
        self.assertEqual(config.tol, 1e-9)
        self.assertEqual(config.pattern_cap, 16)
        self.assertEqual(config.brute_cap, 12)

    def test_unknown_keys(self):
        with self.assertRaises(ValueError):
            SolverConfig.from_dict({"tolerance": 1e-3})

    def test_default_threads(self):
        with mock.patch.dict(os.environ, {"CDSCLEAR_THREADS": "4"}):
            self.assertEqual(default_threads(), 4)
        with mock.patch.dict(os.environ, {"CDSCLEAR_THREADS": "many"}):
            self.assertEqual(default_threads(), 1)
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertEqual(default_threads(), 1)


class IterationTestCase(unittest.TestCase):

    def test_default_costs_example(self):
        net = FinancialNetwork(["A", "B"], [1.0, 1.0], {("A", "B"): 2.0}, alpha=0.5)
        report = iterate_F(net)
        self.assertTrue(report.found)
        self.assertAlmostEqual(report.value_of("A"), 0.25)
        self.assertEqual(report.value_of("B"), 1.0)

    def test_no_clearing_never_clears(self):
        net = no_clearing()
        rng = np.random.default_rng(7)
        for _ in range(20):
            report = iterate_F(net, r0=rng.uniform(0.0, 1.0, net.n), max_iter=500)
            self.assertEqual(report.status, metrics.STATUS_NOT_FOUND)
            self.assertIsNone(report.r)

    def test_vanishing_liability_is_not_a_fixed_point(self):
        # C owes almost nothing at this point, so F pins it at 0 and flips it back to 1 one step later
        stalled = [1.0 - 1.3e-10, 0.5 - 7.4e-10, 4.5e-11, 1.0 - 5e-11, 1.0 - 4e-11]
        report = iterate_F(no_clearing(), r0=stalled, max_iter=1)
        self.assertLessEqual(report.residual, 1e-9)
        self.assertEqual(report.status, metrics.STATUS_NOT_FOUND)
        self.assertIsNone(report.r)

    def test_reports_a_fixed_point_of_F(self):
        net = FinancialNetwork(["A", "B"], [1.0, 1.0], {("A", "B"): 2.0}, alpha=0.5)
        report = iterate_F(net, r0=[0.9, 0.9])
        np.testing.assert_allclose(update_F(net, report.r), report.r, atol=1e-9)

    def test_bad_damping(self):
        with self.assertRaises(ValueError):
            iterate_F(input_pair_network(), damping=0.0)

    def test_iterate_f(self):
        report = iterate_f(input_pair_network(), r0=[0.4, 0.4])
        self.assertTrue(report.found)
        np.testing.assert_allclose(report.r, [0.4, 0.4])

    def test_iterate_f_needs_approximation_setting(self):
        net = FinancialNetwork(["A", "B"], [1.0, 1.0], {("A", "B"): 2.0}, alpha=0.5)
        with self.assertRaises(DefaultCostsPresentError):
            iterate_f(net)


class AuxiliaryMapTestCase(unittest.TestCase):

    def test_map_G(self):
        net = FinancialNetwork(["A", "B"], [2.0, 1.0], {("A", "B"): 1.0})
        np.testing.assert_allclose(map_G(net, [1.0, 1.0], 0.1), [1.1, 1.1])
        np.testing.assert_allclose(map_G(input_pair_network(), [1.05, 0.5], 0.1), [0.5, 1.0])

    def test_map_g(self):
        np.testing.assert_allclose(map_g(input_pair_network(), [0.2, 0.9], 0.1), [0.9, 0.2])
        net = FinancialNetwork(["A", "B"], [2.0, 1.0], {("A", "B"): 1.0})
        np.testing.assert_allclose(map_g(net, [1.0, 1.0], 0.1), [1.1, 1.1])


class AuxiliaryMapPropertyTestCase(unittest.TestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)
        self.networks = [random_network(self.rng, int(self.rng.integers(2, 6))) for _ in range(20)]

    def test_maps_only_see_the_truncation(self):
        eps = 0.05
        for k, net in enumerate(self.networks):
            for _ in range(10):
                r = self.rng.uniform(0.0, 1.0 + eps, net.n)
                with self.subTest(network=k):
                    np.testing.assert_array_equal(map_G(net, r, eps), map_G(net, truncate(r), eps))
                    np.testing.assert_array_equal(map_g(net, r, eps), map_g(net, truncate(r), eps))

    def test_truncated_fixed_points_of_g_clear_approximately(self):
        eps = 0.05
        fixed_points = 0
        for k, net in enumerate(self.networks):
            for start in range(3):
                r = self.rng.uniform(0.0, 1.0 + eps, net.n)
                for _ in range(5000):
                    image = map_g(net, r, eps)
                    if np.max(np.abs(image - r)) <= 1e-10:
                        break
                    r = 0.5 * r + 0.5 * image
                else:
                    continue
                fixed_points += 1
                with self.subTest(network=k, start=start):
                    self.assertEqual(eps_violations(net, truncate(r), eps), [])
        self.assertGreater(fixed_points, 0)


class ApproximateSolveTestCase(unittest.TestCase):

    def test_input_pair(self):
        net = input_pair_network()
        report = solve_eps_approx(net, 0.01)
        self.assertTrue(report.found)
        self.assertEqual(report.details["restart"], 0)
        self.assertTrue(is_eps_approx_clearing(net, report.r, 0.01))

    def test_random_networks(self):
        rng = np.random.default_rng(3)
        found = 0
        for _ in range(30):
            net = random_network(rng, int(rng.integers(2, 6)))
            report = solve_eps_approx(net, 0.05, budget=8, max_iter=2000)
            if report.found:
                found += 1
                self.assertTrue(is_eps_approx_clearing(net, report.r, 0.05))
        self.assertGreater(found, 0)

    def test_eps_must_be_positive(self):
        with self.assertRaises(ValueError):
            solve_eps_approx(input_pair_network(), 0.0)

    def test_report_is_deterministic(self):
        net = random_network(np.random.default_rng(11), 4)
        first = solve_eps_approx(net, 0.05, budget=4, seed=5, max_iter=2000).to_dict()
        second = solve_eps_approx(net, 0.05, budget=4, seed=5, max_iter=2000).to_dict()
        self.assertEqual(first, second)


class PatternEnumerationTestCase(unittest.TestCase):

    def test_no_clearing_is_infeasible(self):
        report = enumerate_patterns(no_clearing())
        self.assertEqual(report.status, metrics.STATUS_INFEASIBLE)
        self.assertEqual(len(report.pattern_verdicts), 8)
        for verdict in report.pattern_verdicts:
            self.assertEqual(verdict.verdict, metrics.VERDICT_INFEASIBLE)
            self.assertIn("s", verdict.solvent)
        counts = report.to_dict()[metrics.KEY_PATTERN_VERDICTS]["counts"]
        self.assertEqual(counts[metrics.VERDICT_INFEASIBLE], 8)

    def test_threads_give_the_same_verdicts(self):
        single = enumerate_patterns(no_clearing(), threads=1)
        multi = enumerate_patterns(no_clearing(), threads=4)
        self.assertEqual(sorted(v.solvent for v in single.pattern_verdicts),
                         sorted(v.solvent for v in multi.pattern_verdicts))

    def test_cap(self):
        with self.assertRaises(CapExceededError):
            enumerate_patterns(no_clearing(), cap=1)

    def test_input_pair_has_a_solution(self):
        net = input_pair_network()
        report = enumerate_patterns(net)
        self.assertTrue(report.found)
        self.assertTrue(is_clearing(net, report.r))

    def test_infeasibility_gadget(self):
        for alpha in (0.0, 0.3, 0.5, 0.9):
            with self.subTest(alpha=alpha):
                frag = infeasibility(alpha, namer=BankNamer())
                feasible = drive(frag, "u", 1.0).finalize()
                report = enumerate_patterns(feasible)
                self.assertTrue(report.found)
                self.assertAlmostEqual(report.value_of(frag.outputs["B"]), 0.8 * alpha, places=6)
                self.assertTrue(is_clearing(feasible, report.r))

                infeasible = drive(frag, "u", 0.0).finalize()
                self.assertEqual(enumerate_patterns(infeasible).status, metrics.STATUS_INFEASIBLE)


class ForwardEvalTestCase(unittest.TestCase):

    def test_agrees_with_iteration_on_driven_gadgets(self):
        builders = {"nand": lambda: nand(namer=BankNamer()), "purify": lambda: purify(namer=BankNamer()),
                    "product": lambda: product(BankNamer()), "or": lambda: or_gate(namer=BankNamer())}
        for name, build in builders.items():
            for point in ((0.0, 0.0), (0.2, 0.9), (0.6, 0.45), (1.0, 1.0)):
                frag = build()
                for handle, value in zip(sorted(frag.inputs), point):
                    frag = drive(frag, handle, value)
                net = frag.finalize()
                with self.subTest(gadget=name, point=point):
                    report = iterate_F(net)
                    self.assertTrue(report.found)
                    np.testing.assert_allclose(report.r, forward_eval(net), atol=1e-6)


    def test_input_pair_is_cyclic(self):
        with self.assertRaises(CyclicDependencyError):
            forward_eval(input_pair(BankNamer()).finalize())

    def test_driven_input_pair(self):
        frag = input_pair(BankNamer())
        net = frag.finalize()
        r = forward_eval(net, {frag.outputs["u"]: 0.3})
        self.assertAlmostEqual(r[net.index[frag.outputs["x"]]], 0.3)

    def test_driven_values_are_checked(self):
        net = input_pair_network()
        with self.assertRaises(ValueError):
            forward_eval(net, {"z": 0.5})
        with self.assertRaises(ValueError):
            forward_eval(net, {"u": 1.5})


if __name__ == '__main__':
    unittest.main()
