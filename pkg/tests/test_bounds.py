import itertools
import unittest

from pyomo.common.errors import InfeasibleConstraintException

from cdsclear.bounds import PatternPropagator, refutes, FREE, DEFAULT, SOLVENT
from cdsclear.file_utils import load_resource_json
from cdsclear.formats import parse_network
from cdsclear.network import FinancialNetwork


def no_clearing():
    return parse_network(load_resource_json("no_clearing.json"))


class RefutationTestCase(unittest.TestCase):

    def test_no_clearing_patterns_are_all_refuted(self):
        net = no_clearing()
        for choices in itertools.product((DEFAULT, SOLVENT), repeat=3):
            status = list(choices) + [SOLVENT, SOLVENT]
            with self.subTest(status=choices):
                self.assertIsNotNone(refutes(net, status))

    def test_always_solvent_bank_cannot_default(self):
        net = no_clearing()
        reason = refutes(net, [FREE, FREE, FREE, DEFAULT, FREE])
        self.assertIn("always solvent", reason)

    def test_input_pair(self):
        net = FinancialNetwork(["u", "x"], [0.0, 0.0], {("u", "x"): 1.0, ("x", "u"): 1.0})
        # u pays in full, so x covers its liability
        self.assertIsNotNone(refutes(net, [SOLVENT, DEFAULT]))
        self.assertIsNone(refutes(net, [SOLVENT, SOLVENT]))
        self.assertIsNone(refutes(net, [DEFAULT, DEFAULT]))
        self.assertIsNone(refutes(net, [FREE, FREE]))

    def test_propagated_bounds(self):
        # A receives a CDS on B; B defaulting with recovery 1/2 fixes A's payout
        net = FinancialNetwork(["A", "B", "s", "t"], [0.0, 1.0, 10.0, 1.0],
                               {("A", "t"): 2.0, ("B", "t"): 2.0}, cds={("s", "A", "B"): 2.0})
        lo, hi = PatternPropagator(net).propagate([DEFAULT, DEFAULT, SOLVENT, SOLVENT])
        self.assertAlmostEqual(lo[1], 0.5)
        self.assertAlmostEqual(hi[1], 0.5)
        self.assertAlmostEqual(lo[0], 0.5, places=6)
        self.assertAlmostEqual(hi[0], 0.5, places=6)

    def test_propagate_raises(self):
        net = FinancialNetwork(["u", "x"], [0.0, 0.0], {("u", "x"): 1.0, ("x", "u"): 1.0})
        with self.assertRaises(InfeasibleConstraintException):
            PatternPropagator(net).propagate([SOLVENT, DEFAULT])


if __name__ == '__main__':
    unittest.main()
