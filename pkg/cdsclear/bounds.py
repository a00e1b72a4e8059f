"""
Interval bound propagation over the constraints of one solvency pattern.

A pattern assigns every bank the solvent branch of the update map (r_i = 1, a_i >= l_i), the default
branch (r_i = a'_i / l_i < 1, a_i < l_i), or leaves it free. Propagation alternates a forward pass, which
encloses every term, asset and liability, with a backward pass that narrows recovery bounds from the
branch constraints. An empty interval proves that no clearing vector follows the pattern.

Bounds derived from proper intervals are relaxed by a small slack; bounds that collapse to a single
double are kept exact so that the branch test behaves like the exact comparison of the update map.
"""
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pyomo.contrib.fbbt.interval as interval
from pyomo.common.errors import InfeasibleConstraintException

from cdsclear import get_logger
from cdsclear.network import FinancialNetwork, Term

logger = get_logger(__name__)

FREE = -1
DEFAULT = 0
SOLVENT = 1

Interval = Tuple[float, float]

INF = float("inf")


class PatternPropagator:
    """
    Propagates recovery bounds of one network under solvency patterns; banks that are solvent at every
    recovery vector are fixed to 1 regardless of the pattern.
    """

    def __init__(self, net: FinancialNetwork, slack: float = 1e-9, max_rounds: int = 200,
                 min_progress: float = 1e-12):
        self.net = net
        self.slack = slack
        self.max_rounds = max_rounds
        self.min_progress = min_progress
        self.fixed = np.asarray(net.always_solvent, dtype=bool)
        self.lo = np.zeros(net.n)
        self.hi = np.ones(net.n)
        self._changed = False

    def propagate(self, status: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
        """
        :param status: per bank one of SOLVENT, DEFAULT or FREE
        :return: the narrowed (lo, hi) recovery bounds
        :raises InfeasibleConstraintException: when the pattern admits no clearing vector
        """
        status = np.asarray(status, dtype=int)
        self.lo = np.zeros(self.net.n)
        self.hi = np.ones(self.net.n)
        forced = self.fixed | (status == SOLVENT)
        self.lo[forced] = 1.0
        for i in np.flatnonzero(self.fixed & (status == DEFAULT)):
            raise InfeasibleConstraintException(f"bank '{self.net.banks[i]}' is always solvent")

        for round_idx in range(self.max_rounds):
            self._changed = False
            for i in range(self.net.n):
                if self.fixed[i]:
                    continue
                if status[i] == SOLVENT:
                    self._solvent(i)
                elif status[i] == DEFAULT:
                    self._default(i)
                else:
                    self._free(i)
            if not self._changed:
                logger.debug("Propagation settled after %d rounds", round_idx + 1)
                break
        return self.lo.copy(), self.hi.copy()

    # forward pass

    def _var(self, k: int) -> Interval:
        return self.lo[k], self.hi[k]

    def _factor(self, term: Term) -> Interval:
        """ Bounds of 1 - r_reference for CDS terms, 1 for debt terms. """
        if not term.is_cds:
            return 1.0, 1.0
        return interval.sub(1.0, 1.0, *self._var(term.reference))

    def _held_value(self, term: Term) -> Interval:
        lo, hi = interval.mul(*self._var(term.writer), *self._factor(term))
        return term.notional * lo, term.notional * hi

    def _written_value(self, term: Term) -> Interval:
        lo, hi = self._factor(term)
        return term.notional * lo, term.notional * hi

    def _totals(self, i: int):
        held = [self._held_value(t) for t in self.net.held_terms[i]]
        written = [self._written_value(t) for t in self.net.written_terms[i]]
        incoming = (sum(v[0] for v in held), sum(v[1] for v in held))
        liability = (sum(v[0] for v in written), sum(v[1] for v in written))
        return held, written, incoming, liability

    # branch constraints

    def _solvent(self, i: int):
        e = self.net.external[i]
        held, written, incoming, liability = self._totals(i)
        assets = interval.add(e, e, *incoming)
        if assets[1] < liability[0]:
            self._infeasible(i, "solvent bank cannot cover its liabilities")
        # incoming - liability >= -e
        self._backward_balance(i, held, written, -e, INF)

    def _default(self, i: int):
        net = self.net
        e = net.external[i]
        held, written, incoming, liability = self._totals(i)
        assets = interval.add(e, e, *incoming)
        if liability[1] <= 0.0:
            self._infeasible(i, "defaulting bank has no liabilities")
        if assets[0] >= liability[1]:
            self._infeasible(i, "defaulting bank covers its liabilities")
        after_costs = interval.add(net.alpha * e, net.alpha * e, net.beta * incoming[0], net.beta * incoming[1])
        quotient = self._quotient(after_costs, liability)
        self._tighten(i, quotient[0], min(quotient[1], 1.0))
        if self.lo[i] >= 1.0:
            self._infeasible(i, "defaulting bank recovers fully")
        # incoming - liability <= -e
        self._backward_balance(i, held, written, -INF, -e)

        # r_i * l_i = a'_i
        r_i = self._var(i)
        if r_i[0] > self.slack:
            implied_liability = interval.div(*after_costs, *r_i, feasibility_tol=self.slack)
            self._backward_sum(written, self.net.written_terms[i], False, *implied_liability)
        if net.beta > 0.0:
            implied = interval.mul(*self._var(i), *liability)
            implied_incoming = ((implied[0] - net.alpha * e) / net.beta, (implied[1] - net.alpha * e) / net.beta)
            self._backward_sum(held, self.net.held_terms[i], True, *implied_incoming)

    def _free(self, i: int):
        net = self.net
        e = net.external[i]
        _, _, incoming, liability = self._totals(i)
        assets = interval.add(e, e, *incoming)
        can_be_solvent = assets[1] >= liability[0]
        can_default = assets[0] < liability[1] and liability[1] > 0.0
        if not can_be_solvent and not can_default:
            self._infeasible(i, "neither branch of the update map applies")
        lo, hi = (1.0, 1.0) if can_be_solvent else (INF, -INF)
        if can_default:
            after_costs = interval.add(net.alpha * e, net.alpha * e,
                                       net.beta * incoming[0], net.beta * incoming[1])
            quotient = self._quotient(after_costs, liability)
            lo, hi = min(lo, quotient[0]), max(hi, min(quotient[1], 1.0))
        self._tighten(i, lo, hi)

    def _quotient(self, numerator: Interval, denominator: Interval) -> Interval:
        """ Bounds of a'/l for a positive liability l. """
        if numerator[1] <= 0.0:
            return 0.0, 0.0
        if denominator[0] > self.slack:
            return interval.div(*numerator, *denominator, feasibility_tol=self.slack)
        return max(numerator[0], 0.0) / denominator[1], INF

    # backward pass

    def _backward_balance(self, i: int, held: List[Interval], written: List[Interval], lb: float, ub: float):
        """ Narrows recovery bounds from lb <= sum(held) - sum(written) <= ub. """
        signed = [v for v in held] + [(-v[1], -v[0]) for v in written]
        terms = [(1, t) for t in self.net.held_terms[i]] + [(-1, t) for t in self.net.written_terms[i]]
        total_lo = sum(v[0] for v in signed)
        total_hi = sum(v[1] for v in signed)
        for (sign, term), (v_lo, v_hi) in zip(terms, signed):
            rest_lo, rest_hi = total_lo - v_lo, total_hi - v_hi
            bound_lo = lb - rest_hi if lb > -INF else -INF
            bound_hi = ub - rest_lo if ub < INF else INF
            if sign < 0:
                bound_lo, bound_hi = -bound_hi, -bound_lo
            self._narrow_term(term, sign > 0, bound_lo, bound_hi)

    def _backward_sum(self, values: List[Interval], terms: List[Term], held: bool, lb: float, ub: float):
        """ Narrows recovery bounds from lb <= sum(values) <= ub. """
        total_lo = sum(v[0] for v in values)
        total_hi = sum(v[1] for v in values)
        for term, (v_lo, v_hi) in zip(terms, values):
            self._narrow_term(term, held, lb - (total_hi - v_hi), ub - (total_lo - v_lo))

    def _narrow_term(self, term: Term, held: bool, lo: float, hi: float):
        """ Narrows the recovery bounds inside one term whose value must lie in [lo, hi]. """
        if lo == -INF and hi == INF:
            return
        product = (lo / term.notional, hi / term.notional) if term.notional > 0 else (-INF, INF)
        factor = self._factor(term)
        if held:
            writer = self._var(term.writer)
            if factor[0] > self.slack and product[0] > -INF and product[1] < INF:
                w = interval.div(*product, *factor, feasibility_tol=self.slack)
                self._tighten(term.writer, *w, exact=False)
            if not term.is_cds or writer[0] <= self.slack:
                return
            if product[0] > -INF and product[1] < INF:
                factor_bounds = interval.div(*product, *writer, feasibility_tol=self.slack)
            else:
                factor_bounds = (product[0] / writer[1] if product[0] > -INF else -INF,
                                 product[1] / writer[0] if product[1] < INF else INF)
        else:
            if not term.is_cds:
                return
            factor_bounds = product
        # factor = 1 - r_reference
        self._tighten(term.reference,
                      1.0 - factor_bounds[1] if factor_bounds[1] < INF else -INF,
                      1.0 - factor_bounds[0] if factor_bounds[0] > -INF else INF, exact=False)

    def _tighten(self, k: int, lo: float, hi: float, exact: bool = True):
        if not exact or lo != hi:
            lo -= self.slack
            hi += self.slack
        new_lo = max(self.lo[k], lo)
        new_hi = min(self.hi[k], hi)
        if new_lo > new_hi:
            self._infeasible(k, f"empty interval [{new_lo:.12g}, {new_hi:.12g}]")
        if new_lo > self.lo[k] + self.min_progress or new_hi < self.hi[k] - self.min_progress:
            self._changed = True
        if new_lo > self.lo[k] or new_hi < self.hi[k]:
            self.lo[k], self.hi[k] = new_lo, new_hi

    def _infeasible(self, k: int, reason: str):
        raise InfeasibleConstraintException(f"bank '{self.net.banks[k]}': {reason}")


def refutes(net: FinancialNetwork, status: Sequence[int], slack: float = 1e-9,
            max_rounds: int = 200) -> Optional[str]:
    """
    :return: the contradiction found for the pattern, or None when propagation leaves it open
    """
    try:
        PatternPropagator(net, slack=slack, max_rounds=max_rounds).propagate(status)
    except InfeasibleConstraintException as e:
        return str(e)
    return None
