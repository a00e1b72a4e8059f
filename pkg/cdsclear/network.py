"""
Financial networks of debt contracts and credit default swaps, and the clearing arithmetic on them.

A bank i pays the fraction r_i (its recovery rate) of every liability it has written. The liability of
writer i towards holder j is the debt notional plus the CDS payouts (1 - r_k) * c^k_{i,j}. A recovery
vector is clearing when it is a fixed point of the update map F.
"""
from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import math
import numbers

import networkx as nx
import numpy as np

from cdsclear import get_logger, NetworkValidationError, DegenerateNetworkError, DefaultCostsPresentError

logger = get_logger(__name__)

DebtKey = Tuple[str, str]
CdsKey = Tuple[str, str, str]
RecoveryVector = np.ndarray

TINY_LIABILITY = 1e-12
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class Term:
    """
    One contract seen from one of its banks: notional, the writer index and the
    reference index (-1 for debt contracts).
    """
    notional: float
    writer: int
    reference: int = -1

    @property
    def is_cds(self) -> bool:
        return self.reference >= 0


class FinancialNetwork:
    """
    An immutable financial network. Banks are indexed in declaration order, which is also the index
    order of every recovery vector evaluated on it.
    """

    def __init__(self, banks: Sequence[str],
                 external_assets: Union[Mapping[str, float], Sequence[float]],
                 debts: Mapping[DebtKey, float] = None,
                 cds: Mapping[CdsKey, float] = None,
                 alpha: float = 1.0, beta: float = 1.0):
        self.banks: Tuple[str, ...] = tuple(banks)
        self.index: Dict[str, int] = {}
        for position, bank in enumerate(self.banks):
            if not isinstance(bank, str) or not bank:
                raise NetworkValidationError(f"bank identifiers must be non-empty strings, got {bank!r}",
                                             f"banks[{position}]")
            if bank in self.index:
                raise NetworkValidationError(f"duplicate bank '{bank}'", f"banks[{position}]")
            self.index[bank] = position

        if isinstance(external_assets, Mapping):
            unknown = set(external_assets) - set(self.index)
            if unknown:
                raise NetworkValidationError(f"unknown bank(s) {sorted(unknown)}", "external_assets")
            values = [external_assets.get(bank, 0.0) for bank in self.banks]
        else:
            values = list(external_assets)
            if len(values) != len(self.banks):
                raise NetworkValidationError(f"expected {len(self.banks)} values, got {len(values)}",
                                             "external_assets")
        for bank, value in zip(self.banks, values):
            self._check_amount(value, f"external_assets[{bank}]")
        self.external = np.array(values, dtype=float)
        self.external.flags.writeable = False

        for name, value in (("alpha", alpha), ("beta", beta)):
            if not isinstance(value, numbers.Real) or math.isnan(value) or not 0.0 <= value <= 1.0:
                raise NetworkValidationError(f"must lie in [0, 1], got {value}", name)
        self.alpha = float(alpha)
        self.beta = float(beta)

        debts = dict(debts or {})
        cds = dict(cds or {})
        for (writer, holder), notional in debts.items():
            where = f"debts[{writer}->{holder}]"
            self._check_bank(writer, where)
            self._check_bank(holder, where)
            if writer == holder:
                raise NetworkValidationError("a bank cannot owe itself", where)
            self._check_amount(notional, where)
        for (writer, holder, reference), notional in cds.items():
            where = f"cds[{writer}->{holder}|{reference}]"
            for bank in (writer, holder, reference):
                self._check_bank(bank, where)
            if writer == holder or writer == reference:
                raise NetworkValidationError("the writer of a CDS cannot be its holder or its reference", where)
            self._check_amount(notional, where)
        self.debts: Mapping[DebtKey, float] = MappingProxyType({k: float(v) for k, v in debts.items()})
        self.cds: Mapping[CdsKey, float] = MappingProxyType({k: float(v) for k, v in cds.items()})

        idx = self.index
        self._debt_writer = np.array([idx[w] for w, _ in self.debts], dtype=np.intp)
        self._debt_holder = np.array([idx[h] for _, h in self.debts], dtype=np.intp)
        self._debt_notional = np.array(list(self.debts.values()), dtype=float)
        self._cds_writer = np.array([idx[w] for w, _, _ in self.cds], dtype=np.intp)
        self._cds_holder = np.array([idx[h] for _, h, _ in self.cds], dtype=np.intp)
        self._cds_ref = np.array([idx[k] for _, _, k in self.cds], dtype=np.intp)
        self._cds_notional = np.array(list(self.cds.values()), dtype=float)

    def _check_bank(self, bank: str, where: str):
        if bank not in self.index:
            raise NetworkValidationError(f"unknown bank '{bank}'", where)

    @staticmethod
    def _check_amount(value, where: str):
        if not isinstance(value, numbers.Real) or isinstance(value, bool) or not math.isfinite(value):
            raise NetworkValidationError(f"must be a finite number, got {value!r}", where)
        if value < 0:
            raise NetworkValidationError(f"must be nonnegative, got {value}", where)

    @property
    def n(self) -> int:
        return len(self.banks)

    def __repr__(self):
        return (f"FinancialNetwork(n={self.n}, debts={len(self.debts)}, cds={len(self.cds)}, "
                f"alpha={self.alpha}, beta={self.beta})")

    def __eq__(self, other):
        if not isinstance(other, FinancialNetwork):
            return False
        return (self.banks == other.banks and np.array_equal(self.external, other.external)
                and dict(self.debts) == dict(other.debts) and dict(self.cds) == dict(other.cds)
                and self.alpha == other.alpha and self.beta == other.beta)

    def __hash__(self):
        return hash((self.banks, len(self.debts), len(self.cds), self.alpha, self.beta))

    def with_default_costs(self, alpha: float, beta: float = 1.0) -> "FinancialNetwork":
        return FinancialNetwork(self.banks, self.external, self.debts, self.cds, alpha=alpha, beta=beta)

    def external_of(self, bank: str) -> float:
        return float(self.external[self.index[bank]])

    @cached_property
    def held_terms(self) -> List[List[Term]]:
        """ Contracts held by each bank: the bank receives r_writer times the liability. """
        held: List[List[Term]] = [[] for _ in self.banks]
        for (writer, holder), notional in self.debts.items():
            held[self.index[holder]].append(Term(notional, self.index[writer]))
        for (writer, holder, reference), notional in self.cds.items():
            held[self.index[holder]].append(Term(notional, self.index[writer], self.index[reference]))
        return held

    @cached_property
    def written_terms(self) -> List[List[Term]]:
        """ Contracts written by each bank: these make up its total liability. """
        written: List[List[Term]] = [[] for _ in self.banks]
        for (writer, _), notional in self.debts.items():
            written[self.index[writer]].append(Term(notional, self.index[writer]))
        for (writer, _, reference), notional in self.cds.items():
            written[self.index[writer]].append(Term(notional, self.index[writer], self.index[reference]))
        return written

    @cached_property
    def max_liabilities(self) -> np.ndarray:
        """ Liability of every bank when all reference banks recover nothing. """
        return (np.bincount(self._debt_writer, weights=self._debt_notional, minlength=self.n)
                + np.bincount(self._cds_writer, weights=self._cds_notional, minlength=self.n))

    @cached_property
    def always_solvent(self) -> np.ndarray:
        """
        Mask of banks whose external assets cover their largest possible liability;
        these banks have r_i = 1 at every recovery vector (source and sink banks are of this kind).
        """
        return self.external >= self.max_liabilities

    def dependency_graph(self, skip: Optional[Sequence[int]] = None) -> nx.DiGraph:
        """
        Directed graph with an edge k -> i whenever the assets or liabilities of bank i depend on r_k.
        Banks in `skip` have known recovery and contribute no edges.
        """
        skipped = set(skip or ())
        graph = nx.DiGraph()
        graph.add_nodes_from(bank for i, bank in enumerate(self.banks) if i not in skipped)
        for i, bank in enumerate(self.banks):
            if i in skipped:
                continue
            sources = set()
            for term in self.held_terms[i]:
                sources.add(term.writer)
                if term.is_cds:
                    sources.add(term.reference)
            for term in self.written_terms[i]:
                if term.is_cds:
                    sources.add(term.reference)
            for k in sources - skipped:
                graph.add_edge(self.banks[k], bank)
        return graph


@dataclass(frozen=True)
class LiabilitySnapshot:
    """
    All money amounts of a network evaluated at one recovery vector.
    """
    pair_liabilities: Mapping[DebtKey, float]
    liabilities: np.ndarray
    incoming: np.ndarray
    assets: np.ndarray
    assets_after_costs: np.ndarray


def truncate(x):
    """ min(1, max(0, x)), componentwise for arrays. """
    if np.isscalar(x):
        return min(1.0, max(0.0, float(x)))
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def as_recovery(net: FinancialNetwork, r) -> RecoveryVector:
    """
    Builds a recovery vector indexed like `net`. Accepts a sequence in bank order or a mapping bank -> value.
    Components are clamped into [0, 1].
    """
    if isinstance(r, Mapping):
        unknown = set(r) - set(net.index)
        if unknown:
            raise ValueError(f"Recovery values for unknown bank(s): {sorted(unknown)}")
        missing = [bank for bank in net.banks if bank not in r]
        if missing:
            raise ValueError(f"Recovery values missing for bank(s): {missing}")
        r = [r[bank] for bank in net.banks]
    values = np.asarray(r, dtype=float)
    _check_shape(net, values)
    return truncate(values)


def _check_shape(net: FinancialNetwork, r: np.ndarray):
    if r.shape != (net.n,):
        raise ValueError(f"Recovery vector has shape {r.shape}, network has {net.n} banks")
    if np.isnan(r).any():
        raise ValueError("Recovery vector contains NaN")


def evaluate(net: FinancialNetwork, r: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Vectorized evaluation of (liabilities, incoming payments, assets, assets after default costs) at r.
    """
    n = net.n
    cds_liability = net._cds_notional * (1.0 - r[net._cds_ref])
    liabilities = (np.bincount(net._debt_writer, weights=net._debt_notional, minlength=n)
                   + np.bincount(net._cds_writer, weights=cds_liability, minlength=n))
    incoming = (np.bincount(net._debt_holder, weights=r[net._debt_writer] * net._debt_notional, minlength=n)
                + np.bincount(net._cds_holder, weights=r[net._cds_writer] * cds_liability, minlength=n))
    assets = net.external + incoming
    assets_after_costs = net.alpha * net.external + net.beta * incoming
    return liabilities, incoming, assets, assets_after_costs


def snapshot(net: FinancialNetwork, r) -> LiabilitySnapshot:
    r = np.asarray(r, dtype=float)
    _check_shape(net, r)
    liabilities, incoming, assets, assets_after_costs = evaluate(net, r)
    pairs: Dict[DebtKey, float] = {}
    for (writer, holder), notional in net.debts.items():
        pairs[(writer, holder)] = pairs.get((writer, holder), 0.0) + notional
    for (writer, holder, reference), notional in net.cds.items():
        payout = (1.0 - r[net.index[reference]]) * notional
        pairs[(writer, holder)] = pairs.get((writer, holder), 0.0) + payout
    return LiabilitySnapshot(MappingProxyType(pairs), liabilities, incoming, assets, assets_after_costs)


def update_F(net: FinancialNetwork, r) -> RecoveryVector:
    """
    F(r)_i = 1 when a_i(r) >= l_i(r) (compared exactly), otherwise a'_i(r) / l_i(r).
    """
    r = np.asarray(r, dtype=float)
    _check_shape(net, r)
    liabilities, _, assets, assets_after_costs = evaluate(net, r)
    result = np.ones(net.n)
    in_default = assets < liabilities
    if in_default.any():
        tiny = in_default & (liabilities < TINY_LIABILITY)
        for i in np.flatnonzero(tiny):
            logger.warning("Bank '%s' defaults on a liability of %g", net.banks[i], liabilities[i])
        result[in_default] = assets_after_costs[in_default] / liabilities[in_default]
    return result


def _raise_if_degenerate_at(net: FinancialNetwork, assets: np.ndarray, liabilities: np.ndarray):
    both_zero = (assets == 0.0) & (liabilities == 0.0)
    if both_zero.any():
        raise DegenerateNetworkError(net.banks[int(np.flatnonzero(both_zero)[0])])


def map_f(net: FinancialNetwork, r) -> RecoveryVector:
    """ f(r)_i = a_i(r) / max(a_i(r), l_i(r)). """
    r = np.asarray(r, dtype=float)
    _check_shape(net, r)
    liabilities, _, assets, _ = evaluate(net, r)
    _raise_if_degenerate_at(net, assets, liabilities)
    return assets / np.maximum(assets, liabilities)


def degenerate_banks(net: FinancialNetwork) -> List[str]:
    """ Banks without external assets that write no debt with a positive notional. """
    writes_debt = np.bincount(net._debt_writer, weights=(net._debt_notional > 0).astype(float),
                              minlength=net.n) > 0
    return [bank for i, bank in enumerate(net.banks) if not (net.external[i] > 0 or writes_debt[i])]


def is_nondegenerate(net: FinancialNetwork) -> bool:
    return not degenerate_banks(net)


def residual(net: FinancialNetwork, r) -> float:
    """ Sup-norm distance between F(r) and r. """
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        return 0.0
    return float(np.max(np.abs(update_F(net, r) - r)))


def is_clearing(net: FinancialNetwork, r, tol: float = DEFAULT_TOL) -> bool:
    r = np.asarray(r, dtype=float)
    _check_shape(net, r)
    if ((r < 0.0) | (r > 1.0)).any():
        return False
    return residual(net, r) <= tol


def require_approximation_setting(net: FinancialNetwork):
    if net.alpha != 1.0 or net.beta != 1.0:
        raise DefaultCostsPresentError(net.alpha, net.beta)
    degenerate = degenerate_banks(net)
    if degenerate:
        raise DegenerateNetworkError(degenerate[0])


def eps_violations(net: FinancialNetwork, r, eps: float) -> List[str]:
    """
    Human-readable reasons why r is not eps-approximately clearing; empty when it is.
    """
    r = np.asarray(r, dtype=float)
    _check_shape(net, r)
    reasons = []
    if ((r < 0.0) | (r > 1.0)).any():
        reasons.append("components outside [0, 1]")
        return reasons
    liabilities, _, assets, _ = evaluate(net, r)
    _raise_if_degenerate_at(net, assets, liabilities)
    gap = np.abs(assets / np.maximum(assets, liabilities) - r)
    for i in np.flatnonzero(gap > eps):
        reasons.append(f"|f(r) - r| = {gap[i]:.6g} > {eps:.6g} at bank '{net.banks[i]}'")
    solvent = assets >= (1.0 + eps) * liabilities
    for i in np.flatnonzero(solvent & (r < 1.0)):
        reasons.append(f"bank '{net.banks[i]}' has a >= (1+eps) l but r = {r[i]:.6g} < 1")
    return reasons


def is_eps_approx_clearing(net: FinancialNetwork, r, eps: float) -> bool:
    if eps <= 0:
        raise ValueError(f"eps must be positive, got {eps}")
    require_approximation_setting(net)
    return not eps_violations(net, r, eps)
