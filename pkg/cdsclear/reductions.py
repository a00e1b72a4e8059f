"""
Compilers from PURE-CIRCUIT instances and polynomials to financial networks, and the decoding of
recovery vectors back to circuit assignments.
"""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from cdsclear import get_logger, NotApproximatelyClearingError, PolynomialDegreeError
from cdsclear import metrics
from cdsclear.circuit import PureCircuit, TriValue, DecodingParams, NAND, dec
from cdsclear.constants import ReductionConstants
from cdsclear.gadgets import (BankNamer, GadgetParams, NetworkFragment, SOURCE, SINK, constant, difference,
                              discontinuity, drive, infeasibility, input_pair, nand, product, purify, sum_gadget)
from cdsclear.network import FinancialNetwork, eps_violations, is_clearing, update_F
from cdsclear.polynomial import SparsePolynomial, MAX_DEGREE, split_poly
from cdsclear.solver import SolveReport, enumerate_patterns, forward_eval

logger = get_logger(__name__)

KIND_CIRCUIT = "circuit"
KIND_POLY = "poly"
KIND_HASCLEARING = "hasclearing"
KIND_CANSURVIVE = "cansurvive"

TAIL_SCOPE = "tail"


@dataclass
class CompiledArtifact:
    """
    A compiled network with the map from circuit wires (or variables and named stages) to banks.
    """
    network: FinancialNetwork
    wire_map: Dict[str, str]
    kind: str
    alpha: float = 1.0
    squaring_depth: Optional[int] = None
    circuit: Optional[PureCircuit] = None
    polynomial: Optional[SparsePolynomial] = None

    def bank_of(self, wire: str) -> str:
        return self.wire_map[wire]

    @property
    def variable_banks(self) -> List[str]:
        if self.polynomial is None:
            return []
        return [self.wire_map[variable_handle(i)] for i in range(self.polynomial.var_count)]

    def driven(self, x: Sequence[float]) -> Dict[str, float]:
        """ Driver map pinning the input gadgets to the point x. """
        banks = self.variable_banks
        if len(x) != len(banks):
            raise ValueError(f"Expected a point with {len(banks)} coordinates, got {len(x)}")
        return {bank: float(value) for bank, value in zip(banks, x)}


def variable_handle(i: int) -> str:
    return f"x{i}"


# circuits

def compile_circuit(c: PureCircuit, constants: ReductionConstants = None) -> CompiledArtifact:
    """
    Replaces every gate by its gadget; a wire is realized by the output bank of the gate that writes it,
    or by an input gadget when no gate writes it.
    """
    constants = constants or ReductionConstants.default()
    params = GadgetParams(gamma=constants.gamma, eps=constants.eps, phi=constants.phi)
    namer = BankNamer()
    frag = NetworkFragment(KIND_CIRCUIT, namer)

    wire_bank: Dict[str, str] = {}
    gadgets: List[Tuple[NetworkFragment, Tuple[str, ...]]] = []
    for gate in c.gates:
        if gate.kind == NAND:
            gadget = nand(params, namer)
            wire_bank[gate.outputs[0]] = gadget.outputs["w"]
        else:
            gadget = purify(params, namer)
            wire_bank[gate.outputs[0]] = gadget.outputs["v"]
            wire_bank[gate.outputs[1]] = gadget.outputs["w"]
        gadgets.append((gadget, gate.inputs))
    for wire in c.free_wires:
        wire_bank[wire] = frag.absorb(input_pair(namer))["u"]

    for gadget, inputs in gadgets:
        handles = ("u", "v") if len(inputs) == 2 else ("u",)
        frag.absorb(gadget, **{handle: wire_bank[wire] for handle, wire in zip(handles, inputs)})

    net = frag.finalize(alpha=1.0, beta=1.0)
    logger.info("Compiled %s into %s", c, net)
    return CompiledArtifact(net, {wire: wire_bank[wire] for wire in c.wires}, KIND_CIRCUIT, circuit=c)


def extract_solution(art: CompiledArtifact, r, constants: ReductionConstants = None) -> Dict[str, TriValue]:
    """
    Decodes every wire from the recovery rate of its bank.

    :raises NotApproximatelyClearingError: when r is not eps-approximately clearing
    """
    constants = constants or ReductionConstants.default()
    if art.kind != KIND_CIRCUIT:
        raise ValueError(f"Can only decode circuit artifacts, got '{art.kind}'")
    violations = eps_violations(art.network, r, constants.eps)
    if violations:
        raise NotApproximatelyClearingError("; ".join(violations[:5]))
    params = DecodingParams(gamma=constants.gamma, delta=constants.delta)
    r = np.asarray(r, dtype=float)
    return {wire: dec(float(r[art.network.index[bank]]), params) for wire, bank in art.wire_map.items()}


# polynomials

def squaring_depth(alpha: float) -> int:
    """ Smallest k with ((1 + alpha) / 2) ** (2 ** k) <= 1/4. """
    if not 0.0 <= alpha < 1.0:
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    value, k = (1.0 + alpha) / 2.0, 0
    while value > 0.25:
        value, k = value * value, k + 1
    return k


def _chain(frag: NetworkFragment, banks: Sequence[str]) -> str:
    """ Left-associated sum gadgets over `banks`; a constant zero for an empty sequence. """
    if not banks:
        return frag.absorb(constant(0.0, frag.namer))["v"]
    total = banks[0]
    for bank in banks[1:]:
        total = frag.absorb(sum_gadget(frag.namer), u=total, v=bank)["w"]
    return total


def _monomial(frag: NetworkFragment, exponents: Sequence[int], coefficient: float, variables: Sequence[str]) -> str:
    value = frag.absorb(constant(coefficient, frag.namer))["v"]
    for variable, e in zip(variables, exponents):
        for _ in range(e):
            value = frag.absorb(product(frag.namer), u=value, v=variable)["w"]
    return value


def _poly_fragment(p: SparsePolynomial, namer: BankNamer = None) -> Tuple[NetworkFragment, Dict[str, str]]:
    """
    Input gadgets for the variables, one constant-times-products chain per monomial, sums for p_plus and
    p_minus, and |p| as the sum of the two truncated differences.
    """
    if p.degree > MAX_DEGREE:
        raise PolynomialDegreeError(f"Polynomial degree {p.degree} exceeds {MAX_DEGREE}")
    if not p.is_normalized():
        raise ValueError("Polynomial must be normalized (|coefficient| <= 1/s) before compilation")
    frag = NetworkFragment(KIND_POLY, namer)
    handles: Dict[str, str] = {}
    variables = []
    for i in range(p.var_count):
        bank = frag.absorb(input_pair(frag.namer))["u"]
        handles[variable_handle(i)] = bank
        variables.append(bank)
    plus, minus = split_poly(p)
    plus_bank = _chain(frag, [_monomial(frag, e, c, variables) for e, c in plus.monomials])
    minus_bank = _chain(frag, [_monomial(frag, e, c, variables) for e, c in minus.monomials])
    above = frag.absorb(difference(frag.namer), u=minus_bank, v=plus_bank)["w"]
    below = frag.absorb(difference(frag.namer), u=plus_bank, v=minus_bank)["w"]
    handles.update(plus=plus_bank, minus=minus_bank)
    handles["o"] = frag.absorb(sum_gadget(frag.namer), u=above, v=below)["w"]
    return frag, handles


def build_poly_network(p: SparsePolynomial) -> CompiledArtifact:
    """ Network whose output bank o has r_o = |p(x)| when the input gadgets carry x. """
    frag, handles = _poly_fragment(p)
    net = frag.finalize(alpha=1.0, beta=1.0)
    logger.info("Compiled polynomial of degree %d with %d monomials into %s", p.degree, p.size, net)
    return CompiledArtifact(net, handles, KIND_POLY, polynomial=p)


def _hasclearing_prefix(p: SparsePolynomial, alpha: float) -> Tuple[NetworkFragment, Dict[str, str], int]:
    frag, handles = _poly_fragment(p)
    value = frag.absorb(discontinuity(frag.namer), u=handles["o"])["v"]
    handles["discontinuity"] = value
    k = squaring_depth(alpha)
    for _ in range(k):
        value = frag.absorb(product(frag.namer), u=value, v=value)["w"]
    handles["squared"] = value
    return frag, handles, k


def compile_hasclearing(p: SparsePolynomial, alpha: float) -> CompiledArtifact:
    """
    |p(x)| through the discontinuity gadget, k squarings and the infeasibility gadget: the network has a
    clearing vector iff p has a root in the unit cube.
    """
    frag, handles, k = _hasclearing_prefix(p, alpha)
    tail = infeasibility(alpha, namer=BankNamer(TAIL_SCOPE))
    handles.update({f"tail.{name}": bank for name, bank in frag.absorb(tail, u=handles["squared"]).items()})
    net = frag.finalize(alpha=alpha, beta=1.0)
    logger.info("Compiled HASCLEARING instance (alpha=%s, k=%d) into %s", alpha, k, net)
    return CompiledArtifact(net, handles, KIND_HASCLEARING, alpha=alpha, squaring_depth=k, polynomial=p)


def compile_cansurvive(p: SparsePolynomial) -> CompiledArtifact:
    """ Target bank b holds a CDS on the output bank o, so r_b = 1 iff p(x) = 0. """
    frag, handles = _poly_fragment(p)
    target = frag.add_bank("b")
    frag.add_cds(SOURCE, target, handles["o"], 1.0)
    frag.add_debt(target, SINK, 1.0)
    handles["b"] = target
    net = frag.finalize(alpha=1.0, beta=1.0)
    logger.info("Compiled CANSURVIVE instance into %s", net)
    return CompiledArtifact(net, handles, KIND_CANSURVIVE, polynomial=p)


def evaluate_at(art: CompiledArtifact, x: Sequence[float]) -> np.ndarray:
    """ The unique clearing vector of a feed-forward polynomial artifact with its inputs pinned to x. """
    if art.kind not in (KIND_POLY, KIND_CANSURVIVE):
        raise ValueError(f"Cannot forward-evaluate '{art.kind}' artifacts")
    return forward_eval(art.network, art.driven(x))


def probe_hasclearing(art: CompiledArtifact, x: Sequence[float], **solver_kwargs) -> SolveReport:
    """
    Decides whether the HASCLEARING network has a clearing vector with its input gadgets at x. The
    feed-forward prefix is evaluated directly and the infeasibility gadget is decided by pattern
    enumeration on the value entering it; a found vector is checked on the full network.
    """
    if art.kind != KIND_HASCLEARING:
        raise ValueError(f"Expected a '{KIND_HASCLEARING}' artifact, got '{art.kind}'")
    prefix, handles, _ = _hasclearing_prefix(art.polynomial, art.alpha)
    prefix_net = prefix.finalize(alpha=art.alpha, beta=1.0)
    prefix_r = forward_eval(prefix_net, art.driven(x))
    squared = float(prefix_r[prefix_net.index[handles["squared"]]])

    tail = drive(infeasibility(art.alpha, namer=BankNamer(TAIL_SCOPE)), "u", squared)
    tail_net = tail.finalize(alpha=art.alpha, beta=1.0)
    tail_report = enumerate_patterns(tail_net, **solver_kwargs)
    details = {"x": [float(v) for v in x], "squared": squared}
    if not tail_report.found:
        return SolveReport(tail_report.status, art.network.banks, method="probe", details=details,
                           pattern_verdicts=tail_report.pattern_verdicts, iterations=tail_report.iterations)

    values = {bank: float(prefix_r[i]) for i, bank in enumerate(prefix_net.banks)}
    values.update({bank: float(tail_report.r[i]) for i, bank in enumerate(tail_net.banks)
                   if bank not in (SOURCE, SINK)})
    r = np.array([values[bank] for bank in art.network.banks])
    if not is_clearing(art.network, r):
        return SolveReport(metrics.STATUS_UNDECIDED, art.network.banks, method="probe", details=details)
    residual = float(np.max(np.abs(r - update_F(art.network, r))))
    return SolveReport(metrics.STATUS_FOUND, art.network.banks, r=r, residual=residual, method="probe",
                       details=details, pattern_verdicts=tail_report.pattern_verdicts)

